#include "dvnee/local_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dvnee {

namespace {

const Tensor2& distance_table() {
  static const Tensor2 eye = [] {
    Tensor2 t(kDistanceBuckets, kDistanceBuckets);
    for (std::size_t i = 0; i < kDistanceBuckets; ++i) t(i, i) = 1.0;
    return t;
  }();
  return eye;
}

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

std::span<const std::uint32_t> view(const std::vector<std::uint32_t>& v) { return {v.data(), v.size()}; }

}  // namespace

LocalModelParams LocalModelParams::create(const TypeInventory& types, std::size_t d_tok, const LocalDims& dims,
                                          std::mt19937_64& rng) {
  const std::size_t n_evt = types.event_types.size();
  const std::size_t n_ent = types.entity_types.size();
  const std::size_t n_role = types.argument_roles.size();
  const std::size_t h = dims.hidden;
  const std::size_t dw = dims.d_width;
  LocalModelParams p;
  p.width = Tensor2(kWidthBuckets, dw);
  normal_fill(p.width, rng, 0.1);
  p.trig = MlpParams::create({d_tok, h, n_evt}, Activation::Identity, rng);
  p.ent = FactoredMlpParams::create({d_tok, d_tok, dw}, {h, 1 + n_ent + kLevels}, Activation::Identity, rng);
  p.arg = FactoredMlpParams::create({d_tok, n_evt, d_tok, d_tok, dw}, {h, 1 + n_role}, Activation::Identity, rng);
  p.evt_coref = FactoredMlpParams::create({d_tok, n_evt, d_tok, n_evt, kDistanceBuckets}, {h, 1},
                                          Activation::Identity, rng);
  p.ent_coref = FactoredMlpParams::create({d_tok, d_tok, dw, d_tok, d_tok, dw, kDistanceBuckets}, {h, 1},
                                          Activation::Identity, rng);
  return p;
}

LocalModelParams LocalModelParams::zeros_like() const {
  LocalModelParams z;
  z.width = Tensor2(width.rows(), width.cols());
  z.trig = trig.zeros_like();
  z.ent = ent.zeros_like();
  z.arg = arg.zeros_like();
  z.evt_coref = evt_coref.zeros_like();
  z.ent_coref = ent_coref.zeros_like();
  return z;
}

void LocalModelParams::collect(const std::string& prefix, NamedTensors& out) {
  out.emplace_back(prefix + ".width", &width);
  dvnee::collect(trig, prefix + ".trig", out);
  dvnee::collect(ent, prefix + ".ent", out);
  dvnee::collect(arg, prefix + ".arg", out);
  dvnee::collect(evt_coref, prefix + ".evt_coref", out);
  dvnee::collect(ent_coref, prefix + ".ent_coref", out);
}

Tensor2 classify_triggers(const LocalModelParams& p, const Tensor2& features) {
  Tensor2 y = mlp_apply(p.trig, features);
  softmax_rows(y);
  return y;
}

namespace {

struct SpanRows {
  std::vector<std::uint32_t> head, tail, width;
};

SpanRows span_rows(std::span<const Span> spans) {
  SpanRows r;
  for (const auto& s : spans) {
    r.head.push_back(u32(s.start));
    r.tail.push_back(u32(s.end));
    r.width.push_back(u32(width_bucket(s.width())));
  }
  return r;
}

std::vector<BlockInput> pair_blocks(const LocalModelParams& p, PairTask task, const PairTables& t,
                                    const PairBatch& b) {
  const Tensor2* e = t.features;
  const Tensor2* y = t.trigger_dist;
  const Tensor2* w = &p.width;
  const Tensor2* d = &distance_table();
  switch (task) {
    case PairTask::Argument:
      return {{e, view(b.a_head)}, {y, view(b.a_head)}, {e, view(b.b_head)}, {e, view(b.b_tail)}, {w, view(b.b_width)}};
    case PairTask::EventCoref:
      return {{e, view(b.a_head)}, {y, view(b.a_head)}, {e, view(b.b_head)}, {y, view(b.b_head)}, {d, view(b.dist)}};
    case PairTask::EntityCoref:
      return {{e, view(b.a_head)}, {e, view(b.a_tail)}, {w, view(b.a_width)}, {e, view(b.b_head)},
              {e, view(b.b_tail)}, {w, view(b.b_width)}, {d, view(b.dist)}};
  }
  throw std::logic_error("unknown pair task");
}

const FactoredMlpParams& pair_net(const LocalModelParams& p, PairTask task) {
  switch (task) {
    case PairTask::Argument: return p.arg;
    case PairTask::EventCoref: return p.evt_coref;
    case PairTask::EntityCoref: return p.ent_coref;
  }
  throw std::logic_error("unknown pair task");
}

FactoredMlpParams& pair_net(LocalModelParams& p, PairTask task) {
  return const_cast<FactoredMlpParams&>(pair_net(static_cast<const LocalModelParams&>(p), task));
}

// Gradient targets matching pair_blocks: features, the constant trigger
// distribution (none), width table, distance table (none).
std::vector<Tensor2*> pair_grad_tables(PairTask task, Tensor2* g_feat, Tensor2* g_width) {
  switch (task) {
    case PairTask::Argument: return {g_feat, nullptr, g_feat, g_feat, g_width};
    case PairTask::EventCoref: return {g_feat, nullptr, g_feat, nullptr, nullptr};
    case PairTask::EntityCoref: return {g_feat, g_feat, g_width, g_feat, g_feat, g_width, nullptr};
  }
  throw std::logic_error("unknown pair task");
}

}  // namespace

FactoredMlpCache score_spans(const LocalModelParams& p, const Tensor2& features, std::span<const Span> spans) {
  const auto rows = span_rows(spans);
  const BlockInput blocks[] = {{&features, view(rows.head)}, {&features, view(rows.tail)}, {&p.width, view(rows.width)}};
  // factored_forward copies the index vectors into the cache.
  return factored_forward(p.ent, blocks);
}

FactoredMlpCache score_pairs(const LocalModelParams& p, PairTask task, const PairTables& tables,
                             const PairBatch& batch) {
  const auto blocks = pair_blocks(p, task, tables, batch);
  return factored_forward(pair_net(p, task), blocks);
}

std::vector<std::optional<std::size_t>> predict_antecedents(const std::vector<std::vector<double>>& scores,
                                                            double null_score) {
  std::vector<std::optional<std::size_t>> links(scores.size());
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (scores[m].size() > m) throw std::invalid_argument("predict_antecedents: mention has forward candidates");
    double best = null_score;
    // Walking nearest-first with a strict comparison keeps ties on null and
    // then on the nearest antecedent.
    for (std::size_t k = scores[m].size(); k-- > 0;) {
      if (scores[m][k] > best) {
        best = scores[m][k];
        links[m] = k;
      }
    }
  }
  return links;
}

// ---------------------------------------------------------------------------

double softmax_cross_entropy(const Tensor2& logits, std::span<const std::uint32_t> labels, std::size_t col_begin,
                             std::size_t col_end, Tensor2* grad, std::span<const std::uint32_t> rows) {
  const std::size_t n = rows.empty() ? logits.rows() : rows.size();
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy: label count mismatch");
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  std::vector<double> prob(col_end - col_begin);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rows.empty() ? i : rows[i];
    auto z = logits.row(r).subspan(col_begin, col_end - col_begin);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) sum += prob[c] = std::exp(z[c] - mx);
    const std::size_t label = labels[i];
    loss += -(z[label] - mx - std::log(sum));
    if (grad) {
      auto g = grad->row(r).subspan(col_begin, z.size());
      for (std::size_t c = 0; c < z.size(); ++c) g[c] += (prob[c] / sum - (c == label ? 1.0 : 0.0)) * inv;
    }
  }
  return loss * inv;
}

double marginal_log_likelihood(std::span<const double> scores, const CorefProblem& prob, std::span<double> grad) {
  const std::size_t m_count = prob.mentions();
  if (m_count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(m_count);
  double loss = 0.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    const std::size_t lo = prob.offsets[m], hi = prob.offsets[m + 1];
    bool any_gold = false;
    double mx = 0.0;  // null score
    for (std::size_t k = lo; k < hi; ++k) {
      mx = std::max(mx, scores[k]);
      any_gold = any_gold || prob.gold[k];
    }
    double all = std::exp(-mx), good = any_gold ? 0.0 : all;
    for (std::size_t k = lo; k < hi; ++k) {
      const double e = std::exp(scores[k] - mx);
      all += e;
      if (prob.gold[k]) good += e;
    }
    loss += std::log(all) - std::log(good);
    if (!grad.empty()) {
      for (std::size_t k = lo; k < hi; ++k) {
        const double e = std::exp(scores[k] - mx);
        grad[k] += (e / all - (prob.gold[k] ? e / good : 0.0)) * inv;
      }
    }
  }
  return loss * inv;
}

// ---------------------------------------------------------------------------

namespace {

void add_coref_pairs(CorefProblem& prob, const std::vector<Span>& mentions, const std::vector<std::size_t>& cluster_of,
                     std::size_t max_antecedents, bool triggers) {
  for (std::size_t m = 0; m < mentions.size(); ++m) {
    const std::size_t first = m > max_antecedents ? m - max_antecedents : 0;
    for (std::size_t k = first; k < m; ++k) {
      auto& b = prob.pairs;
      b.a_head.push_back(u32(mentions[m].start));
      b.b_head.push_back(u32(mentions[k].start));
      if (!triggers) {
        b.a_tail.push_back(u32(mentions[m].end));
        b.a_width.push_back(u32(width_bucket(mentions[m].width())));
        b.b_tail.push_back(u32(mentions[k].end));
        b.b_width.push_back(u32(width_bucket(mentions[k].width())));
      }
      b.dist.push_back(u32(distance_bucket(mentions[m].sentence - mentions[k].sentence)));
      prob.gold.push_back(cluster_of[m] == cluster_of[k]);
    }
    prob.offsets.push_back(prob.pairs.size());
  }
}

}  // namespace

ChunkExample make_example(const Document& doc, const Chunk& chunk, const FeatureProvider& provider,
                          const TypeInventory& types, std::size_t max_antecedents) {
  if (!doc.gold) throw std::invalid_argument("make_example: document " + doc.doc_id + " has no annotations");
  const auto& gold = *doc.gold;
  const std::size_t off = chunk.token_begin;
  ChunkExample ex;
  ex.tokens.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(chunk.token_begin),
                   doc.tokens.begin() + static_cast<std::ptrdiff_t>(chunk.token_end));
  for (std::size_t s = chunk.first_sentence; s < chunk.last_sentence; ++s)
    ex.sentences.push_back({doc.sentences[s].start - off, doc.sentences[s].end - off});

  // Features see the document neighbours of the chunk's edge tokens.
  const std::size_t lo = off > 0 ? off - 1 : off;
  const std::size_t hi = std::min(doc.tokens.size(), chunk.token_end + 1);
  std::span<const std::string> window(doc.tokens.data() + lo, hi - lo);
  if (provider.trainable()) {
    ex.feature_rows = provider.rows_for(ex.tokens);
  } else {
    const Tensor2 all = provider.embed(window);
    ex.features = Tensor2(chunk.size(), provider.dim());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      auto src = all.row(i + off - lo);
      std::copy(src.begin(), src.end(), ex.features.row(i).begin());
    }
  }

  ex.trigger_label.assign(chunk.size(), 0);
  std::vector<Span> trig_mentions;
  std::vector<std::size_t> trig_cluster;
  std::vector<std::size_t> evt_cluster_of(gold.triggers.size());
  for (std::size_t c = 0; c < gold.event_clusters.size(); ++c)
    for (auto t : gold.event_clusters[c]) evt_cluster_of[t] = c;
  std::vector<std::size_t> trig_order(gold.triggers.size());
  for (std::size_t i = 0; i < trig_order.size(); ++i) trig_order[i] = i;
  std::sort(trig_order.begin(), trig_order.end(),
            [&](auto a, auto b) { return gold.triggers[a].token < gold.triggers[b].token; });
  for (auto t : trig_order) {
    const auto& tr = gold.triggers[t];
    if (tr.token < chunk.token_begin || tr.token >= chunk.token_end) continue;
    ex.trigger_label[tr.token - off] = u32(types.event_index(tr.type));
    const std::size_t s = doc.sentence_of(tr.token);
    trig_mentions.push_back({tr.token - off, tr.token - off, s});
    trig_cluster.push_back(evt_cluster_of[t]);
  }

  ex.spans = enumerate_spans(ex.sentences, types.k_max);
  for (auto& sp : ex.spans) sp.sentence += chunk.first_sentence;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> span_id;
  for (std::size_t i = 0; i < ex.spans.size(); ++i) span_id[{ex.spans[i].start, ex.spans[i].end}] = i;
  ex.span_label.assign(ex.spans.size(), 0);
  ex.span_level.assign(ex.spans.size(), -1);

  std::vector<std::size_t> ent_cluster_of(gold.entities.size());
  for (std::size_t c = 0; c < gold.entity_clusters.size(); ++c)
    for (auto m : gold.entity_clusters[c]) ent_cluster_of[m] = c;
  std::vector<std::size_t> ent_order(gold.entities.size());
  for (std::size_t i = 0; i < ent_order.size(); ++i) ent_order[i] = i;
  std::sort(ent_order.begin(), ent_order.end(),
            [&](auto a, auto b) { return gold.entities[a].span < gold.entities[b].span; });
  std::vector<Span> ent_mentions;
  std::vector<std::size_t> ent_cluster;
  for (auto m : ent_order) {
    const auto& e = gold.entities[m];
    if (e.span.start < chunk.token_begin || e.span.end >= chunk.token_end) continue;
    const Span local{e.span.start - off, e.span.end - off, e.span.sentence};
    const auto it = span_id.find({local.start, local.end});
    if (it != span_id.end()) {
      ex.span_label[it->second] = u32(1 + types.entity_index(e.type));
      ex.span_level[it->second] = static_cast<std::int32_t>(e.level);
    }
    ent_mentions.push_back(local);
    ent_cluster.push_back(ent_cluster_of[m]);
  }

  // Arguments: every gold trigger against every candidate span of its sentence.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> role_of;
  for (const auto& a : gold.arguments)
    role_of[{a.trigger, a.span.start, a.span.end}] = types.role_index(a.role);
  for (const auto& tm : trig_mentions) {
    for (const auto& sp : ex.spans) {
      if (sp.sentence != tm.sentence) continue;
      ex.arg_pairs.a_head.push_back(u32(tm.start));
      ex.arg_pairs.b_head.push_back(u32(sp.start));
      ex.arg_pairs.b_tail.push_back(u32(sp.end));
      ex.arg_pairs.b_width.push_back(u32(width_bucket(sp.width())));
      const auto it = role_of.find({tm.start + off, sp.start + off, sp.end + off});
      ex.arg_label.push_back(it == role_of.end() ? 0 : u32(1 + it->second));
    }
  }

  add_coref_pairs(ex.evt, trig_mentions, trig_cluster, max_antecedents, /*triggers=*/true);
  add_coref_pairs(ex.ent, ent_mentions, ent_cluster, max_antecedents, /*triggers=*/false);
  return ex;
}

Tensor2 example_features(const ChunkExample& ex, const FeatureProvider& provider) {
  if (!provider.trainable()) return ex.features;
  Tensor2 out(ex.feature_rows.size(), provider.dim());
  for (std::size_t i = 0; i < ex.feature_rows.size(); ++i) {
    auto src = provider.table().row(ex.feature_rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

LocalForward local_loss(const LocalModelParams& p, const ChunkExample& ex, const Tensor2& features,
                        LocalModelParams* grads, Tensor2* grad_features, const Tensor2* pair_dist) {
  if (features.rows() != ex.trigger_label.size() || features.cols() != p.trig.input_dim()) {
    throw ShapeError("local_loss: features " + shape_string(features) + " do not match the chunk");
  }
  LocalForward out;
  Tensor2* gfeat = nullptr;
  if (grad_features) {
    if (grad_features->empty()) *grad_features = Tensor2(features.rows(), features.cols());
    gfeat = grad_features;
  }
  Tensor2* gwidth = grads ? &grads->width : nullptr;

  // Triggers.
  {
    const auto cache = mlp_forward(p.trig, features);
    Tensor2 g(cache.output().rows(), cache.output().cols());
    out.loss.trigger = softmax_cross_entropy(cache.output(), ex.trigger_label, 0, p.event_types(), grads ? &g : nullptr);
    out.trigger_dist = cache.output();
    softmax_rows(out.trigger_dist);
    if (grads) {
      Tensor2 gx;
      mlp_backward(p.trig, cache, g, grads->trig, gfeat ? &gx : nullptr);
      if (gfeat) *gfeat += gx;
    }
  }

  // Entities: type over every candidate span, level over gold mentions.
  if (!ex.spans.empty()) {
    const auto cache = score_spans(p, features, ex.spans);
    Tensor2 g(cache.output().rows(), cache.output().cols());
    const std::size_t n_type = 1 + p.entity_types();
    out.loss.entity = softmax_cross_entropy(cache.output(), ex.span_label, 0, n_type, grads ? &g : nullptr);
    std::vector<std::uint32_t> rows, levels;
    for (std::size_t i = 0; i < ex.span_level.size(); ++i) {
      if (ex.span_level[i] < 0) continue;
      rows.push_back(u32(i));
      levels.push_back(static_cast<std::uint32_t>(ex.span_level[i]));
    }
    if (!rows.empty())
      out.loss.entity += softmax_cross_entropy(cache.output(), levels, n_type, n_type + kLevels, grads ? &g : nullptr, rows);
    if (grads) {
      Tensor2* gt[] = {gfeat, gfeat, gwidth};
      factored_backward(p.ent, cache, g, grads->ent, gt);
    }
  }

  const PairTables tables{&features, pair_dist ? pair_dist : &out.trigger_dist};

  if (ex.arg_pairs.size() > 0) {
    const auto cache = score_pairs(p, PairTask::Argument, tables, ex.arg_pairs);
    Tensor2 g(cache.output().rows(), cache.output().cols());
    out.loss.argument = softmax_cross_entropy(cache.output(), ex.arg_label, 0, 1 + p.roles(), grads ? &g : nullptr);
    if (grads) {
      const auto gt = pair_grad_tables(PairTask::Argument, gfeat, gwidth);
      factored_backward(p.arg, cache, g, grads->arg, gt);
    }
  }

  auto coref = [&](PairTask task, const CorefProblem& prob, double& loss) {
    if (prob.mentions() == 0) return;
    if (prob.pairs.size() == 0) {
      loss = marginal_log_likelihood({}, prob, {});  // null only: exactly 0
      return;
    }
    const auto cache = score_pairs(p, task, tables, prob.pairs);
    Tensor2 g(cache.output().rows(), 1);
    loss = marginal_log_likelihood(cache.output().flat(), prob, grads ? g.flat() : std::span<double>{});
    if (grads) {
      const auto gt = pair_grad_tables(task, gfeat, gwidth);
      factored_backward(pair_net(p, task), cache, g, pair_net(*grads, task), gt);
    }
  };
  coref(PairTask::EventCoref, ex.evt, out.loss.event_coref);
  coref(PairTask::EntityCoref, ex.ent, out.loss.entity_coref);

  if (!std::isfinite(out.loss.total())) throw NumericError("local loss is not finite");
  return out;
}

}  // namespace dvnee
