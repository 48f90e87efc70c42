#include "dvnee/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace dvnee {

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Base: return "base";
    case TrainMode::Dvn: return "dvn";
    case TrainMode::DvnRn: return "dvn+rn";
    case TrainMode::DvnSn: return "dvn+sn";
    case TrainMode::DvnSnlc: return "dvn+snlc";
  }
  return "base";
}

TrainMode train_mode_from_string(std::string_view s) {
  for (auto m : {TrainMode::Base, TrainMode::Dvn, TrainMode::DvnRn, TrainMode::DvnSn, TrainMode::DvnSnlc})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected base, dvn, dvn+rn, dvn+sn, dvn+snlc)");
}

NoiseMode noise_of(TrainMode m) {
  switch (m) {
    case TrainMode::DvnRn: return NoiseMode::Random;
    case TrainMode::DvnSn: return NoiseMode::Swap;
    case TrainMode::DvnSnlc: return NoiseMode::SwapLeastConfident;
    default: return NoiseMode::None;
  }
}

Model Model::create(const TypeInventory& types, const FeatureConfig& features, const LocalDims& dims,
                    const DvnConfig& dvn, std::uint64_t seed) {
  types.validate();
  dvn.validate();
  Model m{types, FeatureProvider(features), dims, {}, dvn, {}, false};
  std::mt19937_64 local_rng(seed);
  std::mt19937_64 value_rng(seed ^ 0x5bd1e9955bd1e995ULL);
  m.local = LocalModelParams::create(types, features.d_tok, dims, local_rng);
  m.value = ValueNetParams::create(types.event_types.size(), features.d_tok, dvn, value_rng);
  return m;
}

NamedTensors Model::parameters() {
  NamedTensors out;
  if (features.trainable()) features.collect("features", out);
  local.collect("local", out);
  value.collect("value", out);
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("optim.batch_size must be >= 1");
  if (max_epochs == 0) throw std::invalid_argument("optim.max_epochs must be >= 1");
  if (max_tokens == 0) throw std::invalid_argument("model.max_tokens must be >= 1");
  if (!(optim.learning_rate > 0)) throw std::invalid_argument("optim.lr must be positive");
  if (!(optim.weight_decay >= 0)) throw std::invalid_argument("optim.weight_decay must be non-negative");
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["steps"] = steps;
  j["local_loss"] = local_loss;
  j["dvn_loss"] = dvn_loss;
  j["dev_doc_trigger_f1"] = dev_trigger.f1;
  j["dev_doc_argument_f1"] = dev_argument.f1;
  j["improved"] = improved;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Training.

namespace {

void zero(const NamedTensors& ts) {
  for (auto& [name, t] : ts) t->fill(0.0);
}

void scale(const NamedTensors& ts, double s) {
  for (auto& [name, t] : ts) *t *= s;
}

// Value-net loss on one candidate labelling; parameter gradients accumulate.
double value_net_step(const ValueNetParams& p, const Tensor2& features, const Tensor2& projected, const Tensor2& y,
                      std::span<const std::uint32_t> labels, ValueNetParams& grads) {
  const double v_star = oracle_relaxed_f1(y, labels);
  const auto cache = value_forward(p, features, y, &projected);
  const double loss = dvn_loss_logit(cache.logit, v_star);
  value_backward(p, cache, logistic(cache.logit) - v_star, &grads, nullptr);
  return loss;
}

struct Snapshot {
  Tensor2 table;
  LocalModelParams local;
  ValueNetParams value;
};

Snapshot snapshot(const Model& m) { return {m.features.table(), m.local, m.value}; }

void restore(Model& m, const Snapshot& s) {
  m.features.table() = s.table;
  m.local = s.local;
  m.value = s.value;
}

}  // namespace

std::vector<ChunkExample> make_examples(const Model& model, const std::vector<Document>& docs,
                                        std::size_t max_tokens) {
  std::vector<ChunkExample> out;
  for (const auto& doc : docs)
    for (const auto& chunk : chunk_document(doc, max_tokens))
      out.push_back(make_example(doc, chunk, model.features, model.types, model.dims.max_antecedents));
  return out;
}

Trainer::Trainer(Model& model, TrainMode mode, const TrainConfig& cfg)
    : model_(model),
      mode_(mode),
      params_(model.parameters()),
      grads_{Tensor2(), model.local.zeros_like(), model.value.zeros_like()},
      opt_{cfg.optim, 0, {}, {}, {}},
      noise_rng_(cfg.seed ^ 0x2545f4914f6cdd1dULL) {
  cfg.validate();
  model_.use_dvn = mode != TrainMode::Base;
  model_.dvn.noise = noise_of(mode);
  if (model_.features.trainable()) {
    grads_.table = Tensor2(model_.features.table().rows(), model_.features.table().cols());
    grad_list_.emplace_back("features.table", &grads_.table);
  }
  grads_.local.collect("local", grad_list_);
  grads_.value.collect("value", grad_list_);
}

StepStats Trainer::step(std::span<const ChunkExample* const> batch) {
  StepStats st;
  if (batch.empty()) return st;
  const bool dvn = mode_ != TrainMode::Base;
  const NoiseMode noise = noise_of(mode_);
  const bool table = model_.features.trainable();
  zero(grad_list_);
  for (const ChunkExample* ex : batch) {
    const Tensor2 feats = example_features(*ex, model_.features);
    Tensor2 g_feat;
    const auto fwd = local_loss(model_.local, *ex, feats, &grads_.local, table ? &g_feat : nullptr);
    st.local_loss += fwd.loss.total();
    if (table) {
      for (std::size_t i = 0; i < ex->feature_rows.size(); ++i) {
        auto dst = grads_.table.row(ex->feature_rows[i]);
        auto src = g_feat.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
    if (!dvn) continue;
    // The local prediction enters the value net as a constant.
    const Tensor2 projected = project_features(model_.value, feats);
    st.dvn_loss += value_net_step(model_.value, feats, projected, fwd.trigger_dist, ex->trigger_label, grads_.value);
    ++st.dvn_samples;
    if (noise != NoiseMode::None) {
      const auto noised = apply_noise(fwd.trigger_dist, noise, model_.dvn.swap_fraction, noise_rng_);
      st.dvn_loss += value_net_step(model_.value, feats, projected, noised.y, ex->trigger_label, grads_.value);
      ++st.dvn_samples;
    }
  }
  if (!std::isfinite(st.local_loss)) throw NumericError("local loss is not finite");
  if (!std::isfinite(st.dvn_loss)) throw NumericError("value-net loss is not finite");
  scale(grad_list_, 1.0 / static_cast<double>(batch.size()));
  optim_step(opt_, params_, grad_list_);
  return st;
}

TrainResult train(Model& model, TrainMode mode, const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto examples = make_examples(model, train_docs, cfg.max_tokens);
  Trainer trainer(model, mode, cfg);
  // The shuffle stream is separate from the noise stream, so the visiting
  // order does not depend on the mode.
  std::mt19937_64 order_rng(cfg.seed);

  TrainResult result;
  Snapshot best = snapshot(model);
  std::size_t stale = 0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const ChunkExample*> batch;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochLog log;
    log.epoch = epoch;
    double local_sum = 0.0, dvn_sum = 0.0;
    std::size_t dvn_samples = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) batch.push_back(&examples[order[k]]);
      StepStats st;
      try {
        st = trainer.step(batch);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(log.steps + 1) + ": " +
                           e.what());
      }
      ++log.steps;
      local_sum += st.local_loss;
      if (st.dvn_samples) {
        result.dvn_step_loss.push_back(st.dvn_loss / static_cast<double>(st.dvn_samples));
        dvn_sum += st.dvn_loss;
        dvn_samples += st.dvn_samples;
      }
    }

    log.local_loss = examples.empty() ? 0.0 : local_sum / static_cast<double>(examples.size());
    log.dvn_loss = dvn_samples ? dvn_sum / static_cast<double>(dvn_samples) : 0.0;
    const auto report = score_corpus(dev_docs, infer_corpus(model, dev_docs, cfg.max_tokens));
    log.dev_trigger = report.doc_trigger;
    log.dev_argument = report.doc_argument;
    if (log.dev_trigger.f1 > result.best_dev_trigger_f1) {
      log.improved = true;
      result.best_dev_trigger_f1 = log.dev_trigger.f1;
      result.best_epoch = epoch;
      best = snapshot(model);
      stale = 0;
    } else {
      ++stale;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stale >= cfg.patience) break;
  }
  restore(model, best);
  return result;
}

// ---------------------------------------------------------------------------
// Inference.

namespace {

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

Tensor2 document_features(const Model& m, const Document& doc) {
  if (!m.features.trainable()) return m.features.embed(doc.tokens);
  const auto rows = m.features.rows_for(doc.tokens);
  Tensor2 out(rows.size(), m.features.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.features.table().row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor2 slice_rows(const Tensor2& t, std::size_t begin, std::size_t end) {
  Tensor2 out(end - begin, t.cols());
  std::copy(t.data() + begin * t.cols(), t.data() + end * t.cols(), out.data());
  return out;
}

Tensor2 trigger_dist(const Model& m, const Document& doc, const Tensor2& feats, std::size_t max_tokens) {
  Tensor2 y(doc.tokens.size(), m.types.event_types.size());
  const bool refine_on = m.use_dvn && m.dvn.h > 0;
  const LabelTables tables = refine_on ? label_tables(m.value) : LabelTables{};
  for (const auto& c : chunk_document(doc, max_tokens)) {
    const Tensor2 f = slice_rows(feats, c.token_begin, c.token_end);
    Tensor2 yc = classify_triggers(m.local, f);
    if (refine_on) yc = refine(m.value, tables, f, yc, m.dvn);
    std::copy(yc.data(), yc.data() + yc.size(), y.data() + c.token_begin * y.cols());
  }
  return y;
}

std::size_t argmax(std::span<const double> row, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t j = begin + 1; j < end; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

// Softmax probability of column `col` within [begin, end) of a logit row.
double softmax_prob(std::span<const double> row, std::size_t begin, std::size_t end, std::size_t col) {
  double mx = row[begin];
  for (std::size_t j = begin; j < end; ++j) mx = std::max(mx, row[j]);
  double z = 0.0;
  for (std::size_t j = begin; j < end; ++j) z += std::exp(row[j] - mx);
  return std::exp(row[col] - mx) / z;
}

struct Scored {
  double score;
  std::size_t index;
};

// Highest score first; ties by index, which follows span order.
void sort_scored(std::vector<Scored>& v) {
  std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  });
}

std::vector<std::vector<double>> antecedent_scores(const std::vector<std::vector<std::size_t>>& candidates,
                                                   std::span<const double> flat) {
  std::vector<std::vector<double>> scores(candidates.size());
  std::size_t pos = 0;
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    scores[m].assign(m, -std::numeric_limits<double>::infinity());
    for (auto k : candidates[m]) scores[m][k] = flat[pos++];
  }
  return scores;
}

}  // namespace

Tensor2 document_trigger_dist(const Model& model, const Document& doc, std::size_t max_tokens) {
  return trigger_dist(model, doc, document_features(model, doc), max_tokens);
}

Annotations infer_document(const Model& model, const Document& doc, std::size_t max_tokens) {
  const auto& types = model.types;
  const Tensor2 feats = document_features(model, doc);
  Tensor2 y = trigger_dist(model, doc, feats, max_tokens);
  Annotations out;

  for (std::size_t i = 0; i < y.rows(); ++i) {
    const std::size_t t = argmax(y.row(i), 0, y.cols());
    if (t != 0) out.triggers.push_back({i, types.event_types[t]});
  }
  // Refined rows need not sum to one; the pair scorers read normalised rows.
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    for (auto& v : r) v /= s;
  }

  // Entities: greedy non-overlapping decoding over every candidate span.
  const auto spans = enumerate_spans(doc, types.k_max);
  const std::size_t n_type = 1 + types.entity_types.size();
  Tensor2 span_logits;
  if (!spans.empty()) span_logits = score_spans(model.local, feats, spans).output();
  auto entity_of = [&](std::size_t s) {
    const auto row = span_logits.row(s);
    const std::size_t type = argmax(row, 1, n_type);
    const std::size_t level = argmax(row, n_type, n_type + kLevels) - n_type;
    return EntityMention{spans[s], types.entity_types[type - 1], static_cast<MentionLevel>(level)};
  };
  {
    std::vector<Scored> cands;
    for (std::size_t s = 0; s < spans.size(); ++s) {
      const auto row = span_logits.row(s);
      const std::size_t type = argmax(row, 0, n_type);
      if (type != 0) cands.push_back({softmax_prob(row, 0, n_type, type), s});
    }
    sort_scored(cands);
    std::vector<Span> taken;
    for (const auto& c : cands) {
      const Span& sp = spans[c.index];
      if (std::any_of(taken.begin(), taken.end(), [&](const Span& o) { return o.overlaps(sp); })) continue;
      taken.push_back(sp);
      out.entities.push_back(entity_of(c.index));
    }
  }

  // Arguments: each predicted trigger against the spans of its sentence.
  const PairTables tables{&feats, &y};
  if (!out.triggers.empty()) {
    PairBatch batch;
    std::vector<std::size_t> owner, span_of;
    for (std::size_t t = 0; t < out.triggers.size(); ++t) {
      const std::size_t tok = out.triggers[t].token;
      const std::size_t sent = doc.sentence_of(tok);
      for (std::size_t s = 0; s < spans.size(); ++s) {
        if (spans[s].sentence != sent) continue;
        batch.a_head.push_back(u32(tok));
        batch.b_head.push_back(u32(spans[s].start));
        batch.b_tail.push_back(u32(spans[s].end));
        batch.b_width.push_back(u32(width_bucket(spans[s].width())));
        owner.push_back(t);
        span_of.push_back(s);
      }
    }
    if (batch.size() > 0) {
      const Tensor2 logits = score_pairs(model.local, PairTask::Argument, tables, batch).output();
      const std::size_t n_role = 1 + types.argument_roles.size();
      std::vector<std::vector<Scored>> per_trigger(out.triggers.size());
      std::vector<std::size_t> role_of(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto row = logits.row(i);
        role_of[i] = argmax(row, 0, n_role);
        if (role_of[i] != 0) per_trigger[owner[i]].push_back({softmax_prob(row, 0, n_role, role_of[i]), i});
      }
      for (auto& cands : per_trigger) {
        sort_scored(cands);
        std::vector<Span> taken;
        for (const auto& c : cands) {
          const Span& sp = spans[span_of[c.index]];
          if (std::any_of(taken.begin(), taken.end(), [&](const Span& o) { return o.overlaps(sp); })) continue;
          taken.push_back(sp);
          out.arguments.push_back({out.triggers[owner[c.index]].token, sp, types.argument_roles[role_of[c.index] - 1]});
        }
      }
      // An argument span must be an entity mention.
      for (const auto& a : out.arguments) {
        const bool known = std::any_of(out.entities.begin(), out.entities.end(),
                                       [&](const EntityMention& e) { return e.span == a.span; });
        if (known) continue;
        const auto it = std::lower_bound(spans.begin(), spans.end(), a.span);
        out.entities.push_back(entity_of(static_cast<std::size_t>(it - spans.begin())));
      }
    }
  }
  std::sort(out.entities.begin(), out.entities.end(),
            [](const EntityMention& a, const EntityMention& b) { return a.span < b.span; });
  const std::size_t max_ant = model.dims.max_antecedents;

  // Event coreference over the whole document, same predicted type only.
  if (!out.triggers.empty()) {
    std::vector<std::vector<std::size_t>> cands(out.triggers.size());
    PairBatch batch;
    for (std::size_t m = 0; m < out.triggers.size(); ++m) {
      const auto& tm = out.triggers[m];
      const std::size_t sm = doc.sentence_of(tm.token);
      for (std::size_t k = m; k-- > 0 && cands[m].size() < max_ant;) {
        if (out.triggers[k].type != tm.type) continue;
        cands[m].push_back(k);
      }
      std::reverse(cands[m].begin(), cands[m].end());
      for (auto k : cands[m]) {
        batch.a_head.push_back(u32(tm.token));
        batch.b_head.push_back(u32(out.triggers[k].token));
        batch.dist.push_back(u32(distance_bucket(sm - doc.sentence_of(out.triggers[k].token))));
      }
    }
    std::vector<std::optional<std::size_t>> links(out.triggers.size());
    if (batch.size() > 0) {
      const Tensor2 s = score_pairs(model.local, PairTask::EventCoref, tables, batch).output();
      links = predict_antecedents(antecedent_scores(cands, s.flat()));
    }
    out.event_clusters = clusters_from_antecedents(links);
  }

  // Entity coreference over the decoded mentions.
  if (!out.entities.empty()) {
    std::vector<std::vector<std::size_t>> cands(out.entities.size());
    PairBatch batch;
    for (std::size_t m = 0; m < out.entities.size(); ++m) {
      const Span& a = out.entities[m].span;
      const std::size_t first = m > max_ant ? m - max_ant : 0;
      for (std::size_t k = first; k < m; ++k) {
        const Span& b = out.entities[k].span;
        cands[m].push_back(k);
        batch.a_head.push_back(u32(a.start));
        batch.a_tail.push_back(u32(a.end));
        batch.a_width.push_back(u32(width_bucket(a.width())));
        batch.b_head.push_back(u32(b.start));
        batch.b_tail.push_back(u32(b.end));
        batch.b_width.push_back(u32(width_bucket(b.width())));
        batch.dist.push_back(u32(distance_bucket(a.sentence - b.sentence)));
      }
    }
    std::vector<std::optional<std::size_t>> links(out.entities.size());
    if (batch.size() > 0) {
      const Tensor2 s = score_pairs(model.local, PairTask::EntityCoref, tables, batch).output();
      links = predict_antecedents(antecedent_scores(cands, s.flat()));
    }
    out.entity_clusters = clusters_from_antecedents(links);
  }

  Document checked{doc.doc_id, doc.tokens, doc.sentences, out};
  normalize_and_validate(checked);
  return *checked.gold;
}

std::vector<Document> infer_corpus(const Model& model, const std::vector<Document>& docs, std::size_t max_tokens) {
  std::vector<Document> out(docs.size());
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& d = docs[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = Document{d.doc_id, d.tokens, d.sentences, infer_document(model, d, max_tokens)};
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace dvnee
