#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <numeric>
#include <random>

#include "dvnee/gradcheck.hpp"
#include "dvnee/local_model.hpp"
#include "dvnee/optim.hpp"
#include "dvnee/synth.hpp"

using namespace dvnee;

namespace {

TypeInventory tiny_types() { return TypeInventory{{"NULL", "A", "B"}, {"P", "L"}, {"r1", "r2"}, 3}; }

// Two sentences, three triggers (two coreferent), four entity mentions.
Document tiny_doc() {
  return parse_document(
      R"({"doc_id":"t","tokens":["x","a1","p","q","y","b1","a2","p2","l"],"sentences":[[0,5],[5,9]],)"
      R"("triggers":[{"token":1,"type":"A"},{"token":5,"type":"B"},{"token":6,"type":"A"}],)"
      R"("arguments":[{"trigger":1,"start":2,"end":3,"role":"r1"},{"trigger":6,"start":7,"end":7,"role":"r1"},)"
      R"({"trigger":5,"start":8,"end":8,"role":"r2"}],)"
      R"("entities":[{"start":2,"end":3,"type":"P","level":"name"},{"start":4,"end":4,"type":"L","level":"name"},)"
      R"({"start":7,"end":7,"type":"P","level":"pronoun"},{"start":8,"end":8,"type":"L","level":"nominal"}],)"
      R"("entity_clusters":[[0,2],[1,3]],"event_clusters":[[0,2],[1]]})");
}

LocalDims tiny_dims() { return LocalDims{5, 3, 50}; }

void randomize(NamedTensors& ts, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& [_, t] : ts)
    for (auto& v : t->flat()) v = n(rng);
}

Tensor2 random_rows(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Tensor2 t(r, c);
  normal_fill(t, rng, 1.0);
  return t;
}

double relu(double x) { return x > 0 ? x : 0; }

}  // namespace

TEST_CASE("chunk_document packs whole sentences greedily") {
  Document doc{"d", std::vector<std::string>(30, "w"), {{0, 10}, {10, 20}, {20, 30}}, {}};
  const auto chunks = chunk_document(doc, 25);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].first_sentence == 0);
  CHECK(chunks[0].last_sentence == 2);
  CHECK(chunks[1].first_sentence == 2);
  CHECK(chunks[1].token_begin == 20);

  Document one{"d", std::vector<std::string>(7, "w"), {{0, 7}}, {}};
  CHECK(chunk_document(one, 7).size() == 1);
  CHECK_THROWS_AS(chunk_document(one, 6), std::invalid_argument);
}

TEST_CASE("chunks partition random documents") {
  synth::GenConfig cfg;
  cfg.seed = 4;
  cfg.n_docs = 200;
  for (const auto& d : synth::generate(cfg)) {
    const auto chunks = chunk_document(d, 40);
    std::size_t cursor = 0, sent = 0;
    for (const auto& c : chunks) {
      CHECK(c.token_begin == cursor);
      CHECK(c.first_sentence == sent);
      CHECK(c.size() <= 40);
      cursor = c.token_end;
      sent = c.last_sentence;
    }
    CHECK(cursor == d.token_count());
    CHECK(sent == d.sentences.size());
  }
}

TEST_CASE("feature providers are deterministic with a fixed width") {
  const std::vector<std::string> toks{"a", "b", "c", "b"};
  FeatureProvider hash(FeatureConfig{FeatureKind::Hash, 3, 16, 0});
  const auto e = hash.embed(toks);
  CHECK(e.rows() == 4);
  CHECK(e.cols() == 16);
  CHECK(e == FeatureProvider(FeatureConfig{FeatureKind::Hash, 3, 16, 0}).embed(toks));
  // Token "b" at positions 1 and 3: same centre half, different context.
  for (std::size_t j = 0; j < 8; ++j) CHECK(e(1, j) == e(3, j));
  CHECK(e.row(1)[8] != e.row(3)[8]);
  FeatureProvider lookup(FeatureConfig{FeatureKind::Lookup, 3, 16, 64});
  const auto l = lookup.embed(toks);
  for (std::size_t j = 0; j < 16; ++j) CHECK(l(1, j) == l(3, j));
}

TEST_CASE("width and distance buckets") {
  const std::size_t widths[] = {1, 2, 3, 4, 5, 7, 8, 12, 20};
  const std::size_t wb[] = {0, 1, 2, 3, 4, 4, 5, 5, 5};
  for (std::size_t i = 0; i < 9; ++i) CHECK(width_bucket(widths[i]) == wb[i]);
  CHECK(distance_bucket(0) == 0);
  CHECK(distance_bucket(6) == 5);
  CHECK(distance_bucket(100) == 6);
}

TEST_CASE("classify_triggers rows are distributions") {
  std::mt19937_64 rng(1);
  const auto types = tiny_types();
  auto p = LocalModelParams::create(types, 8, tiny_dims(), rng);
  const auto x = random_rows(11, 8, rng);
  SUBCASE("zero weights give uniform rows") {
    NamedTensors ts;
    p.collect("m", ts);
    for (auto& [_, t] : ts) t->fill(0.0);
    const auto y = classify_triggers(p, x);
    for (double v : y.flat()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("random weights sum to one") {
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 r(static_cast<std::uint64_t>(seed));
      NamedTensors ts;
      p.collect("m", ts);
      randomize(ts, r, 2.0);
      const auto y = classify_triggers(p, x);
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double s = 0;
        for (double v : y.row(i)) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("score_pairs agrees with an explicit concatenation loop") {
  std::mt19937_64 rng(2);
  const auto types = tiny_types();
  auto p = LocalModelParams::create(types, 8, tiny_dims(), rng);
  NamedTensors ts;
  p.collect("m", ts);
  randomize(ts, rng, 0.7);
  const auto e = random_rows(9, 8, rng);
  auto y = random_rows(9, 3, rng);
  softmax_rows(y);
  PairBatch b;
  b.a_head = {1, 6, 5};
  b.a_tail = {2, 7, 5};
  b.a_width = {1, 1, 0};
  b.b_head = {0, 2, 1};
  b.b_tail = {0, 3, 3};
  b.b_width = {0, 1, 2};
  b.dist = {0, 1, 3};
  const PairTables tables{&e, &y};

  auto concat = [&](PairTask task, std::size_t i) {
    std::vector<double> x;
    auto put = [&](std::span<const double> r) { x.insert(x.end(), r.begin(), r.end()); };
    std::vector<double> onehot(kDistanceBuckets, 0.0);
    onehot[b.dist[i]] = 1.0;
    switch (task) {
      case PairTask::Argument:
        put(e.row(b.a_head[i])), put(y.row(b.a_head[i])), put(e.row(b.b_head[i])), put(e.row(b.b_tail[i])),
            put(p.width.row(b.b_width[i]));
        break;
      case PairTask::EventCoref:
        put(e.row(b.a_head[i])), put(y.row(b.a_head[i])), put(e.row(b.b_head[i])), put(y.row(b.b_head[i])),
            put(onehot);
        break;
      case PairTask::EntityCoref:
        put(e.row(b.a_head[i])), put(e.row(b.a_tail[i])), put(p.width.row(b.a_width[i])), put(e.row(b.b_head[i])),
            put(e.row(b.b_tail[i])), put(p.width.row(b.b_width[i])), put(onehot);
        break;
    }
    return x;
  };
  auto scalar_net = [](const FactoredMlpParams& net, const std::vector<double>& x) {
    std::vector<double> h(net.hidden_dim());
    for (std::size_t c = 0; c < h.size(); ++c) {
      double s = net.bias(0, c);
      std::size_t r = 0;
      for (const auto& blk : net.blocks)
        for (std::size_t k = 0; k < blk.rows(); ++k, ++r) s += x[r] * blk(k, c);
      h[c] = relu(s);
    }
    const auto& l = net.tail.layers[0];
    std::vector<double> out(l.weight.cols());
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = l.bias(0, o);
      for (std::size_t c = 0; c < h.size(); ++c) s += h[c] * l.weight(c, o);
      out[o] = s;
    }
    return out;
  };

  for (auto [task, net] : {std::pair{PairTask::Argument, &p.arg}, {PairTask::EventCoref, &p.evt_coref},
                           {PairTask::EntityCoref, &p.ent_coref}}) {
    const auto cache = score_pairs(p, task, tables, b);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto want = scalar_net(*net, concat(task, i));
      REQUIRE(want.size() == cache.output().cols());
      for (std::size_t o = 0; o < want.size(); ++o) CHECK(cache.output()(i, o) == doctest::Approx(want[o]).epsilon(1e-12));
    }
  }

  SUBCASE("pair scores do not depend on unrelated pairs") {
    PairBatch rev = b;
    for (auto* v : {&rev.a_head, &rev.a_tail, &rev.a_width, &rev.b_head, &rev.b_tail, &rev.b_width, &rev.dist})
      std::reverse(v->begin(), v->end());
    const auto fwd = score_pairs(p, PairTask::EntityCoref, tables, b);
    const auto bwd = score_pairs(p, PairTask::EntityCoref, tables, rev);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(fwd.output()(i, 0) == bwd.output()(b.size() - 1 - i, 0));
  }
  SUBCASE("zero weights give zero logits") {
    for (auto& [_, t] : ts) t->fill(0.0);
    const auto cache = score_pairs(p, PairTask::Argument, tables, b);
    for (double v : cache.output().flat()) CHECK(v == 0.0);
  }
}

TEST_CASE("predict_antecedents basics") {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> below{{}, {-1.0}, {-0.5, -2.0}};
  const auto none = predict_antecedents(below);
  for (const auto& l : none) CHECK_FALSE(l);
  std::vector<std::vector<double>> pick{{}, {-1.0}, {3.0, 1.0}};
  const auto links = predict_antecedents(pick);
  CHECK(links[2] == std::optional<std::size_t>(0));
  // Ties: null wins over an equal antecedent, the nearest wins among equals.
  CHECK_FALSE(predict_antecedents({{}, {0.0}})[1]);
  CHECK(predict_antecedents({{}, {1.0}, {2.0, 2.0}})[2] == std::optional<std::size_t>(1));
  CHECK_FALSE(predict_antecedents({{}, {ninf}})[1]);
}

TEST_CASE("predict_antecedents clusters match a brute-force best-link closure") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> coarse(-3, 3);  // small integers force ties
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<std::vector<double>> s(n);
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t k = 0; k < m; ++k) s[m].push_back(coarse(rng));
    // Oracle: collect every option attaining the maximum, then apply the rule.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : find(parent[x]); };
    for (std::size_t m = 0; m < n; ++m) {
      double best = 0.0;
      for (double v : s[m]) best = std::max(best, v);
      if (best <= 0.0) continue;
      std::size_t pick = 0;
      for (std::size_t k = 0; k < m; ++k)
        if (s[m][k] == best) pick = k;
      parent[find(m)] = find(pick);
    }
    const auto clusters = clusters_from_antecedents(predict_antecedents(s));
    for (const auto& c : clusters)
      for (auto m : c) CHECK(find(m) == find(c.front()));
    std::set<std::size_t> roots;
    for (std::size_t m = 0; m < n; ++m) roots.insert(find(m));
    CHECK(roots.size() == clusters.size());
  }
}

TEST_CASE("loss helpers at their optimum") {
  Tensor2 logits{{60.0, 0.0, 0.0}, {0.0, 0.0, 60.0}};
  const std::vector<std::uint32_t> labels{0, 2};
  CHECK(softmax_cross_entropy(logits, labels, 0, 3, nullptr) <= 1e-6);
  CorefProblem single;
  single.offsets.push_back(0);  // one mention, no candidates: only null
  CHECK(marginal_log_likelihood({}, single, {}) == 0.0);
  CorefProblem two;
  two.offsets = {0, 0, 1};
  two.gold = {1};
  const double s[] = {3.0};
  CHECK(marginal_log_likelihood(s, two, {}) == doctest::Approx(0.5 * (std::log(1 + std::exp(3.0)) - 3.0)));
}

TEST_CASE("make_example encodes the gold structure") {
  const auto types = tiny_types();
  const auto doc = tiny_doc();
  FeatureProvider fp(FeatureConfig{FeatureKind::Hash, 1, 8, 0});
  const auto chunks = chunk_document(doc, 20);
  REQUIRE(chunks.size() == 1);
  const auto ex = make_example(doc, chunks[0], fp, types, 50);
  CHECK(ex.trigger_label == std::vector<std::uint32_t>{0, 1, 0, 0, 0, 2, 1, 0, 0});
  CHECK(ex.evt.mentions() == 3);
  CHECK(ex.evt.gold == std::vector<std::uint8_t>{0, 1, 0});  // (b1,a1) (a2,a1) (a2,b1)
  CHECK(ex.ent.mentions() == 4);
  std::size_t args = 0;
  for (auto l : ex.arg_label) args += l != 0;
  CHECK(args == 3);
  std::size_t labelled = 0;
  for (auto l : ex.span_label) labelled += l != 0;
  CHECK(labelled == 4);
  // Features of the chunk equal the document embedding.
  CHECK(ex.features == fp.embed(doc.tokens));
}

TEST_CASE("local_loss gradients match finite differences") {
  const auto types = tiny_types();
  const auto doc = tiny_doc();
  double worst = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    // Sentence-sized chunks on odd seeds exercise the edge handling.
    const bool lookup = seed % 2 == 1;
    FeatureProvider fp(FeatureConfig{lookup ? FeatureKind::Lookup : FeatureKind::Hash,
                                     static_cast<std::uint64_t>(seed), 8, 16});
    const auto chunks = chunk_document(doc, seed % 3 == 0 ? 5 : 20);
    const auto ex = make_example(doc, chunks[0], fp, types, seed % 4 == 0 ? 1 : 50);
    auto p = LocalModelParams::create(types, 8, tiny_dims(), rng);
    const Tensor2 fixed_y = [&] {
      Tensor2 y = random_rows(ex.tokens.size(), 3, rng);
      softmax_rows(y);
      return y;
    }();
    Tensor2 feats = example_features(ex, fp);

    auto grads = p.zeros_like();
    Tensor2 gfeat;
    local_loss(p, ex, feats, &grads, &gfeat, &fixed_y);
    NamedTensors pv, gv;
    p.collect("m", pv);
    grads.collect("m", gv);
    pv.emplace_back("features", &feats);
    gv.emplace_back("features", &gfeat);
    const double err = finite_diff_check_params(
        pv, gv, [&] { return local_loss(p, ex, feats, nullptr, nullptr, &fixed_y).loss.total(); }, 1e-6);
    worst = std::max(worst, err);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training on a small fixture lowers the loss step by step") {
  synth::GenConfig g;
  g.n_docs = 5;
  const auto types = g.schema.inventory();
  int monotone = 0;
  for (int seed = 0; seed < 10; ++seed) {
    g.seed = static_cast<std::uint64_t>(seed);
    const auto docs = synth::generate(g);
    FeatureProvider fp(FeatureConfig{FeatureKind::Hash, 7, 32, 0});
    std::vector<ChunkExample> exs;
    for (const auto& d : docs)
      for (const auto& c : chunk_document(d, 128)) exs.push_back(make_example(d, c, fp, types, 50));
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 100);
    auto p = LocalModelParams::create(types, fp.dim(), LocalDims{16, 4, 50}, rng);
    NamedTensors pv;
    p.collect("m", pv);
    OptimState opt;
    auto total = [&](LocalModelParams* grads) {
      double s = 0;
      for (const auto& ex : exs) s += local_loss(p, ex, ex.features, grads).loss.total();
      return s;
    };
    double prev = total(nullptr);
    bool ok = true;
    for (int step = 0; step < 10; ++step) {
      auto grads = p.zeros_like();
      total(&grads);
      NamedTensors gv;
      grads.collect("m", gv);
      optim_step(opt, pv, gv);
      const double now = total(nullptr);
      ok = ok && now < prev;
      prev = now;
    }
    monotone += ok;
  }
  CHECK(monotone >= 9);
}
