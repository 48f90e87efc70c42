#include "dvnee/mlp.hpp"

#include "dvnee/kernels.hpp"

namespace dvnee {

namespace {

void apply_activation(Tensor2& t, Activation act) {
  switch (act) {
    case Activation::Identity: return;
    case Activation::Relu:
      for (auto& v : t.flat()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::Logistic:
      for (auto& v : t.flat()) v = logistic(v);
      return;
  }
}

// grad wrt pre-activation, given the post-activation value.
void activation_backward(Tensor2& grad, const Tensor2& out, Activation act) {
  auto g = grad.flat();
  auto y = out.flat();
  switch (act) {
    case Activation::Identity: return;
    case Activation::Relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] <= 0.0) g[i] = 0.0;
      return;
    case Activation::Logistic:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
      return;
  }
}

void add_bias(Tensor2& t, const Tensor2& bias) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
}

void add_column_sums(Tensor2& bias_grad, const Tensor2& g) {
  for (std::size_t r = 0; r < g.rows(); ++r) {
    auto row = g.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) bias_grad(0, c) += row[c];
  }
}

}  // namespace

MlpParams MlpParams::create(const std::vector<std::size_t>& dims, Activation output, std::mt19937_64& rng) {
  if (dims.size() < 2) throw ShapeError("an MLP needs at least input and output dims");
  MlpParams p;
  p.output = output;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Tensor2(dims[l], dims[l + 1]), Tensor2(1, dims[l + 1])};
    glorot_uniform(layer.weight, rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.hidden = hidden;
  z.output = output;
  for (const auto& l : layers) {
    z.layers.push_back({Tensor2(l.weight.rows(), l.weight.cols()), Tensor2(1, l.bias.cols())});
  }
  return z;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::check() const {
  if (layers.empty()) throw ShapeError("MLP has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.rows() != 1 || layers[l].bias.cols() != layers[l].weight.cols()) {
      throw ShapeError("layer " + std::to_string(l) + " bias does not match its weight");
    }
    if (l > 0 && layers[l - 1].weight.cols() != layers[l].weight.rows()) {
      throw ShapeError("layers " + std::to_string(l - 1) + " and " + std::to_string(l) + " disagree");
    }
  }
}

MlpCache mlp_forward(const MlpParams& p, const Tensor2& x) {
  if (p.layers.empty() || x.cols() != p.input_dim()) {
    throw ShapeError("mlp_forward: input " + shape_string(x) + " vs input dim " +
                     (p.layers.empty() ? std::string("<none>") : std::to_string(p.input_dim())));
  }
  MlpCache cache;
  cache.params = &p;
  cache.activations.reserve(p.layers.size() + 1);
  cache.activations.push_back(x);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Tensor2 z;
    kernels::gemm_nn(cache.activations.back(), p.layers[l].weight, z);
    add_bias(z, p.layers[l].bias);
    apply_activation(z, l + 1 == p.layers.size() ? p.output : p.hidden);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

Tensor2 mlp_apply(const MlpParams& p, const Tensor2& x) {
  if (p.layers.empty() || x.cols() != p.input_dim()) throw ShapeError("mlp_apply: input " + shape_string(x));
  Tensor2 a = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Tensor2 z;
    kernels::gemm_nn(a, p.layers[l].weight, z);
    add_bias(z, p.layers[l].bias);
    apply_activation(z, l + 1 == p.layers.size() ? p.output : p.hidden);
    a = std::move(z);
  }
  return a;
}

void mlp_backward(const MlpParams& p, const MlpCache& cache, const Tensor2& grad_y, MlpParams& grads, Tensor2* grad_x) {
  if (cache.params != &p || cache.activations.size() != p.layers.size() + 1) {
    throw StaleCacheError("mlp_backward: cache was produced by a different network");
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (cache.activations[l + 1].cols() != p.layers[l].weight.cols() ||
        cache.activations[l].cols() != p.layers[l].weight.rows()) {
      throw StaleCacheError("mlp_backward: cache shapes no longer match layer " + std::to_string(l));
    }
  }
  if (!grad_y.same_shape(cache.output())) {
    throw ShapeError("mlp_backward: grad " + shape_string(grad_y) + " vs output " + shape_string(cache.output()));
  }
  if (grads.layers.size() != p.layers.size()) throw ShapeError("mlp_backward: gradient structure mismatch");

  Tensor2 g = grad_y;
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    activation_backward(g, cache.activations[l + 1], l + 1 == p.layers.size() ? p.output : p.hidden);
    kernels::gemm_tn(cache.activations[l], g, grads.layers[l].weight, /*accumulate=*/true);
    add_column_sums(grads.layers[l].bias, g);
    if (l == 0 && grad_x == nullptr) break;
    Tensor2 prev;
    kernels::gemm_nt(g, p.layers[l].weight, prev);
    g = std::move(prev);
  }
  if (grad_x != nullptr) *grad_x = std::move(g);
}

MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache, const Tensor2& grad_y) {
  MlpGrads out{p.zeros_like(), {}};
  mlp_backward(p, cache, grad_y, out.params, &out.input);
  return out;
}

// ---------------------------------------------------------------------------

FactoredMlpParams FactoredMlpParams::create(const std::vector<std::size_t>& block_dims,
                                            const std::vector<std::size_t>& tail_dims, Activation output,
                                            std::mt19937_64& rng) {
  if (tail_dims.size() < 2) throw ShapeError("factored MLP tail needs hidden and output dims");
  FactoredMlpParams p;
  std::size_t fan_in = 0;
  for (auto d : block_dims) fan_in += d;
  const std::size_t hidden = tail_dims.front();
  // Glorot limit of the unfactored first layer, shared by every block.
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + hidden));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto d : block_dims) {
    Tensor2 w(d, hidden);
    for (auto& v : w.flat()) v = dist(rng);
    p.blocks.push_back(std::move(w));
  }
  p.bias = Tensor2(1, hidden);
  p.tail = MlpParams::create(tail_dims, output, rng);
  return p;
}

FactoredMlpParams FactoredMlpParams::zeros_like() const {
  FactoredMlpParams z;
  for (const auto& b : blocks) z.blocks.emplace_back(b.rows(), b.cols());
  z.bias = Tensor2(1, bias.cols());
  z.tail = tail.zeros_like();
  return z;
}

FactoredMlpCache factored_forward(const FactoredMlpParams& p, std::span<const BlockInput> inputs) {
  if (inputs.size() != p.blocks.size()) {
    throw ShapeError("factored_forward: " + std::to_string(inputs.size()) + " inputs for " +
                     std::to_string(p.blocks.size()) + " blocks");
  }
  const std::size_t items = inputs.empty() ? 0 : inputs.front().index.size();
  const std::size_t hidden = p.hidden_dim();
  FactoredMlpCache cache;
  cache.params = &p;
  Tensor2 h(items, hidden);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& in = inputs[k];
    if (in.table == nullptr || in.table->cols() != p.blocks[k].rows()) {
      throw ShapeError("factored_forward: block " + std::to_string(k) + " width mismatch");
    }
    if (in.index.size() != items) throw ShapeError("factored_forward: index lengths differ");
    Tensor2 projected;
    kernels::gemm_nn(*in.table, p.blocks[k], projected);
    for (std::size_t i = 0; i < items; ++i) {
      const auto r = in.index[i];
      if (r >= in.table->rows()) throw ShapeError("factored_forward: index out of range");
      const double* src = projected.data() + static_cast<std::size_t>(r) * hidden;
      double* dst = h.data() + i * hidden;
      for (std::size_t c = 0; c < hidden; ++c) dst[c] += src[c];
    }
    cache.tables.push_back(in.table);
    cache.indices.emplace_back(in.index.begin(), in.index.end());
  }
  for (std::size_t i = 0; i < items; ++i) {
    double* dst = h.data() + i * hidden;
    for (std::size_t c = 0; c < hidden; ++c) {
      const double z = dst[c] + p.bias(0, c);
      dst[c] = z > 0.0 ? z : 0.0;
    }
  }
  cache.tail = mlp_forward(p.tail, h);
  return cache;
}

void factored_backward(const FactoredMlpParams& p, const FactoredMlpCache& cache, const Tensor2& grad_y,
                       FactoredMlpParams& grads, std::span<Tensor2* const> grad_tables) {
  if (cache.params != &p || cache.tables.size() != p.blocks.size()) {
    throw StaleCacheError("factored_backward: cache was produced by a different network");
  }
  Tensor2 gh;
  mlp_backward(p.tail, cache.tail, grad_y, grads.tail, &gh);
  const Tensor2& h = cache.tail.activations.front();
  const std::size_t hidden = p.hidden_dim();
  for (std::size_t i = 0; i < gh.size(); ++i)
    if (h.flat()[i] <= 0.0) gh.flat()[i] = 0.0;
  for (std::size_t r = 0; r < gh.rows(); ++r)
    for (std::size_t c = 0; c < hidden; ++c) grads.bias(0, c) += gh(r, c);

  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const Tensor2& table = *cache.tables[k];
    Tensor2 scattered(table.rows(), hidden);
    const auto& idx = cache.indices[k];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* src = gh.data() + i * hidden;
      double* dst = scattered.data() + static_cast<std::size_t>(idx[i]) * hidden;
      for (std::size_t c = 0; c < hidden; ++c) dst[c] += src[c];
    }
    kernels::gemm_tn(table, scattered, grads.blocks[k], /*accumulate=*/true);
    if (k < grad_tables.size() && grad_tables[k] != nullptr) {
      Tensor2& gt = *grad_tables[k];
      if (gt.empty()) gt = Tensor2(table.rows(), table.cols());
      kernels::gemm_nt(scattered, p.blocks[k], gt, /*accumulate=*/true);
    }
  }
}

// ---------------------------------------------------------------------------

void collect(MlpParams& p, const std::string& prefix, NamedTensors& out) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.emplace_back(prefix + ".layer" + std::to_string(l) + ".weight", &p.layers[l].weight);
    out.emplace_back(prefix + ".layer" + std::to_string(l) + ".bias", &p.layers[l].bias);
  }
}

void collect(FactoredMlpParams& p, const std::string& prefix, NamedTensors& out) {
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    out.emplace_back(prefix + ".block" + std::to_string(k), &p.blocks[k]);
  }
  out.emplace_back(prefix + ".bias", &p.bias);
  collect(p.tail, prefix + ".tail", out);
}

}  // namespace dvnee
