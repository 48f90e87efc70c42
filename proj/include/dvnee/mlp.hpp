#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvnee/tensor.hpp"

namespace dvnee {

enum class Activation : std::uint8_t { Identity, Relu, Logistic };

/// Thrown when a backward pass receives a cache that was not produced by a
/// forward pass over the same parameter object.
class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct DenseLayer {
  Tensor2 weight;  // in x out
  Tensor2 bias;    // 1 x out
};

/// Feed-forward network: rectifier between layers, configurable output.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;

  /// dims = {in, hidden..., out}; Glorot-uniform weights, zero biases.
  static MlpParams create(const std::vector<std::size_t>& dims, Activation output, std::mt19937_64& rng);

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  /// Same structure, every entry zero. Used as a gradient accumulator.
  MlpParams zeros_like() const;
  std::size_t parameter_count() const;
  void check() const;
};

struct MlpCache {
  const MlpParams* params = nullptr;
  /// activations[0] is the input; activations[l + 1] is the output of layer l.
  std::vector<Tensor2> activations;

  const Tensor2& output() const { return activations.back(); }
};

/// Forward pass keeping everything backward needs.
MlpCache mlp_forward(const MlpParams& p, const Tensor2& x);
/// Forward pass without a cache.
Tensor2 mlp_apply(const MlpParams& p, const Tensor2& x);

/// Accumulates parameter gradients into `grads` (shape of `p`) and, when
/// `grad_x` is non-null, writes d loss / d input into it.
void mlp_backward(const MlpParams& p, const MlpCache& cache, const Tensor2& grad_y, MlpParams& grads,
                  Tensor2* grad_x = nullptr);

struct MlpGrads {
  MlpParams params;
  Tensor2 input;
};
MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache, const Tensor2& grad_y);

// ---------------------------------------------------------------------------
// An MLP whose input is a concatenation of rows gathered from several
// feature tables. The first layer is applied per table and summed per item,
// so a pair or span scorer never materialises its concatenated input.

struct FactoredMlpParams {
  std::vector<Tensor2> blocks;  // block k: d_k x hidden
  Tensor2 bias;                 // 1 x hidden
  MlpParams tail;               // hidden -> ... -> out; its input is relu(first layer)

  /// block_dims = {d_0, d_1, ...}; tail_dims = {hidden, ..., out}.
  static FactoredMlpParams create(const std::vector<std::size_t>& block_dims, const std::vector<std::size_t>& tail_dims,
                                  Activation output, std::mt19937_64& rng);
  FactoredMlpParams zeros_like() const;
  std::size_t hidden_dim() const { return bias.cols(); }
  std::size_t output_dim() const { return tail.output_dim(); }
};

/// One block of the concatenated input: item i reads row index[i] of `table`.
struct BlockInput {
  const Tensor2* table = nullptr;
  std::span<const std::uint32_t> index;
};

/// Holds pointers to the input tables: they must outlive the backward call.
struct FactoredMlpCache {
  const FactoredMlpParams* params = nullptr;
  std::vector<const Tensor2*> tables;
  std::vector<std::vector<std::uint32_t>> indices;
  MlpCache tail;

  const Tensor2& output() const { return tail.output(); }
  std::size_t items() const { return tail.activations.front().rows(); }
};

FactoredMlpCache factored_forward(const FactoredMlpParams& p, std::span<const BlockInput> inputs);

/// `grad_tables[k]`, when the vector is non-empty and the entry is
/// requested (non-null), receives d loss / d table_k accumulated in place.
void factored_backward(const FactoredMlpParams& p, const FactoredMlpCache& cache, const Tensor2& grad_y,
                       FactoredMlpParams& grads, std::span<Tensor2* const> grad_tables = {});

// ---------------------------------------------------------------------------
// Named parameter views shared by the optimizer and the checkpoint format.

using NamedTensors = std::vector<std::pair<std::string, Tensor2*>>;

void collect(MlpParams& p, const std::string& prefix, NamedTensors& out);
void collect(FactoredMlpParams& p, const std::string& prefix, NamedTensors& out);

}  // namespace dvnee
