#pragma once

#include "dvnee/tensor.hpp"

// Dense matrix products used by every network in the project. The default
// kernels split output rows across OpenMP threads; each output element is
// reduced in a fixed order, so results do not depend on the thread count.
// The `reference` namespace holds plain triple loops kept for testing.
namespace dvnee::kernels {

/// C = A * B, or C += A * B when `accumulate`.
void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
/// C = A^T * B, or C += A^T * B.
void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
/// C = A * B^T, or C += A * B^T.
void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);

/// Number of threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

namespace reference {
void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
}  // namespace reference

}  // namespace dvnee::kernels
