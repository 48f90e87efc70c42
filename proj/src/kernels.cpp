#include "dvnee/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dvnee::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void prepare(Tensor2& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) {
      throw ShapeError("accumulate target " + shape_string(c) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  } else if (c.rows() != rows || c.cols() != cols) {
    c = Tensor2(rows, cols);
  } else {
    c.fill(0.0);
  }
}

}  // namespace

void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.rows()) throw ShapeError("gemm_nn: " + shape_string(a) + " * " + shape_string(b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  prepare(c, m, n, accumulate);
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (long i = 0; i < rows; ++i) {
    double* crow = cp + i * n;
    const double* arow = ap + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = bp + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.rows() != b.rows()) throw ShapeError("gemm_tn: " + shape_string(a) + "^T * " + shape_string(b));
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  prepare(c, m, n, accumulate);
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (long i = 0; i < rows; ++i) {
    double* crow = cp + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[p * m + i];
      if (av == 0.0) continue;
      const double* brow = bp + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.cols()) throw ShapeError("gemm_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  prepare(c, m, n, accumulate);
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (long i = 0; i < rows; ++i) {
    const double* arow = ap + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = bp + j * k;
      double s = 0.0;
#pragma omp simd reduction(+ : s)
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      cp[i * n + j] += s;
    }
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c;
  gemm_nn(a, b, c);
  return c;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace reference {

void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.rows()) throw ShapeError("gemm_nn: " + shape_string(a) + " * " + shape_string(b));
  prepare(c, a.rows(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) += s;
    }
}

void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.rows() != b.rows()) throw ShapeError("gemm_tn: " + shape_string(a) + "^T * " + shape_string(b));
  prepare(c, a.cols(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
      c(i, j) += s;
    }
}

void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.cols()) throw ShapeError("gemm_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
  prepare(c, a.rows(), b.rows(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) += s;
    }
}

}  // namespace reference

}  // namespace dvnee::kernels
