#include "dvnee/tensor.hpp"

#include <algorithm>

namespace dvnee {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2::require_finite(const std::string& what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError("non-finite value in '" + what + "' at (" + std::to_string(i / std::max<std::size_t>(cols_, 1)) +
                         "," + std::to_string(i % std::max<std::size_t>(cols_, 1)) + ")");
    }
  }
}

Tensor2& Tensor2::operator+=(const Tensor2& o) {
  if (!same_shape(o)) throw ShapeError("add: " + shape_string(*this) + " vs " + shape_string(o));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor2& Tensor2::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

std::string shape_string(const Tensor2& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void glorot_uniform(Tensor2& t, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.flat()) v = dist(rng);
}

void normal_fill(Tensor2& t, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.flat()) v = dist(rng);
}

void softmax_rows(Tensor2& t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

}  // namespace dvnee
