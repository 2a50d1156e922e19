#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arvrm/rng.hpp"

namespace arvrm {

/// Dense row-major tensor of doubles. Most of the library works with rank-1
/// and rank-2 tensors; shape is kept general for heads that reshape node
/// features.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  static Tensor zeros(std::vector<std::size_t> dims);
  static Tensor full(std::vector<std::size_t> dims, double value);
  static Tensor randn(std::vector<std::size_t> dims, Rng& rng, double stddev = 1.0);
  static Tensor row_vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  /// Rows/cols of a rank-2 tensor (rank-1 is treated as a single row).
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void fill(double value);

  std::string shape_str() const;
};

/// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

std::string shape_to_string(const std::vector<std::size_t>& dims);

/// Mean of squared elementwise differences; shapes must match.
double mse_value(const Tensor& pred, const Tensor& target);

}  // namespace arvrm
