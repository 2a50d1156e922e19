#include "arvrm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "arvrm/errors.hpp"

namespace arvrm {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t total = 1;
  for (std::size_t d : dims) total *= d;
  return total;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims)
    : shape(std::move(dims)), data(product(shape), 0.0) {}

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
  return Tensor(std::move(dims));
}

Tensor Tensor::full(std::vector<std::size_t> dims, double value) {
  Tensor t(std::move(dims));
  t.fill(value);
  return t;
}

Tensor Tensor::randn(std::vector<std::size_t> dims, Rng& rng, double stddev) {
  Tensor t(std::move(dims));
  for (double& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
  Tensor t;
  t.shape = {1, values.size()};
  t.data = std::move(values);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return 1;
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.empty()) return data.size();
  if (shape.size() == 1) return shape[0];
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
  return c;
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  std::fill(data.begin(), data.end(), value);
}

std::string Tensor::shape_str() const {
  return shape_to_string(shape);
}

std::string shape_to_string(const std::vector<std::size_t>& dims) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << 'x';
    out << dims[i];
  }
  out << ']';
  return out.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

double mse_value(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  if (pred.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace arvrm
