#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bondrisk::nn {

/// Dense row-major array. Values are held in double; parameters are kept
/// float32-representable by the optimizer so checkpoints round-trip exactly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v);
  /// Rounds every element to the nearest float32.
  void round_to_float();

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, std::vector<std::size_t> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// Activations of one sample over time: steps x width, row-major.
struct Sequence {
  std::size_t steps = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Sequence() = default;
  Sequence(std::size_t t, std::size_t w, double fill = 0.0) : steps(t), width(w), data(t * w, fill) {}
  double* at(std::size_t t) { return data.data() + t * width; }
  const double* at(std::size_t t) const { return data.data() + t * width; }
};

}  // namespace bondrisk::nn
