#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsrnn/errors.hpp"

namespace gsrnn {

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != count(shape_))
      throw structural_error("tensor value count " + std::to_string(data_.size()) +
                             " does not match shape volume " + std::to_string(count(shape_)));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 view helpers; a rank-1 tensor is treated as a single row.
  std::size_t rows() const { return shape_.size() >= 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Penalties and thresholding act on `matrix` tensors only.
enum class ParamKind { matrix, bias };

inline const char* to_string(ParamKind k) { return k == ParamKind::matrix ? "matrix" : "bias"; }

// Named tensors in lexicographic name order.
class ParamSet {
 public:
  struct Entry {
    Tensor tensor;
    ParamKind kind = ParamKind::matrix;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  using Map = std::map<std::string, Entry>;

  void add(const std::string& name, Tensor t, ParamKind kind) {
    if (!map_.emplace(name, Entry{std::move(t), kind}).second)
      throw structural_error("duplicate parameter name '" + name + "'");
  }

  bool contains(const std::string& name) const { return map_.count(name) != 0; }

  const Tensor& operator[](const std::string& name) const { return entry(name).tensor; }
  Tensor& operator[](const std::string& name) { return entry(name).tensor; }

  ParamKind kind(const std::string& name) const { return entry(name).kind; }

  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : map_) n += e.tensor.size();
    return n;
  }

  auto begin() { return map_.begin(); }
  auto end() { return map_.end(); }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

  // Same names, kinds and shapes, all values zero.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [name, e] : map_) out.add(name, Tensor(e.tensor.shape()), e.kind);
    return out;
  }

  bool same_structure(const ParamSet& other) const {
    if (map_.size() != other.map_.size()) return false;
    auto a = map_.begin();
    auto b = other.map_.begin();
    for (; a != map_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.kind != b->second.kind ||
          a->second.tensor.shape() != b->second.tensor.shape())
        return false;
    }
    return true;
  }

  void require_same_structure(const ParamSet& other, const char* what) const {
    if (same_structure(other)) return;
    for (const auto& [name, e] : map_) {
      if (!other.contains(name))
        throw structural_error(std::string(what) + ": missing tensor '" + name + "'");
      if (other[name].shape() != e.tensor.shape())
        throw structural_error(std::string(what) + ": shape mismatch for '" + name + "' " +
                               shape_string(e.tensor.shape()) + " vs " +
                               shape_string(other[name].shape()));
    }
    throw structural_error(std::string(what) + ": parameter sets differ in names or kinds");
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  Entry& entry(const std::string& name) {
    auto it = map_.find(name);
    if (it == map_.end()) throw structural_error("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw structural_error("unknown parameter '" + name + "'");
    return it->second;
  }

  Map map_;
};

}  // namespace gsrnn
