#ifndef DCASR_TENSOR_HPP
#define DCASR_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "dcasr/errors.hpp"

namespace dcasr {

/// Dense row-major array of rank 0 (scalar), 1 (vector) or 2 (matrix).
template <typename S>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<S> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {}

  static Tensor scalar(S v) { return Tensor({}, {v}); }
  static Tensor zeros(std::vector<std::size_t> sh) {
    std::size_t n = 1;
    for (const std::size_t d : sh) n *= d;
    return Tensor(std::move(sh), std::vector<S>(n, S(0)));
  }
  static Tensor vec(std::vector<S> d) {
    const std::size_t n = d.size();
    return Tensor({n}, std::move(d));
  }
  static Tensor mat(std::size_t r, std::size_t c, std::vector<S> d) {
    if (d.size() != r * c) throw ContractError("tensor: matrix data size mismatch");
    return Tensor({r, c}, std::move(d));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }
  S& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  const S& at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << '}';
    return os.str();
  }
};

}  // namespace dcasr

#endif  // DCASR_TENSOR_HPP
