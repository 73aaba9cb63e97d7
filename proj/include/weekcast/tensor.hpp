#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "weekcast/errors.hpp"

namespace weekcast {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

inline std::size_t shape_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense N-dimensional array, row-major, value semantics. Every operation
// returns a fresh tensor; produced tensors are never mutated in place by
// the free functions below, so sharing across threads for reading is safe.
template <typename Scalar = double>
class TensorT {
public:
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TensorT() = default;

  explicit TensorT(Shape shape) : shape_(std::move(shape)), data_(checked_count(shape_), Scalar{0}) {}

  TensorT(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_count(shape_) != data_.size())
      throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                       std::to_string(data_.size()) + " elements");
  }

  TensorT(Shape shape, std::initializer_list<Scalar> data)
      : TensorT(std::move(shape), std::vector<Scalar>(data)) {}

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return {data_.data(), data_.size()}; }
  std::span<const Scalar> values() const { return {data_.data(), data_.size()}; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

  template <typename... Ix>
  Scalar& operator()(Ix... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Ix>
  const Scalar& operator()(Ix... idx) const {
    return data_[offset(idx...)];
  }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  // Rank-2 views onto Eigen for the heavy arithmetic.
  Eigen::Map<RowMatrix> matrix() {
    require_rank2();
    return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
  }
  Eigen::Map<const RowMatrix> matrix() const {
    require_rank2();
    return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
  }

private:
  static std::size_t checked_count(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor: rank-0 shape");
    for (std::size_t d : s)
      if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(s));
    return shape_count(s);
  }

  void require_rank2() const {
    if (rank() != 2) throw ShapeError("tensor: expected rank-2, got " + shape_str(shape_));
  }

  template <typename... Ix>
  std::size_t offset(Ix... idx) const {
    const std::size_t ix[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < sizeof...(Ix); ++a) off = off * shape_[a] + ix[a];
    return off;
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensor = TensorT<double>;

template <typename Scalar>
TensorT<Scalar> zeros_like(const TensorT<Scalar>& a) {
  return TensorT<Scalar>(a.shape());
}

template <typename Scalar>
void check_same_shape(const TensorT<Scalar>& a, const TensorT<Scalar>& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <typename Scalar>
TensorT<Scalar> matmul(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  TensorT<Scalar> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  return out;
}

template <typename Scalar>
TensorT<Scalar> add(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  check_same_shape(a, b, "add");
  TensorT<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename Scalar>
TensorT<Scalar> sub(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  check_same_shape(a, b, "sub");
  TensorT<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename Scalar>
TensorT<Scalar> hadamard(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  check_same_shape(a, b, "hadamard");
  TensorT<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename Scalar>
TensorT<Scalar> scale(const TensorT<Scalar>& a, Scalar c) {
  TensorT<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

// Row-major relabeling; element order is preserved.
template <typename Scalar>
TensorT<Scalar> reshape(const TensorT<Scalar>& a, Shape new_shape) {
  if (shape_count(new_shape) != a.size())
    throw ShapeError("reshape: element count mismatch, " + shape_str(a.shape()) + " has " +
                     std::to_string(a.size()) + " elements, target " + shape_str(new_shape) +
                     " needs " + std::to_string(shape_count(new_shape)));
  return TensorT<Scalar>(std::move(new_shape),
                         std::vector<Scalar>(a.values().begin(), a.values().end()));
}

template <typename Scalar>
TensorT<Scalar> transpose2d(const TensorT<Scalar>& a) {
  if (a.rank() != 2) throw ShapeError("transpose2d: expected rank-2, got " + shape_str(a.shape()));
  TensorT<Scalar> out({a.dim(1), a.dim(0)});
  out.matrix().noalias() = a.matrix().transpose();
  return out;
}

// Rows [from, to) of a rank >= 1 tensor, along axis 0.
template <typename Scalar>
TensorT<Scalar> slice_rows(const TensorT<Scalar>& a, std::size_t from, std::size_t to) {
  if (a.rank() == 0 || from >= to || to > a.dim(0))
    throw ShapeError("slice_rows: invalid range [" + std::to_string(from) + "," +
                     std::to_string(to) + ") for " + shape_str(a.shape()));
  Shape s = a.shape();
  s[0] = to - from;
  const std::size_t row = a.size() / a.dim(0);
  TensorT<Scalar> out(std::move(s));
  std::copy(a.data() + from * row, a.data() + to * row, out.data());
  return out;
}

template <typename Scalar>
TensorT<Scalar> concat(std::size_t axis, const std::vector<TensorT<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != first.size())
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    for (std::size_t a = 0; a < s.size(); ++a)
      if (a != axis && s[a] != first[a])
        throw ShapeError("concat: shape mismatch off axis, " + shape_str(first) + " vs " +
                         shape_str(s));
    out_shape[axis] += s[axis];
  }
  TensorT<Scalar> out(out_shape);
  // outer = elements before the axis, inner = elements after it
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
  std::size_t dst_axis_off = 0;
  for (const auto& part : parts) {
    const std::size_t part_axis = part.dim(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      const Scalar* src = part.data() + o * part_axis * inner;
      Scalar* dst = out.data() + (o * out_shape[axis] + dst_axis_off) * inner;
      std::copy(src, src + part_axis * inner, dst);
    }
    dst_axis_off += part_axis;
  }
  return out;
}

// NaN/Inf is an error condition, never silently propagated.
template <typename Scalar>
void ensure_finite(const TensorT<Scalar>& a, const std::string& context) {
  if (!a.all_finite()) throw NumericError(context + ": non-finite value detected");
}

inline void ensure_finite(double v, const std::string& context) {
  if (!std::isfinite(v)) throw NumericError(context + ": non-finite value detected");
}

}  // namespace weekcast
