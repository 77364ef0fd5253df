#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nnlm/geometry.hpp"

namespace nnlm {

/// N x C x spatial activation layout, spatial x-fastest.
struct Shape {
  int n = 1;
  int c = 1;
  Dims dims;

  [[nodiscard]] std::size_t plane() const { return dims.count(); }
  [[nodiscard]] std::size_t sample() const { return static_cast<std::size_t>(c) * plane(); }
  [[nodiscard]] std::size_t count() const { return static_cast<std::size_t>(n) * sample(); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <class T>
class BasicTensor {
public:
  BasicTensor() = default;
  explicit BasicTensor(const Shape& s, T fill = T{}) : shape_(s), data_(s.count(), fill) {}

  [[nodiscard]] const Shape& shape() const { return shape_; }
  void reshape(const Shape& s) {
    shape_ = s;
    data_.resize(s.count());
  }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] T* ptr() { return data_.data(); }
  [[nodiscard]] const T* ptr() const { return data_.data(); }

  [[nodiscard]] T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  [[nodiscard]] const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  [[nodiscard]] T* channel(int n, int c) { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }
  [[nodiscard]] const T* channel(int n, int c) const {
    return sample(n) + static_cast<std::size_t>(c) * shape_.plane();
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

using Stride = std::array<int, 3>;

/// Output extent of a 3x3x3 convolution with padding 1.
inline Dims conv_output_dims(const Dims& in, const Stride& s) {
  return Dims{(in.x - 1) / s[0] + 1, (in.y - 1) / s[1] + 1, (in.z - 1) / s[2] + 1};
}

/// Output extent of a transposed convolution whose kernel equals its stride.
inline Dims upsample_dims(const Dims& in, const Stride& s) { return Dims{in.x * s[0], in.y * s[1], in.z * s[2]}; }

}  // namespace nnlm
