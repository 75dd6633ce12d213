#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cowdet/error.hpp"

namespace cowdet {

/// Rank-3 array laid out channel-major (C, H, W).
template <typename T>
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, T fill = T(0))
      : c_(channels), h_(height), w_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {
    if (channels < 1 || height < 1 || width < 1) {
      throw Error("feature map dimensions must be positive");
    }
  }

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  int plane_size() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const FeatureMap& o) const {
    return c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  T& operator()(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }
  const T& operator()(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }

  std::span<T> plane(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * h_ * w_,
            static_cast<std::size_t>(h_ * w_)};
  }
  std::span<const T> plane(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * h_ * w_,
            static_cast<std::size_t>(h_ * w_)};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

/// Dense n-d parameter array, row-major.
template <typename T>
struct Array {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Array() = default;
  explicit Array(std::vector<std::size_t> dims, T fill = T(0)) : shape(std::move(dims)) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    data.assign(n, fill);
  }
  std::size_t size() const { return data.size(); }
  bool operator==(const Array&) const = default;
};

/// Named parameter arrays. Ordered by name so iteration (and the
/// checkpoint layout) is deterministic.
template <typename T>
using WeightSet = std::map<std::string, Array<T>>;

template <typename To, typename From>
WeightSet<To> cast_weights(const WeightSet<From>& in) {
  WeightSet<To> out;
  for (const auto& [name, arr] : in) {
    Array<To> a;
    a.shape = arr.shape;
    a.data.assign(arr.data.begin(), arr.data.end());
    out.emplace(name, std::move(a));
  }
  return out;
}

template <typename To, typename From>
FeatureMap<To> cast_map(const FeatureMap<From>& in) {
  FeatureMap<To> out(in.channels(), in.height(), in.width());
  for (std::size_t i = 0; i < in.size(); ++i) out.data()[i] = static_cast<To>(in.data()[i]);
  return out;
}

/// Zero-filled arrays with the same names and shapes.
template <typename T>
WeightSet<T> zeros_like(const WeightSet<T>& w) {
  WeightSet<T> out;
  for (const auto& [name, arr] : w) out.emplace(name, Array<T>(arr.shape));
  return out;
}

}  // namespace cowdet
