#pragma once

#include <vector>

#include "cowdet/tensor.hpp"

namespace cowdet::cbam {

inline constexpr int kSpatialKernel = 7;
inline constexpr int kDefaultReduction = 16;

/// Hidden width of the shared MLP: max(floor(C / r), 4).
int hidden_width(int channels, int reduction);

/// Shared two-layer MLP without biases. w1 is (hidden, C), w2 is (C, hidden).
template <typename T>
struct ChannelParams {
  Array<T> w1;
  Array<T> w2;
  int channels() const { return static_cast<int>(w2.shape.at(0)); }
  int hidden() const { return static_cast<int>(w1.shape.at(0)); }
};

/// 7x7 convolution over [channel-avg; channel-max] with one bias.
template <typename T>
struct SpatialParams {
  Array<T> kernel;  // (1, 2, 7, 7)
  T bias = T(0);
};

template <typename T>
ChannelParams<T> zero_channel_params(int channels, int reduction);
template <typename T>
SpatialParams<T> zero_spatial_params();

/// Mc = sigmoid(MLP(avgpool F) + MLP(maxpool F)), one weight per channel.
template <typename T>
std::vector<T> channel_attention(const FeatureMap<T>& f, const ChannelParams<T>& p);

/// Ms = sigmoid(conv7x7([mean_c F'; max_c F']) + bias), shape (1, H, W).
template <typename T>
FeatureMap<T> spatial_attention(const FeatureMap<T>& fp, const SpatialParams<T>& p);

/// Intermediate values needed by backward().
template <typename T>
struct Cache {
  FeatureMap<T> input;
  std::vector<T> avg, max;
  std::vector<int> max_index;              // argmax over H*W per channel
  std::vector<T> hidden_avg, hidden_max;   // pre-ReLU
  std::vector<T> mc;
  FeatureMap<T> refined;                   // F' = Mc * F
  FeatureMap<T> pooled;                    // (2, H, W)
  std::vector<int> channel_argmax;         // per position
  FeatureMap<T> ms;                        // (1, H, W)
};

/// F'' = Ms(F') * F' with F' = Mc(F) * F.
template <typename T>
FeatureMap<T> forward(const FeatureMap<T>& f, const ChannelParams<T>& cp, const SpatialParams<T>& sp,
                      Cache<T>* cache = nullptr);

template <typename T>
struct Grads {
  Array<T> w1, w2, kernel;
  T bias = T(0);
};

/// Accumulates parameter gradients into `g` (shapes must already match)
/// and returns dL/dF.
template <typename T>
FeatureMap<T> backward(const FeatureMap<T>& d_out, const ChannelParams<T>& cp, const SpatialParams<T>& sp,
                       const Cache<T>& cache, Grads<T>& g);

template <typename T>
Grads<T> zero_grads(const ChannelParams<T>& cp);

/// Max relative error between backward() and central differences of
/// L = sum(F''^2) / 2, over every input and parameter entry. Relative error
/// is |a - f| / max(|a|, |f|, 1e-8).
double grad_check(const FeatureMap<double>& f, const ChannelParams<double>& cp, const SpatialParams<double>& sp,
                  double eps = 1e-5);

}  // namespace cowdet::cbam
