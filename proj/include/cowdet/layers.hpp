#pragma once

#include <string>
#include <vector>

#include "cowdet/tensor.hpp"

namespace cowdet::nn {

template <typename T>
T sigmoid(T x);
template <typename T>
T softplus(T x);

/// Saved state for convolution backward.
template <typename T>
struct ConvCache {
  std::vector<T> col;  // im2col patches (Cin*k*k, Hout*Wout)
  int in_c = 0, in_h = 0, in_w = 0;
};

/// Square kernel, zero padding k/2. Weight shape (Cout, Cin, k, k).
/// `bias` may be null.
template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& x, const Array<T>& w, const Array<T>* bias, int stride,
                     ConvCache<T>* cache, const std::string& name);

/// Accumulates into dw/dbias; returns dx.
template <typename T>
FeatureMap<T> conv2d_backward(const FeatureMap<T>& dy, const Array<T>& w, int stride, const ConvCache<T>& cache,
                              Array<T>& dw, Array<T>* dbias);

/// Per-sample, per-channel standardization over H*W with learned scale and
/// shift.
template <typename T>
struct NormCache {
  FeatureMap<T> xhat;
  std::vector<T> inv_std;
};

inline constexpr double kNormEps = 1e-5;

template <typename T>
FeatureMap<T> channel_norm(const FeatureMap<T>& x, const Array<T>& scale, const Array<T>& shift,
                           NormCache<T>* cache);
template <typename T>
FeatureMap<T> channel_norm_backward(const FeatureMap<T>& dy, const Array<T>& scale, const NormCache<T>& cache,
                                    Array<T>& dscale, Array<T>& dshift);

/// x * sigmoid(x). Backward takes the pre-activation input.
template <typename T>
FeatureMap<T> silu(const FeatureMap<T>& x);
template <typename T>
FeatureMap<T> silu_backward(const FeatureMap<T>& dy, const FeatureMap<T>& pre);

template <typename T>
FeatureMap<T> upsample2x(const FeatureMap<T>& x);
template <typename T>
FeatureMap<T> upsample2x_backward(const FeatureMap<T>& dy);

template <typename T>
FeatureMap<T> concat(const FeatureMap<T>& a, const FeatureMap<T>& b);
/// Splits a gradient of concat(a, b) back into its parts.
template <typename T>
void split_channels(const FeatureMap<T>& d, int a_channels, FeatureMap<T>& da, FeatureMap<T>& db);

template <typename T>
void add_inplace(FeatureMap<T>& a, const FeatureMap<T>& b);

}  // namespace cowdet::nn
