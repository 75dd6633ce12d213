#include "cowdet/layers.hpp"

#include <Eigen/Core>
#include <cmath>

namespace cowdet::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

namespace {

template <typename T>
void im2col(const FeatureMap<T>& x, int k, int stride, int ho, int wo, std::vector<T>& col) {
  const int pad = k / 2, H = x.height(), W = x.width();
  col.assign(static_cast<std::size_t>(x.channels()) * k * k * ho * wo, T(0));
  T* out = col.data();
  for (int c = 0; c < x.channels(); ++c) {
    const T* src = x.plane(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) {
            out += wo;
            continue;
          }
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            *out++ = (ix >= 0 && ix < W) ? src[iy * W + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int k, int stride, int ho, int wo, FeatureMap<T>& dx) {
  const int pad = k / 2, H = dx.height(), W = dx.width();
  for (int c = 0; c < dx.channels(); ++c) {
    T* dst = dx.plane(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) {
            col += wo;
            continue;
          }
          for (int ox = 0; ox < wo; ++ox, ++col) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < W) dst[iy * W + ix] += *col;
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& x, const Array<T>& w, const Array<T>* bias, int stride,
                     ConvCache<T>* cache, const std::string& name) {
  if (w.shape.size() != 4 || w.shape[2] != w.shape[3] || static_cast<int>(w.shape[1]) != x.channels()) {
    throw Error("layer " + name + ": expected " + std::to_string(w.shape.size() == 4 ? w.shape[1] : 0) +
                " input channels, got " + std::to_string(x.channels()));
  }
  const int cout = static_cast<int>(w.shape[0]), k = static_cast<int>(w.shape[2]);
  const int pad = k / 2;
  const int ho = (x.height() + 2 * pad - k) / stride + 1;
  const int wo = (x.width() + 2 * pad - k) / stride + 1;
  const int K = x.channels() * k * k, P = ho * wo;

  ConvCache<T> local;
  ConvCache<T>& cc = cache ? *cache : local;
  cc.in_c = x.channels();
  cc.in_h = x.height();
  cc.in_w = x.width();
  if (k == 1 && stride == 1) {
    cc.col = x.values();
  } else {
    im2col(x, k, stride, ho, wo, cc.col);
  }

  FeatureMap<T> y(cout, ho, wo);
  Eigen::Map<const RowMat<T>> W(w.data.data(), cout, K);
  Eigen::Map<const RowMat<T>> C(cc.col.data(), K, P);
  Eigen::Map<RowMat<T>> Y(y.data(), cout, P);
  Y.noalias() = W * C;
  if (bias) {
    for (int o = 0; o < cout; ++o) Y.row(o).array() += bias->data[o];
  }
  return y;
}

template <typename T>
FeatureMap<T> conv2d_backward(const FeatureMap<T>& dy, const Array<T>& w, int stride, const ConvCache<T>& cc,
                              Array<T>& dw, Array<T>* dbias) {
  const int cout = static_cast<int>(w.shape[0]), k = static_cast<int>(w.shape[2]);
  const int K = cc.in_c * k * k, P = dy.plane_size();
  Eigen::Map<const RowMat<T>> W(w.data.data(), cout, K);
  Eigen::Map<const RowMat<T>> C(cc.col.data(), K, P);
  Eigen::Map<const RowMat<T>> DY(dy.data(), cout, P);
  Eigen::Map<RowMat<T>> DW(dw.data.data(), cout, K);
  DW.noalias() += DY * C.transpose();
  if (dbias) {
    for (int o = 0; o < cout; ++o) dbias->data[o] += DY.row(o).sum();
  }
  FeatureMap<T> dx(cc.in_c, cc.in_h, cc.in_w);
  if (k == 1 && stride == 1) {
    Eigen::Map<RowMat<T>> DX(dx.data(), cc.in_c, P);
    DX.noalias() = W.transpose() * DY;
  } else {
    RowMat<T> dcol = W.transpose() * DY;
    col2im(dcol.data(), k, stride, dy.height(), dy.width(), dx);
  }
  return dx;
}

template <typename T>
FeatureMap<T> channel_norm(const FeatureMap<T>& x, const Array<T>& scale, const Array<T>& shift,
                           NormCache<T>* cache) {
  const int C = x.channels(), N = x.plane_size();
  if (static_cast<int>(scale.size()) != C || static_cast<int>(shift.size()) != C)
    throw Error("norm parameter size does not match channel count");
  FeatureMap<T> y(C, x.height(), x.width());
  NormCache<T> local;
  NormCache<T>& nc = cache ? *cache : local;
  nc.xhat = FeatureMap<T>(C, x.height(), x.width());
  nc.inv_std.assign(C, T(0));
  for (int c = 0; c < C; ++c) {
    auto in = x.plane(c);
    T mean = 0;
    for (T v : in) mean += v;
    mean /= N;
    T var = 0;
    for (T v : in) var += (v - mean) * (v - mean);
    var /= N;
    const T inv = T(1) / std::sqrt(var + T(kNormEps));
    nc.inv_std[c] = inv;
    auto xh = nc.xhat.plane(c);
    auto out = y.plane(c);
    for (int i = 0; i < N; ++i) {
      xh[i] = (in[i] - mean) * inv;
      out[i] = scale.data[c] * xh[i] + shift.data[c];
    }
  }
  return y;
}

template <typename T>
FeatureMap<T> channel_norm_backward(const FeatureMap<T>& dy, const Array<T>& scale, const NormCache<T>& nc,
                                    Array<T>& dscale, Array<T>& dshift) {
  const int C = dy.channels(), N = dy.plane_size();
  FeatureMap<T> dx(C, dy.height(), dy.width());
  for (int c = 0; c < C; ++c) {
    auto g = dy.plane(c);
    auto xh = nc.xhat.plane(c);
    T sum_g = 0, sum_gx = 0;
    for (int i = 0; i < N; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    dscale.data[c] += sum_gx;
    dshift.data[c] += sum_g;
    const T s = scale.data[c];
    const T coef = s * nc.inv_std[c] / N;
    auto out = dx.plane(c);
    for (int i = 0; i < N; ++i) out[i] = coef * (N * g[i] - sum_g - xh[i] * sum_gx);
  }
  return dx;
}

template <typename T>
FeatureMap<T> silu(const FeatureMap<T>& x) {
  FeatureMap<T> y = x;
  for (T& v : y.values()) v = v * sigmoid(v);
  return y;
}

template <typename T>
FeatureMap<T> silu_backward(const FeatureMap<T>& dy, const FeatureMap<T>& pre) {
  FeatureMap<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const T z = pre.data()[i];
    const T s = sigmoid(z);
    dx.data()[i] *= s * (T(1) + z * (T(1) - s));
  }
  return dx;
}

template <typename T>
FeatureMap<T> upsample2x(const FeatureMap<T>& x) {
  FeatureMap<T> y(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c)
    for (int i = 0; i < y.height(); ++i)
      for (int j = 0; j < y.width(); ++j) y(c, i, j) = x(c, i / 2, j / 2);
  return y;
}

template <typename T>
FeatureMap<T> upsample2x_backward(const FeatureMap<T>& dy) {
  FeatureMap<T> dx(dy.channels(), dy.height() / 2, dy.width() / 2);
  for (int c = 0; c < dy.channels(); ++c)
    for (int i = 0; i < dy.height(); ++i)
      for (int j = 0; j < dy.width(); ++j) dx(c, i / 2, j / 2) += dy(c, i, j);
  return dx;
}

template <typename T>
FeatureMap<T> concat(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw Error("concat: spatial size mismatch");
  FeatureMap<T> y(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), y.values().begin());
  std::copy(b.values().begin(), b.values().end(), y.values().begin() + a.size());
  return y;
}

template <typename T>
void split_channels(const FeatureMap<T>& d, int a_channels, FeatureMap<T>& da, FeatureMap<T>& db) {
  da = FeatureMap<T>(a_channels, d.height(), d.width());
  db = FeatureMap<T>(d.channels() - a_channels, d.height(), d.width());
  std::copy(d.values().begin(), d.values().begin() + da.size(), da.values().begin());
  std::copy(d.values().begin() + da.size(), d.values().end(), db.values().begin());
}

template <typename T>
void add_inplace(FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (!a.same_shape(b)) throw Error("add: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

#define COWDET_INSTANTIATE(T)                                                                                 \
  template T sigmoid<T>(T);                                                                                   \
  template T softplus<T>(T);                                                                                  \
  template FeatureMap<T> conv2d<T>(const FeatureMap<T>&, const Array<T>&, const Array<T>*, int,              \
                                   ConvCache<T>*, const std::string&);                                       \
  template FeatureMap<T> conv2d_backward<T>(const FeatureMap<T>&, const Array<T>&, int, const ConvCache<T>&, \
                                            Array<T>&, Array<T>*);                                           \
  template FeatureMap<T> channel_norm<T>(const FeatureMap<T>&, const Array<T>&, const Array<T>&,             \
                                         NormCache<T>*);                                                      \
  template FeatureMap<T> channel_norm_backward<T>(const FeatureMap<T>&, const Array<T>&, const NormCache<T>&, \
                                                  Array<T>&, Array<T>&);                                      \
  template FeatureMap<T> silu<T>(const FeatureMap<T>&);                                                       \
  template FeatureMap<T> silu_backward<T>(const FeatureMap<T>&, const FeatureMap<T>&);                        \
  template FeatureMap<T> upsample2x<T>(const FeatureMap<T>&);                                                 \
  template FeatureMap<T> upsample2x_backward<T>(const FeatureMap<T>&);                                        \
  template FeatureMap<T> concat<T>(const FeatureMap<T>&, const FeatureMap<T>&);                               \
  template void split_channels<T>(const FeatureMap<T>&, int, FeatureMap<T>&, FeatureMap<T>&);                 \
  template void add_inplace<T>(FeatureMap<T>&, const FeatureMap<T>&);

COWDET_INSTANTIATE(float)
COWDET_INSTANTIATE(double)

}  // namespace cowdet::nn
