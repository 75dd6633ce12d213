#include "cowdet/cbam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cowdet/layers.hpp"

namespace cowdet::cbam {

using nn::sigmoid;

int hidden_width(int channels, int reduction) {
  if (channels < 1 || reduction < 1) throw Error("cbam: channels and reduction must be positive");
  return std::max(channels / reduction, 4);
}

template <typename T>
ChannelParams<T> zero_channel_params(int channels, int reduction) {
  const int h = hidden_width(channels, reduction);
  ChannelParams<T> p;
  p.w1 = Array<T>({static_cast<std::size_t>(h), static_cast<std::size_t>(channels)});
  p.w2 = Array<T>({static_cast<std::size_t>(channels), static_cast<std::size_t>(h)});
  return p;
}

template <typename T>
SpatialParams<T> zero_spatial_params() {
  SpatialParams<T> p;
  p.kernel = Array<T>({1, 2, kSpatialKernel, kSpatialKernel});
  return p;
}

namespace {

template <typename T>
void check_shapes(const FeatureMap<T>& f, const ChannelParams<T>& cp) {
  if (cp.w1.shape.size() != 2 || cp.w2.shape.size() != 2 || cp.w1.shape[0] != cp.w2.shape[1] ||
      cp.w1.shape[1] != cp.w2.shape[0]) {
    throw Error("cbam: inconsistent MLP weight shapes");
  }
  if (cp.channels() != f.channels()) {
    throw Error("cbam: expected C=" + std::to_string(cp.channels()) + ", got C=" + std::to_string(f.channels()));
  }
}

template <typename T>
void check_spatial(const SpatialParams<T>& sp) {
  const std::vector<std::size_t> want{1, 2, kSpatialKernel, kSpatialKernel};
  if (sp.kernel.shape != want) throw Error("cbam: spatial kernel must be (1, 2, 7, 7)");
}

// y = W x for row-major W (rows, cols).
template <typename T>
std::vector<T> matvec(const Array<T>& w, const std::vector<T>& x) {
  const std::size_t rows = w.shape[0], cols = w.shape[1];
  std::vector<T> y(rows, T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += w.data[r * cols + c] * x[c];
    y[r] = acc;
  }
  return y;
}

template <typename T>
std::vector<T> matvec_t(const Array<T>& w, const std::vector<T>& y) {
  const std::size_t rows = w.shape[0], cols = w.shape[1];
  std::vector<T> x(cols, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) x[c] += w.data[r * cols + c] * y[r];
  return x;
}

template <typename T>
void outer_acc(Array<T>& g, const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t cols = g.shape[1];
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) g.data[r * cols + c] += a[r] * b[c];
}

template <typename T>
std::vector<T> relu(std::vector<T> v) {
  for (T& x : v) x = x > 0 ? x : T(0);
  return v;
}

template <typename T>
T kernel_at(const SpatialParams<T>& sp, int plane, int ky, int kx) {
  return sp.kernel.data[(plane * kSpatialKernel + ky) * kSpatialKernel + kx];
}

template <typename T>
void channel_forward(const FeatureMap<T>& f, const ChannelParams<T>& cp, Cache<T>& c) {
  check_shapes(f, cp);
  const int C = f.channels(), N = f.plane_size();
  c.avg.assign(C, T(0));
  c.max.assign(C, T(0));
  c.max_index.assign(C, 0);
  for (int ch = 0; ch < C; ++ch) {
    auto p = f.plane(ch);
    T sum = 0;
    int arg = 0;
    for (int i = 0; i < N; ++i) {
      sum += p[i];
      if (p[i] > p[arg]) arg = i;
    }
    c.avg[ch] = sum / N;
    c.max[ch] = p[arg];
    c.max_index[ch] = arg;
  }
  c.hidden_avg = matvec(cp.w1, c.avg);
  c.hidden_max = matvec(cp.w1, c.max);
  const std::vector<T> oa = matvec(cp.w2, relu(c.hidden_avg));
  const std::vector<T> om = matvec(cp.w2, relu(c.hidden_max));
  c.mc.assign(C, T(0));
  for (int ch = 0; ch < C; ++ch) c.mc[ch] = sigmoid(oa[ch] + om[ch]);
}

template <typename T>
void spatial_forward(const FeatureMap<T>& fp, const SpatialParams<T>& sp, Cache<T>& c) {
  check_spatial(sp);
  const int C = fp.channels(), H = fp.height(), W = fp.width();
  c.pooled = FeatureMap<T>(2, H, W);
  c.channel_argmax.assign(static_cast<std::size_t>(H) * W, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      T sum = 0;
      int arg = 0;
      for (int ch = 0; ch < C; ++ch) {
        sum += fp(ch, y, x);
        if (fp(ch, y, x) > fp(arg, y, x)) arg = ch;
      }
      c.pooled(0, y, x) = sum / C;
      c.pooled(1, y, x) = fp(arg, y, x);
      c.channel_argmax[y * W + x] = arg;
    }
  }
  constexpr int r = kSpatialKernel / 2;
  c.ms = FeatureMap<T>(1, H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      T acc = sp.bias;
      for (int p = 0; p < 2; ++p)
        for (int ky = 0; ky < kSpatialKernel; ++ky) {
          const int iy = y + ky - r;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kSpatialKernel; ++kx) {
            const int ix = x + kx - r;
            if (ix < 0 || ix >= W) continue;
            acc += kernel_at(sp, p, ky, kx) * c.pooled(p, iy, ix);
          }
        }
      c.ms(0, y, x) = sigmoid(acc);
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> channel_attention(const FeatureMap<T>& f, const ChannelParams<T>& p) {
  Cache<T> c;
  channel_forward(f, p, c);
  return c.mc;
}

template <typename T>
FeatureMap<T> spatial_attention(const FeatureMap<T>& fp, const SpatialParams<T>& p) {
  Cache<T> c;
  spatial_forward(fp, p, c);
  return c.ms;
}

template <typename T>
FeatureMap<T> forward(const FeatureMap<T>& f, const ChannelParams<T>& cp, const SpatialParams<T>& sp,
                      Cache<T>* cache) {
  Cache<T> local;
  Cache<T>& c = cache ? *cache : local;
  channel_forward(f, cp, c);
  c.refined = f;
  for (int ch = 0; ch < f.channels(); ++ch)
    for (T& v : c.refined.plane(ch)) v *= c.mc[ch];
  spatial_forward(c.refined, sp, c);
  FeatureMap<T> out = c.refined;
  for (int ch = 0; ch < f.channels(); ++ch) {
    auto o = out.plane(ch);
    auto m = c.ms.plane(0);
    for (int i = 0; i < f.plane_size(); ++i) o[i] *= m[i];
  }
  if (cache) c.input = f;
  return out;
}

template <typename T>
Grads<T> zero_grads(const ChannelParams<T>& cp) {
  Grads<T> g;
  g.w1 = Array<T>(cp.w1.shape);
  g.w2 = Array<T>(cp.w2.shape);
  g.kernel = Array<T>({1, 2, kSpatialKernel, kSpatialKernel});
  return g;
}

template <typename T>
FeatureMap<T> backward(const FeatureMap<T>& d_out, const ChannelParams<T>& cp, const SpatialParams<T>& sp,
                       const Cache<T>& c, Grads<T>& g) {
  const FeatureMap<T>& f = c.input;
  const int C = f.channels(), H = f.height(), W = f.width(), N = H * W;
  if (!d_out.same_shape(f)) throw Error("cbam backward: gradient shape mismatch");

  // F'' = Ms * F'
  FeatureMap<T> d_refined(C, H, W);
  FeatureMap<T> d_ms(1, H, W);
  for (int ch = 0; ch < C; ++ch) {
    auto dout = d_out.plane(ch);
    auto fr = c.refined.plane(ch);
    auto dr = d_refined.plane(ch);
    auto m = c.ms.plane(0);
    auto dm = d_ms.plane(0);
    for (int i = 0; i < N; ++i) {
      dm[i] += dout[i] * fr[i];
      dr[i] = dout[i] * m[i];
    }
  }

  // Ms = sigmoid(s)
  FeatureMap<T> ds(1, H, W);
  for (int i = 0; i < N; ++i) {
    const T m = c.ms.data()[i];
    ds.data()[i] = d_ms.data()[i] * m * (T(1) - m);
  }

  // s = conv7x7(pooled) + bias
  constexpr int r = kSpatialKernel / 2;
  FeatureMap<T> d_pooled(2, H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const T gs = ds(0, y, x);
      g.bias += gs;
      for (int p = 0; p < 2; ++p)
        for (int ky = 0; ky < kSpatialKernel; ++ky) {
          const int iy = y + ky - r;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kSpatialKernel; ++kx) {
            const int ix = x + kx - r;
            if (ix < 0 || ix >= W) continue;
            g.kernel.data[(p * kSpatialKernel + ky) * kSpatialKernel + kx] += gs * c.pooled(p, iy, ix);
            d_pooled(p, iy, ix) += gs * kernel_at(sp, p, ky, kx);
          }
        }
    }
  }

  // Channel-wise mean and max of F'.
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const T da = d_pooled(0, y, x) / C;
      for (int ch = 0; ch < C; ++ch) d_refined(ch, y, x) += da;
      d_refined(c.channel_argmax[y * W + x], y, x) += d_pooled(1, y, x);
    }
  }

  // F' = Mc * F
  FeatureMap<T> df(C, H, W);
  std::vector<T> dz(C, T(0));
  for (int ch = 0; ch < C; ++ch) {
    auto dr = d_refined.plane(ch);
    auto in = f.plane(ch);
    auto out = df.plane(ch);
    T dmc = 0;
    for (int i = 0; i < N; ++i) {
      dmc += dr[i] * in[i];
      out[i] = dr[i] * c.mc[ch];
    }
    dz[ch] = dmc * c.mc[ch] * (T(1) - c.mc[ch]);
  }

  // Shared MLP on both pooled descriptors.
  auto mlp_back = [&](const std::vector<T>& pre, const std::vector<T>& input) {
    outer_acc(g.w2, dz, relu(pre));
    std::vector<T> dh = matvec_t(cp.w2, dz);
    for (std::size_t k = 0; k < dh.size(); ++k)
      if (!(pre[k] > 0)) dh[k] = 0;
    outer_acc(g.w1, dh, input);
    return matvec_t(cp.w1, dh);
  };
  const std::vector<T> d_avg = mlp_back(c.hidden_avg, c.avg);
  const std::vector<T> d_max = mlp_back(c.hidden_max, c.max);
  for (int ch = 0; ch < C; ++ch) {
    const T da = d_avg[ch] / N;
    for (T& v : df.plane(ch)) v += da;
    df.plane(ch)[c.max_index[ch]] += d_max[ch];
  }
  return df;
}

namespace {

double half_sum_sq(const FeatureMap<double>& f) {
  double s = 0;
  for (double v : f.values()) s += v * v;
  return s / 2;
}

}  // namespace

double grad_check(const FeatureMap<double>& f, const ChannelParams<double>& cp, const SpatialParams<double>& sp,
                  double eps) {
  Cache<double> cache;
  const FeatureMap<double> out = forward(f, cp, sp, &cache);
  Grads<double> g = zero_grads(cp);
  const FeatureMap<double> df = backward(out, cp, sp, cache, g);

  double worst = 0;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  // Perturbs one scalar in a copy of the inputs and evaluates the loss.
  auto loss_with = [&](auto&& mutate) {
    FeatureMap<double> f2 = f;
    ChannelParams<double> cp2 = cp;
    SpatialParams<double> sp2 = sp;
    mutate(f2, cp2, sp2);
    return half_sum_sq(forward(f2, cp2, sp2));
  };
  auto central = [&](auto&& ref) {
    const double plus = loss_with([&](auto& a, auto& b, auto& c) { ref(a, b, c) += eps; });
    const double minus = loss_with([&](auto& a, auto& b, auto& c) { ref(a, b, c) -= eps; });
    return (plus - minus) / (2 * eps);
  };

  for (std::size_t i = 0; i < f.size(); ++i)
    compare(df.data()[i], central([i](auto& a, auto&, auto&) -> double& { return a.data()[i]; }));
  for (std::size_t i = 0; i < cp.w1.size(); ++i)
    compare(g.w1.data[i], central([i](auto&, auto& b, auto&) -> double& { return b.w1.data[i]; }));
  for (std::size_t i = 0; i < cp.w2.size(); ++i)
    compare(g.w2.data[i], central([i](auto&, auto& b, auto&) -> double& { return b.w2.data[i]; }));
  for (std::size_t i = 0; i < sp.kernel.size(); ++i)
    compare(g.kernel.data[i], central([i](auto&, auto&, auto& c) -> double& { return c.kernel.data[i]; }));
  compare(g.bias, central([](auto&, auto&, auto& c) -> double& { return c.bias; }));
  return worst;
}

#define COWDET_CBAM_INSTANTIATE(T)                                                                          \
  template ChannelParams<T> zero_channel_params<T>(int, int);                                              \
  template SpatialParams<T> zero_spatial_params<T>();                                                      \
  template std::vector<T> channel_attention<T>(const FeatureMap<T>&, const ChannelParams<T>&);              \
  template FeatureMap<T> spatial_attention<T>(const FeatureMap<T>&, const SpatialParams<T>&);               \
  template FeatureMap<T> forward<T>(const FeatureMap<T>&, const ChannelParams<T>&, const SpatialParams<T>&, \
                                    Cache<T>*);                                                             \
  template Grads<T> zero_grads<T>(const ChannelParams<T>&);                                                 \
  template FeatureMap<T> backward<T>(const FeatureMap<T>&, const ChannelParams<T>&, const SpatialParams<T>&, \
                                     const Cache<T>&, Grads<T>&);

COWDET_CBAM_INSTANTIATE(float)
COWDET_CBAM_INSTANTIATE(double)

}  // namespace cowdet::cbam
