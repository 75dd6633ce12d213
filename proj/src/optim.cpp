#include "cowdet/optim.hpp"

#include <cmath>

#include "cowdet/error.hpp"

namespace cowdet {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw Error("unknown optimizer \"" + std::string(s) + "\" (expected sgd or adam)");
}

bool decays(const std::string& name) {
  auto ends = [&](std::string_view suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  return ends(".w") || name == "cbam.W1" || name == "cbam.W2" || name == "cbam.kernel";
}

template <typename T>
OptimizerState<T> make_optimizer_state(const OptimizerSettings& s, const WeightSet<T>& params) {
  OptimizerState<T> st;
  st.settings = s;
  st.first = zeros_like(params);
  if (s.kind == OptimizerKind::adam) st.second = zeros_like(params);
  return st;
}

namespace {

template <typename T>
const Array<T>& checked_grad(const WeightSet<T>& grads, const std::string& name, const Array<T>& param) {
  auto it = grads.find(name);
  if (it == grads.end() || it->second.size() != param.size()) throw Error("gradient shape mismatch at " + name);
  for (T g : it->second.data)
    if (!std::isfinite(g)) throw Error("non-finite gradient at " + name);
  return it->second;
}

}  // namespace

template <typename T>
void sgd_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& st, double lr) {
  const double m = st.settings.momentum;
  for (auto& [name, w] : params) {
    const Array<T>& g = checked_grad(grads, name, w);
    Array<T>& v = st.first.at(name);
    const double wd = decays(name) ? st.settings.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g.data[i]) + wd * static_cast<double>(w.data[i]);
      const double vi = m * static_cast<double>(v.data[i]) + gi;
      v.data[i] = static_cast<T>(vi);
      w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) - lr * vi);
    }
  }
  ++st.step;
}

template <typename T>
void adam_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& st, double lr) {
  const auto& s = st.settings;
  ++st.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(st.step));
  for (auto& [name, w] : params) {
    const Array<T>& g = checked_grad(grads, name, w);
    Array<T>& m1 = st.first.at(name);
    Array<T>& m2 = st.second.at(name);
    const double wd = decays(name) ? s.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g.data[i]) + wd * static_cast<double>(w.data[i]);
      const double a = s.beta1 * static_cast<double>(m1.data[i]) + (1.0 - s.beta1) * gi;
      const double b = s.beta2 * static_cast<double>(m2.data[i]) + (1.0 - s.beta2) * gi * gi;
      m1.data[i] = static_cast<T>(a);
      m2.data[i] = static_cast<T>(b);
      const double update = (a / c1) / (std::sqrt(b / c2) + s.eps);
      w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) - lr * update);
    }
  }
}

template <typename T>
void optimizer_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& st, double lr) {
  if (st.settings.kind == OptimizerKind::sgd) {
    sgd_step(params, grads, st, lr);
  } else {
    adam_step(params, grads, st, lr);
  }
}

double lr_at(std::int64_t iter, std::int64_t total_iters, double lr0, double lrf) {
  if (total_iters < 1) throw Error("total_iters must be at least 1");
  if (iter < 0 || iter > total_iters) throw Error("iteration out of schedule range");
  return lr0 + (lrf - lr0) * static_cast<double>(iter) / static_cast<double>(total_iters);
}

#define COWDET_OPTIM_INSTANTIATE(T)                                                                        \
  template OptimizerState<T> make_optimizer_state<T>(const OptimizerSettings&, const WeightSet<T>&);       \
  template void sgd_step<T>(WeightSet<T>&, const WeightSet<T>&, OptimizerState<T>&, double);              \
  template void adam_step<T>(WeightSet<T>&, const WeightSet<T>&, OptimizerState<T>&, double);             \
  template void optimizer_step<T>(WeightSet<T>&, const WeightSet<T>&, OptimizerState<T>&, double);

COWDET_OPTIM_INSTANTIATE(float)
COWDET_OPTIM_INSTANTIATE(double)

}  // namespace cowdet
