#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cowdet/tensor.hpp"

namespace cowdet {

enum class OptimizerKind { sgd, adam };
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.937;
  double weight_decay = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Kernels decay (conv weights, CBAM MLP and spatial kernel); norm
/// scale/shift, head shifts and the CBAM bias do not.
bool decays(const std::string& name);

template <typename T>
struct OptimizerState {
  OptimizerSettings settings;
  WeightSet<T> first;   // momentum for sgd, first moment for adam
  WeightSet<T> second;  // adam only
  std::int64_t step = 0;
};

template <typename T>
OptimizerState<T> make_optimizer_state(const OptimizerSettings& s, const WeightSet<T>& params);

/// g' = g + wd*w (masked by decays()); v = m*v + g'; w -= lr*v.
template <typename T>
void sgd_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& state, double lr);

/// Bias-corrected Adam with the same folded weight decay as sgd_step.
template <typename T>
void adam_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& state, double lr);

template <typename T>
void optimizer_step(WeightSet<T>& params, const WeightSet<T>& grads, OptimizerState<T>& state, double lr);

/// Linear decay from lr0 at iteration 0 to lrf at `total_iters`.
double lr_at(std::int64_t iter, std::int64_t total_iters, double lr0 = 0.01, double lrf = 0.001);

}  // namespace cowdet
