#pragma once

// Small dense-network toolkit: forward/backward passes written by hand so
// gradients can be checked against finite differences, plus Adam and plain
// gradient-descent parameter updates.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace vinn::nn {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1 };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
  Activation act = Activation::Linear;

  bool operator==(const DenseLayer&) const = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t param_count() const;

  std::vector<double> forward(std::span<const double> x) const;

  bool operator==(const Mlp&) const = default;
};

// ReLU hidden layers, linear output, He-uniform init.
Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             std::mt19937_64& rng);

// Per-layer activations captured during a forward pass; inputs[l] is what
// layer l consumed, pre[l] its pre-activation output.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

std::vector<double> forward_cached(const Mlp& net, std::span<const double> x, ForwardCache& cache);

// Gradient accumulator with the same shape as the network.
struct Grads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  static Grads zeros_like(const Mlp& net);
  void add_scaled(const Grads& other, double s);
  double max_abs() const;
};

// Backpropagates dL/dy through the cached pass, accumulating parameter
// gradients into grads and returning dL/dx.
std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> dldy, Grads& grads);

// Flat parameter views, used by finite-difference checks and EMA updates.
std::vector<double*> param_ptrs(Mlp& net);
std::vector<const double*> param_ptrs(const Mlp& net);
std::vector<double> flatten_grads(const Grads& grads);

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1 };

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const Mlp& net);
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Applies one update step in place. Throws std::runtime_error on any
// non-finite gradient instead of propagating NaNs into the parameters.
void apply_update(Mlp& net, AdamState& state, const Grads& grads, const OptimizerConfig& cfg);

// target <- tau * target + (1 - tau) * online, elementwise.
void ema_update(Mlp& target, const Mlp& online, double tau);

}  // namespace vinn::nn
