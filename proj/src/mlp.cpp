#include "vinn/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace vinn::nn {

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& l : layers) {
    if (cur.size() != l.in) throw std::invalid_argument("Mlp::forward: dimension mismatch");
    std::vector<double> next(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* wrow = l.w.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * cur[i];
      next[o] = (l.act == Activation::Relu && acc < 0.0) ? 0.0 : acc;
    }
    cur = std::move(next);
  }
  return cur;
}

Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             std::mt19937_64& rng) {
  Mlp net;
  std::vector<std::size_t> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);

  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.act = (l + 2 < dims.size()) ? Activation::Relu : Activation::Linear;
    const double bound = std::sqrt(6.0 / double(layer.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.w.resize(layer.out * layer.in);
    for (auto& v : layer.w) v = dist(rng);
    layer.b.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::vector<double> forward_cached(const Mlp& net, std::span<const double> x, ForwardCache& cache) {
  cache.inputs.clear();
  cache.pre.clear();
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& l : net.layers) {
    if (cur.size() != l.in) throw std::invalid_argument("forward_cached: dimension mismatch");
    cache.inputs.push_back(cur);
    std::vector<double> pre(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* wrow = l.w.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * cur[i];
      pre[o] = acc;
    }
    cache.pre.push_back(pre);
    cur.resize(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      cur[o] = (l.act == Activation::Relu && pre[o] < 0.0) ? 0.0 : pre[o];
    }
  }
  return cur;
}

Grads Grads::zeros_like(const Mlp& net) {
  Grads g;
  g.w.reserve(net.layers.size());
  g.b.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    g.w.emplace_back(l.w.size(), 0.0);
    g.b.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void Grads::add_scaled(const Grads& other, double s) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += s * other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += s * other.b[l][i];
  }
}

double Grads::max_abs() const {
  double m = 0.0;
  for (const auto& layer : w) {
    for (double v : layer) m = std::max(m, std::abs(v));
  }
  for (const auto& layer : b) {
    for (double v : layer) m = std::max(m, std::abs(v));
  }
  return m;
}

std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> dldy, Grads& grads) {
  std::vector<double> delta(dldy.begin(), dldy.end());
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const DenseLayer& l = net.layers[li];
    if (delta.size() != l.out) throw std::invalid_argument("backward: dimension mismatch");
    const auto& pre = cache.pre[li];
    const auto& x = cache.inputs[li];

    if (l.act == Activation::Relu) {
      for (std::size_t o = 0; o < l.out; ++o) {
        if (pre[o] < 0.0) delta[o] = 0.0;
      }
    }
    auto& gw = grads.w[li];
    auto& gb = grads.b[li];
    for (std::size_t o = 0; o < l.out; ++o) {
      gb[o] += delta[o];
      double* gwrow = gw.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) gwrow[i] += delta[o] * x[i];
    }
    std::vector<double> dx(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* wrow = l.w.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) dx[i] += wrow[i] * delta[o];
    }
    delta = std::move(dx);
  }
  return delta;
}

std::vector<double*> param_ptrs(Mlp& net) {
  std::vector<double*> ptrs;
  ptrs.reserve(net.param_count());
  for (auto& l : net.layers) {
    for (auto& v : l.w) ptrs.push_back(&v);
    for (auto& v : l.b) ptrs.push_back(&v);
  }
  return ptrs;
}

std::vector<const double*> param_ptrs(const Mlp& net) {
  std::vector<const double*> ptrs;
  ptrs.reserve(net.param_count());
  for (const auto& l : net.layers) {
    for (const auto& v : l.w) ptrs.push_back(&v);
    for (const auto& v : l.b) ptrs.push_back(&v);
  }
  return ptrs;
}

std::vector<double> flatten_grads(const Grads& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grads.w.size(); ++l) {
    flat.insert(flat.end(), grads.w[l].begin(), grads.w[l].end());
    flat.insert(flat.end(), grads.b[l].begin(), grads.b[l].end());
  }
  return flat;
}

AdamState AdamState::zeros_like(const Mlp& net) {
  AdamState s;
  s.m.assign(net.param_count(), 0.0);
  s.v.assign(net.param_count(), 0.0);
  return s;
}

void apply_update(Mlp& net, AdamState& state, const Grads& grads, const OptimizerConfig& cfg) {
  const std::vector<double> flat = flatten_grads(grads);
  for (double g : flat) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("apply_update: non-finite gradient (training diverged)");
    }
  }
  std::vector<double*> params = param_ptrs(net);
  if (params.size() != flat.size()) throw std::invalid_argument("apply_update: shape mismatch");

  if (cfg.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= cfg.lr * flat[i];
    return;
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * flat[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * flat[i] * flat[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    *params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void ema_update(Mlp& target, const Mlp& online, double tau) {
  std::vector<double*> tp = param_ptrs(target);
  std::vector<const double*> op = param_ptrs(online);
  if (tp.size() != op.size()) throw std::invalid_argument("ema_update: shape mismatch");
  for (std::size_t i = 0; i < tp.size(); ++i) {
    *tp[i] = tau * *tp[i] + (1.0 - tau) * *op[i];
  }
}

}  // namespace vinn::nn
