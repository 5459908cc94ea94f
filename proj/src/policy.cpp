#include "vinn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "binio.hpp"

namespace vinn::policy {

namespace {

constexpr char kIdxMagic[4] = {'V', 'I', 'D', 'X'};
constexpr std::uint16_t kIdxVersion = 1;

struct Cand {
  double d2;
  std::uint32_t row;
};

// Total order on candidates: smaller squared distance wins, ties go to the
// lower row index. This makes every query answer unique.
inline bool better(const Cand& a, const Cand& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.row < b.row);
}

inline double row_dist2(const NeighborIndex& index, std::span<const float> query,
                        std::size_t row) {
  const float* p = index.embeddings.data() + row * index.dim;
  double acc = 0.0;
  for (std::uint32_t j = 0; j < index.dim; ++j) {
    const double diff = double(p[j]) - double(query[j]);
    acc += diff * diff;
  }
  return acc;
}

// Bounded worst-first heap of the best k candidates seen so far.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(const Cand& c) {
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
      return;
    }
    if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  std::vector<Cand>& items() { return heap_; }

 private:
  std::size_t k_;
  std::vector<Cand> heap_;
};

void check_query(const NeighborIndex& index, std::span<const float> query, std::size_t k) {
  if (index.size() == 0) throw std::invalid_argument("nearest: empty index");
  if (k < 1 || k > index.size()) {
    throw std::invalid_argument("nearest: k=" + std::to_string(k) + " out of range [1, " +
                                std::to_string(index.size()) + "]");
  }
  if (query.size() != index.dim) {
    throw std::invalid_argument("nearest: query dim " + std::to_string(query.size()) +
                                ", expected " + std::to_string(index.dim));
  }
  for (float v : query) {
    if (!std::isfinite(v)) throw std::invalid_argument("nearest: non-finite query");
  }
}

NeighborSet finish(const NeighborIndex& index, std::vector<Cand> cands, std::size_t k) {
  std::sort(cands.begin(), cands.end(), better);
  cands.resize(k);
  NeighborSet out;
  out.entries.reserve(k);
  for (const Cand& c : cands) {
    out.entries.push_back({std::sqrt(c.d2), index.actions[c.row], c.row});
  }
  return out;
}

}  // namespace

NeighborIndex build_index(const core::EmbeddingMatrix& emb) {
  if (emb.n() == 0) throw std::invalid_argument("build_index: empty embedding matrix");
  emb.validate();
  for (std::size_t i = 0; i < emb.actions.size(); ++i) {
    for (float v : emb.actions[i]) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("build_index: non-finite action in row " + std::to_string(i));
      }
    }
  }
  NeighborIndex index;
  index.dim = emb.dim;
  index.embeddings = emb.data;
  index.actions = emb.actions;
  index.demo_ids = emb.demo_ids;
  index.timesteps = emb.timesteps;
  return index;
}

NeighborSet nearest_serial(const NeighborIndex& index, std::span<const float> query,
                           std::size_t k) {
  check_query(index, query, k);
  std::vector<Cand> cands(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    cands[i] = {row_dist2(index, query, i), static_cast<std::uint32_t>(i)};
  }
  return finish(index, std::move(cands), k);
}

NeighborSet nearest(const NeighborIndex& index, std::span<const float> query, std::size_t k) {
  check_query(index, query, k);

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif

  std::vector<std::vector<Cand>> locals(max_threads);
  const auto n = static_cast<std::int64_t>(index.size());
#pragma omp parallel num_threads(max_threads)
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    TopK top(k);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      top.offer({row_dist2(index, query, std::size_t(i)), static_cast<std::uint32_t>(i)});
    }
    locals[tid] = std::move(top.items());
  }

  std::vector<Cand> merged;
  for (auto& l : locals) merged.insert(merged.end(), l.begin(), l.end());
  return finish(index, std::move(merged), k);
}

LwrOutput lwr_action(const NeighborSet& nbrs) {
  if (nbrs.entries.empty()) throw std::invalid_argument("lwr_action: no neighbors");

  // Summation runs in (distance, row) order no matter how the entries were
  // presented, so the result is permutation-invariant down to the last bit.
  std::vector<const Neighbor*> order;
  order.reserve(nbrs.entries.size());
  for (const auto& e : nbrs.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const Neighbor* a, const Neighbor* b) {
    return a->distance < b->distance || (a->distance == b->distance && a->row < b->row);
  });

  // Softmin with the minimum distance subtracted: the nearest neighbor gets
  // weight exactly 1 before normalization, which keeps k = 1 a bit-exact
  // copy and makes the weights invariant under uniform distance shifts.
  const double dmin = order.front()->distance;
  double wsum = 0.0;
  std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
  for (const Neighbor* nb : order) {
    const double w = std::exp(-(nb->distance - dmin));
    wsum += w;
    for (int c = 0; c < 4; ++c) acc[c] += w * double(nb->action[c]);
  }

  LwrOutput out;
  for (int c = 0; c < 3; ++c) out.translation[c] = acc[c] / wsum;
  out.gripper = acc[3] / wsum;
  return out;
}

void PolicyConfig::validate() const {
  if (k < 1) throw std::invalid_argument("PolicyConfig: k must be >= 1");
  if (!(gripper_thresholds[0] < gripper_thresholds[1] &&
        gripper_thresholds[1] < gripper_thresholds[2])) {
    throw std::invalid_argument("PolicyConfig: gripper thresholds must be strictly ascending");
  }
  for (double c : action_scale) {
    if (!(c > 0.0 && c <= 1.0)) {
      throw std::invalid_argument("PolicyConfig: action_scale components must be in (0, 1]");
    }
  }
}

core::GripperState map_gripper(double gripper_float, const PolicyConfig& cfg) {
  const auto& t = cfg.gripper_thresholds;
  if (gripper_float < t[0]) return core::GripperState::Open;
  if (gripper_float < t[1]) return core::GripperState::AlmostOpen;
  if (gripper_float < t[2]) return core::GripperState::AlmostClosed;
  return core::GripperState::Closed;
}

PredictDetail predict_detail(const NeighborIndex& index, const encoder::Encoder& enc,
                             std::span<const float> obs, const PolicyConfig& cfg) {
  cfg.validate();
  const std::vector<float> e = enc.encode(obs);
  const NeighborSet nbrs = nearest(index, e, cfg.k);
  const LwrOutput lwr = lwr_action(nbrs);

  PredictDetail detail;
  detail.raw_translation = lwr.translation;
  detail.gripper_float = lwr.gripper;
  detail.nearest_distance = nbrs.entries.front().distance;

  std::array<double, 3> t = lwr.translation;
  if (cfg.renormalize_translation) {
    const double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    if (norm < 1e-12) {
      throw std::runtime_error("predict: zero-norm translation cannot be renormalized");
    }
    for (auto& v : t) v /= norm;
  }
  for (int c = 0; c < 3; ++c) detail.action.translation[c] = static_cast<float>(t[c]);
  detail.action.gripper = map_gripper(lwr.gripper, cfg);
  return detail;
}

core::Action predict(const NeighborIndex& index, const encoder::Encoder& enc,
                     std::span<const float> obs, const PolicyConfig& cfg) {
  return predict_detail(index, enc, obs, cfg).action;
}

core::Action scale_action(const core::Action& a, const std::array<double, 3>& c) {
  for (double v : c) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw std::invalid_argument("scale_action: components must be in (0, 1]");
    }
  }
  core::Action out = a;
  for (int i = 0; i < 3; ++i) {
    out.translation[i] = static_cast<float>(double(a.translation[i]) * c[i]);
  }
  return out;
}

RandomPolicy::RandomPolicy(std::uint64_t seed) : rng_(seed) {}

core::Action RandomPolicy::next() {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double x = 0.0, y = 0.0, z = 0.0, norm = 0.0;
  do {
    x = uni(rng_);
    y = uni(rng_);
    z = uni(rng_);
    norm = std::sqrt(x * x + y * y + z * z);
  } while (norm < 1e-12);

  core::Action a;
  a.translation = {static_cast<float>(x / norm), static_cast<float>(y / norm),
                   static_cast<float>(z / norm)};
  std::uniform_int_distribution<int> g(0, 3);
  a.gripper = core::gripper_from_code(g(rng_));
  return a;
}

OpenLoopPolicy OpenLoopPolicy::fit(const core::DemoSet& train) {
  train.validate();
  std::size_t max_len = 0;
  for (const auto& d : train.demos) max_len = std::max(max_len, d.size());

  OpenLoopPolicy p;
  p.translations_.assign(max_len, {0.0, 0.0, 0.0});
  p.grippers_.assign(max_len, 0.0);
  std::vector<std::size_t> counts(max_len, 0);
  for (const auto& demo : train.demos) {
    for (std::size_t t = 0; t < demo.size(); ++t) {
      for (int c = 0; c < 3; ++c) p.translations_[t][c] += demo[t].action.translation[c];
      p.grippers_[t] += core::gripper_code(demo[t].action.gripper);
      counts[t] += 1;
    }
  }
  for (std::size_t t = 0; t < max_len; ++t) {
    for (int c = 0; c < 3; ++c) p.translations_[t][c] /= double(counts[t]);
    p.grippers_[t] /= double(counts[t]);
  }
  return p;
}

std::array<double, 3> OpenLoopPolicy::mean_translation(std::size_t t) const {
  return translations_[std::min(t, max_timestep())];
}

double OpenLoopPolicy::mean_gripper(std::size_t t) const {
  return grippers_[std::min(t, max_timestep())];
}

core::Action OpenLoopPolicy::act(std::size_t t, const PolicyConfig& cfg) const {
  cfg.validate();
  std::array<double, 3> tr = mean_translation(t);
  if (cfg.renormalize_translation) {
    const double norm = std::sqrt(tr[0] * tr[0] + tr[1] * tr[1] + tr[2] * tr[2]);
    if (norm < 1e-12) {
      throw std::runtime_error("open_loop: zero-norm mean translation cannot be renormalized");
    }
    for (auto& v : tr) v /= norm;
  }
  core::Action a;
  for (int c = 0; c < 3; ++c) a.translation[c] = static_cast<float>(tr[c]);
  a.gripper = map_gripper(mean_gripper(t), cfg);
  return a;
}

double bc_loss_and_grads(const BcHead& head, const core::EmbeddingMatrix& emb,
                         nn::Grads* translation_grads, nn::Grads* gripper_grads) {
  const std::size_t n = emb.n();
  if (n == 0) throw std::invalid_argument("bc_loss_and_grads: empty embedding matrix");

  double loss = 0.0;
  nn::ForwardCache tcache, gcache;
  std::vector<double> x(emb.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = emb.row(i);
    for (std::uint32_t j = 0; j < emb.dim; ++j) x[j] = row[j];

    // Translation branch: squared error, averaged per scalar component.
    const std::vector<double> pred =
        translation_grads ? nn::forward_cached(head.translation, x, tcache)
                          : head.translation.forward(x);
    std::array<double, 3> diff{};
    for (int c = 0; c < 3; ++c) {
      diff[c] = pred[c] - double(emb.actions[i][c]);
      loss += diff[c] * diff[c] / (3.0 * double(n));
    }
    if (translation_grads) {
      std::array<double, 3> dpred{};
      for (int c = 0; c < 3; ++c) dpred[c] = 2.0 * diff[c] / (3.0 * double(n));
      nn::backward(head.translation, tcache, dpred, *translation_grads);
    }

    // Gripper branch: cross-entropy over the four classes.
    const std::vector<double> logits = gripper_grads
                                           ? nn::forward_cached(head.gripper, x, gcache)
                                           : head.gripper.forward(x);
    const int label = static_cast<int>(std::lround(emb.actions[i][3]));
    const double maxl = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - maxl);
    loss += (std::log(z) - (logits[label] - maxl)) / double(n);
    if (gripper_grads) {
      std::vector<double> dlogits(4);
      for (int c = 0; c < 4; ++c) {
        const double p = std::exp(logits[c] - maxl) / z;
        dlogits[c] = (p - (c == label ? 1.0 : 0.0)) / double(n);
      }
      nn::backward(head.gripper, gcache, dlogits, *gripper_grads);
    }
  }
  return loss;
}

BcHead bc_rep_fit(const core::EmbeddingMatrix& emb, const BcTrainOptions& opts,
                  std::vector<double>* loss_curve) {
  emb.validate();
  if (emb.n() == 0) throw std::invalid_argument("bc_rep_fit: empty embedding matrix");

  std::mt19937_64 rng(opts.seed);
  BcHead head;
  head.translation = nn::make_mlp(emb.dim, opts.hidden, 3, rng);
  head.gripper = nn::make_mlp(emb.dim, {}, 4, rng);

  nn::AdamState opt_t = nn::AdamState::zeros_like(head.translation);
  nn::AdamState opt_g = nn::AdamState::zeros_like(head.gripper);
  nn::OptimizerConfig opt;
  opt.kind = nn::OptimizerKind::Adam;
  opt.lr = opts.lr;

  if (loss_curve) loss_curve->clear();
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    nn::Grads gt = nn::Grads::zeros_like(head.translation);
    nn::Grads gg = nn::Grads::zeros_like(head.gripper);
    const double loss = bc_loss_and_grads(head, emb, &gt, &gg);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("bc_rep_fit: non-finite loss (training diverged)");
    }
    if (loss_curve) loss_curve->push_back(loss);
    nn::apply_update(head.translation, opt_t, gt, opt);
    nn::apply_update(head.gripper, opt_g, gg, opt);
  }
  return head;
}

BcPrediction bc_rep_predict(const BcHead& head, std::span<const float> embedding) {
  if (embedding.size() != head.embed_dim()) {
    throw std::invalid_argument("bc_rep_predict: embedding dim mismatch");
  }
  std::vector<double> x(embedding.begin(), embedding.end());
  const std::vector<double> t = head.translation.forward(x);
  const std::vector<double> logits = head.gripper.forward(x);

  BcPrediction out;
  for (int c = 0; c < 3; ++c) out.translation[c] = t[c];
  int best = 0;
  for (int c = 0; c < 4; ++c) {
    out.logits[c] = logits[c];
    if (logits[c] > logits[best]) best = c;
  }
  out.gripper = core::gripper_from_code(best);
  return out;
}

NeighborIndex load_index(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path));
  detail::check_magic(r, kIdxMagic, "VIDX", kIdxVersion);

  NeighborIndex index;
  const std::uint32_t n = r.u32("row count");
  const std::uint64_t dim_at = r.pos();
  index.dim = r.u32("dim");
  if (index.dim == 0) {
    throw core::FormatError(core::FormatError::Kind::DimensionMismatch, dim_at, "dim is zero");
  }
  index.embeddings.resize(std::size_t(n) * index.dim);
  for (auto& v : index.embeddings) v = r.f32("embedding");
  index.actions.resize(n);
  for (auto& a : index.actions) {
    for (int c = 0; c < 4; ++c) a[c] = r.f32("action");
  }
  index.demo_ids.resize(n);
  index.timesteps.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    index.demo_ids[i] = r.u32("demo id");
    index.timesteps[i] = r.u32("timestep");
  }
  if (r.remaining() != 0) {
    throw core::FormatError(core::FormatError::Kind::TrailingBytes, r.pos(),
                            std::to_string(r.remaining()) + " trailing bytes");
  }
  for (std::size_t i = 0; i < index.embeddings.size(); ++i) {
    if (!std::isfinite(index.embeddings[i])) {
      throw core::FormatError(core::FormatError::Kind::BadValue, 0,
                              "non-finite embedding in row " + std::to_string(i / index.dim));
    }
  }
  return index;
}

void save_index(const NeighborIndex& index, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  detail::append_bytes(out, kIdxMagic, 4);
  detail::put_u16(out, kIdxVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(index.size()));
  detail::put_u32(out, index.dim);
  for (float v : index.embeddings) detail::put_f32(out, v);
  for (const auto& a : index.actions) {
    for (float v : a) detail::put_f32(out, v);
  }
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::put_u32(out, index.demo_ids[i]);
    detail::put_u32(out, index.timesteps[i]);
  }
  detail::write_file(path, out);
}

}  // namespace vinn::policy
