#include "vinn/encoder.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "binio.hpp"

namespace vinn::encoder {

namespace {

constexpr char kEncMagic[4] = {'V', 'E', 'N', 'C'};
constexpr std::uint16_t kEncVersion = 1;

// Norms below this inside a cosine are treated as degenerate rather than
// divided through.
constexpr double kZeroNorm = 1e-150;

class IdentityEncoder final : public Encoder {
 public:
  explicit IdentityEncoder(std::uint32_t dim) : dim_(dim) {}

  EncoderKind kind() const override { return EncoderKind::Identity; }
  std::uint32_t obs_dim() const override { return dim_; }
  std::uint32_t embed_dim() const override { return dim_; }

 protected:
  void encode_into(std::span<const double> obs, std::span<double> out) const override {
    std::copy(obs.begin(), obs.end(), out.begin());
  }

 private:
  std::uint32_t dim_;
};

// Single affine map e = W x + b; covers random projection (b = 0) and
// whitening (b = -W mu).
class AffineEncoder final : public Encoder {
 public:
  AffineEncoder(EncoderKind kind, std::uint32_t obs_dim, std::uint32_t embed_dim,
                std::vector<double> w, std::vector<double> b)
      : kind_(kind), obs_dim_(obs_dim), embed_dim_(embed_dim), w_(std::move(w)), b_(std::move(b)) {}

  EncoderKind kind() const override { return kind_; }
  std::uint32_t obs_dim() const override { return obs_dim_; }
  std::uint32_t embed_dim() const override { return embed_dim_; }

  const std::vector<double>& weights() const { return w_; }
  const std::vector<double>& bias() const { return b_; }

 protected:
  void encode_into(std::span<const double> obs, std::span<double> out) const override {
    for (std::uint32_t o = 0; o < embed_dim_; ++o) {
      double acc = b_[o];
      const double* row = w_.data() + std::size_t(o) * obs_dim_;
      for (std::uint32_t i = 0; i < obs_dim_; ++i) acc += row[i] * obs[i];
      out[o] = acc;
    }
  }

 private:
  EncoderKind kind_;
  std::uint32_t obs_dim_;
  std::uint32_t embed_dim_;
  std::vector<double> w_;
  std::vector<double> b_;
};

class MlpEncoder final : public Encoder {
 public:
  explicit MlpEncoder(nn::Mlp net) : net_(std::move(net)) {}

  EncoderKind kind() const override { return EncoderKind::ByolMlp; }
  std::uint32_t obs_dim() const override { return static_cast<std::uint32_t>(net_.in_dim()); }
  std::uint32_t embed_dim() const override { return static_cast<std::uint32_t>(net_.out_dim()); }

  const nn::Mlp& net() const { return net_; }

 protected:
  void encode_into(std::span<const double> obs, std::span<double> out) const override {
    std::vector<double> y = net_.forward(obs);
    std::copy(y.begin(), y.end(), out.begin());
  }

 private:
  nn::Mlp net_;
};

struct WhiteningMap {
  std::vector<double> w;  // components x obs_dim
  std::vector<double> b;
  std::uint32_t components = 0;
  std::uint32_t usable_rank = 0;
};

// PCA whitening of the observation covariance: rows of w are
// u_j^T / sqrt(lambda_j) for the top eigenpairs, b = -w mu.
WhiteningMap fit_whitening(const core::DemoSet& data, std::uint32_t components) {
  const std::uint32_t n = data.obs_dim;
  const std::size_t rows = data.frame_count();

  Eigen::MatrixXd x(rows, n);
  std::size_t r = 0;
  for (const auto& demo : data.demos) {
    for (const auto& f : demo) {
      for (std::uint32_t j = 0; j < n; ++j) x(static_cast<Eigen::Index>(r), j) = f.observation[j];
      ++r;
    }
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const double denom = rows > 1 ? double(rows - 1) : 1.0;
  const Eigen::MatrixXd cov = (x.transpose() * x) / denom;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd evals = eig.eigenvalues();   // ascending
  const Eigen::MatrixXd evecs = eig.eigenvectors();

  const double lmax = std::max(evals(n - 1), 0.0);
  const double floor = std::max(1e-12, 1e-9 * lmax);

  WhiteningMap map;
  map.components = components;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (evals(j) > floor) ++map.usable_rank;
  }

  const std::uint32_t take = std::min(components, map.usable_rank);
  map.w.assign(std::size_t(components) * n, 0.0);
  map.b.assign(components, 0.0);
  Eigen::VectorXd mu_t = mu.transpose();
  for (std::uint32_t o = 0; o < take; ++o) {
    const Eigen::Index j = n - 1 - o;  // largest eigenvalues first
    const double scale = 1.0 / std::sqrt(evals(j));
    double bias = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      const double wij = evecs(i, j) * scale;
      map.w[std::size_t(o) * n + i] = wij;
      bias -= wij * mu_t(i);
    }
    map.b[o] = bias;
  }
  return map;
}

std::vector<double> to_double(std::span<const float> v) {
  return std::vector<double>(v.begin(), v.end());
}

// Per-branch cosine-distance loss and its gradient wrt the prediction.
double cosine_branch(std::span<const double> pred, std::span<const double> tgt, int view,
                     std::vector<double>* dpred) {
  double pp = 0.0, tt = 0.0, pt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pp += pred[i] * pred[i];
    tt += tgt[i] * tgt[i];
    pt += pred[i] * tgt[i];
  }
  const double pn = std::sqrt(pp);
  const double tn = std::sqrt(tt);
  if (pn < kZeroNorm) {
    throw std::runtime_error("byol_loss: zero-norm predictor output in view " +
                             std::to_string(view) + " branch");
  }
  if (tn < kZeroNorm) {
    throw std::runtime_error("byol_loss: zero-norm target output in view " +
                             std::to_string(view) + " branch");
  }
  const double cosv = pt / (pn * tn);
  if (dpred) {
    dpred->assign(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      (*dpred)[i] = -2.0 * (tgt[i] / (pn * tn) - pred[i] * pt / (pn * pn * pn * tn));
    }
  }
  return 2.0 - 2.0 * cosv;
}

ByolBackward byol_pass(const ByolState& state, const Batch& view1, const Batch& view2,
                       bool want_grads) {
  if (view1.size() != view2.size() || view1.empty()) {
    throw std::invalid_argument("byol: view batches must be equal-sized and non-empty");
  }
  const std::size_t batch = view1.size();
  const double scale = 1.0 / (2.0 * double(batch));

  ByolBackward out;
  if (want_grads) {
    out.online = nn::Grads::zeros_like(state.online);
    out.predictor = nn::Grads::zeros_like(state.predictor);
  }

  nn::ForwardCache enc_cache, pred_cache;
  std::vector<double> dpred;
  for (std::size_t b = 0; b < batch; ++b) {
    // Two symmetric branches: (view1 through online, view2 through target)
    // and the swap.
    for (int branch = 0; branch < 2; ++branch) {
      const auto& von = branch == 0 ? view1[b] : view2[b];
      const auto& vtg = branch == 0 ? view2[b] : view1[b];
      const int view_no = branch + 1;

      const std::vector<double> tgt = state.target.forward(vtg);
      if (!want_grads) {
        const std::vector<double> h = state.online.forward(von);
        const std::vector<double> p = state.predictor.forward(h);
        out.loss += scale * cosine_branch(p, tgt, view_no, nullptr);
        continue;
      }
      const std::vector<double> h = nn::forward_cached(state.online, von, enc_cache);
      const std::vector<double> p = nn::forward_cached(state.predictor, h, pred_cache);
      out.loss += scale * cosine_branch(p, tgt, view_no, &dpred);
      for (auto& g : dpred) g *= scale;
      const std::vector<double> dh = nn::backward(state.predictor, pred_cache, dpred, out.predictor);
      nn::backward(state.online, enc_cache, dh, out.online);
    }
  }
  if (!std::isfinite(out.loss)) {
    throw std::runtime_error("byol: non-finite loss (training diverged)");
  }
  return out;
}

}  // namespace

const char* kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Identity: return "identity";
    case EncoderKind::RandomProjection: return "random_projection";
    case EncoderKind::Whitening: return "whitening";
    case EncoderKind::ByolMlp: return "byol_mlp";
  }
  return "?";
}

EncoderKind kind_from_name(const std::string& name) {
  if (name == "identity") return EncoderKind::Identity;
  if (name == "random_projection") return EncoderKind::RandomProjection;
  if (name == "whitening") return EncoderKind::Whitening;
  if (name == "byol_mlp") return EncoderKind::ByolMlp;
  throw std::invalid_argument("unknown encoder kind: " + name);
}

void EncoderSpec::validate() const {
  if (obs_dim == 0 || embed_dim == 0) {
    throw std::invalid_argument("EncoderSpec: dims must be positive");
  }
  if (kind == EncoderKind::Identity && obs_dim != embed_dim) {
    throw std::invalid_argument("EncoderSpec: identity requires obs_dim == embed_dim");
  }
  if (kind == EncoderKind::ByolMlp && hidden_dims.empty()) {
    throw std::invalid_argument("EncoderSpec: byol_mlp requires hidden layers");
  }
}

std::vector<float> Encoder::encode(std::span<const float> obs) const {
  if (obs.size() != obs_dim()) {
    throw std::invalid_argument("encode: observation dim " + std::to_string(obs.size()) +
                                ", expected " + std::to_string(obs_dim()));
  }
  std::vector<double> x(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(obs[i])) throw std::invalid_argument("encode: non-finite observation");
    x[i] = obs[i];
  }
  std::vector<double> y(embed_dim());
  encode_into(x, y);
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<float>(y[i]);
  return out;
}

std::unique_ptr<Encoder> make_identity(std::uint32_t dim) {
  if (dim == 0) throw std::invalid_argument("make_identity: dim must be positive");
  return std::make_unique<IdentityEncoder>(dim);
}

std::unique_ptr<Encoder> fit_fixed(const core::DemoSet& data, const EncoderSpec& spec) {
  spec.validate();
  data.validate();
  if (data.obs_dim != spec.obs_dim) {
    throw std::invalid_argument("fit_fixed: data obs_dim does not match spec");
  }

  switch (spec.kind) {
    case EncoderKind::RandomProjection: {
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> dist(0.0, 1.0);
      const double scale = 1.0 / std::sqrt(double(spec.embed_dim));
      std::vector<double> w(std::size_t(spec.embed_dim) * spec.obs_dim);
      for (auto& v : w) v = dist(rng) * scale;
      return std::make_unique<AffineEncoder>(EncoderKind::RandomProjection, spec.obs_dim,
                                             spec.embed_dim, std::move(w),
                                             std::vector<double>(spec.embed_dim, 0.0));
    }
    case EncoderKind::Whitening: {
      if (data.frame_count() < spec.embed_dim) {
        throw std::invalid_argument("fit_fixed: whitening needs at least embed_dim observations");
      }
      WhiteningMap map = fit_whitening(data, spec.embed_dim);
      if (map.usable_rank < spec.embed_dim) {
        std::ostringstream msg;
        msg << "fit_fixed: covariance rank " << map.usable_rank << " is deficient for "
            << spec.embed_dim << " whitened dimensions (" << (spec.embed_dim - map.usable_rank)
            << " deficient)";
        throw std::invalid_argument(msg.str());
      }
      return std::make_unique<AffineEncoder>(EncoderKind::Whitening, spec.obs_dim, spec.embed_dim,
                                             std::move(map.w), std::move(map.b));
    }
    default:
      throw std::invalid_argument("fit_fixed: kind must be random_projection or whitening");
  }
}

void AugmentConfig::validate() const {
  if (noise_std < 0.0) throw std::invalid_argument("AugmentConfig: noise_std < 0");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) {
    throw std::invalid_argument("AugmentConfig: dropout_prob outside [0,1)");
  }
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) {
    throw std::invalid_argument("AugmentConfig: scale range must satisfy 0 < lo <= hi");
  }
}

std::vector<double> augment(std::span<const double> obs, const AugmentConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<double> out(obs.begin(), obs.end());
  const double keep_scale = 1.0 / (1.0 - cfg.dropout_prob);
  for (auto& v : out) {
    const bool keep = uni(rng) >= cfg.dropout_prob;
    v = keep ? v * keep_scale : 0.0;
  }
  std::uniform_real_distribution<double> sdist(cfg.scale_lo, cfg.scale_hi);
  const double s = (cfg.scale_lo == cfg.scale_hi) ? cfg.scale_lo : sdist(rng);
  for (auto& v : out) v *= s;
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    for (auto& v : out) v += noise(rng);
  }
  return out;
}

ByolState byol_init(const EncoderSpec& spec, double tau, const core::DemoSet* warm_start_data) {
  spec.validate();
  if (spec.kind != EncoderKind::ByolMlp) {
    throw std::invalid_argument("byol_init: spec kind must be byol_mlp");
  }
  if (tau < 0.0 || tau >= 1.0) throw std::invalid_argument("byol_init: tau outside [0,1)");

  std::mt19937_64 rng(spec.seed);
  ByolState state;
  state.online = nn::make_mlp(spec.obs_dim, spec.hidden_dims, spec.embed_dim, rng);
  state.predictor = nn::make_mlp(spec.embed_dim, {spec.embed_dim}, spec.embed_dim, rng);
  state.tau = tau;

  if (warm_start_data != nullptr) {
    // Analog of starting from a pretrained backbone: the first layer rows
    // are seeded with a whitening map of the data, remaining rows keep
    // their random init.
    auto& first = state.online.layers.front();
    const auto take = static_cast<std::uint32_t>(std::min<std::size_t>(first.out, spec.obs_dim));
    WhiteningMap map = fit_whitening(*warm_start_data, take);
    const std::uint32_t rows = std::min(take, map.usable_rank);
    for (std::uint32_t o = 0; o < rows; ++o) {
      for (std::uint32_t i = 0; i < spec.obs_dim; ++i) {
        first.w[std::size_t(o) * first.in + i] = map.w[std::size_t(o) * spec.obs_dim + i];
      }
      first.b[o] = map.b[o];
    }
  }

  state.target = state.online;
  state.opt_online = nn::AdamState::zeros_like(state.online);
  state.opt_predictor = nn::AdamState::zeros_like(state.predictor);
  return state;
}

double byol_loss(const ByolState& state, const Batch& view1, const Batch& view2) {
  return byol_pass(state, view1, view2, false).loss;
}

ByolBackward byol_backward(const ByolState& state, const Batch& view1, const Batch& view2) {
  return byol_pass(state, view1, view2, true);
}

double byol_step(ByolState& state, const std::vector<std::span<const float>>& batch,
                 const AugmentConfig& cfg, const nn::OptimizerConfig& opt, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("byol_step: empty batch");
  cfg.validate();

  std::mt19937_64 rng(seed);
  Batch v1(batch.size()), v2(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::vector<double> x = to_double(batch[i]);
    const std::uint64_t s1 = rng();
    const std::uint64_t s2 = rng();
    v1[i] = augment(x, cfg, s1);
    v2[i] = augment(x, cfg, s2);
  }

  ByolBackward back = byol_backward(state, v1, v2);
  nn::apply_update(state.online, state.opt_online, back.online, opt);
  nn::apply_update(state.predictor, state.opt_predictor, back.predictor, opt);
  nn::ema_update(state.target, state.online, state.tau);
  state.step += 1;
  return back.loss;
}

std::unique_ptr<Encoder> encoder_from_byol(const ByolState& state) {
  return std::make_unique<MlpEncoder>(state.online);
}

std::unique_ptr<Encoder> train_encoder(const core::DemoSet& set, const EncoderSpec& spec,
                                       const TrainOptions& opts, TrainReport* report) {
  set.validate();
  spec.validate();
  if (spec.kind != EncoderKind::ByolMlp) {
    throw std::invalid_argument("train_encoder: spec kind must be byol_mlp");
  }
  if (set.obs_dim != spec.obs_dim) {
    throw std::invalid_argument("train_encoder: data obs_dim does not match spec");
  }
  if (opts.batch_size == 0) throw std::invalid_argument("train_encoder: batch_size must be >= 1");

  ByolState state = byol_init(spec, opts.tau, opts.warm_start ? &set : nullptr);

  std::vector<const core::Frame*> frames;
  frames.reserve(set.frame_count());
  for (const auto& demo : set.demos) {
    for (const auto& f : demo) frames.push_back(&f);
  }

  nn::OptimizerConfig opt;
  opt.kind = opts.optimizer;
  opt.lr = opts.lr;

  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);

  if (report) report->epoch_loss.clear();
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      std::vector<std::span<const float>> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.emplace_back(frames[order[i]]->observation);
      }
      loss_sum += byol_step(state, batch, opts.augment, opt, rng());
      ++steps;
    }
    if (report) report->epoch_loss.push_back(steps ? loss_sum / double(steps) : 0.0);
  }
  return encoder_from_byol(state);
}

core::EmbeddingMatrix embed_demoset(const Encoder& enc, const core::DemoSet& set) {
  set.validate();
  if (set.obs_dim != enc.obs_dim()) {
    throw std::invalid_argument("embed_demoset: data obs_dim does not match encoder");
  }

  std::vector<const core::Frame*> frames;
  frames.reserve(set.frame_count());
  for (const auto& demo : set.demos) {
    for (const auto& f : demo) frames.push_back(&f);
  }

  core::EmbeddingMatrix emb;
  emb.dim = enc.embed_dim();
  emb.data.resize(frames.size() * std::size_t(emb.dim));
  emb.actions.resize(frames.size());
  emb.demo_ids.resize(frames.size());
  emb.timesteps.resize(frames.size());

  std::atomic<bool> failed{false};
  const auto n = static_cast<std::int64_t>(frames.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      const core::Frame& f = *frames[i];
      const std::vector<float> row = enc.encode(f.observation);
      std::copy(row.begin(), row.end(), emb.data.begin() + i * emb.dim);
      emb.actions[i] = {f.action.translation[0], f.action.translation[1], f.action.translation[2],
                        static_cast<float>(core::gripper_code(f.action.gripper))};
      emb.demo_ids[i] = f.demo_id;
      emb.timesteps[i] = f.timestep;
    } catch (...) {
      failed.store(true, std::memory_order_relaxed);
    }
  }
  if (failed.load()) throw std::runtime_error("embed_demoset: encoding failed");
  return emb;
}

namespace {

struct LayerSpec {
  std::uint32_t in;
  std::uint32_t out;
  nn::Activation act;
};

void write_checkpoint(const std::filesystem::path& path, EncoderKind kind, std::uint32_t obs_dim,
                      std::uint32_t embed_dim, const std::vector<LayerSpec>& shape,
                      const std::vector<const std::vector<double>*>& blobs) {
  std::vector<std::uint8_t> out;
  detail::append_bytes(out, kEncMagic, 4);
  detail::put_u16(out, kEncVersion);
  out.push_back(static_cast<std::uint8_t>(kind));
  detail::put_u32(out, obs_dim);
  detail::put_u32(out, embed_dim);
  detail::put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (const auto& l : shape) {
    detail::put_u32(out, l.in);
    detail::put_u32(out, l.out);
    out.push_back(static_cast<std::uint8_t>(l.act));
  }
  for (const auto* blob : blobs) {
    for (double v : *blob) detail::put_f32(out, static_cast<float>(v));
  }
  detail::write_file(path, out);
}

}  // namespace

void save_encoder(const Encoder& enc, const std::filesystem::path& path) {
  switch (enc.kind()) {
    case EncoderKind::Identity:
      write_checkpoint(path, enc.kind(), enc.obs_dim(), enc.embed_dim(), {}, {});
      return;
    case EncoderKind::RandomProjection:
    case EncoderKind::Whitening: {
      const auto& aff = dynamic_cast<const AffineEncoder&>(enc);
      write_checkpoint(path, enc.kind(), enc.obs_dim(), enc.embed_dim(),
                       {{enc.obs_dim(), enc.embed_dim(), nn::Activation::Linear}},
                       {&aff.weights(), &aff.bias()});
      return;
    }
    case EncoderKind::ByolMlp: {
      const auto& mlp = dynamic_cast<const MlpEncoder&>(enc);
      std::vector<LayerSpec> shape;
      std::vector<const std::vector<double>*> blobs;
      for (const auto& l : mlp.net().layers) {
        shape.push_back({static_cast<std::uint32_t>(l.in), static_cast<std::uint32_t>(l.out), l.act});
        blobs.push_back(&l.w);
        blobs.push_back(&l.b);
      }
      write_checkpoint(path, enc.kind(), enc.obs_dim(), enc.embed_dim(), shape, blobs);
      return;
    }
  }
  throw std::invalid_argument("save_encoder: unknown encoder kind");
}

std::unique_ptr<Encoder> load_encoder(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path));
  detail::check_magic(r, kEncMagic, "VENC", kEncVersion);

  const std::uint64_t kind_at = r.pos();
  const std::uint8_t kind_raw = r.u8("encoder kind");
  if (kind_raw > 3) {
    throw core::FormatError(core::FormatError::Kind::BadValue, kind_at,
                            "unknown encoder kind code " + std::to_string(int(kind_raw)));
  }
  const auto kind = static_cast<EncoderKind>(kind_raw);
  const std::uint32_t obs_dim = r.u32("obs_dim");
  const std::uint32_t embed_dim = r.u32("embed_dim");
  const std::uint32_t n_layers = r.u32("layer count");
  if (obs_dim == 0 || embed_dim == 0) {
    throw core::FormatError(core::FormatError::Kind::DimensionMismatch, kind_at,
                            "encoder dims must be positive");
  }

  std::vector<LayerSpec> shape(n_layers);
  for (auto& l : shape) {
    l.in = r.u32("layer in");
    l.out = r.u32("layer out");
    const std::uint8_t act = r.u8("layer activation");
    if (act > 1) {
      throw core::FormatError(core::FormatError::Kind::BadValue, r.pos(),
                              "unknown activation code");
    }
    l.act = static_cast<nn::Activation>(act);
  }

  auto read_blob = [&r](std::size_t count, std::vector<double>& out) {
    out.resize(count);
    for (auto& v : out) v = r.f32("parameter");
  };

  std::unique_ptr<Encoder> enc;
  switch (kind) {
    case EncoderKind::Identity: {
      if (n_layers != 0 || obs_dim != embed_dim) {
        throw core::FormatError(core::FormatError::Kind::DimensionMismatch, r.pos(),
                                "identity checkpoint shape mismatch");
      }
      enc = make_identity(obs_dim);
      break;
    }
    case EncoderKind::RandomProjection:
    case EncoderKind::Whitening: {
      if (n_layers != 1 || shape[0].in != obs_dim || shape[0].out != embed_dim) {
        throw core::FormatError(core::FormatError::Kind::DimensionMismatch, r.pos(),
                                "affine checkpoint shape mismatch");
      }
      std::vector<double> w, b;
      read_blob(std::size_t(embed_dim) * obs_dim, w);
      read_blob(embed_dim, b);
      enc = std::make_unique<AffineEncoder>(kind, obs_dim, embed_dim, std::move(w), std::move(b));
      break;
    }
    case EncoderKind::ByolMlp: {
      if (n_layers == 0 || shape.front().in != obs_dim || shape.back().out != embed_dim) {
        throw core::FormatError(core::FormatError::Kind::DimensionMismatch, r.pos(),
                                "mlp checkpoint shape mismatch");
      }
      nn::Mlp net;
      for (std::size_t li = 0; li < shape.size(); ++li) {
        if (li > 0 && shape[li].in != shape[li - 1].out) {
          throw core::FormatError(core::FormatError::Kind::DimensionMismatch, r.pos(),
                                  "mlp checkpoint layer chain mismatch");
        }
        nn::DenseLayer layer;
        layer.in = shape[li].in;
        layer.out = shape[li].out;
        layer.act = shape[li].act;
        read_blob(std::size_t(layer.out) * layer.in, layer.w);
        read_blob(layer.out, layer.b);
        net.layers.push_back(std::move(layer));
      }
      enc = std::make_unique<MlpEncoder>(std::move(net));
      break;
    }
  }
  if (r.remaining() != 0) {
    throw core::FormatError(core::FormatError::Kind::TrailingBytes, r.pos(),
                            std::to_string(r.remaining()) + " trailing bytes");
  }
  return enc;
}

}  // namespace vinn::encoder
