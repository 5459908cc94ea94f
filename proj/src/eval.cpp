#include "vinn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace vinn::eval {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t n) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (n + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<const core::Frame*> flatten(const core::DemoSet& set) {
  std::vector<const core::Frame*> frames;
  frames.reserve(set.frame_count());
  for (const auto& demo : set.demos) {
    for (const auto& f : demo) frames.push_back(&f);
  }
  return frames;
}

}  // namespace

double mse(const std::vector<std::array<double, 3>>& pred,
           const std::vector<std::array<double, 3>>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("mse: length mismatch");
  if (pred.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = pred[i][c] - truth[i][c];
      acc += d * d;
    }
  }
  return acc / (3.0 * double(pred.size()));
}

VinnOffline::VinnOffline(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                         std::size_t k)
    : index_(index), enc_(enc), k_(k) {
  if (k_ < 1 || k_ > index.size()) throw std::invalid_argument("VinnOffline: k out of range");
}

std::string VinnOffline::config() const { return "k=" + std::to_string(k_); }

std::array<double, 3> VinnOffline::predict_translation(const core::Frame& frame) {
  const std::vector<float> e = enc_.encode(frame.observation);
  const policy::NeighborSet nbrs = policy::nearest(index_, e, k_);
  return policy::lwr_action(nbrs).translation;
}

BcRepOffline::BcRepOffline(const policy::BcHead& head, const encoder::Encoder& enc)
    : head_(head), enc_(enc) {}

std::array<double, 3> BcRepOffline::predict_translation(const core::Frame& frame) {
  const std::vector<float> e = enc_.encode(frame.observation);
  return policy::bc_rep_predict(head_, e).translation;
}

OpenLoopOffline::OpenLoopOffline(policy::OpenLoopPolicy policy) : policy_(std::move(policy)) {}

std::array<double, 3> OpenLoopOffline::predict_translation(const core::Frame& frame) {
  return policy_.mean_translation(frame.timestep);
}

RandomOffline::RandomOffline(std::uint64_t seed) : rng_(seed) {}

std::array<double, 3> RandomOffline::predict_translation(const core::Frame&) {
  const core::Action a = rng_.next();
  return {double(a.translation[0]), double(a.translation[1]), double(a.translation[2])};
}

MseReport eval_policy(OfflinePolicy& policy, const core::DemoSet& test) {
  test.validate();
  const auto frames = flatten(test);

  std::vector<std::array<double, 3>> pred, truth;
  pred.reserve(frames.size());
  truth.reserve(frames.size());
  for (const core::Frame* f : frames) {
    pred.push_back(policy.predict_translation(*f));
    truth.push_back({double(f->action.translation[0]), double(f->action.translation[1]),
                     double(f->action.translation[2])});
  }

  MseReport report;
  report.mse = mse(pred, truth);
  report.frames = frames.size();
  report.policy = policy.name();
  report.config = policy.config();
  return report;
}

SweepCurve sweep_k(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                   const core::DemoSet& test, const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw std::invalid_argument("sweep_k: no k values");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (ks[i] <= ks[i - 1]) throw std::invalid_argument("sweep_k: ks must be strictly increasing");
  }
  if (ks.back() > index.size()) throw std::invalid_argument("sweep_k: max k exceeds index size");

  SweepCurve curve;
  for (std::size_t k : ks) {
    VinnOffline policy(index, enc, k);
    const MseReport r = eval_policy(policy, test);
    curve.points.push_back({double(k), r.mse, 0.0});
  }
  return curve;
}

SizeSweepResult dataset_size_sweep(const core::DemoSet& train, const core::DemoSet& test,
                                   const std::vector<std::size_t>& sizes,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::vector<std::string>& policies,
                                   const SizeSweepOptions& opts) {
  train.validate();
  test.validate();
  if (sizes.empty() || seeds.empty() || policies.empty()) {
    throw std::invalid_argument("dataset_size_sweep: empty sizes/seeds/policies");
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      throw std::invalid_argument("dataset_size_sweep: sizes must be strictly increasing");
    }
  }
  if (sizes.back() > train.demos.size()) {
    throw std::invalid_argument("dataset_size_sweep: size exceeds training demos");
  }
  for (const auto& p : policies) {
    if (p != "vinn" && p != "bc_rep" && p != "open_loop" && p != "random") {
      throw std::invalid_argument("dataset_size_sweep: unknown policy " + p);
    }
  }

  const bool needs_encoder =
      std::find(policies.begin(), policies.end(), "vinn") != policies.end() ||
      std::find(policies.begin(), policies.end(), "bc_rep") != policies.end();

  SizeSweepResult result;
  std::map<std::string, std::map<double, std::vector<double>>> samples;

  for (std::size_t size : sizes) {
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const std::uint64_t seed = seeds[si];
      const std::uint64_t cell_seed = mix_seed(seed, size);
      const core::DemoSet sub =
          size == train.demos.size() ? train : core::subsample_demos(train, size, cell_seed);

      std::unique_ptr<encoder::Encoder> enc;
      policy::NeighborIndex index;
      core::EmbeddingMatrix emb;
      if (needs_encoder) {
        encoder::EncoderSpec spec = opts.enc_spec;
        spec.obs_dim = sub.obs_dim;
        spec.seed = cell_seed;
        encoder::TrainOptions topts = opts.enc_train;
        topts.seed = cell_seed;
        enc = encoder::train_encoder(sub, spec, topts);
        emb = encoder::embed_demoset(*enc, sub);
        index = policy::build_index(emb);
      }

      for (const auto& pname : policies) {
        std::unique_ptr<OfflinePolicy> policy;
        policy::BcHead head;
        if (pname == "vinn") {
          const std::size_t k = std::min(opts.k, index.size());
          policy = std::make_unique<VinnOffline>(index, *enc, k);
        } else if (pname == "bc_rep") {
          policy::BcTrainOptions bopts = opts.bc_train;
          bopts.seed = cell_seed;
          head = policy::bc_rep_fit(emb, bopts);
          policy = std::make_unique<BcRepOffline>(head, *enc);
        } else if (pname == "open_loop") {
          policy = std::make_unique<OpenLoopOffline>(policy::OpenLoopPolicy::fit(sub));
        } else {
          policy = std::make_unique<RandomOffline>(cell_seed);
        }
        const MseReport r = eval_policy(*policy, test);
        result.cells.push_back({pname, double(size), seed, r.mse});
        samples[pname][double(size)].push_back(r.mse);
      }
    }
  }

  for (const auto& [pname, by_size] : samples) {
    SweepCurve curve;
    curve.seeds = seeds;
    for (const auto& [x, values] : by_size) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= double(values.size());
      double var = 0.0;
      if (values.size() > 1) {
        for (double v : values) var += (v - mean) * (v - mean);
        var /= double(values.size() - 1);
      }
      curve.points.push_back({x, mean, std::sqrt(var)});
    }
    result.curves.emplace(pname, std::move(curve));
  }
  return result;
}

LatencyReport latency_report(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                             std::size_t n_queries, std::uint64_t seed, std::size_t k) {
  if (n_queries < 100) throw std::invalid_argument("latency_report: need at least 100 queries");
  if (enc.embed_dim() != index.dim) {
    throw std::invalid_argument("latency_report: encoder/index dim mismatch");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<std::vector<float>> observations(n_queries);
  for (auto& obs : observations) {
    obs.resize(enc.obs_dim());
    for (auto& v : obs) v = static_cast<float>(dist(rng));
  }

  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;  // keep the timed loops from being elided

  std::vector<std::vector<float>> embeddings(n_queries);
  const std::size_t warm = std::min<std::size_t>(16, n_queries);
  for (std::size_t i = 0; i < warm; ++i) {
    const auto e = enc.encode(observations[i]);
    const auto nb = policy::nearest(index, e, k);
    sink = sink + nb.entries.front().distance;
  }

  const auto t0 = clock::now();
  for (std::size_t i = 0; i < n_queries; ++i) embeddings[i] = enc.encode(observations[i]);
  const auto t1 = clock::now();
  for (std::size_t i = 0; i < n_queries; ++i) {
    const auto nb = policy::nearest(index, embeddings[i], k);
    sink = sink + nb.entries.front().distance;
  }
  const auto t2 = clock::now();

  LatencyReport report;
  const double encode_total = std::chrono::duration<double, std::milli>(t1 - t0).count();
  const double query_total = std::chrono::duration<double, std::milli>(t2 - t1).count();
  report.encode_ms = encode_total / double(n_queries);
  report.query_ms = query_total / double(n_queries);
  report.index_size = index.size();
  report.dim = index.dim;
  report.k = k;
  report.queries = n_queries;
  return report;
}

void write_cells(std::ostream& out, const std::vector<SweepCell>& cells) {
  out << "# policy x seed mse\n";
  for (const auto& c : cells) {
    out << c.policy << ' ' << c.x << ' ' << c.seed << ' ' << c.mse << '\n';
  }
}

void write_summary(std::ostream& out, const std::map<std::string, SweepCurve>& curves) {
  out << "# policy x mean stddev\n";
  for (const auto& [name, curve] : curves) {
    for (const auto& p : curve.points) {
      out << name << ' ' << p.x << ' ' << p.mse << ' ' << p.stddev << '\n';
    }
  }
}

}  // namespace vinn::eval
