#include "vinn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace vinn::sim {

namespace {

constexpr std::array<double, 3> kHandleNominal = {0.5, 0.5, 0.5};
// The door opens by pulling the handle back along +x, i.e. opposite the
// approach direction; no constant translation can both reach and open.
constexpr std::array<double, 3> kDoorAxis = {1.0, 0.0, 0.0};

constexpr std::uint64_t kResetSalt = 0x632a7d9342b1c08full;
constexpr std::uint64_t kNoiseSalt = 0x9d2c5680ca3f4b21ull;
constexpr std::uint64_t kCabinetSalt = 0x2545f4914f6cdd1dull;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t n) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (n + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double dist3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::vector<double> cabinet_distractors(int cabinet, const EnvConfig& cfg) {
  std::mt19937_64 rng(kCabinetSalt + std::uint64_t(cabinet) * 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> dist(-cfg.distractor_scale, cfg.distractor_scale);
  std::vector<double> d(cfg.distractor_dim);
  for (auto& v : d) v = dist(rng);
  return d;
}

std::vector<float> make_obs(EnvState& state, const EnvConfig& cfg) {
  std::vector<double> obs(cfg.obs_dim(), 0.0);
  for (int c = 0; c < 3; ++c) obs[kRelHandleOffset + c] = state.handle[c] - state.effector[c];
  obs[kGripperOffset + core::gripper_code(state.gripper)] = 1.0;
  for (int j = 0; j < cfg.distractor_dim; ++j) obs[kDistractorOffset + j] = state.distractors[j];

  if (cfg.obs_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.obs_noise_std);
    for (auto& v : obs) v += noise(state.noise_rng);
  }
  for (std::uint32_t d : cfg.occlusion_mask) obs[d] = 0.0;

  std::vector<float> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) out[i] = static_cast<float>(obs[i]);
  return out;
}

void format_floats(std::ostream& out, std::span<const float> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << v[i];
  }
}

void format_doubles(std::ostream& out, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << v[i];
  }
}

}  // namespace

void EnvConfig::validate() const {
  if (!(start_offset > 0 && step_size > 0 && grasp_radius > 0 && door_travel > 0)) {
    throw std::invalid_argument("EnvConfig: geometry parameters must be positive");
  }
  if (lateral_jitter < 0 || obs_noise_std < 0) {
    throw std::invalid_argument("EnvConfig: jitter and noise must be non-negative");
  }
  if (!(open_threshold > 0 && open_threshold <= 1.0)) {
    throw std::invalid_argument("EnvConfig: open_threshold must be in (0, 1]");
  }
  if (distractor_dim < 0 || n_cabinets < 1 || max_steps < 0) {
    throw std::invalid_argument("EnvConfig: bad distractor/cabinet/step counts");
  }
  for (std::uint32_t d : occlusion_mask) {
    if (d >= obs_dim()) {
      throw std::invalid_argument("EnvConfig: occlusion dim " + std::to_string(d) +
                                  " outside observation");
    }
  }
}

std::vector<std::uint32_t> occlusion_mask_for_level(int level, const EnvConfig& cfg) {
  if (level < 0 || level > 3) throw std::invalid_argument("occlusion level must be 0-3");
  std::vector<std::uint32_t> mask;
  if (level >= 1) {
    for (std::uint32_t j = 0; j < std::uint32_t(cfg.distractor_dim); ++j) {
      mask.push_back(kDistractorOffset + j);
    }
  }
  if (level >= 2) {
    mask.push_back(kRelHandleOffset + 1);  // lateral handle component
    mask.push_back(kRelHandleOffset + 2);  // vertical handle component
  }
  if (level >= 3) {
    mask.clear();
    for (std::uint32_t j = 0; j < cfg.obs_dim(); ++j) mask.push_back(j);
  }
  return mask;
}

std::pair<EnvState, std::vector<float>> env_reset(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed ^ kResetSalt);

  EnvState state;
  std::uniform_int_distribution<int> cab(0, cfg.n_cabinets - 1);
  state.cabinet = cab(rng);
  state.distractors = cabinet_distractors(state.cabinet, cfg);

  double lateral = 0.0;
  if (cfg.lateral_jitter > 0.0) {
    std::uniform_real_distribution<double> jitter(-cfg.lateral_jitter, cfg.lateral_jitter);
    lateral = jitter(rng);
  }
  state.handle = kHandleNominal;
  state.effector = {kHandleNominal[0] + cfg.start_offset, kHandleNominal[1] + lateral,
                    kHandleNominal[2]};
  state.gripper = core::GripperState::Open;
  state.noise_rng.seed(seed ^ kNoiseSalt);

  std::vector<float> obs = make_obs(state, cfg);
  return {std::move(state), std::move(obs)};
}

StepOutcome env_step(EnvState& state, const core::Action& a, const EnvConfig& cfg) {
  const auto& t = a.translation;
  const double norm = std::sqrt(double(t[0]) * t[0] + double(t[1]) * t[1] + double(t[2]) * t[2]);
  if (std::abs(norm - 1.0) > 1e-3) {
    throw std::invalid_argument("env_step: action translation must be unit-norm (got " +
                                std::to_string(norm) + ")");
  }

  if (!state.grasped) {
    for (int c = 0; c < 3; ++c) state.effector[c] += cfg.step_size * double(t[c]);
    if (a.gripper == core::GripperState::Closed &&
        dist3(state.effector, state.handle) <= cfg.grasp_radius) {
      state.grasped = true;
    }
  } else {
    const double along = double(t[0]) * kDoorAxis[0] + double(t[1]) * kDoorAxis[1] +
                         double(t[2]) * kDoorAxis[2];
    double pull = std::max(0.0, along) * cfg.step_size;
    pull = std::min(pull, (1.0 - state.door_progress) * cfg.door_travel);
    state.door_progress += pull / cfg.door_travel;
    for (int c = 0; c < 3; ++c) state.handle[c] += pull * kDoorAxis[c];
    state.effector = state.handle;
  }

  state.gripper = a.gripper;
  state.step += 1;

  StepOutcome out;
  out.obs = make_obs(state, cfg);
  out.done = state.door_progress >= cfg.open_threshold || state.step >= cfg.max_steps;
  return out;
}

core::Action expert_action(const EnvState& state, const EnvConfig& cfg) {
  core::Action a;
  if (state.grasped) {
    a.translation = {static_cast<float>(kDoorAxis[0]), static_cast<float>(kDoorAxis[1]),
                     static_cast<float>(kDoorAxis[2])};
    a.gripper = core::GripperState::Closed;
    return a;
  }

  const double d = dist3(state.handle, state.effector);
  if (d <= cfg.grasp_radius) {
    // At the handle without a grasp yet: close and emit the pull direction,
    // which is progress-safe while ungrasped.
    a.translation = {static_cast<float>(kDoorAxis[0]), static_cast<float>(kDoorAxis[1]),
                     static_cast<float>(kDoorAxis[2])};
    a.gripper = core::GripperState::Closed;
    return a;
  }

  for (int c = 0; c < 3; ++c) {
    a.translation[c] = static_cast<float>((state.handle[c] - state.effector[c]) / d);
  }
  const double d_lunge = cfg.grasp_radius + cfg.step_size;
  if (d <= d_lunge) {
    a.gripper = core::GripperState::Closed;  // final lunge lands within grasp range
  } else if (d <= d_lunge + 2.0 * cfg.step_size) {
    a.gripper = core::GripperState::AlmostClosed;
  } else if (d <= d_lunge + 4.0 * cfg.step_size) {
    a.gripper = core::GripperState::AlmostOpen;
  } else {
    a.gripper = core::GripperState::Open;
  }
  return a;
}

RolloutResult rollout(const Policy& policy, const EnvConfig& cfg, std::uint64_t seed) {
  auto [state, obs] = env_reset(cfg, seed);

  RolloutResult result;
  while (state.step < cfg.max_steps && state.door_progress < cfg.open_threshold) {
    const core::Action a = policy(state, obs);

    TraceStep ts;
    ts.step = state.step;
    ts.obs = obs;
    ts.action = a;

    StepOutcome out = env_step(state, a, cfg);

    ts.effector = state.effector;
    ts.handle = state.handle;
    ts.door_progress = state.door_progress;
    ts.grasped = state.grasped;
    result.trace.push_back(std::move(ts));

    obs = std::move(out.obs);
    if (out.done) break;
  }

  result.handle_grasped = state.grasped;
  result.door_opened = state.door_progress >= cfg.open_threshold;
  result.steps_taken = state.step;
  return result;
}

std::pair<double, double> success_rate(const PolicyFactory& factory, const EnvConfig& cfg,
                                       int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("success_rate: n_trials must be >= 1");

  std::vector<unsigned char> grasped(n_trials, 0), opened(n_trials, 0);
#pragma omp parallel for schedule(dynamic)
  for (int trial = 0; trial < n_trials; ++trial) {
    const std::uint64_t trial_seed = mix_seed(seed, std::uint64_t(trial));
    const Policy policy = factory(trial_seed);
    const RolloutResult r = rollout(policy, cfg, trial_seed);
    grasped[trial] = r.handle_grasped ? 1 : 0;
    opened[trial] = r.door_opened ? 1 : 0;
  }

  double g = 0.0, o = 0.0;
  for (int i = 0; i < n_trials; ++i) {
    g += grasped[i];
    o += opened[i];
  }
  return {g / n_trials, o / n_trials};
}

void write_trace(std::ostream& out, const RolloutResult& result) {
  out.precision(9);
  for (const TraceStep& ts : result.trace) {
    out << "step=" << ts.step << " obs=";
    format_floats(out, ts.obs);
    out << " action=";
    format_floats(out, ts.action.translation);
    out << ',' << core::gripper_name(ts.action.gripper) << " eff=";
    format_doubles(out, ts.effector);
    out << " handle=";
    format_doubles(out, ts.handle);
    out << " progress=" << ts.door_progress << " grasped=" << (ts.grasped ? 1 : 0) << '\n';
  }
}

core::DemoSet synth_demoset(const std::string& generator, std::size_t n_demos, std::uint64_t seed,
                            const EnvConfig& cfg) {
  cfg.validate();
  if (n_demos == 0) throw std::invalid_argument("synth_demoset: n_demos must be >= 1");

  Policy (*make)(const EnvConfig&, std::uint64_t) = nullptr;
  if (generator == "expert") {
    make = [](const EnvConfig& c, std::uint64_t) { return expert_policy(c); };
  } else if (generator == "random-walk") {
    make = [](const EnvConfig&, std::uint64_t s) { return random_unit_policy(s); };
  } else {
    throw std::invalid_argument("synth_demoset: unknown generator '" + generator +
                                "' (registered: expert, random-walk)");
  }

  core::DemoSet set;
  set.obs_dim = cfg.obs_dim();
  set.metadata["generator"] = generator;
  set.metadata["n_demos"] = std::to_string(n_demos);
  set.metadata["seed"] = std::to_string(seed);

  for (std::size_t i = 0; i < n_demos; ++i) {
    const std::uint64_t demo_seed = mix_seed(seed, i);
    const RolloutResult r = rollout(make(cfg, demo_seed), cfg, demo_seed);
    core::Demonstration demo;
    demo.reserve(r.trace.size());
    for (const TraceStep& ts : r.trace) {
      core::Frame f;
      f.observation = ts.obs;
      f.action = ts.action;
      f.timestep = static_cast<std::uint32_t>(ts.step);
      f.demo_id = static_cast<std::uint32_t>(i);
      demo.push_back(std::move(f));
    }
    set.demos.push_back(std::move(demo));
  }
  return core::normalize_actions(set);
}

Policy expert_policy(const EnvConfig& cfg) {
  return [cfg](const EnvState& state, std::span<const float>) { return expert_action(state, cfg); };
}

namespace {

// Control-side renormalization shared by the learned-policy adapters. A
// degenerate (near-zero) regression output has no direction to follow; the
// adapter retreats along the door axis instead of crashing the episode.
core::Action to_unit_action(const std::array<double, 3>& t, core::GripperState g) {
  core::Action a;
  const double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
  if (norm < 1e-9) {
    a.translation = {static_cast<float>(kDoorAxis[0]), static_cast<float>(kDoorAxis[1]),
                     static_cast<float>(kDoorAxis[2])};
  } else {
    for (int c = 0; c < 3; ++c) a.translation[c] = static_cast<float>(t[c] / norm);
  }
  a.gripper = g;
  return a;
}

}  // namespace

Policy vinn_policy(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                   policy::PolicyConfig cfg) {
  cfg.renormalize_translation = false;  // adapter renormalizes with a degenerate-safe fallback
  return [&index, &enc, cfg](const EnvState&, std::span<const float> obs) {
    const policy::PredictDetail d = policy::predict_detail(index, enc, obs, cfg);
    return to_unit_action(d.raw_translation, d.action.gripper);
  };
}

Policy random_unit_policy(std::uint64_t seed) {
  auto rng = std::make_shared<policy::RandomPolicy>(seed);
  return [rng](const EnvState&, std::span<const float>) { return rng->next(); };
}

Policy bc_rep_policy(const policy::BcHead& head, const encoder::Encoder& enc) {
  return [&head, &enc](const EnvState&, std::span<const float> obs) {
    const std::vector<float> e = enc.encode(obs);
    const policy::BcPrediction p = policy::bc_rep_predict(head, e);
    return to_unit_action(p.translation, p.gripper);
  };
}

}  // namespace vinn::sim
