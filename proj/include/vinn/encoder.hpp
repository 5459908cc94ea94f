#pragma once

// Observation -> embedding encoders. Fixed baselines (identity, random
// projection, whitening) and a BYOL-style self-supervised trainer with an
// online/target network pair and a predictor head.

#include <filesystem>
#include <memory>
#include <optional>

#include "vinn/core.hpp"
#include "vinn/mlp.hpp"

namespace vinn::encoder {

enum class EncoderKind : std::uint8_t {
  Identity = 0,
  RandomProjection = 1,
  Whitening = 2,
  ByolMlp = 3,
};

const char* kind_name(EncoderKind k);
EncoderKind kind_from_name(const std::string& name);  // throws on unknown name

struct EncoderSpec {
  EncoderKind kind = EncoderKind::ByolMlp;
  std::uint32_t obs_dim = 0;
  std::uint32_t embed_dim = 0;
  std::vector<std::size_t> hidden_dims = {32};  // byol_mlp only
  std::uint64_t seed = 0;

  void validate() const;
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual EncoderKind kind() const = 0;
  virtual std::uint32_t obs_dim() const = 0;
  virtual std::uint32_t embed_dim() const = 0;

  // Deterministic embedding of a single observation (no augmentation).
  // Throws std::invalid_argument on dimension mismatch or non-finite input.
  std::vector<float> encode(std::span<const float> obs) const;

 protected:
  virtual void encode_into(std::span<const double> obs, std::span<double> out) const = 0;
};

std::unique_ptr<Encoder> make_identity(std::uint32_t dim);

// Fits a non-trained encoder. RandomProjection depends only on the spec
// seed; Whitening is PCA whitening of the observation covariance and
// reports rank-deficient directions as errors.
std::unique_ptr<Encoder> fit_fixed(const core::DemoSet& data, const EncoderSpec& spec);

// Vector-space augmentations standing in for image crops/jitter/blur:
// coordinate dropout (scaled by 1/(1-p)), global scale jitter, additive
// Gaussian noise. Deterministic given seed.
struct AugmentConfig {
  double noise_std = 0.05;
  double dropout_prob = 0.1;
  double scale_lo = 0.9;
  double scale_hi = 1.1;

  void validate() const;
};

std::vector<double> augment(std::span<const double> obs, const AugmentConfig& cfg,
                            std::uint64_t seed);

struct ByolState {
  nn::Mlp online;
  nn::Mlp target;     // same shapes as online, EMA of its history
  nn::Mlp predictor;  // embed_dim -> embed_dim, one hidden layer
  double tau = 0.99;
  std::uint64_t step = 0;
  nn::AdamState opt_online;
  nn::AdamState opt_predictor;

  std::uint32_t obs_dim() const { return static_cast<std::uint32_t>(online.in_dim()); }
  std::uint32_t embed_dim() const { return static_cast<std::uint32_t>(online.out_dim()); }
};

// Fresh BYOL state: online and predictor randomly initialized from the spec
// seed, target a copy of online. When warm_start_data is given, the first
// online layer is initialized from a whitening map fitted to it.
ByolState byol_init(const EncoderSpec& spec, double tau,
                    const core::DemoSet* warm_start_data = nullptr);

using Batch = std::vector<std::vector<double>>;

// Symmetric BYOL loss over two batches of augmented views:
//   L = mean_b[ (2 - 2 cos(pred(online(v1)), target(v2)))
//             + (2 - 2 cos(pred(online(v2)), target(v1))) ] / 2
// The target branch is treated as a constant. L is in [0, 4].
double byol_loss(const ByolState& state, const Batch& view1, const Batch& view2);

// Loss plus analytic gradients for the online and predictor networks.
// There is deliberately no gradient slot for the target network.
struct ByolBackward {
  double loss = 0.0;
  nn::Grads online;
  nn::Grads predictor;
};

ByolBackward byol_backward(const ByolState& state, const Batch& view1, const Batch& view2);

// One training step: augment two views per observation, gradient-update the
// online and predictor networks, then EMA-update the target. Returns the
// pre-update loss.
double byol_step(ByolState& state, const std::vector<std::span<const float>>& batch,
                 const AugmentConfig& cfg, const nn::OptimizerConfig& opt, std::uint64_t seed);

struct TrainOptions {
  std::uint32_t epochs = 100;
  AugmentConfig augment;
  double lr = 3e-4;
  double tau = 0.99;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  bool warm_start = false;  // initialize from a whitening map of the data
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-step loss per epoch
};

// Trains a byol_mlp encoder and returns the online network (the predictor
// is discarded). Deterministic given the options seed.
std::unique_ptr<Encoder> train_encoder(const core::DemoSet& set, const EncoderSpec& spec,
                                       const TrainOptions& opts, TrainReport* report = nullptr);

std::unique_ptr<Encoder> encoder_from_byol(const ByolState& state);

// Embeds every frame in dataset order; actions and provenance are copied in
// parallel arrays. Fans out across frames.
core::EmbeddingMatrix embed_demoset(const Encoder& enc, const core::DemoSet& set);

// Encoder checkpoint format, magic "VENC": header with kind and dims, then
// per-layer f32 parameter blobs in layer order.
void save_encoder(const Encoder& enc, const std::filesystem::path& path);
std::unique_ptr<Encoder> load_encoder(const std::filesystem::path& path);

}  // namespace vinn::encoder
