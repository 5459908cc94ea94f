#include "vinn/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "binio.hpp"

namespace vinn::core {

namespace {

constexpr char kDemoMagic[4] = {'V', 'I', 'N', 'N'};
constexpr char kEmbMagic[4] = {'V', 'E', 'M', 'B'};
constexpr std::uint16_t kFormatVersion = 1;

// The translation counts as already normalized when its norm is within this
// band of 1; re-normalizing would only churn the low float bits, so
// normalize_actions leaves such frames untouched (this is what makes the
// operation idempotent).
constexpr double kUnitNormBand = 1e-6;

}  // namespace

FormatError::FormatError(Kind kind, std::uint64_t offset, const std::string& what)
    : std::runtime_error(what), kind(kind), offset(offset) {}

GripperState gripper_from_code(int code) {
  if (code < 0 || code > 3) {
    throw std::out_of_range("gripper code out of range: " + std::to_string(code));
  }
  return static_cast<GripperState>(code);
}

const char* gripper_name(GripperState g) {
  switch (g) {
    case GripperState::Open: return "open";
    case GripperState::AlmostOpen: return "almost_open";
    case GripperState::AlmostClosed: return "almost_closed";
    case GripperState::Closed: return "closed";
  }
  return "?";
}

std::size_t DemoSet::frame_count() const {
  std::size_t n = 0;
  for (const auto& d : demos) n += d.size();
  return n;
}

void DemoSet::validate() const {
  if (demos.empty()) throw std::invalid_argument("DemoSet: no demonstrations");
  if (obs_dim == 0) throw std::invalid_argument("DemoSet: obs_dim must be positive");
  for (std::size_t di = 0; di < demos.size(); ++di) {
    const auto& demo = demos[di];
    if (demo.empty()) {
      throw std::invalid_argument("DemoSet: demo " + std::to_string(di) + " is empty");
    }
    for (std::size_t fi = 0; fi < demo.size(); ++fi) {
      const Frame& f = demo[fi];
      if (f.observation.size() != obs_dim) {
        throw std::invalid_argument("DemoSet: demo " + std::to_string(di) + " frame " +
                                    std::to_string(fi) + " has observation dim " +
                                    std::to_string(f.observation.size()) + ", expected " +
                                    std::to_string(obs_dim));
      }
      if (f.timestep != fi) {
        throw std::invalid_argument("DemoSet: demo " + std::to_string(di) +
                                    " timesteps not contiguous at frame " + std::to_string(fi));
      }
      for (float v : f.observation) {
        if (!std::isfinite(v)) {
          throw std::invalid_argument("DemoSet: non-finite observation in demo " +
                                      std::to_string(di) + " frame " + std::to_string(fi));
        }
      }
      for (float v : f.action.translation) {
        if (!std::isfinite(v)) {
          throw std::invalid_argument("DemoSet: non-finite translation in demo " +
                                      std::to_string(di) + " frame " + std::to_string(fi));
        }
      }
    }
  }
}

void EmbeddingMatrix::validate() const {
  if (dim == 0) throw std::invalid_argument("EmbeddingMatrix: dim must be positive");
  const std::size_t rows = actions.size();
  if (data.size() != rows * dim || demo_ids.size() != rows || timesteps.size() != rows) {
    throw std::invalid_argument("EmbeddingMatrix: parallel arrays out of sync");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw std::invalid_argument("EmbeddingMatrix: non-finite embedding entry in row " +
                                  std::to_string(i / dim));
    }
  }
}

DemoSet load_demoset(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path));
  detail::check_magic(r, kDemoMagic, "VINN", kFormatVersion);

  DemoSet set;
  const std::uint64_t dim_at = r.pos();
  set.obs_dim = r.u32("obs_dim");
  if (set.obs_dim == 0) {
    throw FormatError(FormatError::Kind::DimensionMismatch, dim_at, "obs_dim is zero");
  }
  const std::uint32_t demo_count = r.u32("demo_count");
  if (demo_count == 0) {
    throw FormatError(FormatError::Kind::BadValue, r.pos(), "file contains no demonstrations");
  }

  set.demos.resize(demo_count);
  for (std::uint32_t di = 0; di < demo_count; ++di) {
    const std::uint32_t frame_count = r.u32("frame_count");
    if (frame_count == 0) {
      throw FormatError(FormatError::Kind::BadValue, r.pos(),
                        "demo " + std::to_string(di) + " has no frames");
    }
    auto& demo = set.demos[di];
    demo.resize(frame_count);
    for (std::uint32_t fi = 0; fi < frame_count; ++fi) {
      Frame& f = demo[fi];
      f.observation.resize(set.obs_dim);
      for (std::uint32_t k = 0; k < set.obs_dim; ++k) f.observation[k] = r.f32("observation");
      for (int k = 0; k < 3; ++k) f.action.translation[k] = r.f32("translation");
      const std::uint64_t gat = r.pos();
      const std::uint8_t g = r.u8("gripper");
      if (g > 3) {
        throw FormatError(FormatError::Kind::BadValue, gat,
                          "gripper code out of range: " + std::to_string(int(g)));
      }
      f.action.gripper = static_cast<GripperState>(g);
      r.take(3, "frame padding");
      f.timestep = fi;
      f.demo_id = di;
    }
  }

  const std::uint32_t meta_count = r.u32("metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    const std::uint32_t klen = r.u32("metadata key length");
    const std::uint8_t* kp = r.take(klen, "metadata key");
    std::string key(reinterpret_cast<const char*>(kp), klen);
    const std::uint32_t vlen = r.u32("metadata value length");
    const std::uint8_t* vp = r.take(vlen, "metadata value");
    set.metadata.emplace(std::move(key), std::string(reinterpret_cast<const char*>(vp), vlen));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::TrailingBytes, r.pos(),
                      std::to_string(r.remaining()) + " trailing bytes after metadata");
  }

  set.validate();
  return set;
}

void save_demoset(const DemoSet& set, const std::filesystem::path& path) {
  set.validate();

  std::vector<std::uint8_t> out;
  detail::append_bytes(out, kDemoMagic, 4);
  detail::put_u16(out, kFormatVersion);
  detail::put_u32(out, set.obs_dim);
  detail::put_u32(out, static_cast<std::uint32_t>(set.demos.size()));
  for (const auto& demo : set.demos) {
    detail::put_u32(out, static_cast<std::uint32_t>(demo.size()));
    for (const Frame& f : demo) {
      for (float v : f.observation) detail::put_f32(out, v);
      for (float v : f.action.translation) detail::put_f32(out, v);
      out.push_back(static_cast<std::uint8_t>(gripper_code(f.action.gripper)));
      out.insert(out.end(), 3, 0);  // pad frame record to 4-byte alignment
    }
  }
  detail::put_u32(out, static_cast<std::uint32_t>(set.metadata.size()));
  for (const auto& [k, v] : set.metadata) {
    detail::put_u32(out, static_cast<std::uint32_t>(k.size()));
    detail::append_bytes(out, k.data(), k.size());
    detail::put_u32(out, static_cast<std::uint32_t>(v.size()));
    detail::append_bytes(out, v.data(), v.size());
  }
  detail::write_file(path, out);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  detail::Reader r(detail::read_file(path));
  detail::check_magic(r, kEmbMagic, "VEMB", kFormatVersion);

  EmbeddingMatrix emb;
  const std::uint32_t n = r.u32("row count");
  const std::uint64_t dim_at = r.pos();
  emb.dim = r.u32("embedding dim");
  if (emb.dim == 0) {
    throw FormatError(FormatError::Kind::DimensionMismatch, dim_at, "embedding dim is zero");
  }
  emb.data.resize(static_cast<std::size_t>(n) * emb.dim);
  for (auto& v : emb.data) v = r.f32("embedding");
  emb.actions.resize(n);
  for (auto& a : emb.actions) {
    for (int k = 0; k < 4; ++k) a[k] = r.f32("action");
  }
  emb.demo_ids.resize(n);
  emb.timesteps.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    emb.demo_ids[i] = r.u32("demo id");
    emb.timesteps[i] = r.u32("timestep");
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::TrailingBytes, r.pos(),
                      std::to_string(r.remaining()) + " trailing bytes");
  }
  emb.validate();
  return emb;
}

void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
  emb.validate();
  std::vector<std::uint8_t> out;
  detail::append_bytes(out, kEmbMagic, 4);
  detail::put_u16(out, kFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(emb.n()));
  detail::put_u32(out, emb.dim);
  for (float v : emb.data) detail::put_f32(out, v);
  for (const auto& a : emb.actions) {
    for (float v : a) detail::put_f32(out, v);
  }
  for (std::size_t i = 0; i < emb.n(); ++i) {
    detail::put_u32(out, emb.demo_ids[i]);
    detail::put_u32(out, emb.timesteps[i]);
  }
  detail::write_file(path, out);
}

DemoSet normalize_actions(const DemoSet& set, double eps) {
  set.validate();
  DemoSet out = set;

  std::vector<std::string> offenders;
  for (auto& demo : out.demos) {
    for (Frame& f : demo) {
      auto& t = f.action.translation;
      const double norm =
          std::sqrt(double(t[0]) * t[0] + double(t[1]) * t[1] + double(t[2]) * t[2]);
      if (norm <= eps) {
        offenders.push_back("(demo " + std::to_string(f.demo_id) + ", t=" +
                            std::to_string(f.timestep) + ")");
        continue;
      }
      if (std::abs(norm - 1.0) <= kUnitNormBand) continue;
      for (int k = 0; k < 3; ++k) t[k] = static_cast<float>(double(t[k]) / norm);
    }
  }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << "normalize_actions: " << offenders.size() << " near-zero translation(s): ";
    for (std::size_t i = 0; i < offenders.size() && i < 8; ++i) {
      if (i) msg << ", ";
      msg << offenders[i];
    }
    if (offenders.size() > 8) msg << ", ...";
    throw std::invalid_argument(msg.str());
  }
  return out;
}

DemoSet subsample_demos(const DemoSet& set, std::size_t n, std::uint64_t seed) {
  set.validate();
  if (n < 1 || n > set.demos.size()) {
    throw std::invalid_argument("subsample_demos: n=" + std::to_string(n) +
                                " out of range [1, " + std::to_string(set.demos.size()) + "]");
  }

  std::vector<std::size_t> idx(set.demos.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first n entries are a uniform sample without
  // replacement; sorting restores dataset order.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());

  DemoSet out;
  out.obs_dim = set.obs_dim;
  out.metadata = set.metadata;
  out.demos.reserve(n);
  for (std::size_t i : idx) out.demos.push_back(set.demos[i]);
  return out;
}

}  // namespace vinn::core
