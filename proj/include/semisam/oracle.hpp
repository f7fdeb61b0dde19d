#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "semisam/random.hpp"
#include "semisam/tensor.hpp"
#include "semisam/volume.hpp"

namespace semisam {

enum class Polarity : int { negative = 0, positive = 1 };

struct PromptPoint {
  Index3 at;
  Polarity polarity = Polarity::positive;
  bool operator==(const PromptPoint&) const = default;
};

/// Ordered point prompts in patch voxel coordinates.
struct PromptSet {
  std::vector<PromptPoint> points;

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
  bool operator==(const PromptSet&) const = default;
};

inline constexpr int kMinPromptSeparation = 4;

/// Binarizes at p_fg > 0.5, keeps the largest 6-connected component and
/// returns its deepest voxel (interior distance transform argmax, first in
/// raster order on ties) followed by up to k_positive - 1 further interior
/// points at least 4 voxels apart when the component allows it. An empty
/// component gives an empty set.
PromptSet extract_prompts(const Volume& foreground_prob, int k_positive, Rng& rng);

template <typename T>
PromptSet extract_prompts(const nn::ProbMap<T>& probs, int k_positive, Rng& rng) {
  return extract_prompts(nn::foreground(probs), k_positive, rng);
}

struct QueryContext {
  std::string case_id;
  Index3 origin;  // patch origin in the source volume
};

struct Provenance {
  std::string backend;
  std::string model_name;
  PromptSet prompts;
  double wall_ms = 0.0;
  bool skipped = false;
  bool cached = false;
  std::string note;
};

struct PseudoLabel {
  BinaryMask mask;
  Provenance provenance;
  bool skipped() const noexcept { return provenance.skipped; }
};

/// The promptable segmentation model behind the oracle branch. Implementations
/// throw on failure or timeout; query_oracle turns that into a skipped label.
class OracleBackend {
 public:
  virtual ~OracleBackend() = default;
  virtual std::string kind() const = 0;
  virtual BinaryMask segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                             std::string& model_name) = 0;
};

/// Throws ContractViolation on empty prompts before touching the backend;
/// every backend failure becomes skipped = true with a warning.
PseudoLabel query_oracle(OracleBackend& backend, const Volume& patch, const PromptSet& prompts,
                         const QueryContext& ctx = {});

struct Degradation {
  int radius = 0;          // > 0 dilates, < 0 erodes, in voxels
  double flip_rate = 0.0;  // per boundary-adjacent voxel
};

/// Ball dilation/erosion by |radius|, then each voxel on either side of the
/// resulting foreground/background interface flips with probability flip_rate
/// (raster order, one draw per interface voxel).
BinaryMask synth_oracle(const BinaryMask& ground_truth, const Degradation& degradation, Rng& rng);

/// Returns nullptr for unknown cases.
using GroundTruthLookup = std::function<const BinaryMask*(const std::string& case_id)>;

/// Stand-in oracle: degrades the hidden ground truth of the queried patch.
/// Deterministic in (seed, case, origin, prompts).
class SyntheticOracle final : public OracleBackend {
 public:
  SyntheticOracle(GroundTruthLookup lookup, Degradation degradation, std::uint64_t seed)
      : lookup_(std::move(lookup)), degradation_(degradation), seed_(seed) {}
  std::string kind() const override { return "synthetic"; }
  BinaryMask segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                     std::string& model_name) override;

 private:
  GroundTruthLookup lookup_;
  Degradation degradation_;
  std::uint64_t seed_;
};

/// Stable key over (case, origin, prompts).
std::string query_key(const QueryContext& ctx, const PromptSet& prompts);
std::uint64_t fnv1a(const std::string& s) noexcept;

/// LRU memo in front of another backend, keyed by query_key.
class CachingOracle final : public OracleBackend {
 public:
  CachingOracle(std::unique_ptr<OracleBackend> inner, std::size_t capacity)
      : inner_(std::move(inner)), capacity_(capacity) {}
  std::string kind() const override { return inner_->kind(); }
  BinaryMask segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                     std::string& model_name) override;
  std::size_t hits() const noexcept { return hits_; }
  std::size_t size() const noexcept { return index_.size(); }
  OracleBackend& inner() noexcept { return *inner_; }

 private:
  struct Entry {
    std::string key;
    BinaryMask mask;
    std::string model_name;
  };
  std::unique_ptr<OracleBackend> inner_;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
};

}  // namespace semisam
