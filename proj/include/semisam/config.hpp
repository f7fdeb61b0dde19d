#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "semisam/metrics.hpp"
#include "semisam/network.hpp"
#include "semisam/oracle.hpp"
#include "semisam/schedules.hpp"

namespace semisam {

enum class Consistency { supervised, mt, uamt };
enum class Variant { plain, semisam };

std::string to_string(Consistency c);
std::string to_string(Variant v);

struct DataConfig {
  std::string dir;
  int m_labeled = 8;
  int n_test = 20;
  std::uint64_t split_seed = 1337;
  Dims patch{128, 128, 128};
  int labeled_batch = 2;
  int unlabeled_batch = 2;
  double foreground_center_prob = 0.5;
};

struct FrameworkConfig {
  Consistency consistency = Consistency::mt;
  Variant variant = Variant::semisam;
};

struct OptimConfig {
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

struct TeacherConfig {
  bool input_noise = true;
  double noise_sigma = 0.1;
  double noise_clip = 0.2;
  double ema_cap = 0.99;
  int uncertainty_passes = 8;
};

struct OracleConfig {
  std::string backend = "synthetic";  // synthetic | spool | http
  int k_positive = 1;
  Degradation degradation{1, 0.05};
  std::string endpoint;  // spool directory or http URL
  int timeout_ms = 30000;
  std::size_t cache_size = 4096;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::int64_t every = 500;
  Dims stride{0, 0, 0};  // zero: half the patch
  DistanceUnit unit = DistanceUnit::voxel;
};

struct RunConfig {
  std::int64_t t_max = 6000;
  std::uint64_t seed = 1337;
  bool deterministic = true;
  std::string out_dir = "runs/default";
  double w_base = 0.1;  // consistency weight scale of both ramps
};

struct ExperimentConfig {
  DataConfig data;
  FrameworkConfig framework;
  nn::BackboneConfig backbone = nn::BackboneConfig::full();
  OptimConfig optim;
  TeacherConfig teacher;
  OracleConfig oracle;
  EvalConfig eval;
  RunConfig run;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  Dims inference_stride() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys take defaults; unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace semisam
