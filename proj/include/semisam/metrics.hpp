#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisam/volume.hpp"

namespace semisam {

/// 2|A∩B| / (|A| + |B|); 1 when both are empty.
double dice(const BinaryMask& a, const BinaryMask& b);
/// |A∩B| / |A∪B|; 1 when both are empty.
double jaccard(const BinaryMask& a, const BinaryMask& b);

/// Directed distances from each boundary voxel of one mask to the nearest
/// boundary voxel of the other (6-neighbourhood boundaries, spacing-scaled).
/// Throws ContractViolation("undefined surface distance") if either mask is empty.
std::pair<std::vector<double>, std::vector<double>> surface_distances(const BinaryMask& a, const BinaryMask& b,
                                                                      const Spacing& spacing = {1.0, 1.0, 1.0});

/// Linear interpolation between order statistics at rank q (n - 1).
double percentile_linear(std::vector<double> values, double q);

double asd(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing = {1.0, 1.0, 1.0});
double hd95(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing = {1.0, 1.0, 1.0});

enum class DistanceUnit { voxel, mm };

struct CaseMetrics {
  std::string case_id;
  double dice = 0.0;     // percent
  double jaccard = 0.0;  // percent
  double asd = 0.0;
  double hd95 = 0.0;
  bool distance_sentinel = false;  // prediction or reference empty
};

struct MetricsReport {
  std::vector<CaseMetrics> cases;
  DistanceUnit unit = DistanceUnit::voxel;
  CaseMetrics mean;  // case_id "mean"
  std::int64_t iteration = -1;
};

/// Computes per-case metrics for (prediction, reference) pairs, fills
/// distance sentinels and aggregates. `spacing` is used in mm mode only.
MetricsReport build_report(const std::vector<std::string>& ids, const std::vector<BinaryMask>& predictions,
                           const std::vector<BinaryMask>& references, const std::vector<Spacing>& spacings,
                           DistanceUnit unit);

/// Replaces sentinel distances by the worst finite value of the split
/// (or the largest volume diagonal when nothing is finite) and recomputes means.
void finalize_report(MetricsReport& report, const std::vector<double>& diagonals);

void write_report_csv(const std::filesystem::path& path, const MetricsReport& report);
nlohmann::json to_json(const MetricsReport& report);
void write_report_json(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace semisam
