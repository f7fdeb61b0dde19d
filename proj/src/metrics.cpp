#include "semisam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "semisam/geometry.hpp"

namespace semisam {
namespace {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a.shape, b.shape, "overlap metric");
  Overlap o;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    o.a += a.data[i];
    o.b += b.data[i];
    o.both += a.data[i] & b.data[i];
  }
  return o;
}

std::vector<double> directed(const BinaryMask& from_boundary, const BinaryMask& to_boundary, const Spacing& spacing) {
  const auto d2 = squared_distance_transform(to_boundary, spacing);
  std::vector<double> out;
  for (std::size_t i = 0; i < from_boundary.data.size(); ++i) {
    if (from_boundary.data[i]) out.push_back(std::sqrt(d2[i]));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double jaccard(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

std::pair<std::vector<double>, std::vector<double>> surface_distances(const BinaryMask& a, const BinaryMask& b,
                                                                      const Spacing& spacing) {
  require_same_shape(a.shape, b.shape, "surface_distances");
  if (a.empty_foreground() || b.empty_foreground()) throw ContractViolation("undefined surface distance");
  const BinaryMask ba = boundary(a);
  const BinaryMask bb = boundary(b);
  return {directed(ba, bb, spacing), directed(bb, ba, spacing)};
}

double percentile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw ContractViolation("percentile of an empty list");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

double asd(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing) {
  auto [ab, ba] = surface_distances(a, b, spacing);
  ab.insert(ab.end(), ba.begin(), ba.end());
  return mean_of(ab);
}

double hd95(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing) {
  auto [ab, ba] = surface_distances(a, b, spacing);
  ab.insert(ab.end(), ba.begin(), ba.end());
  return percentile_linear(std::move(ab), 0.95);
}

MetricsReport build_report(const std::vector<std::string>& ids, const std::vector<BinaryMask>& predictions,
                           const std::vector<BinaryMask>& references, const std::vector<Spacing>& spacings,
                           DistanceUnit unit) {
  if (ids.size() != predictions.size() || ids.size() != references.size() || ids.size() != spacings.size()) {
    throw ContractViolation("build_report: mismatched list lengths");
  }
  MetricsReport report;
  report.unit = unit;
  std::vector<double> diagonals;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Spacing sp = unit == DistanceUnit::mm ? spacings[i] : Spacing{1.0, 1.0, 1.0};
    CaseMetrics c;
    c.case_id = ids[i];
    c.dice = 100.0 * dice(predictions[i], references[i]);
    c.jaccard = 100.0 * jaccard(predictions[i], references[i]);
    if (predictions[i].empty_foreground() || references[i].empty_foreground()) {
      c.distance_sentinel = true;
    } else {
      auto [ab, ba] = surface_distances(predictions[i], references[i], sp);
      ab.insert(ab.end(), ba.begin(), ba.end());
      c.asd = mean_of(ab);
      c.hd95 = percentile_linear(std::move(ab), 0.95);
    }
    const Dims& s = references[i].shape;
    diagonals.push_back(std::sqrt(std::pow((s.d - 1) * sp[0], 2) + std::pow((s.h - 1) * sp[1], 2) +
                                  std::pow((s.w - 1) * sp[2], 2)));
    report.cases.push_back(c);
  }
  finalize_report(report, diagonals);
  return report;
}

void finalize_report(MetricsReport& report, const std::vector<double>& diagonals) {
  double worst_asd = -1.0, worst_hd = -1.0;
  for (const auto& c : report.cases) {
    if (c.distance_sentinel) continue;
    worst_asd = std::max(worst_asd, c.asd);
    worst_hd = std::max(worst_hd, c.hd95);
  }
  const double diag = diagonals.empty() ? 0.0 : *std::max_element(diagonals.begin(), diagonals.end());
  if (worst_asd < 0.0) worst_asd = diag;
  if (worst_hd < 0.0) worst_hd = diag;
  CaseMetrics mean;
  mean.case_id = "mean";
  for (auto& c : report.cases) {
    if (c.distance_sentinel) {
      c.asd = worst_asd;
      c.hd95 = worst_hd;
      mean.distance_sentinel = true;
    }
    mean.dice += c.dice;
    mean.jaccard += c.jaccard;
    mean.asd += c.asd;
    mean.hd95 += c.hd95;
  }
  if (!report.cases.empty()) {
    const double n = static_cast<double>(report.cases.size());
    mean.dice /= n;
    mean.jaccard /= n;
    mean.asd /= n;
    mean.hd95 /= n;
  }
  report.mean = mean;
}

void write_report_csv(const std::filesystem::path& path, const MetricsReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const char* unit = report.unit == DistanceUnit::mm ? "mm" : "voxel";
  out << "case_id,dice,jaccard,asd_" << unit << ",hd95_" << unit << ",distance_sentinel\n";
  auto row = [&](const CaseMetrics& c) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%d\n", c.case_id.c_str(), c.dice, c.jaccard, c.asd,
                  c.hd95, c.distance_sentinel ? 1 : 0);
    out << buf;
  };
  for (const auto& c : report.cases) row(c);
  row(report.mean);
}

nlohmann::json to_json(const MetricsReport& report) {
  auto one = [](const CaseMetrics& c) {
    return nlohmann::json{{"case_id", c.case_id}, {"dice", c.dice}, {"jaccard", c.jaccard}, {"asd", c.asd},
                          {"hd95", c.hd95},       {"distance_sentinel", c.distance_sentinel}};
  };
  nlohmann::json j;
  j["unit"] = report.unit == DistanceUnit::mm ? "mm" : "voxel";
  if (report.iteration >= 0) j["iteration"] = report.iteration;
  j["cases"] = nlohmann::json::array();
  for (const auto& c : report.cases) j["cases"].push_back(one(c));
  j["mean"] = one(report.mean);
  return j;
}

void write_report_json(const std::filesystem::path& path, const MetricsReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(report).dump(2) << "\n";
}

}  // namespace semisam
