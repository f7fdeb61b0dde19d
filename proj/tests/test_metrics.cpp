#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "semisam/metrics.hpp"
#include "support.hpp"

using namespace semisam;
using namespace testing_support;

namespace {

BinaryMask single(Dims d, int z, int y, int x) {
  BinaryMask m(d);
  m.at(z, y, x) = 1;
  return m;
}

std::pair<BinaryMask, BinaryMask> random_pair(Rng& rng) {
  const Dims d{16, 16, 16};
  BinaryMask a, b;
  do {
    a = random_blobs(d, rng, 3, 1.0, 5.0);
    b = random_blobs(d, rng, 3, 1.0, 5.0);
  } while (a.empty_foreground() || b.empty_foreground());
  return {a, b};
}

}  // namespace

TEST(Overlap, Examples) {
  const Dims d{10, 10, 10};
  BinaryMask a(d), b(d);
  for (int i = 0; i < 100; ++i) a.data[i] = 1;
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(jaccard(a, a), 1.0);
  for (int i = 100; i < 200; ++i) b.data[i] = 1;
  EXPECT_EQ(dice(a, b), 0.0);
  BinaryMask c(d);
  for (int i = 50; i < 150; ++i) c.data[i] = 1;
  EXPECT_DOUBLE_EQ(dice(a, c), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(a, c), 50.0 / 150.0);
  EXPECT_EQ(dice(BinaryMask(d), BinaryMask(d)), 1.0);
  EXPECT_EQ(jaccard(BinaryMask(d), BinaryMask(d)), 1.0);
  EXPECT_THROW(dice(a, BinaryMask(Dims{2, 2, 2})), ShapeMismatch);
}

TEST(Overlap, SymmetryAndJaccardIdentity) {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto a = random_noise_mask(Dims{5, 5, 5}, rng, 0.3), b = random_noise_mask(Dims{5, 5, 5}, rng, 0.3);
    const double D = dice(a, b);
    EXPECT_EQ(D, dice(b, a));
    EXPECT_EQ(jaccard(a, b), jaccard(b, a));
    EXPECT_NEAR(jaccard(a, b), D / (2 - D), 1e-12);
    EXPECT_LE(jaccard(a, b), D);
  }
}

TEST(SurfaceDistance, SingleVoxels) {
  const Dims d{12, 12, 12};
  const auto a = single(d, 2, 5, 5), b = single(d, 7, 5, 5);
  const auto [ab, ba] = surface_distances(a, b);
  ASSERT_EQ(ab.size(), 1u);
  EXPECT_DOUBLE_EQ(ab[0], 5.0);
  EXPECT_DOUBLE_EQ(ba[0], 5.0);
  EXPECT_DOUBLE_EQ(asd(a, b), 5.0);
  EXPECT_DOUBLE_EQ(hd95(a, b), 5.0);

  const auto c = single(d, 5, 5, 5);
  const auto [cd, dc] = surface_distances(a, c, {2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(cd[0], 6.0);
  EXPECT_DOUBLE_EQ(dc[0], 6.0);
}

TEST(SurfaceDistance, IdenticalAndEmpty) {
  Rng rng(2);
  const auto [a, b] = random_pair(rng);
  for (double v : surface_distances(a, a).first) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(asd(a, a), 0.0);
  EXPECT_EQ(hd95(a, a), 0.0);
  try {
    surface_distances(a, BinaryMask(a.shape));
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("undefined surface distance"), std::string::npos);
  }
}

TEST(SurfaceDistance, MatchesBruteForce) {
  Rng rng(3);
  for (int k = 0; k < 25; ++k) {
    const auto [a, b] = random_pair(rng);
    const Spacing sp = k % 2 ? Spacing{1.0, 1.0, 1.0} : Spacing{1.5, 0.7, 1.2};
    const auto ref_ab = brute_directed(a, b, sp), ref_ba = brute_directed(b, a, sp);
    const auto [ab, ba] = surface_distances(a, b, sp);
    ASSERT_EQ(ab.size(), ref_ab.size());
    ASSERT_EQ(ba.size(), ref_ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_NEAR(ab[i], ref_ab[i], 1e-9);
    for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_NEAR(ba[i], ref_ba[i], 1e-9);
    auto all = ref_ab;
    all.insert(all.end(), ref_ba.begin(), ref_ba.end());
    EXPECT_NEAR(asd(a, b, sp), std::accumulate(all.begin(), all.end(), 0.0) / all.size(), 1e-9);
    EXPECT_NEAR(hd95(a, b, sp), brute_percentile(all, 0.95), 1e-9);
    EXPECT_NEAR(asd(a, b, sp), asd(b, a, sp), 1e-12);
    EXPECT_NEAR(hd95(a, b, sp), hd95(b, a, sp), 1e-12);
  }
}

TEST(SurfaceDistance, TranslationInvariance) {
  const Dims d{20, 20, 20};
  const auto a = sphere(d, 8, 8, 8, 3.5), b = sphere(d, 9, 8, 7, 2.5);
  const auto a2 = sphere(d, 10, 11, 9, 3.5), b2 = sphere(d, 11, 11, 8, 2.5);
  EXPECT_NEAR(asd(a, b), asd(a2, b2), 1e-12);
  EXPECT_NEAR(hd95(a, b), hd95(a2, b2), 1e-12);
  EXPECT_NEAR(dice(a, b), dice(a2, b2), 1e-12);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile_linear({1, 2, 3, 4, 5}, 0.95), 4.8);
  EXPECT_DOUBLE_EQ(percentile_linear({7}, 0.95), 7.0);
  EXPECT_DOUBLE_EQ(percentile_linear({3, 1, 2}, 0.5), 2.0);
}

TEST(Report, MeansAndSentinels) {
  const Dims d{10, 10, 10};
  const auto ref = sphere(d, 5, 5, 5, 3);
  const auto shifted = sphere(d, 5, 5, 6, 3);
  const BinaryMask empty(d);
  const auto r = build_report({"a", "b", "c"}, {ref, shifted, empty}, {ref, ref, ref},
                              {Spacing{1, 1, 1}, Spacing{1, 1, 1}, Spacing{1, 1, 1}}, DistanceUnit::voxel);
  ASSERT_EQ(r.cases.size(), 3u);
  EXPECT_EQ(r.cases[0].dice, 100.0);
  EXPECT_EQ(r.cases[0].asd, 0.0);
  EXPECT_EQ(r.cases[2].dice, 0.0);
  EXPECT_TRUE(r.cases[2].distance_sentinel);
  EXPECT_EQ(r.cases[2].asd, r.cases[1].asd);  // worst finite value in the split
  EXPECT_EQ(r.cases[2].hd95, r.cases[1].hd95);
  EXPECT_NEAR(r.mean.dice, (r.cases[0].dice + r.cases[1].dice + r.cases[2].dice) / 3, 1e-12);
  EXPECT_NEAR(r.mean.asd, (r.cases[0].asd + r.cases[1].asd + r.cases[2].asd) / 3, 1e-12);
  EXPECT_NEAR(r.mean.hd95, (r.cases[0].hd95 + r.cases[1].hd95 + r.cases[2].hd95) / 3, 1e-12);
  for (const auto& c : r.cases) {
    EXPECT_LE(c.jaccard, c.dice);
    EXPECT_GE(c.asd, 0.0);
  }

  const auto all_empty = build_report({"x"}, {empty}, {ref}, {Spacing{2, 1, 1}}, DistanceUnit::mm);
  EXPECT_TRUE(all_empty.cases[0].distance_sentinel);
  EXPECT_NEAR(all_empty.cases[0].asd, std::sqrt(18.0 * 18.0 + 81.0 + 81.0), 1e-12);
}

TEST(Report, Files) {
  const auto dir = temp_dir("metrics");
  const Dims d{6, 6, 6};
  const auto m = sphere(d, 3, 3, 3, 2);
  auto r = build_report({"c0"}, {m}, {m}, {Spacing{1, 1, 1}}, DistanceUnit::voxel);
  write_report_csv(dir / "r.csv", r);
  write_report_json(dir / "r.json", r);
  std::ifstream csv(dir / "r.csv");
  std::string header, row, mean;
  std::getline(csv, header);
  std::getline(csv, row);
  std::getline(csv, mean);
  EXPECT_EQ(header, "case_id,dice,jaccard,asd_voxel,hd95_voxel,distance_sentinel");
  EXPECT_EQ(row.substr(0, 3), "c0,");
  EXPECT_EQ(mean.substr(0, 5), "mean,");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "r.json"));
  EXPECT_EQ(j["mean"]["dice"].get<double>(), 100.0);
  EXPECT_EQ(j["unit"], "voxel");
}
