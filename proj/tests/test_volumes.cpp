#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "semisam/dataset.hpp"
#include "semisam/geometry.hpp"
#include "semisam/nifti.hpp"
#include "semisam/patch.hpp"
#include "semisam/phantom.hpp"
#include "semisam/synth.hpp"
#include "support.hpp"

using namespace semisam;
using namespace testing_support;

namespace {
std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
  return ids;
}
}  // namespace

TEST(Normalize, ZeroMeanUnitVariance) {
  Volume v(Dims{4, 5, 6});
  Rng rng(1);
  std::normal_distribution<float> g(3.0f, 2.0f);
  for (auto& x : v.data) x = g(rng);
  normalize_intensity(v);
  double m = 0, s = 0;
  for (float x : v.data) m += x;
  m /= v.data.size();
  for (float x : v.data) s += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.0, 1e-5);
  EXPECT_NEAR(std::sqrt(s / v.data.size()), 1.0, 1e-4);
}

TEST(Normalize, ConstantImageIsZero) {
  Volume v(Dims{3, 3, 3}, {1, 1, 1}, 7.25f);
  normalize_intensity(v);
  for (float x : v.data) {
    EXPECT_TRUE(std::isfinite(x));
    EXPECT_EQ(x, 0.0f);
  }
}

TEST(Nifti, RoundTrip) {
  const auto dir = temp_dir("nifti");
  PhantomSpec spec;
  spec.shape = {20, 22, 24};
  spec.spacing = {0.625, 0.7, 1.5};
  spec.center = {10, 11, 12};
  spec.radii = {5, 6, 7};
  spec.noise_sigma = 0.3;
  const auto [image, mask] = make_phantom(spec);
  write_nifti(dir / "img.nii.gz", image);
  write_nifti(dir / "img.nii", image);
  write_nifti(dir / "msk.nii.gz", mask, image.spacing);
  for (const char* name : {"img.nii.gz", "img.nii"}) {
    const Volume back = to_volume(read_nifti(dir / name));
    EXPECT_EQ(back.shape, image.shape);
    // pixdim is float32 in the header.
    for (int k = 0; k < 3; ++k) EXPECT_EQ(back.spacing[k], static_cast<double>(static_cast<float>(image.spacing[k])));
    for (std::size_t i = 0; i < image.data.size(); ++i) ASSERT_NEAR(back.data[i], image.data[i], 1e-6);
  }
  const BinaryMask mback = to_mask(read_nifti(dir / "msk.nii.gz"));
  EXPECT_EQ(mback, mask);
  // write(load(write(v))) is bit-identical for masks.
  write_nifti(dir / "msk2.nii.gz", mback, image.spacing);
  EXPECT_EQ(read_file(dir / "msk.nii.gz"), read_file(dir / "msk2.nii.gz"));
}

TEST(LoadCase, NormalizesAndChecks) {
  const auto dir = temp_dir("loadcase");
  PhantomSpec spec;
  spec.shape = {16, 16, 16};
  spec.center = {7.5, 7.5, 7.5};
  spec.radii = {4, 4, 4};
  spec.contrast = 10;
  const auto [image, mask] = make_phantom(spec);
  write_nifti(dir / "i.nii.gz", image);
  write_nifti(dir / "m.nii.gz", mask, image.spacing);
  auto [v, m] = load_case(dir / "i.nii.gz", dir / "m.nii.gz");
  ASSERT_TRUE(m);
  EXPECT_EQ(*m, mask);
  EXPECT_EQ(v.shape, image.shape);
  double mean = 0;
  for (float x : v.data) mean += x;
  EXPECT_NEAR(mean / v.data.size(), 0.0, 1e-5);

  write_nifti(dir / "small.nii.gz", BinaryMask(Dims{8, 8, 8}), Spacing{1, 1, 1});
  EXPECT_THROW(load_case(dir / "i.nii.gz", dir / "small.nii.gz"), ShapeMismatch);
  EXPECT_THROW(load_case(dir / "missing.nii.gz"), IoError);

  Volume bad(Dims{4, 4, 4}, {1.0, 0.0, 1.0});
  write_nifti(dir / "bad.nii", bad);
  EXPECT_THROW(load_case(dir / "bad.nii"), Error);
}

TEST(Split, PaperRatios) {
  const auto ids = make_ids(100);
  auto s = split_dataset(ids, 8, 20, 42);
  EXPECT_EQ(s.labeled.size(), 8u);
  EXPECT_EQ(s.unlabeled.size(), 72u);
  EXPECT_EQ(s.test.size(), 20u);
  s = split_dataset(ids, 1, 20, 42);
  EXPECT_EQ(s.labeled.size(), 1u);
  EXPECT_EQ(s.unlabeled.size(), 79u);
}

TEST(Split, DeterministicPartition) {
  const auto ids = make_ids(30);
  const auto a = split_dataset(ids, 3, 5, 9), b = split_dataset(ids, 3, 5, 9), c = split_dataset(ids, 3, 5, 10);
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.unlabeled, b.unlabeled);
  EXPECT_EQ(a.test, b.test);
  EXPECT_TRUE(a.labeled != c.labeled || a.test != c.test);
  std::set<std::string> all;
  for (const auto* part : {&a.labeled, &a.unlabeled, &a.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), ids.size());
}

TEST(Split, Errors) {
  const auto ids = make_ids(10);
  EXPECT_THROW(split_dataset(ids, 0, 2, 1), Error);
  EXPECT_THROW(split_dataset(ids, 8, 2, 1), Error);
  EXPECT_NO_THROW(split_dataset(ids, 7, 2, 1));
  EXPECT_THROW(split_dataset({"a", "a", "b"}, 1, 0, 1), Error);
}

TEST(Patch, ShapesAndIdentity) {
  Rng rng(3);
  Volume big(Dims{40, 36, 33});
  for (std::size_t i = 0; i < big.data.size(); ++i) big.data[i] = static_cast<float>(i % 97) + 1.0f;
  const auto p = sample_patch(big, nullptr, Dims{32, 32, 32}, rng);
  EXPECT_EQ(p.image.shape, (Dims{32, 32, 32}));
  for (int z = 0; z < 32; ++z)
    for (int x = 0; x < 32; ++x) ASSERT_EQ(p.image.at(z, 3, x), big.at(z + p.origin.z, 3 + p.origin.y, x + p.origin.x));

  Volume same(Dims{16, 16, 16});
  const auto q = sample_patch(same, nullptr, Dims{16, 16, 16}, rng);
  EXPECT_EQ(q.origin, (Index3{0, 0, 0}));
}

TEST(Patch, PaddingWhenSmaller) {
  Rng rng(4);
  Volume v(Dims{10, 12, 20});
  BinaryMask m(v.shape);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    v.data[i] = static_cast<float>(i) + 1.0f;
    m.data[i] = i % 3 == 0;
  }
  for (int k = 0; k < 20; ++k) {
    const auto p = sample_patch(v, &m, Dims{16, 16, 16}, rng);
    ASSERT_TRUE(p.mask);
    for (int z = 0; z < 16; ++z)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          const int sz = z + p.origin.z, sy = y + p.origin.y, sx = x + p.origin.x;
          if (v.shape.contains(sz, sy, sx)) {
            ASSERT_EQ(p.image.at(z, y, x), v.at(sz, sy, sx));
            ASSERT_EQ(p.mask->at(z, y, x), m.at(sz, sy, sx));
          } else {
            ASSERT_EQ(p.image.at(z, y, x), 0.0f);
            ASSERT_EQ(p.mask->at(z, y, x), 0);
          }
        }
    // Symmetric padding: the padded axes use fixed offsets.
    EXPECT_EQ(p.origin.z, -3);
    EXPECT_EQ(p.origin.y, -2);
  }
}

TEST(Patch, ForegroundCentering) {
  Rng rng(5);
  Volume v(Dims{64, 64, 64});
  BinaryMask m(v.shape);
  m.at(60, 60, 60) = 1;
  int hits = 0;
  for (int k = 0; k < 200; ++k) {
    const auto p = sample_patch(v, &m, Dims{16, 16, 16}, rng, PatchSampling{1.0});
    hits += p.mask->count() == 1;
  }
  EXPECT_EQ(hits, 200);
}

TEST(Phantom, SphereVolume) {
  PhantomSpec spec;
  spec.shape = {64, 64, 64};
  spec.center = {31.5, 31.5, 31.5};
  spec.radii = {10, 10, 10};
  const auto [image, mask] = make_phantom(spec);
  const double analytic = 4.0 / 3.0 * std::numbers::pi * 1000.0;
  EXPECT_NEAR(static_cast<double>(mask.count()), analytic, 0.02 * analytic);
}

TEST(Phantom, NoiselessHasTwoValues) {
  PhantomSpec spec;
  spec.shape = {24, 24, 24};
  spec.center = {12, 12, 12};
  spec.radii = {5, 7, 6};
  spec.background = 0.25;
  spec.contrast = 2;
  spec.perturbation = 0.15;
  const auto [image, mask] = make_phantom(spec);
  std::set<float> values(image.data.begin(), image.data.end());
  EXPECT_EQ(values.size(), 2u);
  for (std::size_t i = 0; i < mask.data.size(); ++i) EXPECT_EQ(image.data[i], mask.data[i] ? 2.25f : 0.25f);
}

TEST(Phantom, SeedIsolation) {
  PhantomSpec spec;
  spec.shape = {24, 24, 24};
  spec.center = {12, 12, 12};
  spec.radii = {6, 6, 6};
  spec.noise_sigma = 0.5;
  spec.seed = 1;
  const auto a = make_phantom(spec);
  const auto a2 = make_phantom(spec);
  spec.seed = 2;
  const auto b = make_phantom(spec);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first.data, b.first.data);
  EXPECT_EQ(a.first.data, a2.first.data);
}

TEST(Phantom, Errors) {
  PhantomSpec spec;
  spec.shape = {20, 20, 20};
  spec.center = {10, 10, 10};
  spec.radii = {12, 5, 5};
  EXPECT_THROW(make_phantom(spec), ContractViolation);
  spec.radii = {5, 5, 5};
  spec.distractors.push_back({{1, 1, 1}, 3, 1});
  EXPECT_THROW(make_phantom(spec), ContractViolation);
}

TEST(Phantom, DatasetMasksAreSingleComponents) {
  SyntheticDatasetSpec spec;
  spec.num_cases = 6;
  spec.shape = {32, 32, 32};
  spec.radius_range = {4, 9};
  spec.perturbation_range = {0.1, 0.3};
  spec.distractor_count = {1, 3};
  spec.bias_amplitude_range = {0.5, 1.0};
  spec.m_labeled = 1;
  spec.n_test = 2;
  const auto specs = draw_phantom_specs(spec);
  ASSERT_EQ(specs.size(), 6u);
  for (const auto& p : specs) {
    const auto [image, mask] = make_phantom(p);
    EXPECT_FALSE(mask.empty_foreground());
    EXPECT_EQ(label_components(mask).count(), 1);
    for (const auto& d : p.distractors) {
      EXPECT_FALSE(mask.at(static_cast<int>(std::lround(d.center[0])), static_cast<int>(std::lround(d.center[1])),
                           static_cast<int>(std::lround(d.center[2]))));
    }
  }
}

TEST(SynthDataset, DiskMatchesMemory) {
  const auto dir = temp_dir("synth");
  SyntheticDatasetSpec spec;
  spec.num_cases = 5;
  spec.shape = {16, 16, 16};
  spec.radius_range = {3, 5};
  spec.m_labeled = 1;
  spec.n_test = 1;
  spec.seed = 11;
  const Manifest written = write_synthetic_dataset(spec, dir);
  const Manifest read = read_manifest(dir);
  EXPECT_EQ(read.ids(), written.ids());
  EXPECT_EQ(synthetic_spec_from_json(read.generator).seed, 11u);

  const auto mem = generate_synthetic(spec);
  const SplitIds split = split_dataset(read.ids(), 1, 1, spec.split_seed);
  std::vector<std::pair<std::string, BinaryMask>> hidden_disk, hidden_mem;
  const auto disk = load_split(dir, read, split, &hidden_disk);
  const auto memory = to_split(mem, split, &hidden_mem);
  ASSERT_EQ(disk.labeled.size(), 1u);
  EXPECT_EQ(disk.labeled[0].image.data, memory.labeled[0].image.data);
  EXPECT_EQ(disk.labeled[0].mask, memory.labeled[0].mask);
  ASSERT_EQ(disk.unlabeled.size(), 3u);
  EXPECT_EQ(disk.unlabeled[2].image.data, memory.unlabeled[2].image.data);
  EXPECT_EQ(hidden_disk.size(), 3u);
  EXPECT_EQ(hidden_disk[1].second, hidden_mem[1].second);
  for (const auto& e : read.cases) {
    const bool lab = std::find(split.labeled.begin(), split.labeled.end(), e.id) != split.labeled.end();
    if (lab) EXPECT_EQ(e.role, "labeled");
  }
  EXPECT_THROW(synthetic_spec_from_json(nlohmann::json{{"nope", 1}}), ConfigError);
}
