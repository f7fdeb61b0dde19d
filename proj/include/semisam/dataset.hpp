#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semisam/volume.hpp"

namespace semisam {

/// Reads an image (and optional mask) and z-score normalizes the image.
/// The mask is binarized with threshold 0.5.
std::pair<Volume, std::optional<BinaryMask>> load_case(
    const std::filesystem::path& image_path,
    const std::optional<std::filesystem::path>& mask_path = std::nullopt);

struct SplitIds {
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::vector<std::string> test;
};

/// Deterministic in (case_ids, m_labeled, n_test, seed). The shuffled list
/// gives the test cases first; the first m_labeled of the remaining pool are
/// labeled and the rest unlabeled.
SplitIds split_dataset(const std::vector<std::string>& case_ids, int m_labeled, int n_test, std::uint64_t seed);

struct LabeledCase {
  std::string id;
  Volume image;
  BinaryMask mask;
};

struct UnlabeledCase {
  std::string id;
  Volume image;
};

struct DatasetSplit {
  std::vector<LabeledCase> labeled;
  std::vector<UnlabeledCase> unlabeled;
  std::vector<LabeledCase> test;
};

struct ManifestEntry {
  std::string id;
  std::string image;  // relative to the manifest directory
  std::string mask;   // empty when absent
  std::string role;   // "labeled", "unlabeled", "test" or empty
};

struct Manifest {
  std::vector<ManifestEntry> cases;
  nlohmann::json generator;  // generating spec for synthetic datasets, null otherwise

  std::vector<std::string> ids() const;
  const ManifestEntry& find(const std::string& id) const;
};

inline constexpr const char* kManifestName = "manifest.json";

Manifest read_manifest(const std::filesystem::path& data_dir);
void write_manifest(const std::filesystem::path& data_dir, const Manifest& manifest);

/// Loads the cases named by `split`. Unlabeled cases drop their masks here;
/// `hidden_masks`, when given, receives them (the synthetic oracle's ground truth).
DatasetSplit load_split(const std::filesystem::path& data_dir, const Manifest& manifest, const SplitIds& split,
                        std::vector<std::pair<std::string, BinaryMask>>* hidden_masks = nullptr);

}  // namespace semisam
