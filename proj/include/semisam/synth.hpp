#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "semisam/dataset.hpp"
#include "semisam/phantom.hpp"

namespace semisam {

/// A generated phantom dataset. Images are already intensity-normalized, so
/// they match what load_case returns for the files write_synthetic_dataset emits.
struct SyntheticDataset {
  std::vector<std::string> ids;
  std::vector<Volume> images;
  std::vector<BinaryMask> masks;
  SplitIds split;
};

SyntheticDataset generate_synthetic(const SyntheticDatasetSpec& spec);

/// In-memory equivalent of load_split on the written dataset.
DatasetSplit to_split(const SyntheticDataset& ds, const SplitIds& split,
                      std::vector<std::pair<std::string, BinaryMask>>* hidden_masks = nullptr);

/// Writes case_XXX_image.nii.gz / case_XXX_mask.nii.gz and the manifest
/// (roles and generating spec included). Returns the manifest.
Manifest write_synthetic_dataset(const SyntheticDatasetSpec& spec, const std::filesystem::path& out_dir);

}  // namespace semisam
