#include "semisam/synth.hpp"

#include <cstdio>
#include <unordered_map>

#include "semisam/nifti.hpp"

namespace semisam {

namespace {

std::string case_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03d", i);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticDatasetSpec& spec) {
  SyntheticDataset ds;
  const auto specs = draw_phantom_specs(spec);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [image, mask] = make_phantom(specs[i]);
    normalize_intensity(image);
    ds.ids.push_back(case_name(static_cast<int>(i)));
    ds.images.push_back(std::move(image));
    ds.masks.push_back(std::move(mask));
  }
  ds.split = split_dataset(ds.ids, spec.m_labeled, spec.n_test, spec.split_seed);
  return ds;
}

DatasetSplit to_split(const SyntheticDataset& ds, const SplitIds& split,
                      std::vector<std::pair<std::string, BinaryMask>>* hidden_masks) {
  std::unordered_map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < ds.ids.size(); ++i) at[ds.ids[i]] = i;
  auto index = [&](const std::string& id) {
    auto it = at.find(id);
    if (it == at.end()) throw ContractViolation("unknown case '" + id + "'");
    return it->second;
  };
  DatasetSplit out;
  for (const auto& id : split.labeled) out.labeled.push_back({id, ds.images[index(id)], ds.masks[index(id)]});
  for (const auto& id : split.test) out.test.push_back({id, ds.images[index(id)], ds.masks[index(id)]});
  for (const auto& id : split.unlabeled) {
    out.unlabeled.push_back({id, ds.images[index(id)]});
    if (hidden_masks) hidden_masks->emplace_back(id, ds.masks[index(id)]);
  }
  return out;
}

Manifest write_synthetic_dataset(const SyntheticDatasetSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto specs = draw_phantom_specs(spec);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < specs.size(); ++i) ids.push_back(case_name(static_cast<int>(i)));
  const SplitIds split = split_dataset(ids, spec.m_labeled, spec.n_test, spec.split_seed);
  std::unordered_map<std::string, std::string> role;
  for (const auto& id : split.labeled) role[id] = "labeled";
  for (const auto& id : split.unlabeled) role[id] = "unlabeled";
  for (const auto& id : split.test) role[id] = "test";

  Manifest m;
  m.generator = to_json(spec);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    // Raw intensities on disk; normalization happens at load time.
    const auto [image, mask] = make_phantom(specs[i]);
    ManifestEntry e{ids[i], ids[i] + "_image.nii.gz", ids[i] + "_mask.nii.gz", role[ids[i]]};
    write_nifti(out_dir / e.image, image);
    write_nifti(out_dir / e.mask, mask, image.spacing);
    m.cases.push_back(std::move(e));
  }
  write_manifest(out_dir, m);
  return m;
}

}  // namespace semisam
