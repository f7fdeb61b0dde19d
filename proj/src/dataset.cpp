#include "semisam/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "semisam/nifti.hpp"

namespace semisam {

std::pair<Volume, std::optional<BinaryMask>> load_case(const std::filesystem::path& image_path,
                                                       const std::optional<std::filesystem::path>& mask_path) {
  Volume image = to_volume(read_nifti(image_path));
  for (double s : image.spacing) {
    if (!(s > 0.0)) throw IoError("non-positive spacing in " + image_path.string());
  }
  std::optional<BinaryMask> mask;
  if (mask_path) {
    NiftiData raw = read_nifti(*mask_path);
    if (!(raw.shape == image.shape)) {
      throw ShapeMismatch("mask " + mask_path->string() + " has shape " + to_string(raw.shape) + ", image has " +
                          to_string(image.shape));
    }
    mask = to_mask(raw);
  }
  normalize_intensity(image);
  validate(image);
  return {std::move(image), std::move(mask)};
}

SplitIds split_dataset(const std::vector<std::string>& case_ids, int m_labeled, int n_test, std::uint64_t seed) {
  if (m_labeled < 1) throw ContractViolation("split_dataset: at least one labeled case is required");
  if (n_test < 0) throw ContractViolation("split_dataset: negative test count");
  const auto total = static_cast<long>(case_ids.size());
  if (static_cast<long>(m_labeled) + 1 > total - n_test) {
    throw ContractViolation("split_dataset: " + std::to_string(total) + " cases cannot hold " + std::to_string(n_test) +
                            " test, " + std::to_string(m_labeled) + " labeled and at least one unlabeled case");
  }
  if (std::set<std::string>(case_ids.begin(), case_ids.end()).size() != case_ids.size()) {
    throw ContractViolation("split_dataset: duplicate case ids");
  }
  std::vector<std::string> order = case_ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitIds out;
  auto it = order.begin();
  out.test.assign(it, it + n_test);
  it += n_test;
  out.labeled.assign(it, it + m_labeled);
  it += m_labeled;
  out.unlabeled.assign(it, order.end());
  return out;
}

std::vector<std::string> Manifest::ids() const {
  std::vector<std::string> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.id);
  return out;
}

const ManifestEntry& Manifest::find(const std::string& id) const {
  for (const auto& c : cases) {
    if (c.id == id) return c;
  }
  throw ContractViolation("case '" + id + "' is not in the manifest");
}

Manifest read_manifest(const std::filesystem::path& data_dir) {
  const auto path = data_dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw IoError("missing manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  Manifest m;
  for (const auto& c : j.at("cases")) {
    ManifestEntry e;
    e.id = c.at("id").get<std::string>();
    e.image = c.at("image").get<std::string>();
    e.mask = c.value("mask", std::string{});
    e.role = c.value("role", std::string{});
    m.cases.push_back(std::move(e));
  }
  m.generator = j.value("generator", nlohmann::json());
  return m;
}

void write_manifest(const std::filesystem::path& data_dir, const Manifest& manifest) {
  nlohmann::json j;
  j["format"] = "semisam-dataset";
  j["version"] = 1;
  j["cases"] = nlohmann::json::array();
  for (const auto& c : manifest.cases) {
    nlohmann::json e{{"id", c.id}, {"image", c.image}};
    if (!c.mask.empty()) e["mask"] = c.mask;
    if (!c.role.empty()) e["role"] = c.role;
    j["cases"].push_back(std::move(e));
  }
  if (!manifest.generator.is_null()) j["generator"] = manifest.generator;
  std::filesystem::create_directories(data_dir);
  std::ofstream out(data_dir / kManifestName);
  if (!out) throw IoError("cannot write manifest in " + data_dir.string());
  out << j.dump(2) << "\n";
}

namespace {

std::pair<Volume, std::optional<BinaryMask>> load_entry(const std::filesystem::path& dir, const ManifestEntry& e) {
  std::optional<std::filesystem::path> mask;
  if (!e.mask.empty()) mask = dir / e.mask;
  return load_case(dir / e.image, mask);
}

}  // namespace

DatasetSplit load_split(const std::filesystem::path& data_dir, const Manifest& manifest, const SplitIds& split,
                        std::vector<std::pair<std::string, BinaryMask>>* hidden_masks) {
  DatasetSplit out;
  auto labeled = [&](const std::string& id) {
    auto [image, mask] = load_entry(data_dir, manifest.find(id));
    if (!mask) throw IoError("case '" + id + "' needs a mask");
    return LabeledCase{id, std::move(image), std::move(*mask)};
  };
  for (const auto& id : split.labeled) out.labeled.push_back(labeled(id));
  for (const auto& id : split.test) out.test.push_back(labeled(id));
  for (const auto& id : split.unlabeled) {
    auto [image, mask] = load_entry(data_dir, manifest.find(id));
    if (hidden_masks && mask) hidden_masks->emplace_back(id, std::move(*mask));
    out.unlabeled.push_back(UnlabeledCase{id, std::move(image)});
  }
  return out;
}

}  // namespace semisam
