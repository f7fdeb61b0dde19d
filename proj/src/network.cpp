#include "semisam/network.hpp"

#include <algorithm>
#include <set>

namespace semisam::nn {

void BackboneConfig::validate() const {
  if (in_channels < 1) throw ConfigError("backbone in_channels must be >= 1");
  if (num_classes != 2) throw ConfigError("backbone supports binary segmentation only (num_classes = 2)");
  if (base_width < 1) throw ConfigError("backbone base_width must be >= 1");
  if (depth < 1 || depth > 6) throw ConfigError("backbone depth must be in [1, 6]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
}

nlohmann::json to_json(const BackboneConfig& c) {
  return nlohmann::json{{"in_channels", c.in_channels},
                        {"num_classes", c.num_classes},
                        {"base_width", c.base_width},
                        {"depth", c.depth},
                        {"dropout_rate", c.dropout_rate}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"in_channels", "num_classes", "base_width", "depth", "dropout_rate"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown backbone key '" + key + "'");
  }
  BackboneConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.base_width = j.value("base_width", c.base_width);
  c.depth = j.value("depth", c.depth);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.validate();
  return c;
}

Volume perturb_input(const Volume& patch, Rng& rng, double sigma, double clip) {
  if (sigma < 0.0) throw ContractViolation("perturb_input: negative sigma");
  Volume out = patch;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& v : out.data) v += static_cast<float>(std::clamp(noise(rng), -clip, clip));
  return out;
}

}  // namespace semisam::nn
