#include "semisam/config.hpp"

#include <fstream>
#include <set>

namespace semisam {
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

json dims_json(const Dims& d) { return json::array({d.d, d.h, d.w}); }

Dims dims_from(const json& j) {
  const auto v = j.get<std::array<int, 3>>();
  return Dims{v[0], v[1], v[2]};
}

Consistency consistency_from(const std::string& s) {
  if (s == "supervised") return Consistency::supervised;
  if (s == "mt") return Consistency::mt;
  if (s == "uamt") return Consistency::uamt;
  throw ConfigError("framework.consistency must be supervised, mt or uamt (got '" + s + "')");
}

Variant variant_from(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "semisam") return Variant::semisam;
  throw ConfigError("framework.variant must be plain or semisam (got '" + s + "')");
}

}  // namespace

std::string to_string(Consistency c) {
  switch (c) {
    case Consistency::supervised: return "supervised";
    case Consistency::mt: return "mt";
    case Consistency::uamt: return "uamt";
  }
  return "?";
}

std::string to_string(Variant v) { return v == Variant::plain ? "plain" : "semisam"; }

void ExperimentConfig::validate() const {
  backbone.validate();
  nn::Backbone<float> probe(backbone);
  if (!probe.accepts(data.patch)) {
    throw ConfigError("data.patch " + to_string(data.patch) + " must be divisible by " +
                      std::to_string(1 << (backbone.depth - 1)));
  }
  if (data.m_labeled < 1) throw ConfigError("data.m_labeled must be >= 1");
  if (data.n_test < 0) throw ConfigError("data.n_test must be >= 0");
  if (data.labeled_batch < 1) throw ConfigError("data.labeled_batch must be >= 1");
  if (data.unlabeled_batch < 0) throw ConfigError("data.unlabeled_batch must be >= 0");
  if (framework.consistency != Consistency::supervised && data.unlabeled_batch < 1) {
    throw ConfigError("consistency training needs data.unlabeled_batch >= 1");
  }
  if (framework.consistency == Consistency::supervised && framework.variant == Variant::semisam) {
    throw ConfigError("the semisam variant needs a consistency framework (mt or uamt)");
  }
  if (!(data.foreground_center_prob >= 0.0 && data.foreground_center_prob <= 1.0)) {
    throw ConfigError("data.foreground_center_prob must be in [0, 1]");
  }
  if (!(optim.lr.lr0 > 0.0) || optim.lr.decay_every < 1 || !(optim.lr.decay_factor > 0.0)) {
    throw ConfigError("optim learning-rate schedule must be positive");
  }
  if (optim.momentum < 0.0 || optim.weight_decay < 0.0) throw ConfigError("optim momentum/weight_decay must be >= 0");
  if (teacher.noise_sigma < 0.0 || teacher.noise_clip < 0.0) throw ConfigError("teacher noise must be >= 0");
  if (!(teacher.ema_cap >= 0.0 && teacher.ema_cap <= 1.0)) throw ConfigError("teacher.ema_cap must be in [0, 1]");
  if (framework.consistency == Consistency::uamt && teacher.uncertainty_passes < 2) {
    throw ConfigError("teacher.uncertainty_passes must be >= 2");
  }
  if (framework.variant == Variant::semisam) {
    if (oracle.backend != "synthetic" && oracle.backend != "spool" && oracle.backend != "http") {
      throw ConfigError("oracle.backend must be synthetic, spool or http");
    }
    if (oracle.backend != "synthetic" && oracle.endpoint.empty()) throw ConfigError("oracle.endpoint is required");
    if (oracle.k_positive < 1) throw ConfigError("oracle.k_positive must be >= 1");
    if (oracle.timeout_ms < 1) throw ConfigError("oracle.timeout_ms must be >= 1");
  }
  if (run.t_max < 1) throw ConfigError("run.t_max must be >= 1");
  if (!(run.w_base > 0.0)) throw ConfigError("run.w_base must be positive");
  if (eval.every < 1) throw ConfigError("eval.every must be >= 1");
  const Dims s = inference_stride();
  if (s.d < 1 || s.h < 1 || s.w < 1 || s.d > data.patch.d || s.h > data.patch.h || s.w > data.patch.w) {
    throw ConfigError("eval.stride must be in [1, patch] per axis");
  }
}

Dims ExperimentConfig::inference_stride() const {
  if (eval.stride.d == 0 && eval.stride.h == 0 && eval.stride.w == 0) {
    return Dims{std::max(1, data.patch.d / 2), std::max(1, data.patch.h / 2), std::max(1, data.patch.w / 2)};
  }
  return eval.stride;
}

json to_json(const ExperimentConfig& c) {
  return json{
      {"data",
       {{"dir", c.data.dir},
        {"m_labeled", c.data.m_labeled},
        {"n_test", c.data.n_test},
        {"split_seed", c.data.split_seed},
        {"patch", dims_json(c.data.patch)},
        {"labeled_batch", c.data.labeled_batch},
        {"unlabeled_batch", c.data.unlabeled_batch},
        {"foreground_center_prob", c.data.foreground_center_prob}}},
      {"framework", {{"consistency", to_string(c.framework.consistency)}, {"variant", to_string(c.framework.variant)}}},
      {"backbone", nn::to_json(c.backbone)},
      {"optim",
       {{"lr0", c.optim.lr.lr0},
        {"decay_every", c.optim.lr.decay_every},
        {"decay_factor", c.optim.lr.decay_factor},
        {"momentum", c.optim.momentum},
        {"weight_decay", c.optim.weight_decay}}},
      {"teacher",
       {{"input_noise", c.teacher.input_noise},
        {"noise_sigma", c.teacher.noise_sigma},
        {"noise_clip", c.teacher.noise_clip},
        {"ema_cap", c.teacher.ema_cap},
        {"uncertainty_passes", c.teacher.uncertainty_passes}}},
      {"oracle",
       {{"backend", c.oracle.backend},
        {"k_positive", c.oracle.k_positive},
        {"dilate_radius", c.oracle.degradation.radius},
        {"flip_rate", c.oracle.degradation.flip_rate},
        {"endpoint", c.oracle.endpoint},
        {"timeout_ms", c.oracle.timeout_ms},
        {"cache_size", c.oracle.cache_size},
        {"seed", c.oracle.seed}}},
      {"eval",
       {{"every", c.eval.every},
        {"stride", dims_json(c.eval.stride)},
        {"unit", c.eval.unit == DistanceUnit::mm ? "mm" : "voxel"}}},
      {"run",
       {{"t_max", c.run.t_max},
        {"seed", c.run.seed},
        {"deterministic", c.run.deterministic},
        {"out_dir", c.run.out_dir},
        {"w_base", c.run.w_base}}}};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"data", "framework", "backbone", "optim", "teacher", "oracle", "eval", "run"}, "");
  ExperimentConfig c;
  try {
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"dir", "m_labeled", "n_test", "split_seed", "patch", "labeled_batch", "unlabeled_batch",
                         "foreground_center_prob"},
                     "data");
      c.data.dir = d.value("dir", c.data.dir);
      c.data.m_labeled = d.value("m_labeled", c.data.m_labeled);
      c.data.n_test = d.value("n_test", c.data.n_test);
      c.data.split_seed = d.value("split_seed", c.data.split_seed);
      if (d.contains("patch")) c.data.patch = dims_from(d["patch"]);
      c.data.labeled_batch = d.value("labeled_batch", c.data.labeled_batch);
      c.data.unlabeled_batch = d.value("unlabeled_batch", c.data.unlabeled_batch);
      c.data.foreground_center_prob = d.value("foreground_center_prob", c.data.foreground_center_prob);
    }
    if (j.contains("framework")) {
      const auto& f = j["framework"];
      reject_unknown(f, {"consistency", "variant"}, "framework");
      if (f.contains("consistency")) c.framework.consistency = consistency_from(f["consistency"].get<std::string>());
      if (f.contains("variant")) c.framework.variant = variant_from(f["variant"].get<std::string>());
    }
    if (j.contains("backbone")) c.backbone = nn::backbone_from_json(j["backbone"]);
    if (j.contains("optim")) {
      const auto& o = j["optim"];
      reject_unknown(o, {"lr0", "decay_every", "decay_factor", "momentum", "weight_decay"}, "optim");
      c.optim.lr.lr0 = o.value("lr0", c.optim.lr.lr0);
      c.optim.lr.decay_every = o.value("decay_every", c.optim.lr.decay_every);
      c.optim.lr.decay_factor = o.value("decay_factor", c.optim.lr.decay_factor);
      c.optim.momentum = o.value("momentum", c.optim.momentum);
      c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
    }
    if (j.contains("teacher")) {
      const auto& t = j["teacher"];
      reject_unknown(t, {"input_noise", "noise_sigma", "noise_clip", "ema_cap", "uncertainty_passes"}, "teacher");
      c.teacher.input_noise = t.value("input_noise", c.teacher.input_noise);
      c.teacher.noise_sigma = t.value("noise_sigma", c.teacher.noise_sigma);
      c.teacher.noise_clip = t.value("noise_clip", c.teacher.noise_clip);
      c.teacher.ema_cap = t.value("ema_cap", c.teacher.ema_cap);
      c.teacher.uncertainty_passes = t.value("uncertainty_passes", c.teacher.uncertainty_passes);
    }
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      reject_unknown(o, {"backend", "k_positive", "dilate_radius", "flip_rate", "endpoint", "timeout_ms", "cache_size",
                         "seed"},
                     "oracle");
      c.oracle.backend = o.value("backend", c.oracle.backend);
      c.oracle.k_positive = o.value("k_positive", c.oracle.k_positive);
      c.oracle.degradation.radius = o.value("dilate_radius", c.oracle.degradation.radius);
      c.oracle.degradation.flip_rate = o.value("flip_rate", c.oracle.degradation.flip_rate);
      c.oracle.endpoint = o.value("endpoint", c.oracle.endpoint);
      c.oracle.timeout_ms = o.value("timeout_ms", c.oracle.timeout_ms);
      c.oracle.cache_size = o.value("cache_size", c.oracle.cache_size);
      c.oracle.seed = o.value("seed", c.oracle.seed);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      reject_unknown(e, {"every", "stride", "unit"}, "eval");
      c.eval.every = e.value("every", c.eval.every);
      if (e.contains("stride")) c.eval.stride = dims_from(e["stride"]);
      const auto unit = e.value("unit", std::string("voxel"));
      if (unit != "voxel" && unit != "mm") throw ConfigError("eval.unit must be voxel or mm");
      c.eval.unit = unit == "mm" ? DistanceUnit::mm : DistanceUnit::voxel;
    }
    if (j.contains("run")) {
      const auto& r = j["run"];
      reject_unknown(r, {"t_max", "seed", "deterministic", "out_dir", "w_base"}, "run");
      c.run.t_max = r.value("t_max", c.run.t_max);
      c.run.seed = r.value("seed", c.run.seed);
      c.run.deterministic = r.value("deterministic", c.run.deterministic);
      c.run.out_dir = r.value("out_dir", c.run.out_dir);
      c.run.w_base = r.value("w_base", c.run.w_base);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace semisam
