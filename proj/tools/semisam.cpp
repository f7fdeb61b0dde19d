#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "semisam/checkpoint.hpp"
#include "semisam/config.hpp"
#include "semisam/inference.hpp"
#include "semisam/synth.hpp"
#include "semisam/trainer.hpp"

using namespace semisam;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

struct Loaded {
  ExperimentConfig config;
  Checkpoint ckpt;
};

Loaded load_for_inference(const fs::path& checkpoint, const std::string& data_dir) {
  Loaded l;
  l.ckpt = load_checkpoint(checkpoint);
  if (!l.ckpt.config.is_null()) l.config = config_from_json(l.ckpt.config);
  l.config.backbone = l.ckpt.backbone;
  l.config.data.dir = data_dir;
  return l;
}

// Cases to run on: the configured test split, or every case with --all.
std::vector<LabeledCase> select_cases(const ExperimentConfig& cfg, const Manifest& manifest, bool all,
                                      bool need_masks) {
  std::vector<std::string> ids;
  if (all) {
    ids = manifest.ids();
  } else {
    ids = split_dataset(manifest.ids(), cfg.data.m_labeled, cfg.data.n_test, cfg.data.split_seed).test;
  }
  std::vector<LabeledCase> cases;
  for (const auto& id : ids) {
    const auto& e = manifest.find(id);
    std::optional<fs::path> mask;
    if (!e.mask.empty()) mask = fs::path(cfg.data.dir) / e.mask;
    if (need_masks && !mask) continue;
    auto [image, m] = load_case(fs::path(cfg.data.dir) / e.image, mask);
    cases.push_back({id, std::move(image), m ? std::move(*m) : BinaryMask(image.shape)});
  }
  return cases;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  ExperimentConfig cfg = load_config(config_path);
  std::optional<fs::path> from;
  if (!resume.empty()) from = resume;
  train(cfg, from);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, bool all, const std::string& out,
             const std::string& unit) {
  Loaded l = load_for_inference(checkpoint, data);
  if (unit == "mm") l.config.eval.unit = DistanceUnit::mm;
  if (unit == "voxel") l.config.eval.unit = DistanceUnit::voxel;
  const Manifest manifest = read_manifest(data);
  const auto cases = select_cases(l.config, manifest, all, true);
  if (cases.empty()) throw ConfigError("no labeled cases to evaluate");
  nn::Backbone<float> net(l.config.backbone);
  MetricsReport r = evaluate(net, l.ckpt.student, cases, l.config.data.patch, l.config.inference_stride(),
                             l.config.eval.unit);
  r.iteration = l.ckpt.t;
  if (!out.empty()) {
    fs::create_directories(out);
    write_report_csv(fs::path(out) / "metrics.csv", r);
    write_report_json(fs::path(out) / "metrics.json", r);
  }
  std::cout << to_json(r).dump(2) << '\n';
  return 0;
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out) {
  const SyntheticDatasetSpec spec = synthetic_spec_from_json(read_json(spec_path));
  const Manifest m = write_synthetic_dataset(spec, out);
  spdlog::info("wrote {} cases to {}", m.cases.size(), out);
  return 0;
}

int cmd_export_prompts(const std::string& checkpoint, const std::string& data, const std::string& out, int k) {
  Loaded l = load_for_inference(checkpoint, data);
  const Manifest manifest = read_manifest(data);
  const auto cases = select_cases(l.config, manifest, true, false);
  nn::Backbone<float> net(l.config.backbone);
  Rng rng(mix64(l.config.oracle.seed ^ 0x70726f6dULL));
  const int k_positive = k > 0 ? k : l.config.oracle.k_positive;
  nlohmann::json doc{{"checkpoint", checkpoint}, {"t", l.ckpt.t}, {"k_positive", k_positive}, {"cases", nlohmann::json::array()}};
  for (const auto& c : cases) {
    const Volume fg = infer_probabilities(net, l.ckpt.student, c.image, l.config.data.patch, l.config.inference_stride());
    const PromptSet prompts = extract_prompts(fg, k_positive, rng);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : prompts.points) {
      pts.push_back({p.at.z, p.at.y, p.at.x, p.polarity == Polarity::positive ? 1 : 0});
    }
    doc["cases"].push_back({{"case_id", c.id}, {"shape", {c.image.shape.d, c.image.shape.h, c.image.shape.w}},
                            {"prompts", pts}});
  }
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::ofstream(out) << doc.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised 3D segmentation with a promptable oracle branch"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error");

  std::string config, resume, checkpoint, data, out, spec, unit;
  bool all = false;
  int k = 0;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data, "dataset directory with manifest.json")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", out, "directory for metrics.csv / metrics.json");
  eval_cmd->add_option("--unit", unit, "voxel|mm")->check(CLI::IsMember({"voxel", "mm"}));
  eval_cmd->add_flag("--all", all, "every case with a mask instead of the test split");

  auto* gen_cmd = app.add_subcommand("gen-synth", "write a phantom dataset");
  gen_cmd->add_option("--spec", spec, "dataset spec (JSON)")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", out)->required();

  auto* exp_cmd = app.add_subcommand("export-prompts", "dump the prompts a checkpoint would generate");
  exp_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  exp_cmd->add_option("--out", out, "JSON file (stdout if omitted)");
  exp_cmd->add_option("--k", k, "positive points per case (default: from the checkpoint's config)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    if (*train_cmd) return cmd_train(config, resume);
    if (*eval_cmd) return cmd_eval(checkpoint, data, all, out, unit);
    if (*gen_cmd) return cmd_gen_synth(spec, out);
    if (*exp_cmd) return cmd_export_prompts(checkpoint, data, out, k);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
