#include "semisam/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include <spdlog/spdlog.h>

#include "semisam/checkpoint.hpp"
#include "semisam/inference.hpp"
#include "semisam/oracle_adapter.hpp"

#ifndef SEMISAM_VERSION
#define SEMISAM_VERSION "0.0.0"
#endif

namespace semisam {

namespace fs = std::filesystem;

std::string version_string() { return SEMISAM_VERSION; }

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  return RngStreams{Rng(mix64(seed ^ 0x64617461ULL)), Rng(mix64(seed ^ 0x6e6f6973ULL)),
                    Rng(mix64(seed ^ 0x64726f70ULL)), Rng(mix64(seed ^ 0x6f72636cULL))};
}

void sgd_step(std::span<float> params, std::span<const float> grad, std::span<float> velocity, double lr,
              double momentum, double weight_decay) {
  if (params.size() != grad.size() || params.size() != velocity.size()) {
    throw ShapeMismatch("sgd_step: parameter/gradient/velocity length mismatch");
  }
  const float mu = static_cast<float>(momentum);
  const float wd = static_cast<float>(weight_decay);
  const float step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = mu * velocity[i] + (grad[i] + wd * params[i]);
    params[i] -= step * velocity[i];
  }
}

std::unique_ptr<OracleBackend> make_oracle(const OracleConfig& config, GroundTruthLookup ground_truth) {
  std::unique_ptr<OracleBackend> inner;
  const std::chrono::milliseconds timeout(config.timeout_ms);
  if (config.backend == "synthetic") {
    inner = std::make_unique<SyntheticOracle>(std::move(ground_truth), config.degradation, config.seed);
  } else if (config.backend == "spool") {
    inner = std::make_unique<SpoolAdapter>(config.endpoint, timeout);
  } else if (config.backend == "http") {
    inner = std::make_unique<HttpAdapter>(config.endpoint, timeout);
  } else {
    throw ConfigError("unknown oracle backend '" + config.backend + "'");
  }
  if (config.cache_size == 0) return inner;
  return std::make_unique<CachingOracle>(std::move(inner), config.cache_size);
}

Trainer::Trainer(ExperimentConfig config, DatasetSplit data, std::unique_ptr<OracleBackend> oracle)
    : config_(std::move(config)), data_(std::move(data)), oracle_(std::move(oracle)), net_(config_.backbone) {
  config_.validate();
  if (data_.labeled.empty()) throw ConfigError("training needs at least one labeled case");
  if (config_.framework.consistency != Consistency::supervised && data_.unlabeled.empty()) {
    throw ConfigError("consistency training needs unlabeled cases");
  }
  if (config_.framework.variant == Variant::semisam && !oracle_) {
    throw ConfigError("the semisam variant needs an oracle backend");
  }
  state_.student = net_.initial_parameters(mix64(config_.run.seed ^ 0x696e6974ULL));
  state_.teacher = state_.student;
  state_.momentum.assign(state_.student.size(), 0.0f);
  state_.rng = RngStreams::from_seed(config_.run.seed);
}

StepOutcome Trainer::step() {
  const PatchSampling sampling{config_.data.foreground_center_prob};
  Rng rng(state_.rng.data());
  Rng unlabeled_rng(state_.rng.data());
  std::vector<Patch> labeled;
  for (int i = 0; i < config_.data.labeled_batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, data_.labeled.size() - 1);
    const auto& c = data_.labeled[pick(rng)];
    labeled.push_back(sample_patch(c.image, &c.mask, config_.data.patch, rng, sampling));
  }
  std::vector<Patch> unlabeled;
  std::vector<std::string> ids;
  if (config_.framework.consistency != Consistency::supervised) {
    for (int j = 0; j < config_.data.unlabeled_batch; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, data_.unlabeled.size() - 1);
      const auto& c = data_.unlabeled[pick(unlabeled_rng)];
      unlabeled.push_back(sample_patch(c.image, nullptr, config_.data.patch, unlabeled_rng, sampling));
      ids.push_back(c.id);
    }
  }
  return train_step(labeled, unlabeled, ids);
}

StepOutcome Trainer::train_step(const std::vector<Patch>& labeled_batch, const std::vector<Patch>& unlabeled_batch,
                                const std::vector<std::string>& unlabeled_ids) {
  if (done()) throw ContractViolation("train_step: t_max reached");
  if (unlabeled_ids.size() != unlabeled_batch.size()) throw ContractViolation("train_step: one id per unlabeled patch");
  const std::int64_t t = state_.t;
  const std::int64_t t_max = config_.run.t_max;
  const auto& tc = config_.teacher;
  const bool consistency = config_.framework.consistency != Consistency::supervised;
  Rng labeled_dropout(state_.rng.dropout());
  Rng unlabeled_dropout(state_.rng.dropout());

  std::vector<LabeledSample> labeled;
  for (const auto& p : labeled_batch) {
    if (!p.mask) throw ContractViolation("train_step: labeled patch without mask");
    labeled.push_back({&p.image, &*p.mask});
  }

  std::vector<UnlabeledSample<float>> unlabeled;
  if (consistency) {
    for (const auto& p : unlabeled_batch) {
      UnlabeledSample<float> s;
      s.image = &p.image;
      if (config_.framework.consistency == Consistency::uamt) {
        const UncertaintyOptions opt{tc.uncertainty_passes, tc.noise_sigma, tc.noise_clip, tc.input_noise};
        auto [mean, u] = estimate_uncertainty<float>(net_, std::as_const(state_.teacher).span(), p.image, opt, state_.rng.noise,
                                              unlabeled_dropout);
        s.teacher = std::move(mean);
        s.certain = uncertainty_mask(u, t, t_max);
      } else {
        const Volume input =
            tc.input_noise ? nn::perturb_input(p.image, state_.rng.noise, tc.noise_sigma, tc.noise_clip) : p.image;
        s.teacher = net_.forward(state_.teacher.span(), nn::from_volume<float>(input), false);
      }
      unlabeled.push_back(std::move(s));
    }
  }

  StepOutcome out;
  PseudoLabelSource<float> source = [&](std::size_t j, const nn::ProbMap<float>& probs) -> std::optional<BinaryMask> {
    ++out.oracle_queries;
    const PromptSet prompts = extract_prompts(probs, config_.oracle.k_positive, state_.rng.oracle);
    if (prompts.empty()) {
      ++out.oracle_skips;
      return std::nullopt;
    }
    const Patch& p = unlabeled_batch[j];
    PseudoLabel pl = query_oracle(*oracle_, p.image, prompts, QueryContext{unlabeled_ids[j], p.origin});
    if (pl.skipped()) {
      ++out.oracle_skips;
      return std::nullopt;
    }
    return std::move(pl.mask);
  };
  const bool use_oracle = consistency && config_.framework.variant == Variant::semisam && oracle_;

  std::vector<float> grad(net_.parameter_count(), 0.0f);
  const ObjectiveWeights w{t, t_max, config_.run.w_base, consistency};
  out.loss = objective_and_gradient<float>(net_, state_.student.span(), labeled, unlabeled,
                                           use_oracle ? &source : nullptr, w, &labeled_dropout, &unlabeled_dropout,
                                           grad);
  out.lr = learning_rate(t, config_.optim.lr);

  sgd_step(state_.student.span(), grad, state_.momentum, out.lr, config_.optim.momentum, config_.optim.weight_decay);
  ema_update<float>(state_.teacher.span(), state_.student.span(), ema_alpha(t, tc.ema_cap));
  ++state_.t;
  return out;
}

MetricsReport Trainer::evaluate_student() const {
  MetricsReport r = evaluate(net_, state_.student.span(), data_.test, config_.data.patch, config_.inference_stride(),
                             config_.eval.unit);
  r.iteration = state_.t;
  return r;
}

void Trainer::save_checkpoint(const fs::path& path) const {
  Checkpoint c;
  c.backbone = config_.backbone;
  c.t = state_.t;
  c.config = to_json(config_);
  c.code_version = version_string();
  c.rng = {{"data", save_rng(state_.rng.data)},
           {"noise", save_rng(state_.rng.noise)},
           {"dropout", save_rng(state_.rng.dropout)},
           {"oracle", save_rng(state_.rng.oracle)}};
  c.student = state_.student.values;
  c.teacher = state_.teacher.values;
  c.momentum = state_.momentum;
  semisam::save_checkpoint(path, c);
}

void Trainer::load_checkpoint(const fs::path& path) {
  Checkpoint c = semisam::load_checkpoint(path);
  if (!(c.backbone == config_.backbone)) throw ConfigError("checkpoint backbone differs from the configured one");
  if (c.t < 0 || c.t > config_.run.t_max) throw ConfigError("checkpoint iteration outside [0, t_max]");
  for (const char* name : {"data", "noise", "dropout", "oracle"}) {
    if (!c.rng.count(name)) throw IoError(std::string("checkpoint lacks RNG stream '") + name + "'");
  }
  state_.t = c.t;
  state_.student.values = std::move(c.student);
  state_.teacher.values = std::move(c.teacher);
  state_.momentum = c.momentum.empty() ? std::vector<float>(state_.student.size(), 0.0f) : std::move(c.momentum);
  restore_rng(state_.rng.data, c.rng["data"]);
  restore_rng(state_.rng.noise, c.rng["noise"]);
  restore_rng(state_.rng.dropout, c.rng["dropout"]);
  restore_rng(state_.rng.oracle, c.rng["oracle"]);
}

std::string format_log_row(std::int64_t t, const StepOutcome& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g", static_cast<long long>(t), s.lr,
                s.loss.lambda_c, s.loss.lambda_s, s.loss.l_sup, s.loss.l_con, s.loss.l_sam, s.loss.sam_skipped ? 1 : 0,
                s.loss.total);
  return buf;
}

namespace {

// Keeps the header and the rows for iterations before `t`.
void truncate_log(const fs::path& path, std::int64_t t) {
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty()) {
      keep.push_back(line);
      continue;
    }
    if (std::stoll(line.substr(0, line.find(','))) < t) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::string iter_name(const char* stem, std::int64_t t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06lld%s", stem, static_cast<long long>(t), ext);
  return buf;
}

}  // namespace

void train_in_memory(Trainer& trainer, bool write_files, const TrainCallbacks& callbacks) {
  const auto& cfg = trainer.config();
  const fs::path out = cfg.run.out_dir;
  std::ofstream log;
  if (write_files) {
    fs::create_directories(out);
    nlohmann::json manifest{{"code_version", version_string()},
                            {"config", to_json(cfg)},
                            {"start_t", trainer.state().t},
                            {"parameter_count", trainer.backbone().parameter_count()}};
    std::ofstream(out / "run_manifest.json") << manifest.dump(2) << '\n';
    const fs::path log_path = out / "train_log.csv";
    if (trainer.state().t > 0 && fs::exists(log_path)) {
      truncate_log(log_path, trainer.state().t);
      log.open(log_path, std::ios::app);
    } else {
      log.open(log_path, std::ios::trunc);
      log << kLogHeader << '\n';
    }
  }

  while (!trainer.done()) {
    const std::int64_t t = trainer.state().t;
    StepOutcome s;
    try {
      s = trainer.step();
    } catch (const NonFiniteLoss& e) {
      spdlog::error("iteration {}: {}", t, e.what());
      if (write_files) {
        trainer.save_checkpoint(out / "last_good.bin");
        spdlog::error("state before the failing step saved to {}", (out / "last_good.bin").string());
      }
      throw;
    }
    if (write_files) log << format_log_row(t, s) << '\n';
    if (callbacks.on_step) callbacks.on_step(t, s);

    const std::int64_t now = trainer.state().t;
    if (now % cfg.eval.every == 0 || trainer.done()) {
      if (write_files) {
        log.flush();
        trainer.save_checkpoint(out / iter_name("checkpoint", now, ".bin"));
      }
      if (!trainer.data().test.empty()) {
        const MetricsReport r = trainer.evaluate_student();
        spdlog::info("t={} dice={:.2f} jaccard={:.2f} asd={:.3f} hd95={:.3f}", now, r.mean.dice, r.mean.jaccard,
                     r.mean.asd, r.mean.hd95);
        if (write_files) {
          write_report_csv(out / iter_name("metrics", now, ".csv"), r);
          write_report_json(out / iter_name("metrics", now, ".json"), r);
        }
        if (callbacks.on_eval) callbacks.on_eval(now, r);
      }
    }
  }
  if (write_files) trainer.save_checkpoint(out / "final.bin");
}

void train(const ExperimentConfig& config, const std::optional<fs::path>& resume, const TrainCallbacks& callbacks) {
  config.validate();
  if (config.data.dir.empty()) throw ConfigError("data.dir is required");
  const Manifest manifest = read_manifest(config.data.dir);
  const SplitIds split = split_dataset(manifest.ids(), config.data.m_labeled, config.data.n_test, config.data.split_seed);

  auto hidden = std::make_shared<std::vector<std::pair<std::string, BinaryMask>>>();
  DatasetSplit data = load_split(config.data.dir, manifest, split, hidden.get());

  std::unique_ptr<OracleBackend> oracle;
  if (config.framework.variant == Variant::semisam) {
    if (config.oracle.backend == "synthetic" && hidden->size() != data.unlabeled.size()) {
      throw ConfigError("the synthetic oracle needs masks for every unlabeled case");
    }
    if (config.oracle.backend == "spool" && !fs::is_directory(fs::path(config.oracle.endpoint) / "requests")) {
      throw ConfigError("oracle spool directory '" + config.oracle.endpoint + "' is missing requests/");
    }
    GroundTruthLookup lookup = [hidden](const std::string& id) -> const BinaryMask* {
      for (const auto& [k, m] : *hidden) {
        if (k == id) return &m;
      }
      return nullptr;
    };
    oracle = make_oracle(config.oracle, std::move(lookup));
  }

  Trainer trainer(config, std::move(data), std::move(oracle));
  if (resume) {
    trainer.load_checkpoint(*resume);
    spdlog::info("resumed from {} at t={}", resume->string(), trainer.state().t);
  }
  spdlog::info("training {}/{} for {} iterations ({} labeled, {} unlabeled, {} test)",
               to_string(config.framework.consistency), to_string(config.framework.variant), config.run.t_max,
               trainer.data().labeled.size(), trainer.data().unlabeled.size(), trainer.data().test.size());
  train_in_memory(trainer, true, callbacks);
}

}  // namespace semisam
