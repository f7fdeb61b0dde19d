#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semisam/config.hpp"
#include "semisam/dataset.hpp"
#include "semisam/losses.hpp"
#include "semisam/network.hpp"
#include "semisam/oracle.hpp"
#include "semisam/patch.hpp"
#include "semisam/teacher.hpp"

namespace semisam {

// Every step forks one child per branch (labeled, unlabeled) from `data` and
// `dropout`, so runs that differ only in their unlabeled branch see identical
// labeled batches and dropout masks.
struct RngStreams {
  Rng data;
  Rng noise;
  Rng dropout;
  Rng oracle;

  static RngStreams from_seed(std::uint64_t seed);
};

struct TrainState {
  std::int64_t t = 0;
  nn::ParameterVector<float> student;
  nn::ParameterVector<float> teacher;
  std::vector<float> momentum;
  RngStreams rng;
};

struct LabeledSample {
  const Volume* image = nullptr;
  const BinaryMask* mask = nullptr;
};

/// One unlabeled input with the teacher's target for it.
template <typename T>
struct UnlabeledSample {
  const Volume* image = nullptr;
  nn::ProbMap<T> teacher;
  std::optional<BinaryMask> certain;  // UA-MT: restrict consistency to these voxels
};

/// Given unlabeled sample j and the student's probabilities for it, returns
/// the pseudo-label or nullopt when the oracle term is skipped for it.
template <typename T>
using PseudoLabelSource = std::function<std::optional<BinaryMask>(std::size_t j, const nn::ProbMap<T>& student)>;

struct ObjectiveWeights {
  std::int64_t t = 0;
  std::int64_t t_max = 1;
  double w_base = 0.1;
  bool consistency = true;
};

/// Evaluates the combined objective over one batch and accumulates its
/// gradient w.r.t. the student parameters into `grad` (when non-empty).
/// Per-term means: L_sup over labeled samples, L_con over unlabeled samples,
/// L_sam over samples whose pseudo-label was not skipped. Student forwards run
/// labeled first (dropout from `labeled_dropout`), then unlabeled (from
/// `unlabeled_dropout`); null streams mean deterministic forwards.
template <typename T>
LossBreakdown objective_and_gradient(const nn::Backbone<T>& net, std::span<const T> params,
                                     const std::vector<LabeledSample>& labeled,
                                     const std::vector<UnlabeledSample<T>>& unlabeled,
                                     const PseudoLabelSource<T>* oracle, const ObjectiveWeights& w, Rng* labeled_dropout,
                                     Rng* unlabeled_dropout, std::span<T> grad) {
  const bool want_grad = !grad.empty();
  std::vector<nn::Tape<T>> tapes(labeled.size() + unlabeled.size());
  std::vector<std::vector<T>> prob_grads(tapes.size());

  for (std::size_t i = 0; i < labeled.size(); ++i) {
    net.forward(params, nn::from_volume<T>(*labeled[i].image), labeled_dropout != nullptr, labeled_dropout,
                &tapes[i]);
  }
  const bool use_unlabeled = w.consistency || oracle;
  if (use_unlabeled) {
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      net.forward(params, nn::from_volume<T>(*unlabeled[j].image), unlabeled_dropout != nullptr, unlabeled_dropout,
                  &tapes[labeled.size() + j]);
    }
  }
  for (std::size_t k = 0; k < tapes.size(); ++k) {
    if (want_grad && !tapes[k].probs.values.empty()) prob_grads[k].assign(tapes[k].probs.values.size(), T(0));
  }

  const double lc = lambda_c(w.t, w.t_max, w.w_base);
  const double ls = lambda_s(w.t, w.t_max, w.w_base);

  double l_sup = 0.0;
  const T sup_w = labeled.empty() ? T(0) : T(1) / static_cast<T>(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    l_sup += supervised_loss<T>(tapes[i].probs, *labeled[i].mask, want_grad ? std::span<T>(prob_grads[i]) : std::span<T>{},
                                sup_w);
  }
  if (!labeled.empty()) l_sup /= static_cast<double>(labeled.size());

  double l_con = 0.0;
  if (w.consistency && !unlabeled.empty()) {
    const T con_w = static_cast<T>(lc / static_cast<double>(unlabeled.size()));
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      const std::size_t k = labeled.size() + j;
      const BinaryMask* certain = unlabeled[j].certain ? &*unlabeled[j].certain : nullptr;
      l_con += consistency_loss<T>(tapes[k].probs, unlabeled[j].teacher, certain,
                                   want_grad ? std::span<T>(prob_grads[k]) : std::span<T>{}, con_w);
    }
    l_con /= static_cast<double>(unlabeled.size());
  }

  double l_sam = 0.0;
  bool sam_skipped = true;
  if (oracle) {
    std::vector<std::pair<std::size_t, BinaryMask>> labels;
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      if (auto pl = (*oracle)(j, tapes[labeled.size() + j].probs)) labels.emplace_back(j, std::move(*pl));
    }
    if (!labels.empty()) {
      sam_skipped = false;
      const T sam_w = static_cast<T>(ls / static_cast<double>(labels.size()));
      for (const auto& [j, mask] : labels) {
        const std::size_t k = labeled.size() + j;
        l_sam += sam_consistency_loss<T>(tapes[k].probs, mask, want_grad ? std::span<T>(prob_grads[k]) : std::span<T>{},
                                         sam_w);
      }
      l_sam /= static_cast<double>(labels.size());
    }
  }

  LossBreakdown b = total_objective(l_sup, l_con, l_sam, w.t, w.t_max, sam_skipped, w.w_base);
  if (!std::isfinite(b.total)) throw NonFiniteLoss("total", b.total);
  if (want_grad) {
    for (std::size_t k = 0; k < tapes.size(); ++k) {
      if (tapes[k].probs.values.empty()) continue;
      net.backward(params, tapes[k], prob_grads[k], grad);
    }
  }
  return b;
}

/// Applies SGD with momentum and L2 weight decay:
/// v <- mu v + (g + wd theta); theta <- theta - lr v.
void sgd_step(std::span<float> params, std::span<const float> grad, std::span<float> velocity, double lr,
              double momentum, double weight_decay);

struct StepOutcome {
  LossBreakdown loss;
  double lr = 0.0;
  int oracle_queries = 0;
  int oracle_skips = 0;
};

/// Builds the oracle backend described by `config` (wrapped in the LRU cache).
/// The synthetic backend draws on `ground_truth`.
std::unique_ptr<OracleBackend> make_oracle(const OracleConfig& config, GroundTruthLookup ground_truth);

class Trainer {
 public:
  /// `oracle` may be null for the plain variant.
  Trainer(ExperimentConfig config, DatasetSplit data, std::unique_ptr<OracleBackend> oracle);

  const ExperimentConfig& config() const noexcept { return config_; }
  const nn::Backbone<float>& backbone() const noexcept { return net_; }
  const DatasetSplit& data() const noexcept { return data_; }
  TrainState& state() noexcept { return state_; }
  const TrainState& state() const noexcept { return state_; }
  bool done() const noexcept { return state_.t >= config_.run.t_max; }

  /// Samples one batch with the data stream and runs train_step on it.
  StepOutcome step();

  /// One SGD step on the combined objective at the current t, then the EMA
  /// teacher update; t advances by one. A non-finite loss throws before any
  /// state changes.
  StepOutcome train_step(const std::vector<Patch>& labeled_batch, const std::vector<Patch>& unlabeled_batch,
                         const std::vector<std::string>& unlabeled_ids);

  MetricsReport evaluate_student() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores t, both parameter sets, momentum and RNG streams. The
  /// checkpoint's backbone must match.
  void load_checkpoint(const std::filesystem::path& path);

 private:
  ExperimentConfig config_;
  DatasetSplit data_;
  std::unique_ptr<OracleBackend> oracle_;
  nn::Backbone<float> net_;
  TrainState state_;
};

struct TrainCallbacks {
  std::function<void(std::int64_t t, const StepOutcome&)> on_step;
  std::function<void(std::int64_t t, const MetricsReport&)> on_eval;
};

/// Full run: loads the dataset named by config.data.dir, writes
/// run_manifest.json, train_log.csv, checkpoints (checkpoint_<t>.bin every
/// eval.every steps, final.bin) and metrics_<t>.{csv,json}. Resumes from
/// `resume` when given, appending to the log.
void train(const ExperimentConfig& config, const std::optional<std::filesystem::path>& resume = std::nullopt,
           const TrainCallbacks& callbacks = {});

/// Same loop on an in-memory dataset; output files go to config.run.out_dir
/// when `write_files` is set.
void train_in_memory(Trainer& trainer, bool write_files, const TrainCallbacks& callbacks = {});

inline constexpr const char* kLogHeader = "t,lr,lambda_c,lambda_s,l_sup,l_con,l_sam,sam_skipped,total";
std::string format_log_row(std::int64_t t, const StepOutcome& s);

/// Resolved semantic version of this build.
std::string version_string();

}  // namespace semisam
