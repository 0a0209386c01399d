#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnilab/decoder/model.hpp"
#include "omnilab/numcore/adamw.hpp"
#include "omnilab/numcore/rng.hpp"
#include "omnilab/numcore/tensor.hpp"
#include "omnilab/rope/rope.hpp"

namespace omnilab::toybench {

enum class TrainingMode { direct, flow };

/// A positional scheme plus the optional image-index embedding. Labels are
/// the scheme name, with "+index_emb" appended when the embedding is on.
struct SchemeVariant {
  rope::Scheme scheme = rope::Scheme::omni_rope;
  bool index_embedding = false;

  std::string label() const;
  /// Throws ConfigError (path "scheme") naming the valid set on failure.
  static SchemeVariant parse(const std::string& label);
  friend bool operator==(const SchemeVariant&, const SchemeVariant&) = default;
};

struct ExperimentConfig {
  decoder::ModelConfig model;
  std::vector<SchemeVariant> schemes{{rope::Scheme::omni_rope, false},
                                     {rope::Scheme::qwen_accum, false},
                                     {rope::Scheme::lumina_accum, false}};
  /// Base seed. Run r trains with run_seed(r) = derive_seed(seed, r).
  std::uint64_t seed = 0;
  int n_seeds = 3;
  int max_steps = 5000;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 1.0;
  double tau_loss = 0.014;
  int smoothing_window = 50;
  int min_images = 2;
  int max_images = 4;
  TrainingMode mode = TrainingMode::direct;
  /// Stop a run once its smoothed loss first drops below tau_loss. The
  /// log then ends at that step and final_loss is the value reached there.
  bool stop_at_target = false;
  /// Parallel (scheme, seed) workers in compare_schemes.
  int jobs = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Model config of one run: `model` with the variant's positional scheme.
  decoder::ModelConfig model_for(const SchemeVariant& v) const;
  std::uint64_t run_seed(int run) const;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

/// Synthetic image [H, W, C] in [0, 1]: random solid background, one
/// linear gradient, then three opaque axis-aligned rectangles.
num::Tensor synth_image(int height, int width, int channels, num::SeededStream& rng);

struct ToyExample {
  std::vector<num::Tensor> inputs;
  int k = 1;  // 1-based index of the image to reproduce
  num::Tensor target;
};

/// n ~ U{min_images..max_images}, n independent synthetic images,
/// k ~ U{1..n}, target = copy of input k.
ToyExample gen_toy_example(const ExperimentConfig& cfg, num::SeededStream& rng);

/// Trailing arithmetic mean over `window` values (fewer at the start).
std::vector<double> smooth_losses(std::span<const double> raw, int window);

/// 1-based first step whose smoothed loss is below `tau`.
std::optional<int> first_step_below(std::span<const double> smoothed, double tau);

struct MetricsLog {
  std::string scheme;
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<double> raw_loss;
  std::vector<double> smoothed_loss;
  std::optional<int> steps_to_target;
  double final_loss = 0.0;
  double initial_loss = 0.0;
  double seconds = 0.0;
  std::int64_t parameter_count = 0;
  bool failed = false;
  std::string failure;
};

/// Per-step callback: (step, raw loss, smoothed loss).
using StepObserver = std::function<void(int, double, double)>;

/// Trains a freshly initialised model for one scheme and run index. Model init,
/// data and flow noise come from separate sub-streams of `seed` that do not
/// depend on the scheme, so runs of different schemes see identical data
/// and identical initial weights (apart from the zero-initialised index
/// table). A non-finite loss marks the run failed instead of throwing.
/// When `trained` is given, the final model is moved into it.
MetricsLog run_experiment(const SchemeVariant& variant, int run, const ExperimentConfig& cfg,
                          const StepObserver& observer = {},
                          std::optional<decoder::Model>* trained = nullptr);

/// One optimisation step's loss for a batch, used by run_experiment and
/// exposed for the CLI's train command.
class Trainer {
 public:
  Trainer(const decoder::ModelConfig& model_cfg, const ExperimentConfig& cfg,
          std::uint64_t seed);

  /// Runs one step and returns the mean batch loss before the update.
  double step();
  decoder::Model& model() noexcept { return model_; }
  decoder::Model release_model() && { return std::move(model_); }
  int steps_done() const noexcept { return steps_; }

 private:
  ExperimentConfig cfg_;
  decoder::Model model_;
  num::AdamW optimizer_;
  num::SeededStream data_rng_;
  num::SeededStream noise_rng_;
  int steps_ = 0;
};

struct SchemeSummary {
  std::string scheme;
  std::optional<double> median_steps_to_target;
  std::optional<double> median_final_loss;
  int n_seeds = 0;
  int n_failed = 0;
  bool failed() const noexcept { return n_seeds > 0 && n_failed == n_seeds; }
  std::vector<double> median_curve;
};

struct Comparison {
  std::vector<MetricsLog> runs;  // ordered by scheme, then run
  std::vector<SchemeSummary> summary;
};

/// Median of the values; absent entries count as +infinity.
std::optional<double> median_with_missing(std::vector<std::optional<double>> values);

SchemeSummary summarize(const std::string& scheme, std::span<const MetricsLog> runs);

/// Runs every (scheme, run) pair, in up to cfg.jobs worker threads.
Comparison compare_schemes(const ExperimentConfig& cfg,
                           const std::function<void(const MetricsLog&)>& on_done = {});

/// CSV: scheme,run,seed,step,loss,smoothed_loss
void write_metrics_csv(std::ostream& os, std::span<const MetricsLog> runs);
/// CSV: scheme,median_steps_to_target,median_final_loss,n_seeds,n_failed
void write_summary_csv(std::ostream& os, std::span<const SchemeSummary> summary);

}  // namespace omnilab::toybench
