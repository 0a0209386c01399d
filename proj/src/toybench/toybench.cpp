#include "omnilab/toybench/toybench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "omnilab/config.hpp"
#include "omnilab/decoder/decoder.hpp"
#include "omnilab/flow/flow.hpp"

namespace omnilab::toybench {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string SchemeVariant::label() const {
  std::string s(rope::scheme_name(scheme));
  if (index_embedding) s += "+index_emb";
  return s;
}

SchemeVariant SchemeVariant::parse(const std::string& label) {
  SchemeVariant v;
  std::string base = label;
  constexpr std::string_view suffix = "+index_emb";
  if (base.size() > suffix.size() &&
      base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    v.index_embedding = true;
    base.resize(base.size() - suffix.size());
  }
  auto scheme = rope::parse_scheme(base);
  if (!scheme) {
    throw ConfigError("scheme", "unknown scheme '" + label + "'; valid schemes: " +
                                    rope::valid_scheme_names() +
                                    " (optionally suffixed with +index_emb)");
  }
  v.scheme = *scheme;
  return v;
}

void ExperimentConfig::validate() const {
  auto fail = [](const char* field, const std::string& what) {
    throw ConfigError(field, what);
  };
  if (schemes.empty()) fail("schemes", "at least one scheme is required");
  if (n_seeds < 1) fail("n_seeds", "must be >= 1");
  if (!(tau_loss > 0.0)) fail("tau_loss", "must be > 0");
  if (smoothing_window < 1) fail("smoothing_window", "must be >= 1");
  if (max_steps < smoothing_window) fail("max_steps", "must be >= smoothing_window");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) fail("grad_clip", "must be >= 0");
  if (min_images < 1 || max_images < min_images) {
    fail("images_per_example", "need 1 <= min <= max");
  }
  if (max_images + 1 > model.max_image_index) {
    fail("images_per_example", "max images plus the output exceed model.max_image_index");
  }
  if (jobs < 1) fail("jobs", "must be >= 1");
  try {
    model_for(schemes.front()).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

decoder::ModelConfig ExperimentConfig::model_for(const SchemeVariant& v) const {
  decoder::ModelConfig m = model;
  m.rope.scheme = v.scheme;
  m.rope.use_image_index_embedding = v.index_embedding;
  m.timestep_conditioning = mode == TrainingMode::flow;
  return m;
}

std::uint64_t ExperimentConfig::run_seed(int run) const {
  return num::derive_seed(seed, static_cast<std::uint64_t>(run));
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json model;
  decoder::to_json(model, c.model);
  std::vector<std::string> schemes;
  for (const auto& s : c.schemes) schemes.push_back(s.label());
  return {{"model", model},
          {"schemes", schemes},
          {"seed", c.seed},
          {"n_seeds", c.n_seeds},
          {"max_steps", c.max_steps},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"grad_clip", c.grad_clip},
          {"tau_loss", c.tau_loss},
          {"smoothing_window", c.smoothing_window},
          {"images_per_example", {c.min_images, c.max_images}},
          {"mode", c.mode == TrainingMode::direct ? "direct" : "flow"},
          {"stop_at_target", c.stop_at_target},
          {"jobs", c.jobs}};
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"model", "schemes", "seed", "n_seeds", "max_steps", "batch_size", "lr",
                       "weight_decay", "beta1", "beta2", "grad_clip", "tau_loss",
                       "smoothing_window", "images_per_example", "mode", "stop_at_target",
                       "jobs"},
                      "");
  ExperimentConfig c;
  if (j.contains("model")) c.model = decoder::parse_model_config(j["model"], "model");
  if (j.contains("schemes")) {
    std::vector<std::string> labels;
    read_field(j, "schemes", labels, "");
    c.schemes.clear();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      try {
        c.schemes.push_back(SchemeVariant::parse(labels[i]));
      } catch (const ConfigError& e) {
        throw ConfigError("schemes[" + std::to_string(i) + "]", e.detail());
      }
    }
  }
  read_field(j, "seed", c.seed, "");
  read_field(j, "n_seeds", c.n_seeds, "");
  read_field(j, "max_steps", c.max_steps, "");
  read_field(j, "batch_size", c.batch_size, "");
  read_field(j, "lr", c.lr, "");
  read_field(j, "weight_decay", c.weight_decay, "");
  read_field(j, "beta1", c.beta1, "");
  read_field(j, "beta2", c.beta2, "");
  read_field(j, "grad_clip", c.grad_clip, "");
  read_field(j, "tau_loss", c.tau_loss, "");
  read_field(j, "smoothing_window", c.smoothing_window, "");
  if (j.contains("images_per_example")) {
    std::array<int, 2> range{};
    read_field(j, "images_per_example", range, "");
    c.min_images = range[0];
    c.max_images = range[1];
  }
  if (j.contains("mode")) {
    std::string mode;
    read_field(j, "mode", mode, "");
    if (mode == "direct") c.mode = TrainingMode::direct;
    else if (mode == "flow") c.mode = TrainingMode::flow;
    else throw ConfigError("mode", "expected 'direct' or 'flow'");
  }
  read_field(j, "stop_at_target", c.stop_at_target, "");
  read_field(j, "jobs", c.jobs, "");
  c.validate();
  return c;
}

num::Tensor synth_image(int height, int width, int channels, num::SeededStream& rng) {
  num::Tensor img(num::Shape{height, width, channels});
  std::vector<float> color(static_cast<std::size_t>(channels));
  auto draw_color = [&] {
    for (auto& c : color) c = static_cast<float>(rng.uniform());
  };
  draw_color();
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = color[static_cast<std::size_t>(i % channels)];

  // Linear gradient: a random direction and color, blended in with a
  // weight that ramps from 0 to `strength` across the image.
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double strength = rng.uniform(0.3, 0.8);
  draw_color();
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (int corner = 0; corner < 4; ++corner) {
    const double p = (corner & 1 ? width - 1 : 0) * dx + (corner & 2 ? height - 1 : 0) * dy;
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  const double span = std::max(hi - lo, 1e-9);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double w = strength * ((x * dx + y * dy) - lo) / span;
      float* px = img.ptr() + (std::int64_t(y) * width + x) * channels;
      for (int c = 0; c < channels; ++c) {
        px[c] = static_cast<float>((1.0 - w) * px[c] + w * color[static_cast<std::size_t>(c)]);
      }
    }
  }

  for (int r = 0; r < 3; ++r) {
    const auto rh = rng.uniform_int(2, std::max(2, height / 2));
    const auto rw = rng.uniform_int(2, std::max(2, width / 2));
    const auto y0 = rng.uniform_int(0, height - rh);
    const auto x0 = rng.uniform_int(0, width - rw);
    draw_color();
    for (auto y = y0; y < y0 + rh; ++y) {
      for (auto x = x0; x < x0 + rw; ++x) {
        float* px = img.ptr() + (y * width + x) * channels;
        for (int c = 0; c < channels; ++c) px[c] = color[static_cast<std::size_t>(c)];
      }
    }
  }
  return img;
}

ToyExample gen_toy_example(const ExperimentConfig& cfg, num::SeededStream& rng) {
  if (cfg.min_images < 1 || cfg.max_images < cfg.min_images) {
    throw std::invalid_argument("gen_toy_example: invalid images-per-example range");
  }
  ToyExample ex;
  const auto n = rng.uniform_int(cfg.min_images, cfg.max_images);
  for (std::int64_t i = 0; i < n; ++i) {
    ex.inputs.push_back(synth_image(cfg.model.image_height, cfg.model.image_width,
                                    cfg.model.channels, rng));
  }
  ex.k = static_cast<int>(rng.uniform_int(1, n));
  ex.target = ex.inputs[static_cast<std::size_t>(ex.k - 1)];
  return ex;
}

std::vector<double> smooth_losses(std::span<const double> raw, int window) {
  if (window < 1) throw std::invalid_argument("smooth_losses: window must be >= 1");
  std::vector<double> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t begin = i + 1 >= std::size_t(window) ? i + 1 - std::size_t(window) : 0;
    double acc = 0.0;
    for (std::size_t j = begin; j <= i; ++j) acc += raw[j];
    out.push_back(acc / double(i + 1 - begin));
  }
  return out;
}

std::optional<int> first_step_below(std::span<const double> smoothed, double tau) {
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    if (smoothed[i] < tau) return static_cast<int>(i + 1);
  }
  return std::nullopt;
}

Trainer::Trainer(const decoder::ModelConfig& model_cfg, const ExperimentConfig& cfg,
                 std::uint64_t seed)
    : cfg_(cfg),
      model_(model_cfg, num::derive_seed(seed, kInitStream)),
      optimizer_(num::AdamWConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay}),
      data_rng_(num::derive_seed(seed, kDataStream)),
      noise_rng_(num::derive_seed(seed, kNoiseStream)) {}

double Trainer::step() {
  const auto& mc = model_.config();
  num::Graph graph;
  auto m = decoder::bind(graph, model_);
  std::vector<num::Var> losses;
  losses.reserve(static_cast<std::size_t>(cfg_.batch_size));
  for (int b = 0; b < cfg_.batch_size; ++b) {
    ToyExample ex = gen_toy_example(cfg_, data_rng_);
    auto condition = decoder::encode_instruction(m, ex.k);
    if (cfg_.mode == TrainingMode::direct) {
      auto seq = decoder::assemble_sequence<float>(m, condition, ex.inputs, {});
      auto pred = decoder::forward(m, seq);
      auto target = graph.constant(decoder::patchify(ex.target, mc.patch));
      losses.push_back(num::mse(pred, target));
    } else {
      auto fe = flow::make_training_example(ex.target, noise_rng_);
      decoder::OutputSpec<float> out{fe.x_t};
      auto seq = decoder::assemble_sequence<float>(m, condition, ex.inputs, out);
      auto pred = decoder::forward(m, seq, std::optional<float>(fe.t));
      auto target = graph.constant(decoder::patchify(fe.v_target, mc.patch));
      losses.push_back(num::mse(pred, target));
    }
  }
  auto total = num::scale(num::sum(num::concat_rows(losses)), 1.0f / float(cfg_.batch_size));
  const double loss = total.value()[0];
  model_.params().zero_grad();
  graph.backward(total);
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < model_.params().size(); ++i) {
      for (float g : model_.params()[i].grad.data()) sq += double(g) * double(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      const auto s = static_cast<float>(cfg_.grad_clip / norm);
      for (std::size_t i = 0; i < model_.params().size(); ++i) {
        for (float& g : model_.params()[i].grad.data()) g *= s;
      }
    }
  }
  optimizer_.step(model_.params());
  ++steps_;
  return loss;
}

MetricsLog run_experiment(const SchemeVariant& variant, int run, const ExperimentConfig& cfg,
                          const StepObserver& observer, std::optional<decoder::Model>* trained) {
  cfg.validate();
  MetricsLog log;
  log.scheme = variant.label();
  log.run = run;
  log.seed = cfg.run_seed(run);
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(cfg.model_for(variant), cfg, log.seed);
  log.parameter_count = trainer.model().params().element_count();
  double window_sum = 0.0;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    double loss = 0.0;
    try {
      loss = trainer.step();
    } catch (const num::NumericError& e) {
      log.failed = true;
      log.failure = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    if (!std::isfinite(loss)) {
      log.failed = true;
      log.failure = "step " + std::to_string(step) + ": non-finite loss";
      break;
    }
    log.raw_loss.push_back(loss);
    window_sum += loss;
    const auto n = log.raw_loss.size();
    if (n > std::size_t(cfg.smoothing_window)) {
      window_sum -= log.raw_loss[n - 1 - std::size_t(cfg.smoothing_window)];
    }
    const auto count = std::min<std::size_t>(n, std::size_t(cfg.smoothing_window));
    // Recompute exactly every window so that drift in the running sum
    // never accumulates.
    if (n % std::size_t(cfg.smoothing_window) == 0) {
      window_sum = 0.0;
      for (std::size_t j = n - count; j < n; ++j) window_sum += log.raw_loss[j];
    }
    const double smoothed = window_sum / double(count);
    log.smoothed_loss.push_back(smoothed);
    if (observer) observer(step, loss, smoothed);
    if (cfg.stop_at_target && smoothed < cfg.tau_loss) break;
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!log.raw_loss.empty()) log.initial_loss = log.raw_loss.front();
  log.steps_to_target = first_step_below(log.smoothed_loss, cfg.tau_loss);
  if (!log.smoothed_loss.empty()) log.final_loss = log.smoothed_loss.back();
  if (trained) trained->emplace(std::move(trainer).release_model());
  return log;
}

std::optional<double> median_with_missing(std::vector<std::optional<double>> values) {
  if (values.empty()) return std::nullopt;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x.value_or(inf));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (std::isinf(med)) return std::nullopt;
  return med;
}

SchemeSummary summarize(const std::string& scheme, std::span<const MetricsLog> runs) {
  SchemeSummary s;
  s.scheme = scheme;
  std::vector<std::optional<double>> steps, finals;
  std::vector<const MetricsLog*> ok;
  for (const auto& r : runs) {
    if (r.scheme != scheme) continue;
    ++s.n_seeds;
    if (r.failed) {
      ++s.n_failed;
      continue;
    }
    ok.push_back(&r);
    steps.push_back(r.steps_to_target ? std::optional<double>(*r.steps_to_target)
                                      : std::nullopt);
    finals.push_back(r.final_loss);
  }
  if (ok.empty()) return s;
  s.median_steps_to_target = median_with_missing(steps);
  s.median_final_loss = median_with_missing(finals);
  std::size_t len = ok.front()->smoothed_loss.size();
  for (const auto* r : ok) len = std::min(len, r->smoothed_loss.size());
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<std::optional<double>> col;
    for (const auto* r : ok) col.push_back(r->smoothed_loss[i]);
    s.median_curve.push_back(median_with_missing(col).value_or(0.0));
  }
  return s;
}

Comparison compare_schemes(const ExperimentConfig& cfg,
                           const std::function<void(const MetricsLog&)>& on_done) {
  cfg.validate();
  struct Job {
    SchemeVariant variant;
    int run;
  };
  std::vector<Job> jobs;
  for (const auto& v : cfg.schemes) {
    for (int r = 0; r < cfg.n_seeds; ++r) jobs.push_back({v, r});
  }
  Comparison out;
  out.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      out.runs[i] = run_experiment(jobs[i].variant, jobs[i].run, cfg);
      if (on_done) {
        std::lock_guard lock(done_mutex);
        on_done(out.runs[i]);
      }
    }
  };
  const int workers = std::min<int>(cfg.jobs, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& v : cfg.schemes) out.summary.push_back(summarize(v.label(), out.runs));
  return out;
}

void write_metrics_csv(std::ostream& os, std::span<const MetricsLog> runs) {
  os << "scheme,run,seed,step,loss,smoothed_loss\n";
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < r.smoothed_loss.size(); ++i) {
      os << r.scheme << ',' << r.run << ',' << r.seed << ',' << (i + 1) << ','
         << format_double(r.raw_loss[i]) << ',' << format_double(r.smoothed_loss[i]) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, std::span<const SchemeSummary> summary) {
  os << "scheme,median_steps_to_target,median_final_loss,n_seeds,n_failed\n";
  for (const auto& s : summary) {
    os << s.scheme << ','
       << (s.median_steps_to_target ? format_double(*s.median_steps_to_target) : "NA") << ','
       << (s.median_final_loss ? format_double(*s.median_final_loss) : "NA") << ','
       << s.n_seeds << ',' << s.n_failed << '\n';
  }
}

}  // namespace omnilab::toybench
