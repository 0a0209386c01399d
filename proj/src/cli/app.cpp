#include "omnilab/cli/app.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "omnilab/cli/manifest.hpp"
#include "omnilab/cli/plot.hpp"
#include "omnilab/config.hpp"
#include "omnilab/decoder/checkpoint.hpp"
#include "omnilab/decoder/decoder.hpp"
#include "omnilab/flow/sampler.hpp"
#include "omnilab/pairminer/pairminer.hpp"
#include "omnilab/toybench/toybench.hpp"

namespace omnilab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Thrown for anything the user must fix in flags or config: exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class F>
void write_stream(const fs::path& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// -- toybench / train / sample ---------------------------------------------

struct ExperimentFlags {
  std::string config;
  std::string out;
  std::vector<std::string> schemes;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_seeds, max_steps, batch_size, jobs;
  std::optional<double> lr, tau;
  std::optional<std::string> mode;
  bool stop_at_target = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool multi_scheme) {
  cmd->add_option("--config", f.config, "experiment config (JSON)");
  cmd->add_option("--out", f.out, "output directory")->required();
  if (multi_scheme) {
    cmd->add_option("--scheme", f.schemes, "scheme label, repeatable (overrides config)");
    cmd->add_option("--n-seeds", f.n_seeds, "runs per scheme");
    cmd->add_option("--jobs", f.jobs, "parallel runs");
  } else {
    cmd->add_option("--scheme", f.schemes, "scheme label")->expected(1);
  }
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--max-steps", f.max_steps, "training steps per run");
  cmd->add_option("--batch-size", f.batch_size, "examples per step");
  cmd->add_option("--lr", f.lr, "AdamW learning rate");
  cmd->add_option("--tau", f.tau, "smoothed-loss target");
  cmd->add_option("--mode", f.mode, "direct or flow");
  cmd->add_flag("--stop-at-target", f.stop_at_target, "end each run once it reaches the target");
}

toybench::ExperimentConfig resolve_experiment(const ExperimentFlags& f) {
  json j = load_config_file(f.config);
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  if (!f.schemes.empty()) j["schemes"] = f.schemes;
  if (f.seed) j["seed"] = *f.seed;
  if (f.n_seeds) j["n_seeds"] = *f.n_seeds;
  if (f.max_steps) j["max_steps"] = *f.max_steps;
  if (f.batch_size) j["batch_size"] = *f.batch_size;
  if (f.jobs) j["jobs"] = *f.jobs;
  if (f.lr) j["lr"] = *f.lr;
  if (f.tau) j["tau_loss"] = *f.tau;
  if (f.mode) j["mode"] = *f.mode;
  if (f.stop_at_target) j["stop_at_target"] = true;
  return toybench::parse_experiment_config(j);
}

void write_runs_csv(std::ostream& os, std::span<const toybench::MetricsLog> runs) {
  os << "scheme,run,seed,steps,steps_to_target,initial_loss,final_loss,failed\n";
  for (const auto& r : runs) {
    os << r.scheme << ',' << r.run << ',' << r.seed << ',' << r.raw_loss.size() << ','
       << (r.steps_to_target ? std::to_string(*r.steps_to_target) : "NA") << ','
       << fmt(r.initial_loss) << ',' << fmt(r.final_loss) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

void log_run(std::ostream& err, const toybench::MetricsLog& r) {
  err << r.scheme << " run " << r.run << ": ";
  if (r.failed) {
    err << "FAILED (" << r.failure << ")";
  } else {
    err << "final " << fmt(r.final_loss) << ", steps-to-target "
        << (r.steps_to_target ? std::to_string(*r.steps_to_target) : "not reached");
  }
  err << ", " << fmt(r.seconds) << " s\n";
}

int cmd_toybench_compare(const ExperimentFlags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_experiment(f);
  RunManifest man;
  man.command = "toybench compare";
  man.config = toybench::to_json(cfg);
  for (int r = 0; r < cfg.n_seeds; ++r) man.seeds.push_back(cfg.run_seed(r));
  man.started_at = utc_timestamp();
  const fs::path dir(f.out);
  fs::create_directories(dir);

  const auto cmp = toybench::compare_schemes(cfg, [&](const toybench::MetricsLog& r) { log_run(err, r); });

  write_stream(dir / "metrics.csv", [&](std::ostream& os) { toybench::write_metrics_csv(os, cmp.runs); });
  write_stream(dir / "summary.csv", [&](std::ostream& os) { toybench::write_summary_csv(os, cmp.summary); });
  write_stream(dir / "runs.csv", [&](std::ostream& os) { write_runs_csv(os, cmp.runs); });
  std::vector<Series> curves;
  for (const auto& s : cmp.summary) {
    if (s.median_curve.size() >= 2) curves.push_back({s.scheme, s.median_curve, {}});
  }
  if (curves.empty()) throw std::runtime_error("no scheme produced a loss curve to plot");
  PlotOptions opt;
  opt.title = "median smoothed loss over runs";
  opt.threshold = cfg.tau_loss;
  emit_plot(curves, opt, dir / "curves.svg");
  man.outputs = {"metrics.csv", "summary.csv", "runs.csv", "curves.svg", "manifest.json"};
  man.finished_at = utc_timestamp();
  man.write(dir / "manifest.json");
  toybench::write_summary_csv(out, cmp.summary);
  return kOk;
}

int cmd_toybench_run(const ExperimentFlags& f, int run, bool checkpoint, std::ostream& out,
                     std::ostream& err) {
  auto cfg = resolve_experiment(f);
  if (run < 0 || run >= cfg.n_seeds) {
    throw ConfigError("run", "must lie in [0, n_seeds)");
  }
  const auto variant = cfg.schemes.front();
  RunManifest man;
  man.command = checkpoint ? "train" : "toybench run";
  man.config = toybench::to_json(cfg);
  man.config["scheme"] = variant.label();
  man.config["run"] = run;
  man.seeds = {cfg.run_seed(run)};
  man.started_at = utc_timestamp();
  const fs::path dir(f.out);
  fs::create_directories(dir);

  std::optional<decoder::Model> trained;
  const auto log = toybench::run_experiment(
      variant, run, cfg,
      [&](int step, double, double smoothed) {
        if (step % 100 == 0) err << "step " << step << " smoothed loss " << fmt(smoothed) << '\n';
      },
      checkpoint ? &trained : nullptr);

  const std::vector<toybench::MetricsLog> runs{log};
  write_stream(dir / "metrics.csv", [&](std::ostream& os) { toybench::write_metrics_csv(os, runs); });
  write_stream(dir / "runs.csv", [&](std::ostream& os) { write_runs_csv(os, runs); });
  man.outputs = {"metrics.csv", "runs.csv"};
  if (log.smoothed_loss.size() >= 2) {
    const std::vector<Series> curves{{log.scheme, log.smoothed_loss, {}}};
    PlotOptions opt;
    opt.title = log.scheme + " run " + std::to_string(run);
    opt.threshold = cfg.tau_loss;
    emit_plot(curves, opt, dir / "curve.svg");
    man.outputs.push_back("curve.svg");
  }
  if (checkpoint) {
    decoder::save_checkpoint(dir / "model.bin", *trained);
    man.outputs.push_back("model.bin");
  }
  man.outputs.push_back("manifest.json");
  man.finished_at = utc_timestamp();
  man.write(dir / "manifest.json");
  write_runs_csv(out, runs);
  if (log.failed) {
    err << "run failed: " << log.failure << '\n';
    return kRuntimeError;
  }
  return kOk;
}

struct SampleFlags {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<int> steps{1, 2, 4, 8, 16};
  int examples = 4;
};

int cmd_sample(const SampleFlags& f, std::ostream& out, std::ostream&) {
  if (f.examples < 1) throw ConfigError("examples", "must be >= 1");
  for (int s : f.steps) {
    if (s < 1) throw ConfigError("steps", "every step count must be >= 1");
  }
  auto model = decoder::load_checkpoint(fs::path(f.checkpoint));
  if (!model.config().timestep_conditioning) {
    throw UsageError("sample needs a flow-mode checkpoint (train with --mode flow)");
  }
  json cj = load_config_file(f.config);
  cj["model"] = json::object();
  decoder::to_json(cj["model"], model.config());
  cj["mode"] = "flow";
  const auto cfg = toybench::parse_experiment_config(cj);

  RunManifest man;
  man.command = "sample";
  man.config = toybench::to_json(cfg);
  man.config["checkpoint"] = fs::absolute(f.checkpoint).string();
  man.config["steps"] = f.steps;
  man.config["examples"] = f.examples;
  man.seeds = {f.seed};
  man.started_at = utc_timestamp();
  const fs::path dir(f.out);
  fs::create_directories(dir);

  num::SeededStream data(num::derive_seed(f.seed, 0));
  std::ostringstream csv;
  csv << "example,k,n_inputs,steps,mse\n";
  for (int e = 0; e < f.examples; ++e) {
    const auto ex = toybench::gen_toy_example(cfg, data);
    const auto noise_seed = num::derive_seed(num::derive_seed(f.seed, 1), std::uint64_t(e));
    for (int steps : f.steps) {
      const auto img = flow::sample(model, ex.k, ex.inputs, steps, noise_seed);
      csv << e << ',' << ex.k << ',' << ex.inputs.size() << ',' << steps << ','
          << fmt(flow::direct_loss(img, ex.target)) << '\n';
    }
  }
  write_text(dir / "samples.csv", csv.str());
  man.outputs = {"samples.csv", "manifest.json"};
  man.finished_at = utc_timestamp();
  man.write(dir / "manifest.json");
  out << csv.str();
  return kOk;
}

// -- pairmine -----------------------------------------------------------------

struct MineFlags {
  std::string config;
  std::string frames;
  std::string scores;
  std::string out;
  std::optional<double> t_rgb, alpha, tau_block, tau_frame, band_lo, band_hi;
  std::optional<int> window, min_scene_length, grid, bins, max_gap;
};

void add_mine_flags(CLI::App* cmd, MineFlags& f, bool pairs) {
  cmd->add_option("--config", f.config, "miner config (JSON)");
  cmd->add_option("--frames", f.frames, "directory of numbered .ppm frames")->required();
  cmd->add_option("--out", f.out, "output directory")->required();
  cmd->add_option("--t-rgb", f.t_rgb, "RGB mean-difference threshold (8-bit scale)");
  cmd->add_option("--window", f.window, "rolling HSV window");
  cmd->add_option("--alpha", f.alpha, "HSV outlier factor");
  cmd->add_option("--min-scene-length", f.min_scene_length, "shortest allowed scene");
  if (pairs) {
    cmd->add_option("--scores", f.scores, "score file with 'i j score' lines")->required();
    cmd->add_option("--grid", f.grid, "blocks per side");
    cmd->add_option("--bins", f.bins, "histogram bins per channel");
    cmd->add_option("--tau-block", f.tau_block, "block similarity threshold");
    cmd->add_option("--tau-frame", f.tau_frame, "similar-block proportion threshold");
    cmd->add_option("--band-lo", f.band_lo, "lowest accepted difference score");
    cmd->add_option("--band-hi", f.band_hi, "highest accepted difference score");
    cmd->add_option("--max-gap", f.max_gap, "largest j - i considered (0 = any)");
  }
}

pairminer::MinerConfig resolve_miner(const MineFlags& f) {
  json j = load_config_file(f.config);
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  auto set = [&](const char* section, const char* key, const auto& v) {
    if (v) j[section][key] = *v;
  };
  set("scene", "t_rgb", f.t_rgb);
  set("scene", "window", f.window);
  set("scene", "alpha", f.alpha);
  set("scene", "min_scene_length", f.min_scene_length);
  set("block", "grid", f.grid);
  set("block", "bins", f.bins);
  set("block", "tau_block", f.tau_block);
  set("block", "tau_frame", f.tau_frame);
  set("band", "lo", f.band_lo);
  set("band", "hi", f.band_hi);
  set("band", "max_gap", f.max_gap);
  return pairminer::parse_miner_config(j);
}

void write_frame_stats_csv(std::ostream& os, const pairminer::FrameStats& st) {
  os << "frame,mean_r,mean_g,mean_b,rgb_diff,hsv_diff,hsv_rolling\n";
  for (std::size_t i = 0; i < st.frame_count(); ++i) {
    const auto& m = st.mean_rgb[i];
    os << i << ',' << fmt(m[0]) << ',' << fmt(m[1]) << ',' << fmt(m[2]);
    if (i == 0) {
      os << ",NA,NA,NA\n";
      continue;
    }
    const auto& roll = st.hsv_rolling[i - 1];
    os << ',' << fmt(st.rgb_diff[i - 1]) << ',' << fmt(st.hsv_diff[i - 1]) << ','
       << (roll ? fmt(*roll) : "NA") << '\n';
  }
}

int cmd_pairmine(const MineFlags& f, bool pairs, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_miner(f);
  RunManifest man;
  man.command = pairs ? "pairmine pairs" : "pairmine scenes";
  man.config = pairminer::to_json(cfg);
  man.config["frames"] = fs::absolute(f.frames).string();
  if (pairs) man.config["scores"] = fs::absolute(f.scores).string();
  man.started_at = utc_timestamp();

  const auto frames = pairminer::load_frames(f.frames);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  const auto stats = pairminer::compute_frame_stats(frames, cfg.scene.window);
  write_stream(dir / "frame_stats.csv", [&](std::ostream& os) { write_frame_stats_csv(os, stats); });
  man.outputs = {"frame_stats.csv"};

  if (!pairs) {
    const auto cuts = pairminer::detect_scene_cuts(stats, cfg.scene);
    const auto scenes = pairminer::scenes_from_cuts(cuts, frames.size());
    write_text(dir / "scenes.json", pairminer::scenes_json(scenes, cuts).dump(2) + "\n");
    write_stream(dir / "scenes.csv", [&](std::ostream& os) {
      os << "scene,start,end\n";
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        os << i << ',' << scenes[i].start << ',' << scenes[i].end << '\n';
      }
    });
    man.outputs.insert(man.outputs.end(), {"scenes.json", "scenes.csv"});
    err << frames.size() << " frames, " << scenes.size() << " scenes\n";
    out << pairminer::scenes_json(scenes, cuts).dump(2) << '\n';
  } else {
    const auto scores = pairminer::read_score_file(fs::path(f.scores));
    const auto result = pairminer::mine(frames, scores, cfg);
    write_text(dir / "pairs.json", pairminer::manifest_json(result, cfg).dump(2) + "\n");
    write_stream(dir / "pairs.csv", [&](std::ostream& os) {
      os << "i,j,score,proportion,consistent\n";
      for (const auto& p : result.pairs) {
        os << p.i << ',' << p.j << ',' << fmt(p.score) << ',' << fmt(p.proportion) << ','
           << (p.consistent ? 1 : 0) << '\n';
      }
    });
    man.outputs.insert(man.outputs.end(), {"pairs.json", "pairs.csv"});
    std::size_t kept = 0;
    for (const auto& p : result.pairs) kept += p.consistent;
    err << frames.size() << " frames, " << result.scenes.size() << " scenes, "
        << result.pairs.size() << " in-band pairs, " << kept << " viewpoint-consistent\n";
    for (const auto& p : result.pairs) {
      if (p.consistent) out << p.i << ' ' << p.j << ' ' << fmt(p.score) << '\n';
    }
  }
  man.outputs.push_back("manifest.json");
  man.finished_at = utc_timestamp();
  man.write(dir / "manifest.json");
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("omnilab: positional-encoding toy benchmark, flow sampling and video pair mining",
               "omnilab");
  app.require_subcommand(1);

  ExperimentFlags compare_f, run_f, train_f;
  int run_index = 0, train_index = 0;
  SampleFlags sample_f;
  MineFlags scenes_f, pairs_f;

  auto* toy = app.add_subcommand("toybench", "positional-scheme convergence benchmark");
  toy->require_subcommand(1);
  auto* compare = toy->add_subcommand("compare", "train every scheme for every seed and compare");
  add_experiment_flags(compare, compare_f, true);
  auto* run = toy->add_subcommand("run", "train one scheme for one run");
  add_experiment_flags(run, run_f, false);
  run->add_option("--run", run_index, "run index (seed = derive(seed, run))");

  auto* train = app.add_subcommand("train", "train one model and save a checkpoint");
  add_experiment_flags(train, train_f, false);
  train->add_option("--run", train_index, "run index (seed = derive(seed, run))");

  auto* sample = app.add_subcommand("sample", "Euler-sample a flow-mode checkpoint on toy examples");
  sample->add_option("--checkpoint", sample_f.checkpoint, "model.bin from train")->required();
  sample->add_option("--config", sample_f.config, "experiment config (data settings)");
  sample->add_option("--out", sample_f.out, "output directory")->required();
  sample->add_option("--seed", sample_f.seed, "seed for examples and noise");
  sample->add_option("--steps", sample_f.steps, "Euler step counts")->delimiter(',');
  sample->add_option("--examples", sample_f.examples, "number of toy examples");

  auto* mine = app.add_subcommand("pairmine", "scene cuts and frame-pair mining");
  mine->require_subcommand(1);
  auto* scenes = mine->add_subcommand("scenes", "detect scene cuts");
  add_mine_flags(scenes, scenes_f, false);
  auto* pairs = mine->add_subcommand("pairs", "select viewpoint-consistent frame pairs");
  add_mine_flags(pairs, pairs_f, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kUsageError;
  }

  try {
    if (compare->parsed()) return cmd_toybench_compare(compare_f, out, err);
    if (run->parsed()) return cmd_toybench_run(run_f, run_index, false, out, err);
    if (train->parsed()) return cmd_toybench_run(train_f, train_index, true, out, err);
    if (sample->parsed()) return cmd_sample(sample_f, out, err);
    if (scenes->parsed()) return cmd_pairmine(scenes_f, false, out, err);
    if (pairs->parsed()) return cmd_pairmine(pairs_f, true, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  err << app.help();
  return kUsageError;
}

}  // namespace omnilab::cli
