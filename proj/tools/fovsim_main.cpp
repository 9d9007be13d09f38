// Command-line front end: ties stimulus generation, observer construction,
// experiments, fitting, and analysis into reproducible pipelines. Every
// subcommand reads a JSON config (all defaults when omitted), honors a
// --seed override, and writes a manifest sufficient for exact replay.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fovsim/config.hpp"
#include "fovsim/foveation.hpp"
#include "fovsim/harness.hpp"
#include "fovsim/kernels.hpp"
#include "fovsim/observers.hpp"
#include "fovsim/search.hpp"
#include "fovsim/stimulus.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fovsim;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
};

NormalizedConfig resolve_config(const CommonOpts& opts) {
  NormalizedConfig cfg = opts.config_path.empty() ? normalize_config(json::object())
                                                  : load_config(opts.config_path);
  if (!cfg.ok()) {
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& e : cfg.errors) msg << "\n  " << e.path << ": " << e.message;
    throw std::runtime_error(msg.str());
  }
  if (opts.seed_override) cfg.values["seed"] = *opts.seed_override;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file (defaults when omitted)");
  cmd->add_option("--seed", opts.seed_override, "master seed override");
}

void write_manifest(const std::string& path, const std::string& command,
                    const NormalizedConfig& cfg, const std::vector<std::string>& outputs,
                    double seconds) {
  for (const auto& out : outputs) {
    if (!fs::exists(out))
      throw std::runtime_error("manifest: declared output missing: " + out);
  }
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["backend"] = kernels::backend_name();
  m["seed"] = cfg.values["seed"];
  m["config"] = cfg.values;
  m["outputs"] = outputs;
  m["timing_seconds"] = seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot open " + path);
  out << m.dump(2) << '\n';
}

json metrics_to_json(const Metrics& m) {
  json j;
  j["n_trials"] = m.n_trials;
  j["hits"] = m.hits;
  j["misses"] = m.misses;
  j["false_alarms"] = m.false_alarms;
  j["correct_rejections"] = m.correct_rejections;
  j["search_errors"] = m.search_errors;
  j["recognition_errors"] = m.recognition_errors;
  j["pc"] = m.pc;
  j["pc_se"] = m.pc_se;
  j["dprime"] = m.dprime;
  j["threshold"] = m.threshold;
  return j;
}

json rule_to_json(const StoppingRule& rule) {
  json j;
  j["coverage_fraction"] = rule.coverage_fraction;
  j["ufov_radius_dva"] = rule.ufov_radius_dva;
  j["final_threshold"] = rule.final_threshold;
  j["theta"] = std::vector<double>(rule.theta.begin(), rule.theta.end());
  return j;
}

int run_experiment_command(const CommonOpts& opts, TaskMode mode, const std::string& out_prefix) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  cfg.values["mode"] = to_string(mode);
  ExperimentConfig exp = experiment_from_config(cfg.values);

  const ExperimentResult result = run_experiment(exp);

  const std::string records_path = out_prefix + ".records.jsonl";
  const std::string summary_path = out_prefix + ".summary.json";
  write_records_jsonl(records_path, result);

  json summary;
  summary["observer"] = to_string(exp.observer);
  summary["signal"] = to_string(exp.signal.kind);
  summary["mode"] = to_string(exp.mode);
  summary["contrast"] = exp.signal.contrast;
  summary["metrics"] = metrics_to_json(result.metrics);
  if (result.trained_rule) summary["trained_rule"] = rule_to_json(*result.trained_rule);
  {
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("cannot open " + summary_path);
    out << summary.dump(2) << '\n';
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_prefix + ".manifest.json", mode == TaskMode::lke ? "run-lke" : "run-search",
                 cfg, {records_path, summary_path}, seconds);
  std::cout << "pc=" << result.metrics.pc << " dprime=" << result.metrics.dprime << " ("
            << result.metrics.n_trials << " trials)\n";
  return 0;
}

int gen_stimuli_command(const CommonOpts& opts, const std::string& out_dir, int count) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  ExperimentConfig exp = experiment_from_config(cfg.values);
  fs::create_directories(out_dir);

  const SignalProfile profile = make_signal_profile(exp.signal, exp.geom, exp.noise.mean);
  const PlacementBounds bounds = placement_bounds(profile, exp.geom);

  std::vector<std::string> outputs;
  std::ostringstream truth;
  truth << "index,present,x,y,z,noise_seed\n";
  for (int i = 0; i < count; ++i) {
    NoiseSpec ns = exp.noise;
    ns.seed = Rng::substream(exp.seed, "gen-noise", i).next_u64();
    Volume vol = generate_noise_volume(ns, exp.geom);
    const bool present = i % 2 == 0;
    Rng loc_rng = Rng::substream(exp.seed, "gen-loc", i);
    const VoxelLoc loc = random_location(bounds, loc_rng);
    if (present) embed_signal(vol, profile, loc);
    std::ostringstream name;
    name << "vol_" << i << ".raw";
    const std::string path = (fs::path(out_dir) / name.str()).string();
    write_volume(path, vol, ns);
    outputs.push_back(path);
    outputs.push_back(path + ".json");
    truth << i << ',' << (present ? 1 : 0) << ',' << loc.x << ',' << loc.y << ',' << loc.z << ','
          << ns.seed << '\n';
  }
  const std::string truth_path = (fs::path(out_dir) / "truth.csv").string();
  {
    std::ofstream out(truth_path);
    out << truth.str();
  }
  outputs.push_back(truth_path);

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest((fs::path(out_dir) / "manifest.json").string(), "gen-stimuli", cfg, outputs,
                 seconds);
  std::cout << "wrote " << count << " stimuli to " << out_dir << '\n';
  return 0;
}

int build_observer_command(const CommonOpts& opts, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  ExperimentConfig exp = experiment_from_config(cfg.values);
  const SignalProfile profile = make_signal_profile(exp.signal, exp.geom, exp.noise.mean);

  std::vector<std::string> outputs;
  if (exp.observer == ObserverKind::fcho) {
    const int n_slices = exp.geom.nz > 1 ? std::min(5, exp.geom.nz) : 1;
    const EccentricityLadder ladder =
        build_ladder(exp.signal, exp.noise, exp.geom, exp.fovea, 10, n_slices);
    for (std::size_t b = 0; b < ladder.bands.size(); ++b) {
      const std::string path = out_path + "_band" + std::to_string(b);
      write_template(path, ladder.bands[b].tmpl);
      outputs.push_back(path);
      outputs.push_back(path + ".json");
    }
  } else {
    const Template tmpl = build_scanning_template(exp, profile);
    write_template(out_path, tmpl);
    outputs.push_back(out_path);
    outputs.push_back(out_path + ".json");
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_path + ".manifest.json", "build-observer", cfg, outputs, seconds);
  std::cout << "wrote " << outputs.size() / 2 << " template(s)\n";
  return 0;
}

int fit_fovea_command(const CommonOpts& opts, const std::string& data_path,
                      std::string out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  ExperimentConfig exp = experiment_from_config(cfg.values);
  if (out_path.empty()) out_path = data_path + ".fit.json";

  const EccentricityDataset data = read_ecc_dataset(data_path);
  const FitResult fit =
      fit_foveation_params(data, exp.noise, exp.geom, exp.signal.contrast);

  json j;
  j["alpha"] = fit.params.alpha;
  j["beta"] = fit.params.beta;
  j["internal_noise_gain"] = fit.params.internal_noise_gain;
  j["log_likelihood"] = fit.log_likelihood;
  j["converged"] = fit.converged;
  j["evaluations"] = fit.evaluations;
  {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << j.dump(2) << '\n';
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_path + ".manifest.json", "fit-fovea", cfg, {out_path}, seconds);
  std::cout << "alpha=" << fit.params.alpha << " beta=" << fit.params.beta
            << " K=" << fit.params.internal_noise_gain << '\n';
  return 0;
}

int train_thresholds_command(const CommonOpts& opts, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  ExperimentConfig exp = experiment_from_config(cfg.values);
  const int n_slices = exp.geom.nz > 1 ? std::min(5, exp.geom.nz) : 1;
  const EccentricityLadder ladder =
      build_ladder(exp.signal, exp.noise, exp.geom, exp.fovea, 10, n_slices);
  const SignalProfile profile = make_signal_profile(exp.signal, exp.geom, exp.noise.mean);

  int margin = 0;
  for (const auto& band : ladder.bands) margin = std::max(margin, band.tmpl.side / 2);
  const PlacementBounds bounds = placement_bounds(profile, exp.geom, margin);

  FsmConfig fc = fsm_from_config(cfg.values);
  std::vector<TrialStimulus> training;
  for (int i = 0; i < exp.fsm_training_trials; ++i) {
    NoiseSpec ns = exp.noise;
    ns.seed = Rng::substream(exp.seed, "fsm-train-noise", i).next_u64();
    TrialStimulus stim;
    stim.volume = generate_noise_volume(ns, exp.geom);
    stim.present = i % 2 == 0;
    stim.spec = exp.signal;
    Rng loc_rng = Rng::substream(exp.seed, "fsm-train-loc", i);
    const VoxelLoc loc = random_location(bounds, loc_rng);
    if (stim.present) {
      embed_signal(stim.volume, profile, loc);
      stim.location = loc;
    }
    training.push_back(std::move(stim));
  }
  const ThresholdTrainingResult trained = train_thresholds(ladder, fc, training, exp.seed);

  json j = rule_to_json(trained.rule);
  j["training_pc"] = trained.training_pc;
  j["bin_counts"] = trained.bin_counts;
  {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << j.dump(2) << '\n';
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_path + ".manifest.json", "train-thresholds", cfg, {out_path}, seconds);
  std::cout << "training_pc=" << trained.training_pc << '\n';
  return 0;
}

int match_contrast_command(const CommonOpts& opts, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  NormalizedConfig cfg = resolve_config(opts);
  ExperimentConfig exp = experiment_from_config(cfg.values);
  const double target = cfg.values["target_pc"].get<double>();

  const ContrastMatch match = match_contrast(exp, target);
  json j;
  j["contrast"] = match.contrast;
  j["pc"] = match.pc;
  j["pc_se"] = match.pc_se;
  j["converged"] = match.converged;
  j["evaluations"] = match.evaluations;
  j["target_pc"] = target;
  {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << j.dump(2) << '\n';
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_path + ".manifest.json", "match-contrast", cfg, {out_path}, seconds);
  std::cout << "contrast=" << match.contrast << " pc=" << match.pc << '\n';
  return 0;
}

int analyze_command(const std::vector<std::string>& record_paths, const std::string& out_path) {
  std::ostringstream csv;
  csv << "label,n,pc,pc_se,dprime,hits,misses,false_alarms,correct_rejections,"
         "search_errors,recognition_errors\n";
  for (const auto& path : record_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("analyze: cannot open " + path);
    std::vector<TrialRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      TrialRecord r;
      r.present = j.at("present").get<bool>();
      r.yes = j.at("yes").get<bool>();
      r.statistic = j.at("statistic").get<double>();
      if (j.contains("error_class")) {
        const std::string ec = j["error_class"].get<std::string>();
        if (ec == "search_error") r.error_class = ErrorClass::search_error;
        else if (ec == "recognition_error") r.error_class = ErrorClass::recognition_error;
        else if (ec == "hit") r.error_class = ErrorClass::hit;
        else if (ec == "false_alarm") r.error_class = ErrorClass::false_alarm;
        else r.error_class = ErrorClass::correct_rejection;
      }
      records.push_back(r);
    }
    const Metrics m = compute_metrics(records, 0.0);
    csv << fs::path(path).stem().string() << ',' << m.n_trials << ',' << m.pc << ',' << m.pc_se
        << ',' << m.dprime << ',' << m.hits << ',' << m.misses << ',' << m.false_alarms << ','
        << m.correct_rejections << ',' << m.search_errors << ',' << m.recognition_errors << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << csv.str();
    std::cout << "wrote " << out_path << '\n';
  }
  return 0;
}

// Minimal SVG emission; the underlying data is always written alongside.
int plot_command(const std::string& data_path, const std::string& out_path,
                 const std::string& kind) {
  std::ifstream in(data_path);
  if (!in) throw std::runtime_error("plot: cannot open " + data_path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("plot: empty data file " + data_path);

  struct Row {
    std::string label;
    double value = 0.0;
    double err = 0.0;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Row row;
    std::string field;
    if (!std::getline(ss, row.label, ',')) continue;
    if (std::getline(ss, field, ',')) row.value = std::stod(field);
    if (std::getline(ss, field, ',')) row.err = std::stod(field);
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("plot: no data rows in " + data_path);

  const int width = 640, height = 400, margin = 60;
  double vmax = 0.0;
  for (const auto& r : rows) vmax = std::max(vmax, r.value + r.err);
  if (vmax <= 0.0) vmax = 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto ypix = [&](double v) { return height - margin - v / vmax * (height - 2 * margin); };

  if (kind == "bars") {
    const double bw = static_cast<double>(width - 2 * margin) / rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double x = margin + i * bw + 0.15 * bw;
      const double y = ypix(rows[i].value);
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << 0.7 * bw << "\" height=\""
          << (height - margin - y) << "\" fill=\"#4477aa\"/>\n";
      if (rows[i].err > 0.0) {
        const double cx = x + 0.35 * bw;
        svg << "<line x1=\"" << cx << "\" y1=\"" << ypix(rows[i].value - rows[i].err)
            << "\" x2=\"" << cx << "\" y2=\"" << ypix(rows[i].value + rows[i].err)
            << "\" stroke=\"black\"/>\n";
      }
      svg << "<text x=\"" << x + 0.35 * bw << "\" y=\"" << height - margin + 16
          << "\" font-size=\"11\" text-anchor=\"middle\">" << rows[i].label << "</text>\n";
    }
  } else if (kind == "curve") {
    double xmin = std::stod(rows.front().label), xmax = xmin;
    for (const auto& r : rows) {
      const double x = std::stod(r.label);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    auto xpix = [&](double x) {
      return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
    };
    svg << "<polyline fill=\"none\" stroke=\"#4477aa\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) svg << xpix(std::stod(r.label)) << ',' << ypix(r.value) << ' ';
    svg << "\"/>\n";
    for (const auto& r : rows)
      svg << "<circle cx=\"" << xpix(std::stod(r.label)) << "\" cy=\"" << ypix(r.value)
          << "\" r=\"3\" fill=\"#4477aa\"/>\n";
  } else {
    throw std::runtime_error("plot: unknown kind '" + kind + "' (use bars or curve)");
  }
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  svg << "</svg>\n";

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << svg.str();
  // Sidecar: the data the plot was drawn from.
  std::ifstream src(data_path, std::ios::binary);
  std::ofstream side(out_path + ".csv", std::ios::binary);
  side << src.rdbuf();
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"foveated model-observer simulation toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts, build_opts, lke_opts, search_opts, fit_opts, train_opts, match_opts;
  std::string gen_out = "stimuli";
  int gen_count = 4;
  std::string build_out = "observer";
  std::string lke_out = "lke", search_out = "search";
  std::string fit_data, fit_out;
  std::string train_out = "thresholds.json";
  std::string match_out = "match.json";
  std::vector<std::string> analyze_records;
  std::string analyze_out;
  std::string plot_data, plot_out = "plot.svg", plot_kind = "bars";

  auto* gen = app.add_subcommand("gen-stimuli", "generate noise stimuli with embedded signals");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--count", gen_count, "number of stimuli")->check(CLI::PositiveNumber);

  auto* build = app.add_subcommand("build-observer", "build and export observer template(s)");
  add_common(build, build_opts);
  build->add_option("--out", build_out, "output path prefix");

  auto* lke = app.add_subcommand("run-lke", "location-known-exactly experiment");
  add_common(lke, lke_opts);
  lke->add_option("--out", lke_out, "output path prefix");

  auto* search = app.add_subcommand("run-search", "free-search experiment");
  add_common(search, search_opts);
  search->add_option("--out", search_out, "output path prefix");

  auto* fit = app.add_subcommand("fit-fovea", "fit eccentricity parameters to yes/no data");
  add_common(fit, fit_opts);
  fit->add_option("--data", fit_data, "eccentricity dataset CSV")->required();
  fit->add_option("--out", fit_out, "output JSON (default: <data>.fit.json)");

  auto* train = app.add_subcommand("train-thresholds", "train fixation-count stopping thresholds");
  add_common(train, train_opts);
  train->add_option("--out", train_out, "output JSON");

  auto* match = app.add_subcommand("match-contrast", "bisect contrast to a target PC");
  add_common(match, match_opts);
  match->add_option("--out", match_out, "output JSON");

  auto* analyze = app.add_subcommand("analyze", "summarize record files into a table");
  analyze->add_option("--records", analyze_records, "record JSONL files")->required();
  analyze->add_option("--out", analyze_out, "output CSV (stdout when omitted)");

  auto* plot = app.add_subcommand("plot", "emit an SVG chart plus its data sidecar");
  plot->add_option("--data", plot_data, "input CSV (label,value[,err] rows)")->required();
  plot->add_option("--out", plot_out, "output SVG");
  plot->add_option("--kind", plot_kind, "bars or curve");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return gen_stimuli_command(gen_opts, gen_out, gen_count);
    if (build->parsed()) return build_observer_command(build_opts, build_out);
    if (lke->parsed()) return run_experiment_command(lke_opts, TaskMode::lke, lke_out);
    if (search->parsed()) return run_experiment_command(search_opts, TaskMode::search, search_out);
    if (fit->parsed()) return fit_fovea_command(fit_opts, fit_data, fit_out);
    if (train->parsed()) return train_thresholds_command(train_opts, train_out);
    if (match->parsed()) return match_contrast_command(match_opts, match_out);
    if (analyze->parsed()) return analyze_command(analyze_records, analyze_out);
    if (plot->parsed()) return plot_command(plot_data, plot_out, plot_kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
