#include "suplab/errors.hpp"
#include "suplab/experiment.hpp"
#include "suplab/io.hpp"
#include "suplab/plot.hpp"
#include "suplab/sae.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace {

using namespace suplab;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 0;
  std::string format = "both";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Run seed (overrides the file)");
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--threads", o.threads, "Worker threads for grid points")->check(CLI::PositiveNumber);
  cmd->add_option("--format", o.format, "Artifacts to write")->check(CLI::IsMember({"csv", "svg", "both"}));
}

void warn_unused(const ConfigFile& file) {
  for (const auto& key : file.unused_keys()) std::cerr << "warning: unused config key '" << key << "'\n";
}

std::vector<std::filesystem::path> write_plots(const ExperimentResult& result, const std::filesystem::path& dir,
                                               PlotKind kind, const PlotOptions& base) {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> metrics;
  for (const auto& r : result.rows) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  for (const auto& m : metrics) {
    if (!base.metric.empty() && m != base.metric) continue;
    PlotOptions o = base;
    o.metric = m;
    o.title = result.experiment + ": " + m;
    const auto path = dir / (result.experiment + "." + m + ".svg");
    emit_plot(result, kind, path, o);
    written.push_back(path);
  }
  return written;
}

int finish(const ExperimentResult& result, const CommonOptions& o, const std::filesystem::path& dir) {
  if (o.format != "svg") {
    write_result_files(dir, result);
    std::cout << (dir / (result.experiment + ".csv")).string() << '\n';
  } else {
    std::filesystem::create_directories(dir);
  }
  if (o.format != "csv" && !result.rows.empty()) {
    for (const auto& p : write_plots(result, dir, PlotKind::band, {})) std::cout << p.string() << '\n';
  }
  for (const auto& f : result.failures) {
    std::cerr << "grid point " << f.point << " failed (exit " << f.exit_code << "): " << f.message << '\n';
  }
  return result.failures.empty() ? 0 : result.failures.front().exit_code;
}

ExperimentConfig load_config(const CommonOptions& o, const std::set<ExperimentKind>& allowed, const std::string& cmd) {
  if (o.config.empty()) throw ConfigError(cmd + " needs --config");
  ExperimentConfig cfg = ExperimentConfig::load(o.config, o.seed);
  if (!allowed.count(cfg.kind)) {
    std::string names;
    for (auto k : allowed) names += (names.empty() ? "" : ", ") + to_string(k);
    throw ConfigError("'" + to_string(cfg.kind) + "' is not a " + cmd + " experiment (expected " + names + ")");
  }
  if (o.threads > 0) cfg.threads = o.threads;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

int run_kind(const CommonOptions& o, const std::set<ExperimentKind>& allowed, const std::string& cmd) {
  const ExperimentConfig cfg = load_config(o, allowed, cmd);
  const ExperimentResult result = run_experiment(cfg);
  warn_unused(cfg.params);
  return finish(result, o, cfg.output_dir);
}

int sae_train_file(const CommonOptions& o, const std::string& data_path, const std::string& checkpoint) {
  const ConfigFile file = o.config.empty() ? ConfigFile() : ConfigFile::load(o.config);
  std::uint64_t seed = 0;
  if (o.seed) {
    seed = *o.seed;
  } else if (file.has("seed")) {
    seed = file.get_uint("seed");
  } else {
    throw ConfigError("sae train needs a seed (config key 'seed' or --seed)");
  }
  const Embeddings e = load_embeddings(data_path);
  const SaeConfig cfg = read_sae_config(file, 4 * static_cast<std::size_t>(e.values.cols()));
  Rng rng(seed);
  std::vector<SaeStepLog> log;
  const SaeModel model = train_sae(cfg, e.values, rng, &log);
  warn_unused(file);
  const std::filesystem::path out = checkpoint.empty() ? std::filesystem::path(o.out.empty() ? "." : o.out) / "sae.bin"
                                                        : std::filesystem::path(checkpoint);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_sae(out, model);
  std::ostringstream csv;
  csv << "step,learning_rate,sparsity,reconstruction,ghost,dead_fraction,grad_norm\n";
  for (const auto& s : log) {
    csv << s.step << ',' << format_double(s.learning_rate) << ',' << s.sparsity << ',' << format_double(s.reconstruction)
        << ',' << format_double(s.ghost) << ',' << format_double(s.dead_fraction) << ',' << format_double(s.grad_norm)
        << '\n';
  }
  std::filesystem::path log_path = out;
  log_path.replace_extension(".log.csv");
  write_text(log_path, csv.str());
  std::cout << out.string() << '\n' << log_path.string() << '\n';
  return 0;
}

int sae_eval(const std::string& data_path, const std::string& checkpoint, const std::string& out) {
  if (checkpoint.empty() || data_path.empty()) throw ConfigError("sae eval needs --checkpoint and --data");
  const SaeModel model = load_sae(checkpoint);
  const Embeddings e = load_embeddings(data_path);
  if (static_cast<std::size_t>(e.values.cols()) != model.feature_dim()) {
    throw DataError("embedding dimension " + std::to_string(e.values.cols()) + " does not match the SAE's " +
                    std::to_string(model.feature_dim()));
  }
  const Matrix recon = sae_reconstruct(model, e.values);
  const Matrix codes = sae_encode(model, e.values);
  const double mse = (recon - e.values).squaredNorm() / static_cast<double>(e.values.rows());
  const double l0 = static_cast<double>((codes.array() != 0.0).count()) / static_cast<double>(e.values.rows());
  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "reconstruction," << format_double(mse) << '\n';
  csv << "mean_l0," << format_double(l0) << '\n';
  csv << "dead_fraction," << format_double(dead_feature_fraction(model, e.values, 1e-4)) << '\n';
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    std::filesystem::create_directories(out);
    write_text(std::filesystem::path(out) / "sae_eval.csv", csv.str());
  }
  return 0;
}

int classify_predictions(const CommonOptions& o, const std::string& path) {
  if (o.config.empty()) throw ConfigError("classify needs --config");
  const ConfigFile file = ConfigFile::load(o.config);
  std::uint64_t seed = 0;
  if (o.seed) {
    seed = *o.seed;
  } else if (file.has("seed")) {
    seed = file.get_uint("seed");
  } else {
    throw ConfigError("classify needs a seed (config key 'seed' or --seed)");
  }
  const DatasetPair data = load_dataset(file);
  const PredictionLog log = classify_points(data, file, seed);
  std::ostringstream csv;
  write_prediction_csv(csv, log);
  write_text(path, csv.str());
  std::cout << path << '\n';
  return 0;
}

int report(const std::vector<std::string>& inputs, const CommonOptions& o, const std::string& plot,
           const std::string& metric, const std::string& x_axis) {
  if (inputs.empty()) throw ConfigError("report needs at least one --input CSV");
  const PlotKind kind = parse_plot_kind(plot);
  for (const auto& in : inputs) {
    const ExperimentResult result = read_result_csv(in);
    if (result.rows.empty()) throw DataError(in + ": no rows");
    const std::filesystem::path dir = o.out.empty() ? std::filesystem::path(in).parent_path() : std::filesystem::path(o.out);
    if (!dir.empty()) std::filesystem::create_directories(dir);
    PlotOptions base;
    base.metric = metric;
    base.x_axis = x_axis;
    for (const auto& p : write_plots(result, dir, kind, base)) std::cout << p.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-space test-time training laboratory"};
  app.set_version_flag("--version", suplab::version_string());
  app.require_subcommand(1);

  CommonOptions sim_opts, sae_opts, cls_opts, rep_opts;
  auto* simulate = app.add_subcommand("simulate", "Synthetic-world experiments");
  add_common(simulate, sim_opts);

  auto* sae = app.add_subcommand("sae", "Train or evaluate sparse autoencoders, learn concept masks");
  add_common(sae, sae_opts);
  std::string sae_mode = "train", sae_data, sae_checkpoint;
  sae->add_option("--mode", sae_mode, "train, eval or mask")->check(CLI::IsMember({"train", "eval", "mask"}));
  sae->add_option("--data", sae_data, "Embedding file (train on it instead of a synthetic world)");
  sae->add_option("--checkpoint", sae_checkpoint, "SAE checkpoint to write (train) or read (eval)");

  auto* classify = app.add_subcommand("classify", "Global, TTT, vote and MoE heads on datasets");
  add_common(classify, cls_opts);
  std::string predictions;
  classify->add_option("--predictions", predictions, "Write per-point global/ttt/vote predictions to this CSV");

  auto* rep = app.add_subcommand("report", "Plots from result CSVs");
  add_common(rep, rep_opts);
  std::vector<std::string> inputs;
  std::string plot = "band", metric, x_axis;
  rep->add_option("--input", inputs, "Result CSV files")->check(CLI::ExistingFile);
  rep->add_option("--plot", plot, "line, band or hist")->check(CLI::IsMember({"line", "band", "hist"}));
  rep->add_option("--metric", metric, "Only this metric");
  rep->add_option("--x", x_axis, "Axis on the horizontal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    using K = suplab::ExperimentKind;
    if (*simulate) {
      return run_kind(sim_opts, {K::interference, K::ttt_rate, K::neighborhood_sweep, K::assumption_report}, "simulate");
    }
    if (*sae) {
      if (sae_mode == "eval") return sae_eval(sae_data, sae_checkpoint, sae_opts.out);
      if (sae_mode == "train" && !sae_data.empty()) return sae_train_file(sae_opts, sae_data, sae_checkpoint);
      return run_kind(sae_opts, {sae_mode == "mask" ? K::sae_mask : K::sae_train}, "sae " + sae_mode);
    }
    if (*classify) {
      if (!predictions.empty()) return classify_predictions(cls_opts, predictions);
      return run_kind(cls_opts, {K::model_scaling, K::data_scaling, K::moe_scaling}, "classify");
    }
    if (*rep) return report(inputs, rep_opts, plot, metric, x_axis);
  } catch (const suplab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
