#pragma once

#include "suplab/concept_model.hpp"
#include "suplab/config.hpp"
#include "suplab/io.hpp"
#include "suplab/rng.hpp"
#include "suplab/sae.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace suplab {

enum class ExperimentKind {
  interference,
  ttt_rate,
  model_scaling,
  data_scaling,
  neighborhood_sweep,
  sae_train,
  sae_mask,
  moe_scaling,
  assumption_report,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);
/// True for kinds that read a labelled dataset instead of a synthetic world.
bool uses_dataset(ExperimentKind kind);

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

/// Parsed experiment file. Every key under [sweep] is an axis; the grid is the
/// cartesian product of all axes in file order (last axis fastest).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::interference;
  std::string name;  // "experiment" column; defaults to the kind
  std::uint64_t seed = 0;
  std::size_t trials = 0;  // 0 picks the kind's default
  std::size_t threads = 1;
  std::vector<SweepAxis> axes;
  WorldConfig world;
  std::filesystem::path output_dir = "results";
  ConfigFile params;  // the whole file, for kind-specific keys

  /// `seed_override` replaces (or supplies) the seed; one of the two is required.
  static ExperimentConfig from_file(const ConfigFile& file, std::optional<std::uint64_t> seed_override = {});
  static ExperimentConfig load(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

  std::size_t grid_size() const;
  /// Axis values of grid point `index`.
  std::vector<double> grid_point(std::size_t index) const;
  std::size_t effective_trials() const;
  void validate() const;
};

struct ResultRow {
  std::vector<double> axes;  // one value per ExperimentResult::axis_names entry
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

struct PointFailure {
  std::size_t point = 0;
  std::vector<double> axes;  // grid axes only
  int exit_code = 1;
  std::string message;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string version;
  std::string timestamp;  // UTC, ISO 8601
  std::string config_source;
  std::size_t threads = 1;
  std::size_t trials = 0;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::string> axis_names;
  std::vector<ResultRow> rows;
  std::vector<PointFailure> failures;
  Provenance provenance;

  std::vector<const ResultRow*> find(const std::string& metric) const;
  /// Row for `metric` whose axes match `axes` exactly (nullptr if absent).
  const ResultRow* find(const std::string& metric, std::span<const double> axes) const;
  std::size_t axis_index(const std::string& name) const;
};

/// One metric of one grid point before aggregation; `extra_axes` are values of
/// the kind's inner axes (for example k for the rate curve).
struct Measurement {
  std::vector<double> extra_axes;
  std::string metric;
  std::vector<double> samples;
};

/// Runs every grid point in a pool of `config.threads` workers. Each point
/// draws from its own generator and fills a private buffer; a failing point is
/// recorded in `failures` and contributes no rows.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Inner axis names appended after the sweep axes for `kind`.
std::vector<std::string> inner_axes(ExperimentKind kind);

/// Least-squares slope of log(mean) against log(axis value) over the rows of
/// `metric`; throws DataError with fewer than two rows or non-positive values.
double loglog_slope(const ExperimentResult& result, const std::string& metric, const std::string& axis);

/// "experiment,<axes>,metric,mean,ci_low,ci_high,n,seed" with shortest
/// round-trip number formatting.
void write_result_csv(std::ostream& out, const ExperimentResult& result);
std::string result_csv(const ExperimentResult& result);
ExperimentResult parse_result_csv(const std::string& text);
ExperimentResult read_result_csv(const std::filesystem::path& path);

std::string provenance_json(const ExperimentResult& result);

/// Writes <dir>/<experiment>.csv and <dir>/<experiment>.provenance.json.
void write_result_files(const std::filesystem::path& dir, const ExperimentResult& result);

/// Indices drawn so that every class contributes floor or ceil of
/// fraction * (class count); the class totals differ from their exact
/// proportional share by less than one. Sorted ascending.
std::vector<std::size_t> balanced_subsample(std::span<const int> labels, std::size_t classes, double fraction,
                                            Rng& rng);

/// Training split and evaluation split for the dataset kinds.
struct DatasetPair {
  LabeledData train;
  LabeledData test;
  std::string description;
};

/// data.source = "mnist" (data.dir, else SUPLAB_DATA_DIR, else the bundled
/// subset) or "embeddings" (data.train and data.test files with labels).
DatasetPair load_dataset(const ConfigFile& params);

/// Per-test-point predictions of the global head, TTT and majority vote.
struct PredictionLog {
  std::vector<std::size_t> point;
  std::vector<int> global;
  std::vector<int> ttt;
  std::vector<int> vote;
  std::vector<int> label;
};

PredictionLog classify_points(const DatasetPair& data, const ConfigFile& params, std::uint64_t seed);
void write_prediction_csv(std::ostream& out, const PredictionLog& log);

/// SAE settings from the [sae] section; `concepts` defaults to `default_concepts`.
SaeConfig read_sae_config(const ConfigFile& params, std::size_t default_concepts);

std::string version_string();

}  // namespace suplab
