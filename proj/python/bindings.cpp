#include "suplab/classifiers.hpp"
#include "suplab/concept_model.hpp"
#include "suplab/errors.hpp"
#include "suplab/estimators.hpp"
#include "suplab/experiment.hpp"
#include "suplab/neighborhood.hpp"
#include "suplab/plot.hpp"
#include "suplab/sae.hpp"
#include "suplab/stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

namespace py = pybind11;
using namespace suplab;

namespace {

std::vector<int> as_labels(const std::vector<int>& v) { return v; }

py::dict world_dict(const ConceptWorld& w) {
  py::dict d;
  d["concept_dim"] = w.concept_dim();
  d["feature_dim"] = w.feature_dim();
  d["sparsity"] = w.sparsity();
  d["law"] = to_string(w.config.law);
  d["noise_variance"] = w.noise_variance();
  d["seed"] = w.config.seed;
  d["w_star"] = w.w_star;
  d["projection"] = w.projection;
  return d;
}

WorldConfig world_config(std::size_t concept_dim, std::size_t feature_dim, std::size_t sparsity,
                         const std::string& law, double noise_variance, std::uint64_t seed) {
  WorldConfig c;
  c.concept_dim = concept_dim;
  c.feature_dim = feature_dim;
  c.sparsity = sparsity;
  c.law = parse_support_law(law);
  c.noise_variance = noise_variance;
  c.seed = seed;
  return c;
}

py::dict result_dict(const ExperimentResult& r) {
  py::list rows;
  for (const auto& row : r.rows) {
    py::dict d;
    for (std::size_t i = 0; i < r.axis_names.size(); ++i) d[py::str(r.axis_names[i])] = row.axes[i];
    d["metric"] = row.metric;
    d["mean"] = row.mean;
    d["ci_low"] = row.ci_low;
    d["ci_high"] = row.ci_high;
    d["n"] = row.n;
    rows.append(d);
  }
  py::list failures;
  for (const auto& f : r.failures) {
    failures.append(py::dict(py::arg("point") = f.point, py::arg("axes") = f.axes, py::arg("exit_code") = f.exit_code,
                             py::arg("message") = f.message));
  }
  py::dict out;
  out["experiment"] = r.experiment;
  out["axes"] = r.axis_names;
  out["rows"] = rows;
  out["failures"] = failures;
  out["seed"] = r.provenance.seed;
  out["csv"] = result_csv(r);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Concept-space test-time training laboratory";
  m.attr("__version__") = version_string();

  static py::exception<Error> base(m, "SuplabError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<DataError> data_error(m, "DataError", base.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  // synthetic worlds
  m.def(
      "make_world",
      [](std::size_t concept_dim, std::size_t feature_dim, std::size_t sparsity, const std::string& law,
         double noise_variance, std::uint64_t seed) {
        return world_dict(make_world(world_config(concept_dim, feature_dim, sparsity, law, noise_variance, seed)));
      },
      py::arg("concept_dim") = 256, py::arg("feature_dim") = 64, py::arg("sparsity") = 4,
      py::arg("law") = "clustered", py::arg("noise_variance") = 0.0, py::arg("seed") = 0);

  m.def(
      "sample_dataset",
      [](std::size_t concept_dim, std::size_t feature_dim, std::size_t sparsity, const std::string& law,
         double noise_variance, std::uint64_t world_seed, std::size_t n, std::uint64_t seed) {
        const ConceptWorld w = make_world(world_config(concept_dim, feature_dim, sparsity, law, noise_variance, world_seed));
        Rng rng(seed);
        const auto data = sample_dataset(w, n, rng);
        return py::make_tuple(feature_matrix(data), concept_matrix(data), label_vector(data));
      },
      "(features N x d2, concepts N x d1, labels N) from a freshly built world", py::arg("concept_dim") = 256,
      py::arg("feature_dim") = 64, py::arg("sparsity") = 4, py::arg("law") = "clustered",
      py::arg("noise_variance") = 0.0, py::arg("world_seed") = 0, py::arg("n") = 1000, py::arg("seed") = 1);

  m.def(
      "superposition_map",
      [](std::size_t concept_dim, std::size_t feature_dim, std::uint64_t seed) {
        Rng rng(seed);
        return make_superposition_map(concept_dim, feature_dim, rng);
      },
      py::arg("concept_dim"), py::arg("feature_dim"), py::arg("seed") = 0);

  m.def(
      "evaluate_interference",
      [](std::size_t concept_dim, std::size_t feature_dim, std::uint64_t seed) {
        Rng rng(seed);
        const auto inst = make_nonlearnable_instance(concept_dim, feature_dim, rng);
        const InterferenceResult r = evaluate_interference(inst);
        return py::dict(py::arg("error") = r.error, py::arg("analytic") = r.analytic, py::arg("rank") = r.rank);
      },
      py::arg("concept_dim"), py::arg("feature_dim"), py::arg("seed") = 0);

  // estimators
  m.def("pseudoinverse", [](const Matrix& a) { return pseudoinverse(a); });
  m.def(
      "fit_global_minnorm",
      [](const Matrix& x, const Vector& y) {
        const GlobalModel g = fit_global_minnorm(x, y);
        return py::make_tuple(g.weights, g.residual);
      },
      "(weights, mean squared residual)");
  m.def(
      "fit_ridge",
      [](const Matrix& x, const Vector& y, double lambda) {
        const GlobalModel g = fit_ridge(x, y, lambda);
        return py::make_tuple(g.weights, g.residual);
      },
      py::arg("features"), py::arg("labels"), py::arg("lam"));
  m.def(
      "fit_ttt_sparse",
      [](const Matrix& x, const Vector& y, const Matrix& local_projection, std::size_t local_sparsity,
         const std::string& search) {
        if (search != "greedy" && search != "exhaustive") throw ConfigError("search must be greedy or exhaustive");
        const LocalModel l = fit_ttt_sparse(x, y, local_projection, local_sparsity,
                                            search == "greedy" ? SparseSearch::greedy : SparseSearch::exhaustive);
        return py::make_tuple(l.weights, l.support, l.residual);
      },
      "(weights, concept support, residual)", py::arg("features"), py::arg("labels"), py::arg("local_projection"),
      py::arg("local_sparsity"), py::arg("search") = "greedy");

  // neighbourhoods
  m.def("cosine_similarity", &cosine_similarity);
  m.def("sparse_dual_norm", &sparse_dual_norm, py::arg("z"), py::arg("m"));
  m.def(
      "knn",
      [](const Vector& query, const Matrix& points, std::size_t k, const std::string& metric) {
        if (metric != "cosine" && metric != "euclidean") throw ConfigError("metric must be cosine or euclidean");
        const Neighborhood nb =
            knn(query, points, k, Space::feature, metric == "cosine" ? Metric::cosine : Metric::euclidean);
        return py::make_tuple(nb.members, nb.similarities);
      },
      "(member rows, similarities), most similar first", py::arg("query"), py::arg("points"), py::arg("k"),
      py::arg("metric") = "cosine");

  // statistics
  m.def(
      "bootstrap_ci",
      [](const std::vector<double>& samples, std::size_t resamples, double level, std::uint64_t seed) {
        Rng rng(seed);
        const Interval ci = bootstrap_ci(samples, resamples, level, rng);
        return py::make_tuple(ci.low, ci.high);
      },
      py::arg("samples"), py::arg("resamples") = kDefaultResamples, py::arg("level") = kDefaultLevel,
      py::arg("seed") = 0);

  // sparse autoencoders
  py::class_<SaeConfig>(m, "SaeConfig")
      .def(py::init<>())
      .def_readwrite("concepts", &SaeConfig::concepts)
      .def_readwrite("sparsity", &SaeConfig::sparsity)
      .def_readwrite("use_bias", &SaeConfig::use_bias)
      .def_readwrite("batch_size", &SaeConfig::batch_size)
      .def_readwrite("epochs", &SaeConfig::epochs)
      .def_readwrite("max_steps", &SaeConfig::max_steps)
      .def_readwrite("peak_lr", &SaeConfig::peak_lr)
      .def_readwrite("warmup_steps", &SaeConfig::warmup_steps)
      .def_readwrite("horizon", &SaeConfig::horizon)
      .def_readwrite("initial_sparsity", &SaeConfig::initial_sparsity)
      .def_readwrite("ramp_steps", &SaeConfig::ramp_steps)
      .def_readwrite("dropout", &SaeConfig::dropout)
      .def_readwrite("ghost_weight", &SaeConfig::ghost_weight)
      .def_readwrite("dead_threshold", &SaeConfig::dead_threshold)
      .def_readwrite("activity_window", &SaeConfig::activity_window);

  py::class_<SaeModel>(m, "SaeModel")
      .def_readonly("encoder", &SaeModel::encoder)
      .def_readonly("decoder", &SaeModel::decoder)
      .def_readonly("bias", &SaeModel::bias)
      .def_readonly("sparsity", &SaeModel::sparsity)
      .def("encode", [](const SaeModel& s, const Matrix& x) { return sae_encode(s, x); })
      .def("reconstruct", [](const SaeModel& s, const Matrix& x) { return sae_reconstruct(s, x); })
      .def("save", [](const SaeModel& s, const std::string& path) { save_sae(path, s); })
      .def_static("load", [](const std::string& path) { return load_sae(path); });

  m.def(
      "train_sae",
      [](const SaeConfig& cfg, const Matrix& data, std::uint64_t seed) {
        Rng rng(seed);
        py::gil_scoped_release release;
        return train_sae(cfg, data, rng);
      },
      py::arg("config"), py::arg("data"), py::arg("seed") = 0);
  m.def(
      "top_k",
      [](const Vector& pre, std::size_t s) { return top_k_activation(pre, s).to_dense(); },
      "Dense vector keeping the s largest entries", py::arg("pre"), py::arg("s"));

  // classifiers
  m.def(
      "train_global_head",
      [](const Matrix& x, const std::vector<int>& y, std::size_t classes, double learning_rate, std::size_t batch_size,
         std::size_t epochs, std::uint64_t seed) {
        TrainConfig cfg{learning_rate, batch_size, epochs, 0.0};
        Rng rng(seed);
        const LinearHead h = train_global_head(x, as_labels(y), classes, cfg, rng);
        return py::make_tuple(h.weights, h.bias);
      },
      "(weights C x d, bias C)", py::arg("x"), py::arg("labels"), py::arg("classes"), py::arg("learning_rate") = 1e-3,
      py::arg("batch_size") = 128, py::arg("epochs") = 50, py::arg("seed") = 0);
  m.def(
      "ttt_finetune",
      [](const Matrix& weights, const Vector& bias, const Matrix& x, const std::vector<int>& y, std::size_t steps,
         double learning_rate) {
        TttConfig cfg;
        cfg.neighbors = static_cast<std::size_t>(x.rows());
        cfg.steps = steps;
        cfg.learning_rate = learning_rate;
        const LinearHead h = ttt_finetune(LinearHead{weights, bias}, x, y, cfg);
        return py::make_tuple(h.weights, h.bias);
      },
      py::arg("weights"), py::arg("bias"), py::arg("x"), py::arg("labels"), py::arg("steps") = 80,
      py::arg("learning_rate") = 0.02);
  m.def(
      "softmax_xent",
      [](const Matrix& weights, const Vector& bias, const Matrix& x, const std::vector<int>& y) {
        const XentResult r = softmax_xent_grad(LinearHead{weights, bias}, x, y);
        return py::make_tuple(r.loss, r.grad_weights, r.grad_bias);
      },
      "(mean loss, dW, db)");
  m.def(
      "kmeans",
      [](const Matrix& x, std::size_t clusters, std::size_t max_iterations, std::uint64_t seed) {
        Rng rng(seed);
        const KMeansResult r = kmeans(x, clusters, max_iterations, rng);
        return py::make_tuple(r.centroids, r.assignment);
      },
      py::arg("x"), py::arg("clusters"), py::arg("max_iterations") = 100, py::arg("seed") = 0);

  // experiments
  m.def(
      "run_experiment",
      [](const std::string& config_text, std::optional<std::uint64_t> seed) {
        const ExperimentConfig cfg = ExperimentConfig::from_file(ConfigFile::parse(config_text, "<python>"), seed);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return result_dict(r);
      },
      "Runs an experiment from config text; returns rows, failures and the CSV", py::arg("config"),
      py::arg("seed") = py::none());
  m.def(
      "render_svg",
      [](const std::string& csv, const std::string& kind, const std::string& metric, const std::string& x_axis) {
        PlotOptions o;
        o.metric = metric;
        o.x_axis = x_axis;
        return render_svg(parse_result_csv(csv), parse_plot_kind(kind), o);
      },
      py::arg("csv"), py::arg("kind") = "band", py::arg("metric") = "", py::arg("x_axis") = "");
}
