#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "ope/csv.hpp"
#include "ope/environments.hpp"
#include "ope/experiment.hpp"
#include "ope/stats.hpp"
#include "ope/types.hpp"

namespace py = pybind11;

namespace {

ope::TrainingSchedule::Engine engine_from(const std::string& name) {
  if (name == "linear") return ope::TrainingSchedule::Engine::kLinear;
  if (name == "tree") return ope::TrainingSchedule::Engine::kTree;
  throw std::invalid_argument("outcome model must be 'linear' or 'tree', got '" +
                              name + "'");
}

ope::EstimatorConfig build_estimator_config(
    const std::string& outcome_model, const std::string& training,
    std::int64_t refit_every, double alpha, double variance_floor,
    std::int64_t burn_in, bool materialize_dprime) {
  ope::EstimatorConfig cfg;
  cfg.alpha = alpha;
  cfg.variance_floor = variance_floor;
  cfg.burn_in = burn_in;
  cfg.materialize_dprime = materialize_dprime;
  cfg.training.engine = engine_from(outcome_model);
  cfg.training.refit_every = refit_every;
  if (training == "sequential") {
    cfg.training.mode = ope::TrainingSchedule::Mode::kSequential;
  } else if (training.rfind("crosstime:", 0) == 0) {
    cfg.training.mode = ope::TrainingSchedule::Mode::kCrossTime;
    cfg.training.folds = std::stoi(training.substr(10));
  } else {
    throw std::invalid_argument("training must be 'sequential' or 'crosstime:F'");
  }
  return cfg;
}

py::dict report_to_dict(const ope::EstimateReport& r) {
  py::dict diag;
  diag["floor_hits"] = r.diagnostics.floor_hits;
  diag["sigma_min"] = r.diagnostics.sigma_min;
  diag["sigma_max"] = r.diagnostics.sigma_max;
  diag["burn_in"] = r.diagnostics.burn_in;
  py::dict out;
  out["estimator"] = std::string(ope::to_string(r.estimator));
  out["psi_hat"] = r.psi_hat;
  out["scale"] = r.scale;
  out["ci_lo"] = r.ci_lo;
  out["ci_hi"] = r.ci_hi;
  out["alpha"] = r.alpha;
  out["T"] = r.rounds;
  out["diagnostics"] = diag;
  return out;
}

py::dict row_to_dict(const ope::CoverageRow& row) {
  py::dict out;
  out["dataset"] = row.dataset;
  out["target"] = row.target;
  out["estimator"] = std::string(ope::to_string(row.estimator));
  out["R"] = row.replications;
  out["coverage"] = row.coverage;
  out["coverage_se"] = row.coverage_se;
  out["mean_width"] = row.mean_width;
  out["bias"] = row.bias;
  out["rmse"] = row.rmse;
  out["floor_hits"] = row.floor_hits;
  out["failures"] = row.failures;
  out["seconds"] = row.seconds;
  return out;
}

py::list run_and_convert(ope::ExperimentConfig cfg, int parallel) {
  if (parallel > 0) cfg.parallelism = parallel;
  std::vector<ope::CoverageRow> rows;
  {
    py::gil_scoped_release release;
    rows = ope::run_experiment(cfg);
  }
  py::list out;
  for (const auto& row : rows) out.append(row_to_dict(row));
  return out;
}

}  // namespace

PYBIND11_MODULE(_ope, m) {
  m.doc() = "off-policy evaluation for adaptively logged bandit data";

  py::class_<ope::ClassificationTable>(m, "Table")
      .def_property_readonly("rows",
                             [](const ope::ClassificationTable& t) {
                               return t.num_rows();
                             })
      .def_property_readonly("arms",
                             [](const ope::ClassificationTable& t) {
                               return t.num_arms;
                             })
      .def_property_readonly("dim",
                             [](const ope::ClassificationTable& t) {
                               return t.dim();
                             })
      .def("__repr__", [](const ope::ClassificationTable& t) {
        return "Table(rows=" + std::to_string(t.num_rows()) +
               ", arms=" + std::to_string(t.num_arms) +
               ", dim=" + std::to_string(t.dim()) + ")";
      });

  py::class_<ope::LoggedDataset>(m, "Dataset")
      .def_property_readonly("rounds", &ope::LoggedDataset::rounds)
      .def_property_readonly("arms", &ope::LoggedDataset::num_arms)
      .def_property_readonly("dim", &ope::LoggedDataset::dim)
      .def("__repr__", [](const ope::LoggedDataset& ds) {
        return "Dataset(rounds=" + std::to_string(ds.rounds()) +
               ", arms=" + std::to_string(ds.num_arms()) +
               ", dim=" + std::to_string(ds.dim()) + ")";
      });

  m.def("load_table", &ope::load_table_csv, py::arg("path"),
        "Read a classification table csv (header x1,...,xd,label).");
  m.def("synthetic_table", &ope::synthetic_table, py::arg("rows"),
        py::arg("classes"), py::arg("dim"), py::arg("seed") = 0,
        py::arg("spread") = 2.0, py::arg("noise") = 1.0,
        "Gaussian-blob table with one blob per class.");

  m.def(
      "simulate",
      [](const ope::ClassificationTable& table, std::int64_t rounds,
         double eps_c, double eps_exp, std::uint64_t seed,
         std::uint64_t replication, const std::string& agent,
         std::int64_t agent_refit_every) {
        ope::EpsilonSchedule sched{eps_c, eps_exp};
        py::gil_scoped_release release;
        return ope::simulate_bandit(table, rounds, sched, engine_from(agent),
                                    seed, replication, agent_refit_every);
      },
      py::arg("table"), py::arg("rounds"), py::arg("eps_c") = 0.01,
      py::arg("eps_exp") = 1.0 / 3.0, py::arg("seed") = 0,
      py::arg("replication") = 0, py::arg("agent") = "tree",
      py::arg("agent_refit_every") = 1,
      "Log an epsilon-greedy bandit run over the table's rows.");

  m.def("save_dataset", &ope::save_dataset, py::arg("dataset"),
        py::arg("path"), "Write logged.csv, cross.csv, meta.json.");
  m.def("load_dataset", &ope::load_dataset, py::arg("path"));

  m.def(
      "estimate",
      [](const ope::LoggedDataset& ds, const std::string& target,
         const std::vector<std::string>& estimators,
         const std::string& outcome_model, const std::string& training,
         std::int64_t refit_every, double alpha, double variance_floor,
         std::int64_t burn_in, bool materialize_dprime,
         const ope::ClassificationTable* table, std::int64_t learned_rounds,
         std::uint64_t seed) {
        if (estimators.empty()) {
          throw std::invalid_argument("estimators is empty");
        }
        ope::EstimatorConfig cfg = build_estimator_config(
            outcome_model, training, refit_every, alpha, variance_floor,
            burn_in, materialize_dprime);
        const auto gstar = ope::make_target(target, ds.num_arms(), table,
                                            learned_rounds, seed);
        std::vector<ope::EstimateReport> reports;
        {
          py::gil_scoped_release release;
          for (const std::string& name : estimators) {
            cfg.kind = ope::estimator_kind_from_string(name);
            reports.push_back(ope::estimate(ds, *gstar, cfg));
          }
        }
        py::list out;
        for (const auto& r : reports) out.append(report_to_dict(r));
        return out;
      },
      py::arg("dataset"), py::arg("target"), py::arg("estimators"),
      py::arg("outcome_model") = "linear", py::arg("training") = "sequential",
      py::arg("refit_every") = 1, py::arg("alpha") = 0.05,
      py::arg("variance_floor") = 1e-4, py::arg("burn_in") = -1,
      py::arg("materialize_dprime") = false, py::arg("table") = nullptr,
      py::arg("learned_rounds") = 500, py::arg("seed") = 0,
      "Point estimates with confidence intervals, one dict per estimator. "
      "targets: arm:k | uniform | contrast:(k1,k2) | learned:linear|tree "
      "(learned needs table=).");

  m.def(
      "true_value",
      [](const ope::ClassificationTable& table, const std::string& target,
         std::int64_t learned_rounds, std::uint64_t seed) {
        const auto gstar = ope::make_target(target, table.num_arms, &table,
                                            learned_rounds, seed);
        return ope::true_value(table, *gstar);
      },
      py::arg("table"), py::arg("target"), py::arg("learned_rounds") = 500,
      py::arg("seed") = 0,
      "Exact target value over the table's empirical context distribution.");

  m.def(
      "bench",
      [](const std::string& config_path, int parallel) {
        return run_and_convert(ope::load_config(config_path), parallel);
      },
      py::arg("config"), py::arg("parallel") = 0,
      "Run the coverage experiment a config file describes; one dict per "
      "(target, estimator).");
  m.def(
      "bench_text",
      [](const std::string& config_json, int parallel) {
        return run_and_convert(ope::config_from_json(config_json), parallel);
      },
      py::arg("config_json"), py::arg("parallel") = 0,
      "Like bench, but the configuration document is passed inline.");

  m.def("normal_quantile", &ope::normal_quantile, py::arg("p"),
        "Standard normal quantile (inverse CDF).");
}
