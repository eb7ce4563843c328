// Python bindings for the core operations: simulating panel data, reading
// panel CSVs, fitting penalised multistate models, and predicting from a
// fit.  Vectors and matrices cross the boundary as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splinemsm/config.hpp"
#include "splinemsm/dataset.hpp"
#include "splinemsm/errors.hpp"
#include "splinemsm/estimator.hpp"
#include "splinemsm/inference.hpp"
#include "splinemsm/io.hpp"
#include "splinemsm/likelihood.hpp"
#include "splinemsm/markovcore.hpp"
#include "splinemsm/model.hpp"
#include "splinemsm/simulate.hpp"
#include "splinemsm/splinebasis.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using namespace splinemsm;

// Covariate vector from the python argument: None is allowed only for
// covariate-free models, anything else must cast to a vector of the right
// length (the model checks the length).
Eigen::VectorXd covariates_arg(const Model& model, const py::object& x) {
  if (x.is_none()) {
    if (model.n_covariates() > 0)
      throw ValidationError(
          "model has covariates; pass x with one value per covariate");
    return Eigen::VectorXd(0);
  }
  return x.cast<Eigen::VectorXd>();
}

TransitionStructure make_structure(int n_states,
                                   const std::vector<std::string>& transitions,
                                   std::vector<std::string> covariates) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(transitions.size());
  for (const std::string& label : transitions)
    pairs.push_back(parse_transition_label(label));
  return TransitionStructure(n_states, std::move(pairs),
                             std::move(covariates));
}

// Baseline choices per canonical transition from the python spec: an int
// gives every transition a spline with that many knots; a dict keyed by
// transition label mixes per-transition knot counts with "constant".
std::vector<BaselineChoice> baseline_choices(
    const TransitionStructure& structure, const py::object& knots) {
  const int n_tr = structure.n_transitions();
  if (py::isinstance<py::int_>(knots))
    return std::vector<BaselineChoice>(
        static_cast<std::size_t>(n_tr),
        BaselineChoice{true, knots.cast<int>()});
  if (!py::isinstance<py::dict>(knots))
    throw ValidationError(
        "knots must be an int or a dict of transition label to knot count or "
        "'constant'");

  const py::dict spec = knots.cast<py::dict>();
  for (const auto& item : spec) {
    const std::string label = item.first.cast<std::string>();
    const auto [r, s] = parse_transition_label(label);
    if (!structure.allows(r, s))
      throw ValidationError("knots: transition '" + label +
                            "' is not in the model");
  }
  std::vector<BaselineChoice> choices;
  for (int ti = 0; ti < n_tr; ++ti) {
    const std::string label = structure.transition_label(ti);
    if (!spec.contains(label))
      throw ValidationError("knots: no entry for transition '" + label + "'");
    const py::object value = spec[py::str(label)];
    if (py::isinstance<py::int_>(value)) {
      choices.push_back(BaselineChoice{true, value.cast<int>()});
    } else if (py::isinstance<py::str>(value) &&
               value.cast<std::string>() == "constant") {
      choices.push_back(BaselineChoice{false, 0});
    } else {
      throw ValidationError("knots['" + label +
                            "'] must be a knot count or 'constant'");
    }
  }
  return choices;
}

py::dict matrix_prediction_dict(const MatrixPrediction& pred) {
  py::dict out;
  out["point"] = pred.point;
  out["lower"] = pred.lower;
  out["upper"] = pred.upper;
  return out;
}

}  // namespace

PYBIND11_MODULE(_splinemsm, m) {
  m.doc() =
      "Semiparametric continuous-time multistate models for "
      "interval-censored panel data";

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  py::class_<Scenario>(m, "Scenario",
                       "Illness-death generating process for synthetic panel "
                       "studies: log-normal onset, exponential death from "
                       "health, Gompertz death after onset, fixed visit "
                       "schedule, exactly observed deaths.")
      .def(py::init([](double lognormal_mu, double lognormal_sigma,
                       double exp_rate, double gompertz_shape,
                       double gompertz_rate, double study_length,
                       double followup_interval, int n_individuals,
                       std::uint64_t seed) {
             Scenario s;
             s.lognormal_mu = lognormal_mu;
             s.lognormal_sigma = lognormal_sigma;
             s.exp_rate = exp_rate;
             s.gompertz_shape = gompertz_shape;
             s.gompertz_rate = gompertz_rate;
             s.study_length = study_length;
             s.followup_interval = followup_interval;
             s.n_individuals = n_individuals;
             s.seed = seed;
             s.validate();
             return s;
           }),
           "lognormal_mu"_a = Scenario{}.lognormal_mu,
           "lognormal_sigma"_a = Scenario{}.lognormal_sigma,
           "exp_rate"_a = Scenario{}.exp_rate,
           "gompertz_shape"_a = Scenario{}.gompertz_shape,
           "gompertz_rate"_a = Scenario{}.gompertz_rate,
           "study_length"_a = Scenario{}.study_length,
           "followup_interval"_a = Scenario{}.followup_interval,
           "n_individuals"_a = Scenario{}.n_individuals,
           "seed"_a = Scenario{}.seed)
      .def_readwrite("lognormal_mu", &Scenario::lognormal_mu)
      .def_readwrite("lognormal_sigma", &Scenario::lognormal_sigma)
      .def_readwrite("exp_rate", &Scenario::exp_rate)
      .def_readwrite("gompertz_shape", &Scenario::gompertz_shape)
      .def_readwrite("gompertz_rate", &Scenario::gompertz_rate)
      .def_readwrite("study_length", &Scenario::study_length)
      .def_readwrite("followup_interval", &Scenario::followup_interval)
      .def_readwrite("n_individuals", &Scenario::n_individuals)
      .def_readwrite("seed", &Scenario::seed);

  py::class_<PanelDataset>(m, "PanelDataset",
                           "Interval-censored panel observations for a fixed "
                           "state space 1..n_states; the last state is the "
                           "absorbing death state.")
      .def_property_readonly("n_individuals", &PanelDataset::n_individuals)
      .def_property_readonly("n_states", &PanelDataset::n_states)
      .def_property_readonly("n_observations", &PanelDataset::n_observations)
      .def_property_readonly("n_intervals", &PanelDataset::n_intervals)
      .def_property_readonly("covariate_names",
                             &PanelDataset::covariate_names)
      .def("pair_table", &PanelDataset::pair_table,
           "Counts of successive observed state pairs, n_states x n_states.")
      .def("pooled_times", &PanelDataset::pooled_times,
           "All observation times pooled across individuals.")
      .def("ids",
           [](const PanelDataset& data) {
             std::vector<std::string> out;
             out.reserve(data.individuals().size());
             for (const Individual& ind : data.individuals())
               out.push_back(ind.id);
             return out;
           })
      .def("individual",
           [](const PanelDataset& data, int i) {
             const auto& inds = data.individuals();
             if (i < 0 || i >= static_cast<int>(inds.size()))
               throw ValidationError("individual index out of range");
             const Individual& ind = inds[static_cast<std::size_t>(i)];
             py::dict out;
             out["id"] = ind.id;
             out["times"] = ind.times;
             out["states"] = ind.states;
             out["covariates"] = ind.covariates;
             out["death_exact"] = ind.death_exact;
             return out;
           },
           "i"_a)
      .def("to_csv",
           [](const PanelDataset& data, const std::string& path) {
             write_dataset_csv(path, data);
           },
           "path"_a,
           "Write the panel in the same id,time,state,<covariates> layout "
           "read_dataset reads.");

  py::class_<FitResult>(m, "Fit",
                        "A fitted model: estimates, covariance, smoothing "
                        "parameters, and prediction methods.  Created by "
                        "fit() or load_fit().")
      .def_readonly("theta", &FitResult::theta)
      .def_readonly("lambda_", &FitResult::lambda)
      .def_readonly("v_theta", &FitResult::v_theta)
      .def_readonly("edf_blocks", &FitResult::edf_blocks)
      .def_readonly("edf_total", &FitResult::edf_total)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("pen_loglik", &FitResult::pen_loglik)
      .def_readonly("ubre", &FitResult::ubre)
      .def_readonly("grid_width", &FitResult::grid_width)
      .def_property_readonly("param_names",
                             [](const FitResult& f) {
                               return f.model.param_names();
                             })
      .def_property_readonly("transitions",
                             [](const FitResult& f) {
                               std::vector<std::string> labels;
                               const auto& s = f.model.structure();
                               for (int ti = 0; ti < s.n_transitions(); ++ti)
                                 labels.push_back(s.transition_label(ti));
                               return labels;
                             })
      .def_property_readonly("n_states",
                             [](const FitResult& f) {
                               return f.model.structure().n_states();
                             })
      .def("knots",
           [](const FitResult& f,
              const std::string& label) -> std::optional<Eigen::VectorXd> {
             const auto [r, s] = parse_transition_label(label);
             const int ti = f.model.structure().transition_index(r, s);
             if (ti < 0)
               throw ValidationError("transition '" + label +
                                     "' is not in the model");
             if (!f.model.baseline(ti).is_spline()) return std::nullopt;
             return f.model.baseline(ti).basis().knots();
           },
           "transition"_a,
           "Spline knots of one transition's baseline, or None when that "
           "baseline is constant.")
      .def("trace",
           [](const FitResult& f) {
             py::list rows;
             for (const TraceRow& row : f.trace) {
               py::dict d;
               d["iteration"] = row.iteration;
               d["pen_loglik"] = row.pen_loglik;
               d["ubre"] = row.ubre;
               d["max_change"] = row.max_change;
               d["lambda_"] = row.lambda;
               rows.append(d);
             }
             return rows;
           })
      .def("transition_probabilities",
           [](const FitResult& f, double t0, double t1, const py::object& x,
              std::optional<double> grid_width) {
             return interval_prob(f.model, f.theta, t0, t1,
                                  covariates_arg(f.model, x), grid_width);
           },
           "t0"_a, "t1"_a, "x"_a = py::none(), "grid_width"_a = py::none(),
           "Point estimate of the transition probability matrix P(t0, t1).")
      .def("predict_probabilities",
           [](const FitResult& f, double t0, double t1, const py::object& x,
              int n_sims, double level, std::uint64_t seed) {
             return matrix_prediction_dict(predict_interval_probs(
                 f, t0, t1, covariates_arg(f.model, x), n_sims, level, seed));
           },
           "t0"_a, "t1"_a, "x"_a = py::none(), "n_sims"_a = 1000,
           "level"_a = 0.05, "seed"_a = 1,
           "P(t0, t1) with entrywise simulation intervals: dict with "
           "'point', 'lower', 'upper' matrices.")
      .def("hazard",
           [](const FitResult& f, const std::string& transition,
              const Eigen::VectorXd& grid, const py::object& x, int n_sims,
              double level, std::uint64_t seed) {
             const auto [r, s] = parse_transition_label(transition);
             const HazardCurve curve =
                 hazard_curve(f, r, s, grid, covariates_arg(f.model, x),
                              n_sims, level, seed);
             const auto n = static_cast<Eigen::Index>(curve.points.size());
             Eigen::VectorXd t(n), point(n), lower(n), upper(n);
             for (Eigen::Index i = 0; i < n; ++i) {
               t[i] = curve.points[static_cast<std::size_t>(i)].t;
               point[i] = curve.points[static_cast<std::size_t>(i)].point;
               lower[i] = curve.points[static_cast<std::size_t>(i)].lower;
               upper[i] = curve.points[static_cast<std::size_t>(i)].upper;
             }
             py::dict out;
             out["t"] = t;
             out["point"] = point;
             out["lower"] = lower;
             out["upper"] = upper;
             out["extrapolated"] = curve.extrapolated;
             return out;
           },
           "transition"_a, "grid"_a, "x"_a = py::none(), "n_sims"_a = 1000,
           "level"_a = 0.05, "seed"_a = 1,
           "Fitted hazard of one transition on a time grid with simulation "
           "bands.")
      .def("draw_params",
           [](const FitResult& f, int n, std::uint64_t seed) {
             return draw_params(f, n, seed);
           },
           "n"_a, "seed"_a = 1,
           "n parameter draws from the normal approximation, one row each.")
      .def("save",
           [](const FitResult& f, const std::string& path) {
             save_fit(path, f);
           },
           "path"_a, "Write the fit as a self-contained JSON document.");

  m.def("simulate", &simulate_dataset, "scenario"_a,
        "Panel data from the scenario's generating process.");

  m.def("true_transition_probabilities", &true_transition_probabilities,
        "scenario"_a, "t0"_a, "t1"_a, "n_paths"_a = 1000000, "seed"_a = 9001,
        "Monte-Carlo transition probability matrix of the generating "
        "process.");

  m.def("place_knots",
        [](const std::vector<double>& times, int n_knots) {
          return place_knots(times, n_knots);
        },
        "times"_a, "n_knots"_a,
        "Knots at evenly spaced quantiles of the distinct times.");

  m.def("read_dataset",
        [](const std::string& path, int n_states,
           const std::vector<std::string>& transitions,
           const std::vector<std::string>& covariates, bool exact_death,
           std::optional<double> max_time) {
          ModelConfig mc;
          const TransitionStructure structure =
              make_structure(n_states, transitions, covariates);
          mc.n_states = n_states;
          mc.transitions = structure.transitions();
          mc.covariates = covariates;
          mc.exact_death = exact_death;
          mc.max_time = max_time;
          mc.baselines.assign(static_cast<std::size_t>(
                                  structure.n_transitions()),
                              BaselineChoice{false, 0});
          auto [data, report] = ingest(path, mc);
          py::dict rep;
          rep["rows_read"] = report.rows_read;
          rep["rows_filtered"] = report.rows_filtered;
          rep["individuals"] = report.individuals;
          rep["dropped_ids"] = report.dropped_ids;
          rep["pair_table"] = report.pair_table;
          return py::make_tuple(std::move(data), std::move(rep));
        },
        "path"_a, "n_states"_a, "transitions"_a,
        "covariates"_a = std::vector<std::string>{}, "exact_death"_a = false,
        "max_time"_a = py::none(),
        "Read a panel CSV with columns id,time,state,<covariates>.  Returns "
        "(dataset, report) where the report carries row counts, dropped "
        "ids, and the observed pair table.");

  m.def("fit",
        [](const PanelDataset& data,
           const std::vector<std::string>& transitions,
           const py::object& knots, bool share_beta,
           std::optional<double> grid_width, double delta, int max_outer,
           int max_inner, double lambda_min, double lambda_max,
           bool penalized_covariance, std::optional<int> n_threads,
           bool trace) {
          ModelConfig mc;
          const TransitionStructure structure = make_structure(
              data.n_states(), transitions, data.covariate_names());
          mc.n_states = data.n_states();
          mc.transitions = structure.transitions();
          mc.covariates = data.covariate_names();
          mc.share_beta = share_beta;
          mc.baselines = baseline_choices(structure, knots);
          const Model model = mc.build_model(data.pooled_times());

          FitControls controls;
          controls.delta = delta;
          controls.max_outer = max_outer;
          controls.max_inner = max_inner;
          controls.lambda_min = lambda_min;
          controls.lambda_max = lambda_max;
          controls.penalized_covariance = penalized_covariance;
          controls.grid_width = grid_width;
          controls.n_threads = n_threads ? *n_threads : env_thread_count();
          controls.trace = trace;
          return fit(model, data, controls);
        },
        "data"_a, "transitions"_a, "knots"_a = 10, "share_beta"_a = false,
        "grid_width"_a = py::none(), "delta"_a = FitControls{}.delta,
        "max_outer"_a = FitControls{}.max_outer,
        "max_inner"_a = FitControls{}.max_inner,
        "lambda_min"_a = FitControls{}.lambda_min,
        "lambda_max"_a = FitControls{}.lambda_max,
        "penalized_covariance"_a = false, "n_threads"_a = py::none(),
        "trace"_a = false,
        "Fit the model by penalised scoring with automatic smoothing "
        "selection.  Spline knots are placed at quantiles of the pooled "
        "observation times.");

  m.def("load_fit", &load_fit, "path"_a,
        "Reload a fit saved by Fit.save().");

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
