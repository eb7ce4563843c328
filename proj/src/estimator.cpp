#include "splinemsm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include "splinemsm/errors.hpp"

namespace splinemsm {

namespace {

constexpr double kEigFloorRel = 1e-10;

std::string theta_snapshot(const Eigen::VectorXd& theta) {
  std::ostringstream out;
  out << "theta = [";
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (i > 0) out << ", ";
    out << theta[i];
  }
  out << "]";
  return out.str();
}

// Eigenvalue-floored inverse of a symmetric PSD matrix.
Eigen::MatrixXd floored_inverse(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      (M + M.transpose()) / 2.0);
  if (eig.info() != Eigen::Success)
    throw NumericalError("floored_inverse: eigendecomposition failed");
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (!(max_eig > 0.0))
    throw NumericalError("floored_inverse: matrix has no positive eigenvalue");
  const double floor = max_eig * kEigFloorRel;
  Eigen::VectorXd inv = eig.eigenvalues().cwiseMax(floor).cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

void print_trace(const TraceRow& row) {
  std::ostringstream out;
  out << "trace," << row.iteration << "," << row.pen_loglik << "," << row.ubre
      << "," << row.max_change;
  for (Eigen::Index b = 0; b < row.lambda.size(); ++b)
    out << "," << row.lambda[b];
  std::cerr << out.str() << "\n";
}

}  // namespace

Eigen::MatrixXd WorkingQuantities::influence(
    const Eigen::MatrixXd& S_lambda) const {
  const Eigen::MatrixXd H = I_fisher + S_lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("influence: M + S_lambda is not invertible");
  Eigen::MatrixXd A = sqrt_I * ldlt.solve(sqrt_I);
  return (A + A.transpose()) / 2.0;
}

WorkingQuantities make_working(const Eigen::VectorXd& g,
                               const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& theta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((M + M.transpose()) / 2.0);
  if (eig.info() != Eigen::Success)
    throw NumericalError("make_working: eigendecomposition of M failed; " +
                         theta_snapshot(theta));
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (!(max_eig > 0.0))
    throw NumericalError(
        "make_working: Fisher approximation has no positive eigenvalue; " +
        theta_snapshot(theta));

  const double floor = max_eig * kEigFloorRel;
  const Eigen::VectorXd d = eig.eigenvalues().cwiseMax(floor);
  const Eigen::MatrixXd& U = eig.eigenvectors();

  WorkingQuantities w;
  w.g = g;
  w.I_fisher = U * d.asDiagonal() * U.transpose();
  w.sqrt_I = U * d.cwiseSqrt().asDiagonal() * U.transpose();
  w.sqrt_I_inv = U * d.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose();
  w.eps = w.sqrt_I_inv * w.g;
  w.z = w.sqrt_I * theta + w.eps;
  return w;
}

WorkingQuantities working_quantities(const Model& model,
                                     const Eigen::VectorXd& theta,
                                     const PanelDataset& data,
                                     const EvalOptions& opts) {
  LikelihoodParts parts;
  try {
    parts = likelihood_parts(model, theta, data, opts);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + "; " +
                         theta_snapshot(theta));
  }
  WorkingQuantities w = make_working(parts.score, parts.fisher, theta);
  w.loglik = parts.loglik;
  return w;
}

StepResult scoring_step(const Model& model, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& lambda, const PanelDataset& data,
                        const FitControls& controls) {
  const EvalOptions opts = controls.eval_options();
  const Eigen::MatrixXd S = model.penalty_matrix(lambda);

  StepResult step;
  step.working = working_quantities(model, theta, data, opts);
  const double pen_here =
      step.working.loglik - 0.5 * theta.dot(S * theta);

  // theta' = (M + S)^-1 (M theta + g); sqrt(M) z reduces to M theta + g
  // because the floored square root and its inverse cancel exactly.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(step.working.I_fisher + S);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("scoring_step: M + S_lambda not invertible; " +
                         theta_snapshot(theta));
  const Eigen::VectorXd proposal =
      ldlt.solve(step.working.I_fisher * theta + step.working.g);
  if (!proposal.allFinite())
    throw NumericalError("scoring_step: non-finite update; " +
                         theta_snapshot(theta));

  const Eigen::VectorXd direction = proposal - theta;
  Eigen::VectorXd candidate = proposal;
  for (int h = 0; h <= controls.max_halvings; ++h) {
    if (h > 0) candidate = theta + direction / std::pow(2.0, h);
    // A candidate whose hazards overflow (or whose interval probabilities
    // underflow to -inf) is a rejected step like any other; only the current
    // theta has to be evaluable.
    double pen_cand = -std::numeric_limits<double>::infinity();
    try {
      pen_cand = loglik(model, candidate, data, opts) -
                 0.5 * candidate.dot(S * candidate);
    } catch (const NumericalError&) {
    }
    if (std::isfinite(pen_cand) && pen_cand >= pen_here) {
      step.theta = candidate;
      step.pen_loglik = pen_cand;
      return step;
    }
  }
  step.theta = theta;
  step.pen_loglik = pen_here;
  step.stalled = true;
  return step;
}

InnerResult fit_theta(const Model& model, const Eigen::VectorXd& lambda,
                      const Eigen::VectorXd& theta0, const PanelDataset& data,
                      const FitControls& controls) {
  InnerResult res;
  res.theta = theta0;
  for (int it = 1; it <= controls.max_inner; ++it) {
    StepResult step = scoring_step(model, res.theta, lambda, data, controls);
    const double change =
        (step.theta - res.theta).cwiseAbs().maxCoeff();
    res.theta = step.theta;
    res.pen_loglik = step.pen_loglik;
    res.iterations = it;
    if (step.stalled || change < controls.delta) {
      // A stalled step cannot improve the objective any further, which is as
      // converged as finite precision allows.
      res.converged = true;
      return res;
    }
  }
  return res;
}

double ubre_value(const WorkingQuantities& working,
                  const Eigen::MatrixXd& S_lambda) {
  const Eigen::MatrixXd A = working.influence(S_lambda);
  const Eigen::VectorXd resid = working.z - A * working.z;
  const double q = static_cast<double>(working.z.size());
  return resid.squaredNorm() - q + 2.0 * A.trace();
}

double ubre(const Model& model, const WorkingQuantities& working,
            const Eigen::VectorXd& lambda) {
  return ubre_value(working, model.penalty_matrix(lambda));
}

namespace {

// Minimal Nelder-Mead on R^n with standard coefficients; returns the best
// vertex ever evaluated, so the result never exceeds f at the start point.
struct Simplex {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> f;
};

Eigen::VectorXd nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, double step, int max_iter) {
  const int n = static_cast<int>(x0.size());
  Simplex s;
  s.x.reserve(static_cast<std::size_t>(n + 1));
  s.x.push_back(x0);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = x0;
    v[i] += step;
    s.x.push_back(v);
  }
  s.f.resize(static_cast<std::size_t>(n + 1));
  for (std::size_t i = 0; i < s.x.size(); ++i) s.f[i] = f(s.x[i]);

  Eigen::VectorXd best_x = s.x[0];
  double best_f = s.f[0];
  auto remember = [&](const Eigen::VectorXd& x, double fx) {
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  };
  for (std::size_t i = 0; i < s.x.size(); ++i) remember(s.x[i], s.f[i]);

  std::vector<std::size_t> order(s.x.size());
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
    const std::size_t lo = order.front(), hi = order.back();
    const std::size_t second_hi = order[order.size() - 2];

    if (std::abs(s.f[hi] - s.f[lo]) <=
        1e-10 * (1.0 + std::abs(s.f[lo])))
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (i != hi) centroid += s.x[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - s.x[hi]);
    const double f_r = f(reflected);
    remember(reflected, f_r);

    if (f_r < s.f[lo]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - s.x[hi]);
      const double f_e = f(expanded);
      remember(expanded, f_e);
      if (f_e < f_r) {
        s.x[hi] = expanded;
        s.f[hi] = f_e;
      } else {
        s.x[hi] = reflected;
        s.f[hi] = f_r;
      }
    } else if (f_r < s.f[second_hi]) {
      s.x[hi] = reflected;
      s.f[hi] = f_r;
    } else {
      const Eigen::VectorXd contracted =
          centroid + 0.5 * (s.x[hi] - centroid);
      const double f_c = f(contracted);
      remember(contracted, f_c);
      if (f_c < s.f[hi]) {
        s.x[hi] = contracted;
        s.f[hi] = f_c;
      } else {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (i == lo) continue;
          s.x[i] = s.x[lo] + 0.5 * (s.x[i] - s.x[lo]);
          s.f[i] = f(s.x[i]);
          remember(s.x[i], s.f[i]);
        }
      }
    }
  }
  return best_x;
}

}  // namespace

LambdaResult optimize_lambda(const Model& model,
                             const WorkingQuantities& working,
                             const Eigen::VectorXd& lambda_init,
                             const FitControls& controls) {
  LambdaResult out;
  out.lambda = lambda_init;
  if (lambda_init.size() == 0) return out;

  const double lo = std::log(controls.lambda_min);
  const double hi = std::log(controls.lambda_max);
  auto clamp_rho = [&](const Eigen::VectorXd& rho) {
    return rho.cwiseMax(lo).cwiseMin(hi).eval();
  };
  auto objective = [&](const Eigen::VectorXd& rho) {
    const double v =
        ubre(model, working, clamp_rho(rho).array().exp().matrix());
    if (!std::isfinite(v))
      throw NumericalError("optimize_lambda: non-finite UBRE value");
    return v;
  };

  Eigen::VectorXd rho0 =
      clamp_rho(lambda_init.array().max(controls.lambda_min).log().matrix());
  try {
    const Eigen::VectorXd best =
        nelder_mead(objective, rho0, 1.0, controls.nm_max_iter);
    // Clamp again in lambda space: exp(log(bound)) can land one ulp outside.
    out.lambda = clamp_rho(best)
                     .array()
                     .exp()
                     .max(controls.lambda_min)
                     .min(controls.lambda_max)
                     .matrix();
  } catch (const std::exception&) {
    out.warned = true;  // keep the previous lambda
  }
  return out;
}

Eigen::VectorXd initial_theta(const Model& model, const PanelDataset& data) {
  const Eigen::MatrixXi pairs = data.pair_table();

  // Time at risk per source state, approximated by summing interval lengths
  // that start in that state.
  Eigen::VectorXd exposure = Eigen::VectorXd::Zero(data.n_states());
  double total_time = 0.0;
  for (const auto& ind : data.individuals()) {
    for (std::size_t j = 1; j < ind.times.size(); ++j) {
      const double dt = ind.times[j] - ind.times[j - 1];
      exposure[ind.states[j - 1] - 1] += dt;
      total_time += dt;
    }
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(model.n_params());
  for (int ti = 0; ti < model.structure().n_transitions(); ++ti) {
    const auto& [r, s] = model.structure().transitions()[ti];
    double count = static_cast<double>(pairs(r - 1, s - 1));
    if (count == 0.0) count = 0.5;
    double at_risk = exposure[r - 1];
    if (!(at_risk > 0.0)) at_risk = std::max(total_time, 1.0);
    const double log_rate = std::log(count / at_risk);
    theta.segment(model.alpha_offset(ti), model.alpha_dim(ti))
        .setConstant(log_rate);
  }
  return theta;
}

FitResult fit(const Model& model, const PanelDataset& data,
              const FitControls& controls) {
  const EvalOptions opts = controls.eval_options();
  const int n_blocks = static_cast<int>(model.spline_transitions().size());

  Eigen::VectorXd theta = initial_theta(model, data);
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(n_blocks);

  FitResult res{.model = model,
                .theta = theta,
                .lambda = lambda,
                .v_theta = Eigen::MatrixXd(),
                .edf_blocks = Eigen::VectorXd::Zero(n_blocks),
                .grid_width = controls.grid_width};

  // Each outer iteration picks lambda by UBRE at the current estimate and
  // then refits theta at that lambda, so on exit theta is the penalised
  // optimum at the reported lambda and the diagnostics below are coherent.
  for (int outer = 1; outer <= controls.max_outer; ++outer) {
    const WorkingQuantities w_here =
        working_quantities(model, theta, data, opts);
    if (n_blocks > 0) {
      const LambdaResult lres = optimize_lambda(model, w_here, lambda, controls);
      lambda = lres.lambda;
      if (lres.warned && controls.trace)
        std::cerr << "trace,warning,lambda optimiser failed; keeping previous"
                  << "\n";
    }

    const InnerResult inner = fit_theta(model, lambda, theta, data, controls);
    const double change = (inner.theta - theta).cwiseAbs().maxCoeff();
    theta = inner.theta;

    TraceRow row{outer, inner.pen_loglik, ubre(model, w_here, lambda), change,
                 lambda};
    if (controls.trace) print_trace(row);
    res.trace.push_back(std::move(row));
    res.iterations = outer;

    if (change < controls.delta) {
      res.converged = true;
      break;
    }
  }

  res.theta = theta;
  res.lambda = lambda;
  const WorkingQuantities w = working_quantities(model, theta, data, opts);

  const Eigen::MatrixXd S = model.penalty_matrix(lambda);
  res.loglik = w.loglik;
  res.pen_loglik = w.loglik - 0.5 * theta.dot(S * theta);
  res.ubre = ubre(model, w, lambda);
  res.v_theta = controls.penalized_covariance
                    ? floored_inverse(w.I_fisher + S)
                    : floored_inverse(w.I_fisher);

  const Eigen::MatrixXd A = w.influence(S);
  res.edf_total = A.trace();
  for (int b = 0; b < n_blocks; ++b) {
    const int ti = model.spline_transitions()[static_cast<std::size_t>(b)];
    res.edf_blocks[b] = A.diagonal()
                            .segment(model.alpha_offset(ti), model.alpha_dim(ti))
                            .sum();
  }
  return res;
}

}  // namespace splinemsm
