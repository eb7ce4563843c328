#include "splinemsm/markovcore.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "splinemsm/errors.hpp"

namespace splinemsm {

namespace {

// Divided differences of z -> exp(z dt) at the eigenvalues: the kernel of the
// spectral derivative formula.  Near-equal eigenvalues take the confluent
// limit dt * exp(b_l dt), which also covers the diagonal.
Eigen::MatrixXcd divided_difference_kernel(const Eigen::VectorXcd& values,
                                           double dt) {
  const Eigen::Index D = values.size();
  Eigen::VectorXcd expvals(D);
  for (Eigen::Index l = 0; l < D; ++l)
    expvals[l] = std::exp(values[l] * dt);
  Eigen::MatrixXcd W(D, D);
  for (Eigen::Index l = 0; l < D; ++l) {
    for (Eigen::Index m = 0; m < D; ++m) {
      const double gap = std::abs(values[l] - values[m]);
      if (gap <= kEigenvalueGap * std::max(1.0, std::abs(values[l])))
        W(l, m) = dt * expvals[l];
      else
        W(l, m) = (expvals[l] - expvals[m]) / (values[l] - values[m]);
    }
  }
  return W;
}

double imag_residue(const Eigen::MatrixXcd& M) {
  return M.imag().cwiseAbs().maxCoeff();
}

// Clamp tiny negative probabilities; anything materially negative or a row
// sum off by more than the tolerance is a numerical failure.
void clamp_stochastic(Eigen::MatrixXd& P, const char* context) {
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double rowsum = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      double& e = P(i, j);
      if (e < 0.0) {
        if (e < -kProbTolerance) {
          std::ostringstream msg;
          msg << context << ": probability entry (" << i + 1 << "," << j + 1
              << ") = " << e << " below tolerance";
          throw NumericalError(msg.str());
        }
        e = 0.0;
      }
      rowsum += e;
    }
    if (std::abs(rowsum - 1.0) > kProbTolerance) {
      std::ostringstream msg;
      msg << context << ": row " << i + 1 << " sums to " << rowsum;
      throw NumericalError(msg.str());
    }
  }
}

bool nearly_stochastic(const Eigen::MatrixXd& P) {
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (P.row(i).minCoeff() < -kProbTolerance) return false;
    if (std::abs(P.row(i).sum() - 1.0) > kProbTolerance) return false;
  }
  return true;
}

void check_generator(const Eigen::MatrixXd& Q) {
  if (Q.rows() != Q.cols())
    throw ValidationError("transition_matrix: generator must be square");
  if (!Q.allFinite())
    throw ValidationError("transition_matrix: generator has non-finite entries");
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = 0; j < Q.cols(); ++j)
      if (i != j && Q(i, j) < -kProbTolerance * scale)
        throw ValidationError(
            "transition_matrix: negative off-diagonal intensity");
    if (std::abs(Q.row(i).sum()) > kProbTolerance * scale)
      throw ValidationError("transition_matrix: generator rows must sum to 0");
  }
}

// Spectral derivative for the rank-one generator perturbation
// E_rs = e_r (e_s - e_r)', shared workhorse of interval_prob_derivs.
// Returns nullopt when the imaginary residue is out of tolerance.
std::optional<Eigen::MatrixXd> rank_one_derivative(
    const GeneratorDecomposition& decomp, int r, int s,
    const Eigen::MatrixXcd& W, double /*dt*/) {
  const Eigen::VectorXcd col = decomp.inverse.col(r);
  const Eigen::RowVectorXcd row =
      decomp.vectors.row(s) - decomp.vectors.row(r);
  const Eigen::MatrixXcd G = col * row;
  const Eigen::MatrixXcd dP =
      decomp.vectors * G.cwiseProduct(W) * decomp.inverse;
  if (imag_residue(dP) > kProbTolerance) return std::nullopt;
  return dP.real();
}

}  // namespace

Eigen::MatrixXd build_generator(const Model& model,
                                const Eigen::VectorXd& theta, double t,
                                const Eigen::VectorXd& x) {
  const int D = model.structure().n_states();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(D, D);
  for (int ti = 0; ti < model.structure().n_transitions(); ++ti) {
    const auto& [r, s] = model.structure().transitions()[ti];
    const double q = model.hazard(theta, ti, t, x);
    if (!std::isfinite(q))
      throw NumericalError("build_generator: non-finite intensity for " +
                           model.structure().transition_label(ti));
    Q(r - 1, s - 1) = q;
    Q(r - 1, r - 1) -= q;
  }
  return Q;
}

Eigen::MatrixXd dQ_dtheta(const Model& model, const Eigen::VectorXd& theta,
                          double t, const Eigen::VectorXd& x, int k) {
  if (k < 0 || k >= model.n_params())
    throw ValidationError("dQ_dtheta: parameter index out of range");
  const int D = model.structure().n_states();
  const int p = model.n_covariates();
  Eigen::MatrixXd dQ = Eigen::MatrixXd::Zero(D, D);
  for (int ti = 0; ti < model.structure().n_transitions(); ++ti) {
    const int a_off = model.alpha_offset(ti);
    const int a_dim = model.alpha_dim(ti);
    double factor = 0.0;
    if (k >= a_off && k < a_off + a_dim) {
      factor = model.baseline(ti).design_row(t)[k - a_off];
    } else if (p > 0) {
      const int b_off = model.beta_offset(ti);
      if (k >= b_off && k < b_off + p) factor = x[k - b_off];
    }
    if (factor == 0.0) continue;
    const double c = factor * model.hazard(theta, ti, t, x);
    const auto& [r, s] = model.structure().transitions()[ti];
    dQ(r - 1, s - 1) += c;
    dQ(r - 1, r - 1) -= c;
  }
  return dQ;
}

GeneratorDecomposition decompose_generator(const Eigen::MatrixXd& Q) {
  GeneratorDecomposition out;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(Q);
  if (solver.info() != Eigen::Success) {
    out.condition = std::numeric_limits<double>::infinity();
    return out;
  }
  out.vectors = solver.eigenvectors();
  out.values = solver.eigenvalues();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(out.vectors);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  out.condition = (smin > 0.0) ? smax / smin
                               : std::numeric_limits<double>::infinity();
  if (!std::isfinite(out.condition) || out.condition > kEigenConditionLimit)
    return out;

  out.inverse = out.vectors.inverse();
  out.usable = true;
  return out;
}

std::optional<Eigen::MatrixXd> transition_matrix_spectral(
    const GeneratorDecomposition& decomp, double dt) {
  if (!decomp.usable) return std::nullopt;
  const Eigen::Index D = decomp.values.size();
  Eigen::VectorXcd expvals(D);
  for (Eigen::Index l = 0; l < D; ++l)
    expvals[l] = std::exp(decomp.values[l] * dt);
  const Eigen::MatrixXcd P =
      decomp.vectors * expvals.asDiagonal() * decomp.inverse;
  if (imag_residue(P) > kProbTolerance) return std::nullopt;
  Eigen::MatrixXd real = P.real();
  if (!nearly_stochastic(real)) return std::nullopt;
  return real;
}

Eigen::MatrixXd transition_matrix_pade(const Eigen::MatrixXd& Q, double dt) {
  return (dt * Q).exp();
}

Eigen::MatrixXd transition_matrix(const Eigen::MatrixXd& Q, double dt) {
  check_generator(Q);
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw ValidationError("transition_matrix: time increment must be >= 0");
  if (dt == 0.0)
    return Eigen::MatrixXd::Identity(Q.rows(), Q.cols());

  auto spectral = transition_matrix_spectral(decompose_generator(Q), dt);
  Eigen::MatrixXd P = spectral ? *spectral : transition_matrix_pade(Q, dt);
  clamp_stochastic(P, "transition_matrix");
  return P;
}

Eigen::MatrixXd dP_dtheta(const GeneratorDecomposition& decomp,
                          const Eigen::MatrixXd& dQ, double dt) {
  if (!decomp.usable)
    throw NumericalError(
        "dP_dtheta: eigendecomposition unusable; use finite differences");
  const Eigen::MatrixXcd W = divided_difference_kernel(decomp.values, dt);
  const Eigen::MatrixXcd G =
      decomp.inverse * dQ.cast<std::complex<double>>() * decomp.vectors;
  const Eigen::MatrixXcd dP =
      decomp.vectors * G.cwiseProduct(W) * decomp.inverse;
  if (imag_residue(dP) > kProbTolerance)
    throw NumericalError("dP_dtheta: imaginary residue above tolerance");
  return dP.real();
}

namespace {

struct Segmentation {
  std::vector<double> left;  // left endpoints
  double width = 0.0;
  int count = 0;
};

Segmentation segment_interval(double t0, double t1,
                              std::optional<double> grid_width) {
  if (!(std::isfinite(t0) && std::isfinite(t1)))
    throw ValidationError("interval_prob: non-finite interval endpoint");
  if (t1 < t0)
    throw ValidationError("interval_prob: interval end precedes start");
  Segmentation seg;
  if (t1 == t0) return seg;
  int m = 1;
  if (grid_width) {
    if (!(*grid_width > 0.0))
      throw ValidationError("interval_prob: grid width must be positive");
    m = static_cast<int>(std::ceil((t1 - t0) / *grid_width));
    m = std::max(m, 1);
  }
  seg.count = m;
  seg.width = (t1 - t0) / m;
  seg.left.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) seg.left[static_cast<std::size_t>(i)] = t0 + i * seg.width;
  return seg;
}

}  // namespace

Eigen::MatrixXd interval_prob(const Model& model, const Eigen::VectorXd& theta,
                              double t0, double t1, const Eigen::VectorXd& x,
                              std::optional<double> grid_width) {
  const int D = model.structure().n_states();
  const Segmentation seg = segment_interval(t0, t1, grid_width);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(D, D);
  for (int i = 0; i < seg.count; ++i) {
    const Eigen::MatrixXd Q =
        build_generator(model, theta, seg.left[static_cast<std::size_t>(i)], x);
    P = (P * transition_matrix(Q, seg.width)).eval();
  }
  if (seg.count > 1) clamp_stochastic(P, "interval_prob");
  return P;
}

IntervalDerivatives interval_prob_derivs(const Model& model,
                                         const Eigen::VectorXd& theta,
                                         double t0, double t1,
                                         const Eigen::VectorXd& x,
                                         std::optional<double> grid_width) {
  const int D = model.structure().n_states();
  const int q = model.n_params();
  const int nt = model.structure().n_transitions();
  const int p = model.n_covariates();
  const Segmentation seg = segment_interval(t0, t1, grid_width);

  IntervalDerivatives out;
  out.prob = Eigen::MatrixXd::Identity(D, D);
  out.dprob.assign(static_cast<std::size_t>(q), Eigen::MatrixXd::Zero(D, D));
  if (seg.count == 0) return out;

  const int m = seg.count;
  const double dt = seg.width;

  // First pass: per-piece transition matrices and, where the spectral path
  // holds, the rank-one derivative bases (one per transition).  Pieces whose
  // decomposition is unusable are differentiated by finite differences later.
  std::vector<Eigen::MatrixXd> piece(static_cast<std::size_t>(m));
  std::vector<std::vector<Eigen::MatrixXd>> bases(static_cast<std::size_t>(m));
  std::vector<bool> analytic(static_cast<std::size_t>(m), false);

  for (int i = 0; i < m; ++i) {
    const double tl = seg.left[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd Q = build_generator(model, theta, tl, x);
    const GeneratorDecomposition decomp = decompose_generator(Q);
    std::optional<Eigen::MatrixXd> P = transition_matrix_spectral(decomp, dt);
    bool ok = P.has_value();
    std::vector<Eigen::MatrixXd> base;
    if (ok) {
      const Eigen::MatrixXcd W = divided_difference_kernel(decomp.values, dt);
      base.reserve(static_cast<std::size_t>(nt));
      for (int ti = 0; ti < nt && ok; ++ti) {
        const auto& [r, s] = model.structure().transitions()[ti];
        auto b = rank_one_derivative(decomp, r - 1, s - 1, W, dt);
        if (b)
          base.push_back(std::move(*b));
        else
          ok = false;
      }
    }
    if (ok) {
      analytic[static_cast<std::size_t>(i)] = true;
      bases[static_cast<std::size_t>(i)] = std::move(base);
      Eigen::MatrixXd Pi = *P;
      clamp_stochastic(Pi, "interval_prob_derivs");
      piece[static_cast<std::size_t>(i)] = std::move(Pi);
    } else {
      Eigen::MatrixXd Pi = transition_matrix_pade(Q, dt);
      clamp_stochastic(Pi, "interval_prob_derivs");
      piece[static_cast<std::size_t>(i)] = std::move(Pi);
    }
  }

  // Prefix and suffix products around each piece for the product rule.
  std::vector<Eigen::MatrixXd> prefix(static_cast<std::size_t>(m));
  std::vector<Eigen::MatrixXd> suffix(static_cast<std::size_t>(m));
  prefix[0] = Eigen::MatrixXd::Identity(D, D);
  for (int i = 1; i < m; ++i)
    prefix[static_cast<std::size_t>(i)] =
        prefix[static_cast<std::size_t>(i - 1)] *
        piece[static_cast<std::size_t>(i - 1)];
  suffix[static_cast<std::size_t>(m - 1)] = Eigen::MatrixXd::Identity(D, D);
  for (int i = m - 2; i >= 0; --i)
    suffix[static_cast<std::size_t>(i)] =
        piece[static_cast<std::size_t>(i + 1)] *
        suffix[static_cast<std::size_t>(i + 1)];
  out.prob = prefix[static_cast<std::size_t>(m - 1)] *
             piece[static_cast<std::size_t>(m - 1)];

  for (int i = 0; i < m; ++i) {
    const double tl = seg.left[static_cast<std::size_t>(i)];
    const auto& pre = prefix[static_cast<std::size_t>(i)];
    const auto& suf = suffix[static_cast<std::size_t>(i)];
    if (analytic[static_cast<std::size_t>(i)]) {
      // Sandwich each transition's base once, then scale into the parameter
      // slots: an alpha coordinate j of transition ti contributes
      // q_ti(t) * basisrow_j(t), a beta coordinate q_ti(t) * x_m.
      for (int ti = 0; ti < nt; ++ti) {
        const Eigen::MatrixXd mid =
            pre * bases[static_cast<std::size_t>(i)][static_cast<std::size_t>(ti)] * suf;
        const double haz = model.hazard(theta, ti, tl, x);
        const Eigen::RowVectorXd row = model.baseline(ti).design_row(tl);
        const int a_off = model.alpha_offset(ti);
        for (int j = 0; j < model.alpha_dim(ti); ++j) {
          const double c = haz * row[j];
          if (c != 0.0)
            out.dprob[static_cast<std::size_t>(a_off + j)] += c * mid;
        }
        if (p > 0) {
          const int b_off = model.beta_offset(ti);
          for (int mm = 0; mm < p; ++mm) {
            const double c = haz * x[mm];
            if (c != 0.0)
              out.dprob[static_cast<std::size_t>(b_off + mm)] += c * mid;
          }
        }
      }
    } else {
      // Fallback: central finite differences of the full piece matrix.
      const double h = 1e-6;
      Eigen::VectorXd th = theta;
      for (int k = 0; k < q; ++k) {
        const double saved = th[k];
        th[k] = saved + h;
        const Eigen::MatrixXd Pp =
            transition_matrix(build_generator(model, th, tl, x), dt);
        th[k] = saved - h;
        const Eigen::MatrixXd Pm =
            transition_matrix(build_generator(model, th, tl, x), dt);
        th[k] = saved;
        out.dprob[static_cast<std::size_t>(k)] +=
            pre * ((Pp - Pm) / (2.0 * h)) * suf;
      }
    }
  }
  return out;
}

}  // namespace splinemsm
