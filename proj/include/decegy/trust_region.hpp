#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "decegy/error.hpp"

namespace decegy {

struct TrustRegionOptions {
  int max_iterations = 200;
  /// Stop when every gradient component, as the cosine between the
  /// residual and the matching Jacobian column, is below this.
  double gradient_tolerance = 1e-10;
  /// Stop when the Gauss-Newton step is this small relative to |D x|.
  double step_tolerance = 1e-12;
  /// Initial radius as a multiple of max(|D x0|, 1).
  double initial_radius = 1.0;
  /// Stop when an unrestricted Gauss-Newton step changes the objective,
  /// both predicted and actual, by less than this fraction.
  double function_tolerance = 1e-14;
};

enum class Termination { gradient, step, function, zero_residual, max_iterations, radius_collapse };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::gradient: return "gradient_tolerance";
    case Termination::step: return "step_tolerance";
    case Termination::function: return "function_tolerance";
    case Termination::zero_residual: return "zero_residual";
    case Termination::max_iterations: return "max_iterations";
    case Termination::radius_collapse: return "radius_collapse";
  }
  return "";
}

template <typename Scalar>
struct TrustRegionResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;  // best point seen
  Scalar cost{0};                              // 0.5 * |r(x)|^2
  int iterations = 0;
  int evaluations = 0;
  Termination termination = Termination::max_iterations;
  /// Objective after the start point and after each accepted step.
  std::vector<Scalar> accepted_costs;

  bool converged() const {
    return termination == Termination::gradient || termination == Termination::step ||
           termination == Termination::function || termination == Termination::zero_residual;
  }
};

/// Minimizes 0.5*|r(x)|^2 with dogleg steps on the Gauss-Newton model inside
/// an adaptive trust region. Variables are scaled by the running maximum of
/// the Jacobian column norms. Deterministic; returns the best point seen.
///
/// `residual_fn(x)` returns the residual vector, `jacobian_fn(x)` its
/// Jacobian (rows = residuals, cols = parameters).
template <typename Scalar, typename ResidualFn, typename JacobianFn>
TrustRegionResult<Scalar> fit_trust_region(ResidualFn&& residual_fn, JacobianFn&& jacobian_fn,
                                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x0,
                                           const TrustRegionOptions& opts = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using std::abs;
  using std::sqrt;

  if (opts.max_iterations <= 0 || !(opts.gradient_tolerance > 0) || !(opts.step_tolerance > 0) ||
      !(opts.initial_radius > 0) || !(opts.function_tolerance > 0))
    throw std::invalid_argument("trust-region options must be positive");

  TrustRegionResult<Scalar> out;
  Vector x = x0;
  Vector r = residual_fn(x);
  ++out.evaluations;
  if (!r.allFinite()) throw NumericalError("residuals are not finite at the starting point");
  Scalar cost = Scalar(0.5) * r.squaredNorm();
  const Scalar initial_cost = cost;
  Matrix jac = jacobian_fn(x);
  if (!jac.allFinite()) throw NumericalError("Jacobian is not finite at the starting point");

  Vector diag = jac.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < diag.size(); ++j)
    if (diag[j] == Scalar(0)) diag[j] = Scalar(1);
  const Scalar xtol(opts.step_tolerance);
  Scalar radius = Scalar(opts.initial_radius) * std::max(diag.cwiseProduct(x).norm(), Scalar(1));

  out.accepted_costs.push_back(cost);
  out.x = x;
  out.cost = cost;

  auto tiny_cost = [&](Scalar c) {
    return c == Scalar(0) || c <= Scalar(1e-30) * initial_cost;
  };

  for (int iter = 1;; ++iter) {
    if (tiny_cost(cost)) {
      out.termination = Termination::zero_residual;
      break;
    }
    if (iter > opts.max_iterations) {
      out.termination = Termination::max_iterations;
      break;
    }
    out.iterations = iter;

    const Vector grad = jac.transpose() * r;
    {
      const Scalar rnorm = r.norm();
      Scalar worst(0);
      for (Eigen::Index j = 0; j < grad.size(); ++j) {
        const Scalar cn = jac.col(j).norm();
        if (cn > Scalar(0)) worst = std::max(worst, abs(grad[j]) / (cn * rnorm));
      }
      if (worst <= Scalar(opts.gradient_tolerance)) {
        out.termination = Termination::gradient;
        break;
      }
    }

    // Everything below lives in scaled coordinates z = D p.
    const Matrix js = jac * diag.cwiseInverse().asDiagonal();
    const Vector gs = grad.cwiseQuotient(diag);
    Eigen::ColPivHouseholderQR<Matrix> qr(js);
    const Vector z_gn = -qr.solve(r);
    const Scalar gn_norm = z_gn.norm();
    const Scalar dx_norm = diag.cwiseProduct(x).norm();

    if (z_gn.allFinite() && gn_norm <= xtol * (dx_norm + xtol)) {
      out.termination = Termination::step;
      break;
    }

    Vector z;
    const bool full_step = z_gn.allFinite() && gn_norm <= radius;
    if (full_step) {
      z = z_gn;
    } else {
      const Scalar gs_sq = gs.squaredNorm();
      const Scalar curvature = (js * gs).squaredNorm();
      const Vector z_sd = curvature > Scalar(0) ? Vector(-(gs_sq / curvature) * gs) : Vector(-gs);
      const Scalar sd_norm = z_sd.norm();
      if (sd_norm >= radius || !z_gn.allFinite()) {
        z = -(radius / sqrt(gs_sq)) * gs;
      } else {
        // Point on the dogleg path z_sd + tau (z_gn - z_sd) with |z| = radius.
        const Vector d = z_gn - z_sd;
        const Scalar a = d.squaredNorm();
        const Scalar b = Scalar(2) * z_sd.dot(d);
        const Scalar c = z_sd.squaredNorm() - radius * radius;
        const Scalar tau = (-b + sqrt(b * b - Scalar(4) * a * c)) / (Scalar(2) * a);
        z = z_sd + tau * d;
      }
    }
    const Scalar z_norm = z.norm();
    const Vector step = z.cwiseQuotient(diag);
    const Vector x_new = x + step;
    const Vector r_new = residual_fn(x_new);
    ++out.evaluations;

    const Vector jp = jac * step;
    const Scalar predicted = -(grad.dot(step) + Scalar(0.5) * jp.squaredNorm());
    Scalar rho = Scalar(-1);
    Scalar cost_new = std::numeric_limits<Scalar>::infinity();
    if (r_new.allFinite()) {
      cost_new = Scalar(0.5) * r_new.squaredNorm();
      if (predicted > Scalar(0)) rho = (cost - cost_new) / predicted;
    }

    if (full_step && r_new.allFinite()) {
      const Scalar ftol = Scalar(opts.function_tolerance) * cost;
      if (predicted <= ftol && abs(cost - cost_new) <= ftol) {
        if (cost_new < cost) {
          out.x = x_new;
          out.cost = cost_new;
          out.accepted_costs.push_back(cost_new);
        }
        out.termination = Termination::function;
        break;
      }
    }

    if (rho < Scalar(0.25)) {
      radius = Scalar(0.25) * z_norm;
    } else if (rho > Scalar(0.75) && z_norm >= Scalar(0.99) * radius) {
      radius = Scalar(2) * radius;
    }

    if (rho > Scalar(1e-4) && cost_new < cost) {
      x = x_new;
      r = r_new;
      cost = cost_new;
      jac = jacobian_fn(x);
      if (!jac.allFinite()) throw NumericalError("Jacobian became non-finite");
      diag = diag.cwiseMax(jac.colwise().norm().transpose());
      out.accepted_costs.push_back(cost);
      out.x = x;
      out.cost = cost;
    } else if (radius <= xtol * (dx_norm + xtol)) {
      out.termination = Termination::radius_collapse;
      break;
    }
  }
  return out;
}

}  // namespace decegy
