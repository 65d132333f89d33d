#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "decegy/diagnostics.hpp"
#include "decegy/error.hpp"
#include "decegy/log.hpp"

namespace decegy {

/// Rows of (regressors, target) with optional column labels used in
/// diagnostics.
struct LinearSystem {
  Eigen::MatrixXd design;
  Eigen::VectorXd targets;
  std::vector<std::string> labels;
};

struct LinearFitOptions {
  bool nonneg = false;
  /// Relative pivot threshold of the column-pivoted QR on the
  /// column-normalized design; smaller pivots count as rank loss.
  double rank_tolerance = 1e-10;
};

template <typename Scalar>
struct LinearFit {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;
  FitDiagnostics diagnostics;
};

namespace detail {

inline std::string column_label(const std::vector<std::string>& labels, Eigen::Index j) {
  if (j < static_cast<Eigen::Index>(labels.size())) return labels[static_cast<std::size_t>(j)];
  return "column " + std::to_string(j);
}

/// Basic least-squares solution restricted to the columns flagged in
/// `active`; the other coefficients are zero.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_on_subset(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                                                         const std::vector<bool>& active, Scalar rank_tolerance) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (active[static_cast<std::size_t>(j)]) cols.push_back(j);
  Vector out = Vector::Zero(a.cols());
  if (cols.empty()) return out;
  Matrix sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  qr.setThreshold(rank_tolerance);
  const Vector s = qr.solve(b);
  for (std::size_t k = 0; k < cols.size(); ++k) out[cols[k]] = s[static_cast<Eigen::Index>(k)];
  return out;
}

/// Lawson-Hanson active-set non-negative least squares.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nnls(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                              const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, Scalar rank_tolerance,
                                              int& iterations) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = a.cols();
  const Scalar tol = Scalar(10) * std::numeric_limits<Scalar>::epsilon() *
                     a.cwiseAbs().colwise().sum().maxCoeff() * static_cast<Scalar>(std::max(a.rows(), n));
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Vector x = Vector::Zero(n);
  Vector w = a.transpose() * (b - a * x);
  const int max_outer = 3 * static_cast<int>(n) + 10;
  iterations = 0;

  while (iterations < max_outer) {
    Eigen::Index best = -1;
    Scalar best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    if (best < 0) break;
    ++iterations;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
      Vector s = solve_on_subset(a, b, passive, rank_tolerance);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= Scalar(0)) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      Scalar alpha = Scalar(1);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= Scalar(0)) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = Scalar(0);
        }
    }
    w = a.transpose() * (b - a * x);
  }
  return x;
}

}  // namespace detail

/// Least squares via column-pivoted Householder QR on a column-normalized
/// design. Columns the factorization cannot resolve get coefficient 0 and
/// a warning. With `opts.nonneg` the result is the Lawson-Hanson KKT point
/// of the non-negatively constrained problem.
template <typename DerivedA, typename DerivedB>
LinearFit<typename DerivedA::Scalar> fit_linear_ls(const Eigen::MatrixBase<DerivedA>& design,
                                                   const Eigen::MatrixBase<DerivedB>& targets,
                                                   const LinearFitOptions& opts = {},
                                                   const std::vector<std::string>& labels = {}) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  if (design.rows() == 0 || design.cols() == 0) throw NumericalError("empty linear system");
  if (design.rows() != targets.size())
    throw DataError("linear system: " + std::to_string(design.rows()) + " rows but " +
                    std::to_string(targets.size()) + " targets");
  if (!design.allFinite() || !targets.allFinite()) throw DataError("linear system contains non-finite values");

  Vector scale = design.cwiseAbs().colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (scale[j] == Scalar(0)) scale[j] = Scalar(1);
  const Matrix a = design * scale.cwiseInverse().asDiagonal();
  const Vector b = targets;

  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(Scalar(opts.rank_tolerance));

  LinearFit<Scalar> out;
  auto& diag = out.diagnostics;
  diag.rank = static_cast<long>(qr.rank());
  const auto& r = qr.matrixR();
  if (qr.rank() > 0) {
    using std::abs;
    diag.condition_estimate =
        static_cast<double>(abs(r(0, 0)) / abs(r(qr.rank() - 1, qr.rank() - 1)));
  }
  for (Eigen::Index k = qr.rank(); k < a.cols(); ++k)
    diag.dropped_columns.push_back(detail::column_label(labels, qr.colsPermutation().indices()[k]));
  if (!diag.dropped_columns.empty()) {
    std::string msg = "rank-deficient system (rank " + std::to_string(qr.rank()) + " of " +
                      std::to_string(a.cols()) + "); collinear columns pinned to 0:";
    for (const auto& c : diag.dropped_columns) msg += " " + c;
    diag.warnings.push_back(msg);
    log::warn(msg);
  }

  Vector z;
  if (opts.nonneg) {
    diag.method = "nnls-active-set";
    z = detail::nnls<Scalar>(a, b, Scalar(opts.rank_tolerance), diag.iterations);
    for (Eigen::Index j = 0; j < z.size(); ++j)
      if (z[j] == Scalar(0)) diag.clamped_columns.push_back(detail::column_label(labels, j));
  } else {
    diag.method = "qr-column-pivoting";
    z = qr.solve(b);
    diag.iterations = 1;
  }
  diag.termination = "solved";

  const Vector resid = b - a * z;
  diag.residual_norm = static_cast<double>(resid.norm());
  {
    // Projected gradient of 0.5*|r|^2, scaled by |A|*|b|.
    const Vector w = a.transpose() * resid;
    Scalar worst(0);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const Scalar v = (opts.nonneg && z[j] == Scalar(0)) ? std::max(w[j], Scalar(0)) : std::abs(w[j]);
      worst = std::max(worst, v);
    }
    const Scalar denom = a.norm() * std::max(b.norm(), std::numeric_limits<Scalar>::min());
    diag.kkt_violation = static_cast<double>(worst / denom);
  }

  out.coefficients = z.cwiseQuotient(scale);
  return out;
}

inline LinearFit<double> fit_linear_ls(const LinearSystem& sys, bool nonneg = false) {
  LinearFitOptions opts;
  opts.nonneg = nonneg;
  return fit_linear_ls(sys.design, sys.targets, opts, sys.labels);
}

}  // namespace decegy
