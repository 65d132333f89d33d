#include "decegy/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace decegy {

nlohmann::json to_json(const FitDiagnostics& d) {
  return {{"method", d.method},
          {"iterations", d.iterations},
          {"termination", d.termination},
          {"converged", d.converged},
          {"residual_norm", d.residual_norm},
          {"condition_estimate", d.condition_estimate},
          {"rank", d.rank},
          {"dropped_columns", d.dropped_columns},
          {"clamped_columns", d.clamped_columns},
          {"kkt_violation", d.kkt_violation},
          {"warnings", d.warnings}};
}

Eigen::MatrixXd feature_design(std::span<const FeatureVector> features) {
  if (features.empty()) return {};
  const Codec codec = features.front().codec;
  const auto cols = static_cast<Eigen::Index>(feature_set(codec).size());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(features.size()), cols);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].codec != codec || features[i].counts.size() != cols)
      throw DataError("feature vectors of mixed codecs cannot share one design matrix");
    a.row(static_cast<Eigen::Index>(i)) = features[i].counts.transpose();
  }
  return a;
}

FeatureFit fit_feature_model(std::span<const FeatureVector> features, const Eigen::VectorXd& energies, bool nonneg) {
  if (features.empty()) throw NumericalError("cannot fit the feature model without records");
  const Codec codec = features.front().codec;
  const auto& fs = feature_set(codec);
  const Eigen::MatrixXd a = feature_design(features);
  if (a.rows() < a.cols()) {
    log::warn("feature model: " + std::to_string(a.rows()) + " records for " + std::to_string(a.cols()) +
              " specific energies; the fit is under-determined");
  }
  LinearFitOptions opts;
  opts.nonneg = nonneg;
  auto fit = fit_linear_ls(a, energies, opts, fs.names());
  return {SpecificEnergies{codec, std::move(fit.coefficients)}, std::move(fit.diagnostics)};
}

Residuals hl1_residuals_jacobian(const HL1Params& p, std::span<const HighLevelInfo> info,
                                 const Eigen::VectorXd& energies) {
  if (info.empty()) throw NumericalError("HL1 residuals need at least one record");
  if (static_cast<Eigen::Index>(info.size()) != energies.size())
    throw DataError("HL1 residuals: record and energy counts differ");
  const auto m = static_cast<Eigen::Index>(info.size());
  Residuals out{Eigen::VectorXd(m), Eigen::MatrixXd(m, 4)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& h = info[static_cast<std::size_t>(i)];
    const double pixels = h.pixel_count();
    const double x = h.bytes_per_pixel();
    if (!(x > 0)) throw DataError("HL1 residuals: B/(S*N) must be positive");
    const double xg = std::pow(x, p.rate_exponent);
    out.residuals[i] = p.offset + pixels * (p.per_pixel + p.rate_scale * xg) - energies[i];
    out.jacobian(i, 0) = 1.0;
    out.jacobian(i, 1) = pixels;
    out.jacobian(i, 2) = pixels * xg;
    out.jacobian(i, 3) = pixels * p.rate_scale * xg * std::log(x);
  }
  return out;
}

namespace {

// HL1 in dimensionless units: e = E/E_s, u = S*N/P_s, y = x/X_s with
// theta = (c, a, b, g) and e_hat = c + u*a + u*exp(b)*y^exp(g).
struct Hl1Problem {
  Eigen::VectorXd e, u, y, log_y;
  double energy_scale = 1, pixel_scale = 1, rate_scale = 1;

  Eigen::VectorXd residuals(const Eigen::VectorXd& t) const {
    const double gamma = std::exp(t[3]);
    return (t[0] + u.array() * (t[1] + std::exp(t[2]) * (gamma * log_y.array()).exp()) - e.array()).matrix();
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& t) const {
    const double gamma = std::exp(t[3]);
    const Eigen::ArrayXd power = u.array() * std::exp(t[2]) * (gamma * log_y.array()).exp();
    Eigen::MatrixXd j(e.size(), 4);
    j.col(0).setOnes();
    j.col(1) = u;
    j.col(2) = power.matrix();
    j.col(3) = (power * log_y.array() * gamma).matrix();
    return j;
  }

  HL1Params to_params(const Eigen::VectorXd& t) const {
    const double gamma = std::exp(t[3]);
    return {t[0] * energy_scale, t[1] * energy_scale / pixel_scale,
            std::exp(t[2]) * energy_scale / (pixel_scale * std::pow(rate_scale, gamma)), gamma};
  }
};

}  // namespace

Hl1Fit fit_hl1(std::span<const HighLevelInfo> info, const Eigen::VectorXd& energies, const TrustRegionOptions& opts) {
  const auto m = static_cast<Eigen::Index>(info.size());
  if (m != energies.size()) throw DataError("HL1 fit: record and energy counts differ");
  std::set<double> distinct;
  for (const auto& h : info) {
    check_high_level(h);
    distinct.insert(h.bytes_per_pixel());
  }
  if (m < 4 || distinct.size() < 2)
    throw NumericalError("HL1 fit is under-determined: needs >= 4 records with >= 2 distinct B/(S*N), got " +
                         std::to_string(m) + " records");
  if (!energies.allFinite() || (energies.array() <= 0).any())
    throw DataError("HL1 fit: energies must be positive and finite");

  Hl1Problem prob;
  prob.energy_scale = energies.mean();
  Eigen::VectorXd pixels(m), log_x(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    pixels[i] = info[static_cast<std::size_t>(i)].pixel_count();
    log_x[i] = std::log(info[static_cast<std::size_t>(i)].bytes_per_pixel());
  }
  prob.pixel_scale = pixels.mean();
  prob.rate_scale = std::exp(log_x.mean());
  prob.e = energies / prob.energy_scale;
  prob.u = pixels / prob.pixel_scale;
  prob.log_y = log_x.array() - log_x.mean();
  prob.y = prob.log_y.array().exp();

  // Start: C = min(E); alpha and beta from the linear fit at gamma = 1.
  const double c0 = prob.e.minCoeff();
  Eigen::MatrixXd lin(m, 2);
  lin.col(0) = prob.u;
  lin.col(1) = prob.u.cwiseProduct(prob.y);
  const auto pre = fit_linear_ls(lin, (prob.e.array() - c0).matrix());
  const double a0 = pre.coefficients[0];
  const double b0 = pre.coefficients[1] > 0 ? pre.coefficients[1] : 1e-2 * std::max(std::abs(a0), 1e-3);

  Hl1Fit best;
  double best_cost = std::numeric_limits<double>::infinity();
  TrustRegionResult<double> best_run;
  for (double gamma0 : {0.5, 1.0, 1.5}) {
    Eigen::VectorXd t0(4);
    t0 << c0, a0, std::log(b0), std::log(gamma0);
    auto run = fit_trust_region<double>([&](const Eigen::VectorXd& t) { return prob.residuals(t); },
                                        [&](const Eigen::VectorXd& t) { return prob.jacobian(t); }, t0, opts);
    if (run.cost < best_cost) {
      best_cost = run.cost;
      best.start_exponent = gamma0;
      best_run = std::move(run);
    }
  }

  best.params = prob.to_params(best_run.x);
  auto& d = best.diagnostics;
  d.method = "trust-region-dogleg";
  d.iterations = best_run.iterations;
  d.termination = std::string(to_string(best_run.termination));
  d.converged = best_run.converged();
  d.residual_norm = std::sqrt(2.0 * best_run.cost) * prob.energy_scale;
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(prob.jacobian(best_run.x));
    const auto& r = qr.matrixR();
    const double lo = std::abs(r(3, 3));
    d.condition_estimate = lo > 0 ? std::abs(r(0, 0)) / lo : std::numeric_limits<double>::infinity();
    d.rank = static_cast<long>(qr.rank());
  }
  if (!d.converged) d.warnings.push_back("HL1 trust region stopped on " + d.termination);

  // The exponent only matters when the rate term carries measurable energy.
  const Eigen::VectorXd rate_term = prob.u.array() * std::exp(best_run.x[2]) *
                                    (std::exp(best_run.x[3]) * prob.log_y.array()).exp();
  if ((rate_term.array() / prob.e.array()).maxCoeff() < 1e-6) {
    best.exponent_identifiable = false;
    d.warnings.push_back("HL1 rate term is negligible (beta ~ 0); gamma is not identifiable");
    log::warn(d.warnings.back());
  }
  return best;
}

Hl2Fit fit_hl2(std::span<const HighLevelInfo> info, const Eigen::VectorXd& energies) {
  const auto m = static_cast<Eigen::Index>(info.size());
  if (m != energies.size()) throw DataError("HL2 fit: record and energy counts differ");
  if (m < 4) throw NumericalError("HL2 fit is under-determined: needs >= 4 records, got " + std::to_string(m));
  Eigen::MatrixXd a(m, 4);
  for (Eigen::Index i = 0; i < m; ++i) {
    check_high_level(info[static_cast<std::size_t>(i)]);
    a.row(i) = hl2_regressors(info[static_cast<std::size_t>(i)]).transpose();
  }
  auto fit = fit_linear_ls(a, energies, LinearFitOptions{}, {"c1", "c2", "c3", "c4"});
  Hl2Fit out;
  out.params.c = fit.coefficients;
  out.diagnostics = std::move(fit.diagnostics);
  return out;
}

}  // namespace decegy
