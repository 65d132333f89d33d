#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "decegy/diagnostics.hpp"
#include "decegy/linear_ls.hpp"
#include "decegy/models.hpp"
#include "decegy/trust_region.hpp"

namespace decegy {

struct FitOptions {
  bool nonneg = false;  // feature model only
  TrustRegionOptions trust_region;
};

/// Stacks feature vectors into a design matrix (one row per stream).
Eigen::MatrixXd feature_design(std::span<const FeatureVector> features);

struct FeatureFit {
  SpecificEnergies energies;
  FitDiagnostics diagnostics;
};

/// Least-squares specific energies. All vectors must share one codec.
FeatureFit fit_feature_model(std::span<const FeatureVector> features, const Eigen::VectorXd& energies,
                             bool nonneg = false);

struct Residuals {
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;  // columns: C, alpha, beta, gamma
};

/// HL1 residuals predict - measured and the analytic Jacobian with respect to
/// (C, alpha, beta, gamma).
Residuals hl1_residuals_jacobian(const HL1Params& p, std::span<const HighLevelInfo> info,
                                 const Eigen::VectorXd& energies);

struct Hl1Fit {
  HL1Params params;
  FitDiagnostics diagnostics;
  double start_exponent = 1.0;  // start of the winning multi-start run
  bool exponent_identifiable = true;
};

/// Trust-region fit of HL1 with beta = exp(b), gamma = exp(g), multi-started
/// from gamma in {0.5, 1.0, 1.5}. Needs >= 4 records and >= 2 distinct B/(S*N).
Hl1Fit fit_hl1(std::span<const HighLevelInfo> info, const Eigen::VectorXd& energies,
               const TrustRegionOptions& opts = {});

struct Hl2Fit {
  HL2Params params;
  FitDiagnostics diagnostics;
};

Hl2Fit fit_hl2(std::span<const HighLevelInfo> info, const Eigen::VectorXd& energies);

}  // namespace decegy
