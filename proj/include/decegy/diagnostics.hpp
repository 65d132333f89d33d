#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace decegy {

/// Solver report attached to every fit and serialized next to the
/// parameters.
struct FitDiagnostics {
  std::string method;
  int iterations = 0;
  std::string termination;
  bool converged = true;
  double residual_norm = 0;
  double condition_estimate = 1;
  long rank = 0;
  std::vector<std::string> dropped_columns;  // rank-deficient, coefficient pinned to 0
  std::vector<std::string> clamped_columns;  // held at 0 by the non-negativity constraint
  double kkt_violation = 0;                  // scaled, 0 for a perfect KKT point
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const FitDiagnostics& d);

}  // namespace decegy
