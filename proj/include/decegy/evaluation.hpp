#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decegy/dataset.hpp"
#include "decegy/fitting.hpp"
#include "decegy/models.hpp"

namespace decegy {

/// Assignment of M records to k folds whose sizes differ by at most one.
struct FoldPartition {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // fold index per record

  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> sizes() const;
};

/// Seeded Fisher-Yates permutation dealt round-robin into k folds.
/// Throws std::invalid_argument unless 2 <= k <= count.
FoldPartition make_folds(std::size_t count, std::size_t k, std::uint64_t seed);

/// (1/M) sum |E_hat - E| / E. Throws DataError on length mismatch, empty
/// input or nonpositive measurements.
double mean_relative_error(std::span<const double> estimates, std::span<const double> measured);

struct TrainedModel {
  ModelParams params;
  FitDiagnostics diagnostics;
};

/// Fits `kind` to the given records of `ds` (all records when empty).
TrainedModel train_model(const Dataset& ds, ModelKind kind, const FitOptions& opts,
                         std::span<const std::size_t> rows = {});

/// Energy estimate for one record; throws DataError on codec mismatch.
double predict(const ModelParams& params, const BitstreamRecord& record);

struct StreamError {
  std::string stream_id;
  std::size_t fold = 0;
  double estimate = 0;
  double measured = 0;
  double relative_error = 0;
};

struct FoldResult {
  std::size_t index = 0;
  std::size_t size = 0;
  bool failed = false;
  std::string message;
  double mean_relative_error = 0;
  std::optional<ModelParams> params;
  FitDiagnostics diagnostics;
};

struct CVReport {
  ModelKind model{};
  Codec codec{};
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double mean_relative_error = 0;  // pooled over every validated stream
  double mean_of_fold_means = 0;
  std::size_t failed_folds = 0;
  std::vector<FoldResult> folds;
  std::vector<StreamError> streams;  // dataset order
};

/// k-fold cross-validation: train on k-1 folds, validate on the held-out
/// one. Failed folds are reported and excluded from the pooled error.
CVReport cross_validate(const Dataset& ds, ModelKind kind, std::size_t k = 10, std::uint64_t seed = 42,
                        const FitOptions& opts = {});

nlohmann::json to_json(const CVReport& r);

}  // namespace decegy
