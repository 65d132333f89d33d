#include "decegy/evaluation.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "decegy/log.hpp"
#include "decegy/random.hpp"

namespace decegy {

std::vector<std::size_t> FoldPartition::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPartition::sizes() const {
  std::vector<std::size_t> out(k, 0);
  for (auto f : assignment) ++out[f];
  return out;
}

FoldPartition make_folds(std::size_t count, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (k > count)
    throw std::invalid_argument("cannot split " + std::to_string(count) + " records into " + std::to_string(k) +
                                " folds");
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = count; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  FoldPartition out{k, seed, std::vector<std::size_t>(count)};
  for (std::size_t pos = 0; pos < count; ++pos) out.assignment[perm[pos]] = pos % k;
  return out;
}

double mean_relative_error(std::span<const double> estimates, std::span<const double> measured) {
  if (estimates.size() != measured.size())
    throw DataError("mean relative error: " + std::to_string(estimates.size()) + " estimates vs " +
                    std::to_string(measured.size()) + " measurements");
  if (measured.empty()) throw DataError("mean relative error of an empty set");
  double sum = 0;
  for (std::size_t m = 0; m < measured.size(); ++m) {
    if (!(measured[m] > 0)) throw DataError("mean relative error needs positive measured energies");
    sum += std::abs(estimates[m] - measured[m]) / measured[m];
  }
  return sum / static_cast<double>(measured.size());
}

double predict(const ModelParams& params, const BitstreamRecord& record) {
  if (params.codec != record.codec())
    throw DataError("parameters for " + std::string(to_string(params.codec)) + " cannot predict a " +
                    std::string(to_string(record.codec())) + " stream");
  if (const auto* e = std::get_if<SpecificEnergies>(&params.params)) return predict_feature_model(*e, record.features);
  if (const auto* h1 = std::get_if<HL1Params>(&params.params)) return predict_hl1(*h1, record.high_level());
  return predict_hl2(std::get<HL2Params>(params.params), record.high_level());
}

TrainedModel train_model(const Dataset& ds, ModelKind kind, const FitOptions& opts, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  Eigen::VectorXd energies(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) energies[static_cast<Eigen::Index>(i)] = ds.records[rows[i]].energy();

  switch (kind) {
    case ModelKind::feature: {
      std::vector<FeatureVector> feats;
      feats.reserve(rows.size());
      for (auto i : rows) feats.push_back(ds.records[i].features);
      auto fit = fit_feature_model(feats, energies, opts.nonneg);
      return {ModelParams{ds.codec, std::move(fit.energies)}, std::move(fit.diagnostics)};
    }
    case ModelKind::hl1:
    case ModelKind::hl2: {
      std::vector<HighLevelInfo> info;
      info.reserve(rows.size());
      for (auto i : rows) info.push_back(ds.records[i].high_level());
      if (kind == ModelKind::hl1) {
        auto fit = fit_hl1(info, energies, opts.trust_region);
        return {ModelParams{ds.codec, fit.params}, std::move(fit.diagnostics)};
      }
      auto fit = fit_hl2(info, energies);
      return {ModelParams{ds.codec, fit.params}, std::move(fit.diagnostics)};
    }
  }
  throw std::invalid_argument("unknown model kind");
}

CVReport cross_validate(const Dataset& ds, ModelKind kind, std::size_t k, std::uint64_t seed, const FitOptions& opts) {
  const auto folds = make_folds(ds.size(), k, seed);
  CVReport report;
  report.model = kind;
  report.codec = ds.codec;
  report.k = k;
  report.seed = seed;

  std::vector<std::optional<StreamError>> per_stream(ds.size());
  double fold_mean_sum = 0;
  for (std::size_t f = 0; f < k; ++f) {
    FoldResult fr;
    fr.index = f;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validate;
    for (std::size_t i = 0; i < ds.size(); ++i) (folds.assignment[i] == f ? validate : train).push_back(i);
    fr.size = validate.size();
    try {
      auto model = train_model(ds, kind, opts, train);
      std::vector<double> est;
      std::vector<double> meas;
      for (auto i : validate) {
        const auto& rec = ds.records[i];
        const double e_hat = predict(model.params, rec);
        if (!std::isfinite(e_hat)) throw NumericalError("non-finite estimate for " + rec.stream_id);
        est.push_back(e_hat);
        meas.push_back(rec.energy());
      }
      fr.mean_relative_error = mean_relative_error(est, meas);
      for (std::size_t j = 0; j < validate.size(); ++j) {
        const auto i = validate[j];
        per_stream[i] = StreamError{ds.records[i].stream_id, f, est[j], meas[j],
                                    std::abs(est[j] - meas[j]) / meas[j]};
      }
      fr.params = std::move(model.params);
      fr.diagnostics = std::move(model.diagnostics);
      fold_mean_sum += fr.mean_relative_error;
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.message = e.what();
      ++report.failed_folds;
      log::warn("fold " + std::to_string(f) + " failed and is excluded from the error: " + fr.message);
    }
    report.folds.push_back(std::move(fr));
  }

  double pooled = 0;
  std::size_t validated = 0;
  for (auto& s : per_stream) {
    if (!s) continue;
    pooled += s->relative_error;
    ++validated;
    report.streams.push_back(std::move(*s));
  }
  if (validated == 0) throw NumericalError("every cross-validation fold failed");
  report.mean_relative_error = pooled / static_cast<double>(validated);
  report.mean_of_fold_means = fold_mean_sum / static_cast<double>(k - report.failed_folds);
  if (report.failed_folds > 0)
    log::warn(std::to_string(report.failed_folds) + " of " + std::to_string(k) +
              " folds failed; the reported error covers the remaining folds only");
  return report;
}

nlohmann::json to_json(const CVReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json j{{"index", f.index},
                     {"size", f.size},
                     {"failed", f.failed},
                     {"mean_relative_error", f.failed ? nlohmann::json() : nlohmann::json(f.mean_relative_error)}};
    if (f.failed) j["message"] = f.message;
    if (f.params) {
      j["params"] = to_json(*f.params);
      j["diagnostics"] = to_json(f.diagnostics);
    }
    folds.push_back(std::move(j));
  }
  nlohmann::json streams = nlohmann::json::array();
  for (const auto& s : r.streams)
    streams.push_back({{"stream_id", s.stream_id},
                       {"fold", s.fold},
                       {"estimate", s.estimate},
                       {"measured", s.measured},
                       {"relative_error", s.relative_error}});
  return {{"model", to_string(r.model)},
          {"codec", to_string(r.codec)},
          {"k", r.k},
          {"seed", r.seed},
          {"mean_relative_error", r.mean_relative_error},
          {"mean_of_fold_means", r.mean_of_fold_means},
          {"failed_folds", r.failed_folds},
          {"folds", std::move(folds)},
          {"streams", std::move(streams)}};
}

}  // namespace decegy
