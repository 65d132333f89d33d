#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decegy/dataset.hpp"
#include "decegy/models.hpp"

namespace decegy {

/// Measured and estimated energy of one stream with the estimate split by
/// feature category.
struct BreakdownRow {
  std::string stream_id;
  Codec codec{};
  std::optional<double> measured;
  double estimated = 0;
  CategoryEnergies categories{};
};

/// One row per record, in the given order.
std::vector<BreakdownRow> breakdown_report(std::span<const BitstreamRecord> records, const SpecificEnergies& e);

/// `stream_id,E_dec,E_hat,OFFSET,INTRA,INTER,TRANS,COEFF,SAO`
void write_breakdown_csv(std::ostream& out, std::span<const BreakdownRow> rows);

/// Horizontal bar chart: per stream a measured bar above a stacked bar of
/// the category estimates.
void write_breakdown_svg(std::ostream& out, std::span<const BreakdownRow> rows);

}  // namespace decegy
