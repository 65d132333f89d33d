#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decegy/models.hpp"
#include "decegy/taxonomy.hpp"

namespace decegy {

/// One coded bitstream: its feature numbers, stream-level facts and the
/// decoding energy.
struct BitstreamRecord {
  std::string stream_id;
  FeatureVector features;
  int width = 0;
  int height = 0;
  int frames = 0;
  double file_size_bytes = 0;
  int intra_frames = 0;
  std::optional<double> energy_joules;  // absent for freshly analyzed streams
  std::vector<std::pair<std::string, std::string>> tags;

  Codec codec() const noexcept { return features.codec; }
  bool has_high_level() const noexcept { return width > 0 && height > 0 && frames > 0 && file_size_bytes > 0; }
  /// Throws DataError when the stream-level facts are incomplete.
  HighLevelInfo high_level() const;
  /// Throws DataError when the energy is missing.
  double energy() const;

  friend bool operator==(const BitstreamRecord&, const BitstreamRecord&) = default;
};

/// Records of one codec with unique stream ids.
struct Dataset {
  Codec codec{};
  std::vector<BitstreamRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  const BitstreamRecord* find(std::string_view stream_id) const;

  std::vector<FeatureVector> feature_vectors() const;
  std::vector<HighLevelInfo> high_level() const;
  Eigen::VectorXd energies() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class DatasetFormat { csv, json };

/// csv unless the extension is .json.
DatasetFormat format_for_path(const std::filesystem::path& path);

struct LoadOptions {
  bool require_energy = true;
};

/// Throws DataError naming the row (CSV, 1-based data rows after the
/// header line) or record index (JSON) on any schema or invariant failure.
Dataset read_dataset_csv(std::istream& in, const LoadOptions& opts = {});
Dataset read_dataset_json(std::istream& in, const LoadOptions& opts = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts = {});
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& opts = {});

/// Column names of the CSV schema for `codec` (fixed columns, then features).
std::vector<std::string> dataset_csv_header(Codec codec);

/// Extra columns are appended after the feature columns from record tags
/// (first record decides the order). Numbers are written in shortest
/// round-trip form.
void write_dataset_csv(std::ostream& out, const Dataset& ds);
void write_dataset_json(std::ostream& out, const Dataset& ds);
void export_dataset(const Dataset& ds, const std::filesystem::path& path);
void export_dataset(const Dataset& ds, const std::filesystem::path& path, DatasetFormat format);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Checks record invariants (valid feature vector, positive energy if
/// present, consistent stream facts); throws DataError prefixed by `where`.
void validate_record(const BitstreamRecord& r, const std::string& where, bool require_energy);

struct FeatureRange {
  double lo = 0;
  double hi = 0;
};

/// Parameters of a synthetic measurement campaign: counts drawn uniformly
/// per feature, energies from the feature model, multiplicative Gaussian
/// noise.
struct SynthSpec {
  Codec codec{};
  std::size_t count = 0;
  SpecificEnergies true_params;
  std::vector<FeatureRange> ranges;  // per feature, canonical order; e0 ignored
  double noise_sigma = 0;
  std::uint64_t seed = 42;
};

/// Plausible per-feature ranges and specific energies for `codec`, spread
/// enough that every feature moves the energy.
SynthSpec default_synth_spec(Codec codec, std::size_t count, double noise_sigma, std::uint64_t seed);

Dataset synth_dataset(const SynthSpec& spec);

}  // namespace decegy
