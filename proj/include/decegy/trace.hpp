#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "decegy/taxonomy.hpp"

namespace decegy {

struct FrameStart {
  bool intra = false;  // frame coded without inter prediction; feeds p_I
  friend bool operator==(const FrameStart&, const FrameStart&) = default;
};

struct IntraBlock {
  int w = 0;
  int h = 0;
  friend bool operator==(const IntraBlock&, const IntraBlock&) = default;
};

struct InterBlock {
  int w = 0;
  int h = 0;
  bool bipred = false;
  bool frac_h = false;
  bool frac_v = false;
  bool obmc = false;
  friend bool operator==(const InterBlock&, const InterBlock&) = default;
};

struct TransformBlock {
  int w = 0;
  int h = 0;
  friend bool operator==(const TransformBlock&, const TransformBlock&) = default;
};

struct Coefficient {
  long value = 0;
  int coded_bits = 0;  // 0 when the producer did not report it (HEVC ignores it)
  std::optional<EntropyMode> entropy;
  friend bool operator==(const Coefficient&, const Coefficient&) = default;
};

/// One filtered 64x64 luma block of the SAO in-loop filter.
struct SaoBlock {
  friend bool operator==(const SaoBlock&, const SaoBlock&) = default;
};

using DecodeEvent = std::variant<FrameStart, IntraBlock, InterBlock, TransformBlock, Coefficient, SaoBlock>;

/// High-level stream facts a trace producer may put in the header line.
struct TraceHeader {
  std::string stream_id;
  Codec codec{};
  int width = 0;
  int height = 0;
  double file_size_bytes = 0;
};

struct DecodeTrace {
  TraceHeader header;
  std::vector<DecodeEvent> events;

  Codec codec() const noexcept { return header.codec; }
  const std::string& stream_id() const noexcept { return header.stream_id; }
};

/// Fallbacks for traces without a header line (e.g. empty files).
struct TraceDefaults {
  std::optional<Codec> codec;
  std::string stream_id;
};

/// Parses the JSON Lines trace format. The first non-blank line may be a
/// header `{"stream_id":..., "codec":...}`; every other line is one event.
/// Throws DataError with "line L, column C" on malformed input.
DecodeTrace parse_trace(std::istream& in, const TraceDefaults& defaults = {});
DecodeTrace parse_trace_file(const std::string& path, const TraceDefaults& defaults = {});

/// Writes `trace` back in the JSON Lines format (header first).
void write_trace(std::ostream& out, const DecodeTrace& trace);

struct WeightedFeature {
  FeatureId feature;
  double weight = 1.0;
  friend bool operator==(const WeightedFeature&, const WeightedFeature&) = default;
};

/// Feature(s) a predicted block of w x h pixels is counted as. Square
/// blocks count once at their own size, rectangular blocks count half at
/// the next bigger square; sizes outside the counted range clamp to the
/// nearest counted size. Throws DataError for sizes the codec cannot use.
std::vector<WeightedFeature> map_inter_block(Codec codec, int w, int h);
std::vector<WeightedFeature> map_intra_block(Codec codec, int w, int h);
std::vector<WeightedFeature> map_transform_block(Codec codec, int w, int h);

/// Contribution of one non-zero coefficient to the `val` feature:
/// log2|value| for HEVC, the number of coded bits otherwise.
double coeff_value_contribution(Codec codec, long value, int coded_bits);

struct PelCounts {
  double pels = 0;
  double fracs = 0;
};

/// Predicted pels (doubled under biprediction) and fractional-pel filter
/// operations (one per pel per fractional dimension, doubled under
/// biprediction).
PelCounts pel_and_frac_counts(const InterBlock& block);

/// Feature numbers of one trace. E0 is always 1.
FeatureVector analyze(const DecodeTrace& trace);

/// Number of FrameStart events flagged intra.
int count_intra_frames(const DecodeTrace& trace);
int count_frames(const DecodeTrace& trace);

}  // namespace decegy
