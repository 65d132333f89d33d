#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace decegy {

enum class Codec { h263, h264, hevc, vp9 };
inline constexpr std::array<Codec, 4> kAllCodecs{Codec::h263, Codec::h264, Codec::hevc, Codec::vp9};

enum class Category { offset, intra, inter, trans, coeff, sao };
inline constexpr std::size_t kCategoryCount = 6;
inline constexpr std::array<Category, kCategoryCount> kAllCategories{
    Category::offset, Category::intra, Category::inter,
    Category::trans,  Category::coeff, Category::sao};

enum class FeatureKind { e0, frame, intra, inter, obmc, pel, frac, trans, coeff, val, sao };

/// Residual entropy coder; only H.264 distinguishes the two.
enum class EntropyMode { cavlc, cabac };

std::string_view to_string(Codec c);
std::string_view to_string(Category c);
std::string_view to_string(EntropyMode m);
/// Accepts "h263", "h264", "hevc", "vp9" (case-insensitive, dots ignored).
std::optional<Codec> parse_codec(std::string_view text);

/// One countable decoding sub-process of a specific codec.
struct FeatureId {
  Codec codec{};
  Category category{};
  FeatureKind kind{};
  std::optional<int> block_size;
  std::optional<EntropyMode> entropy;

  /// Lowercase serialized form: "e0", "inter32", "coeff_cavlc", "sao", ...
  std::string name() const;

  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

Category feature_category(FeatureKind kind);
inline Category feature_category(const FeatureId& id) { return feature_category(id.kind); }

/// The ordered list of features counted for one codec.
class FeatureSet {
 public:
  FeatureSet(Codec codec, std::vector<FeatureId> features);

  Codec codec() const noexcept { return codec_; }
  std::size_t size() const noexcept { return features_.size(); }
  std::span<const FeatureId> features() const noexcept { return features_; }
  const FeatureId& at(std::size_t index) const { return features_.at(index); }
  const FeatureId& operator[](std::size_t index) const { return features_[index]; }

  std::optional<std::size_t> index_of(const FeatureId& id) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Index of a feature known to be a member; throws std::out_of_range otherwise.
  std::size_t require(std::string_view name) const;

  /// Feature names in canonical order.
  std::vector<std::string> names() const;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  Codec codec_;
  std::vector<FeatureId> features_;
};

FeatureSet build_feature_set(Codec codec);

/// Process-wide immutable instance of build_feature_set(codec).
const FeatureSet& feature_set(Codec codec);

/// Per-feature occurrence counts of one bitstream, laid out in the codec's
/// canonical feature order. Counts are real because rectangular blocks
/// contribute half weights.
struct FeatureVector {
  Codec codec{};
  Eigen::VectorXd counts;

  FeatureVector() = default;
  FeatureVector(Codec c, Eigen::VectorXd n) : codec(c), counts(std::move(n)) {}

  /// All zeros except E0 = 1.
  static FeatureVector empty_stream(Codec c);

  const FeatureSet& feature_set() const { return decegy::feature_set(codec); }
  double& operator[](std::string_view name) { return counts[feature_set().require(name)]; }
  double operator[](std::string_view name) const { return counts[feature_set().require(name)]; }

  friend bool operator==(const FeatureVector& a, const FeatureVector& b) {
    return a.codec == b.codec && a.counts.size() == b.counts.size() && a.counts == b.counts;
  }
};

enum class ViolationKind { codec_mismatch, length_mismatch, negative_count, non_finite_count, offset_not_one };

struct Violation {
  ViolationKind kind{};
  std::optional<std::size_t> index;
  std::string message;
};

/// Every invariant violation of `v` against `fs`; empty when valid.
std::vector<Violation> validate_vector(const FeatureSet& fs, const FeatureVector& v);

nlohmann::json to_json(const FeatureSet& fs);

}  // namespace decegy
