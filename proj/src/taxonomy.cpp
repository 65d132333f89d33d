#include "decegy/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace decegy {

std::string_view to_string(Codec c) {
  switch (c) {
    case Codec::h263: return "h263";
    case Codec::h264: return "h264";
    case Codec::hevc: return "hevc";
    case Codec::vp9: return "vp9";
  }
  throw std::invalid_argument("unknown codec");
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::offset: return "OFFSET";
    case Category::intra: return "INTRA";
    case Category::inter: return "INTER";
    case Category::trans: return "TRANS";
    case Category::coeff: return "COEFF";
    case Category::sao: return "SAO";
  }
  throw std::invalid_argument("unknown category");
}

std::string_view to_string(EntropyMode m) {
  return m == EntropyMode::cavlc ? "cavlc" : "cabac";
}

std::optional<Codec> parse_codec(std::string_view text) {
  std::string key;
  for (char ch : text) {
    if (ch == '.' || ch == '-' || ch == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  if (key == "h263") return Codec::h263;
  if (key == "h264" || key == "avc") return Codec::h264;
  if (key == "hevc" || key == "h265") return Codec::hevc;
  if (key == "vp9") return Codec::vp9;
  return std::nullopt;
}

Category feature_category(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::e0:
    case FeatureKind::frame: return Category::offset;
    case FeatureKind::intra: return Category::intra;
    case FeatureKind::inter:
    case FeatureKind::obmc:
    case FeatureKind::pel:
    case FeatureKind::frac: return Category::inter;
    case FeatureKind::trans: return Category::trans;
    case FeatureKind::coeff:
    case FeatureKind::val: return Category::coeff;
    case FeatureKind::sao: return Category::sao;
  }
  throw std::invalid_argument("unknown feature kind");
}

namespace {

std::string_view kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::e0: return "e0";
    case FeatureKind::frame: return "frame";
    case FeatureKind::intra: return "intra";
    case FeatureKind::inter: return "inter";
    case FeatureKind::obmc: return "obmc";
    case FeatureKind::pel: return "pel";
    case FeatureKind::frac: return "frac";
    case FeatureKind::trans: return "trans";
    case FeatureKind::coeff: return "coeff";
    case FeatureKind::val: return "val";
    case FeatureKind::sao: return "sao";
  }
  return "";
}

bool is_sized(FeatureKind kind) {
  return kind == FeatureKind::intra || kind == FeatureKind::inter || kind == FeatureKind::trans;
}

struct SetBuilder {
  Codec codec;
  std::vector<FeatureId> out;

  void add(FeatureKind kind, std::optional<int> size = {}, std::optional<EntropyMode> mode = {}) {
    out.push_back(FeatureId{codec, feature_category(kind), kind, size, mode});
  }
  void add_sizes(FeatureKind kind, std::initializer_list<int> sizes) {
    for (int s : sizes) add(kind, s);
  }
};

}  // namespace

std::string FeatureId::name() const {
  std::string out(kind_name(kind));
  if (block_size) out += std::to_string(*block_size);
  if (entropy) {
    out += '_';
    out += to_string(*entropy);
  }
  return out;
}

FeatureSet::FeatureSet(Codec codec, std::vector<FeatureId> features)
    : codec_(codec), features_(std::move(features)) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.codec != codec_) throw std::invalid_argument("feature " + f.name() + " belongs to another codec");
    if (f.category != feature_category(f.kind))
      throw std::invalid_argument("feature " + f.name() + " has the wrong category");
    if (f.block_size.has_value() != is_sized(f.kind))
      throw std::invalid_argument("feature " + f.name() + ": block size present iff intra/inter/trans");
    const bool entropy_expected =
        codec_ == Codec::h264 && (f.kind == FeatureKind::coeff || f.kind == FeatureKind::val);
    if (f.entropy.has_value() != entropy_expected)
      throw std::invalid_argument("feature " + f.name() + ": entropy mode only on H.264 coeff/val");
    for (std::size_t j = 0; j < i; ++j)
      if (features_[j] == f) throw std::invalid_argument("duplicate feature " + f.name());
  }
}

std::optional<std::size_t> FeatureSet::index_of(const FeatureId& id) const {
  auto it = std::find(features_.begin(), features_.end(), id);
  if (it == features_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - features_.begin());
}

std::optional<std::size_t> FeatureSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name() == name) return i;
  return std::nullopt;
}

std::size_t FeatureSet::require(std::string_view name) const {
  if (auto idx = index_of(name)) return *idx;
  throw std::out_of_range("feature '" + std::string(name) + "' is not counted for " +
                          std::string(to_string(codec_)));
}

std::vector<std::string> FeatureSet::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name());
  return out;
}

FeatureSet build_feature_set(Codec codec) {
  SetBuilder b{codec, {}};
  b.add(FeatureKind::e0);
  b.add(FeatureKind::frame);
  switch (codec) {
    case Codec::h263:
      b.add_sizes(FeatureKind::intra, {16});
      b.add_sizes(FeatureKind::inter, {16, 8});
      b.add(FeatureKind::obmc);
      b.add(FeatureKind::pel);
      b.add(FeatureKind::frac);
      b.add_sizes(FeatureKind::trans, {8});
      b.add(FeatureKind::coeff);
      b.add(FeatureKind::val);
      break;
    case Codec::h264:
      b.add_sizes(FeatureKind::intra, {16, 4});
      b.add_sizes(FeatureKind::inter, {16, 8, 4});
      b.add(FeatureKind::pel);
      b.add(FeatureKind::frac);
      b.add_sizes(FeatureKind::trans, {4});
      b.add(FeatureKind::coeff, {}, EntropyMode::cavlc);
      b.add(FeatureKind::coeff, {}, EntropyMode::cabac);
      b.add(FeatureKind::val, {}, EntropyMode::cavlc);
      b.add(FeatureKind::val, {}, EntropyMode::cabac);
      break;
    case Codec::hevc:
      b.add_sizes(FeatureKind::intra, {32, 16, 8, 4});
      b.add_sizes(FeatureKind::inter, {64, 32, 16, 8});
      b.add(FeatureKind::pel);
      b.add(FeatureKind::frac);
      b.add_sizes(FeatureKind::trans, {32, 16, 8, 4});
      b.add(FeatureKind::coeff);
      b.add(FeatureKind::val);
      b.add(FeatureKind::sao);
      break;
    case Codec::vp9:
      b.add_sizes(FeatureKind::intra, {32, 16, 8, 4});
      b.add_sizes(FeatureKind::inter, {64, 32, 16, 8, 4});
      b.add(FeatureKind::pel);
      b.add(FeatureKind::frac);
      b.add_sizes(FeatureKind::trans, {32, 16, 8, 4});
      b.add(FeatureKind::coeff);
      b.add(FeatureKind::val);
      break;
  }
  return FeatureSet(codec, std::move(b.out));
}

const FeatureSet& feature_set(Codec codec) {
  static const std::array<FeatureSet, 4> sets{build_feature_set(Codec::h263), build_feature_set(Codec::h264),
                                              build_feature_set(Codec::hevc), build_feature_set(Codec::vp9)};
  return sets[static_cast<std::size_t>(codec)];
}

FeatureVector FeatureVector::empty_stream(Codec c) {
  Eigen::VectorXd n = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(decegy::feature_set(c).size()));
  n[0] = 1.0;
  return {c, std::move(n)};
}

std::vector<Violation> validate_vector(const FeatureSet& fs, const FeatureVector& v) {
  std::vector<Violation> out;
  if (v.codec != fs.codec()) {
    out.push_back({ViolationKind::codec_mismatch, std::nullopt,
                   "codec mismatch: vector is " + std::string(to_string(v.codec)) + ", feature set is " +
                       std::string(to_string(fs.codec()))});
  }
  if (static_cast<std::size_t>(v.counts.size()) != fs.size()) {
    out.push_back({ViolationKind::length_mismatch, std::nullopt,
                   "length mismatch: expected " + std::to_string(fs.size()) + " counts, got " +
                       std::to_string(v.counts.size())});
  }
  const auto n = std::min(static_cast<std::size_t>(v.counts.size()), fs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double c = v.counts[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(c)) {
      out.push_back({ViolationKind::non_finite_count, i, "non-finite count for " + fs[i].name()});
    } else if (c < 0.0) {
      out.push_back({ViolationKind::negative_count, i, "negative count for " + fs[i].name()});
    }
  }
  if (v.counts.size() > 0 && fs.size() > 0 && v.counts[0] != 1.0) {
    out.push_back({ViolationKind::offset_not_one, 0, "e0 must be exactly 1"});
  }
  return out;
}

nlohmann::json to_json(const FeatureSet& fs) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : fs.features()) features.push_back(f.name());
  return {{"codec", to_string(fs.codec())}, {"features", std::move(features)}};
}

}  // namespace decegy
