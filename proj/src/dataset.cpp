#include "decegy/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "decegy/error.hpp"
#include "decegy/random.hpp"

namespace decegy {
namespace {

constexpr std::array<std::string_view, 8> kFixedColumns{
    "stream_id", "codec", "width", "height", "frames", "file_size_bytes", "intra_frames", "energy_joules"};

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw DataError(where + ": unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

double parse_double(const std::string& text, const std::string& where, const std::string& column) {
  double v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw DataError(where + ": column '" + column + "' is not a number: '" + text + "'");
  return v;
}

int parse_int_or_zero(const std::string& text, const std::string& where, const std::string& column) {
  if (text.empty()) return 0;
  const double v = parse_double(text, where, column);
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw DataError(where + ": column '" + column + "' must be an integer");
  return static_cast<int>(v);
}

void check_unique_and_codec(const Dataset& ds) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.codec() != ds.codec)
      throw DataError("record " + std::to_string(i + 1) + ": mixed codecs (" + std::string(to_string(r.codec())) +
                      " in a " + std::string(to_string(ds.codec)) + " dataset)");
    if (!seen.insert(r.stream_id).second)
      throw DataError("record " + std::to_string(i + 1) + ": duplicate stream_id '" + r.stream_id + "'");
  }
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), ptr);
}

HighLevelInfo BitstreamRecord::high_level() const {
  if (!has_high_level())
    throw DataError("stream '" + stream_id + "' lacks resolution, frame count or file size");
  HighLevelInfo h{static_cast<double>(width) * height, static_cast<double>(frames), file_size_bytes,
                  static_cast<double>(intra_frames) / frames};
  check_high_level(h);
  return h;
}

double BitstreamRecord::energy() const {
  if (!energy_joules) throw DataError("stream '" + stream_id + "' has no measured energy");
  return *energy_joules;
}

const BitstreamRecord* Dataset::find(std::string_view stream_id) const {
  for (const auto& r : records)
    if (r.stream_id == stream_id) return &r;
  return nullptr;
}

std::vector<FeatureVector> Dataset::feature_vectors() const {
  std::vector<FeatureVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.features);
  return out;
}

std::vector<HighLevelInfo> Dataset::high_level() const {
  std::vector<HighLevelInfo> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.high_level());
  return out;
}

Eigen::VectorXd Dataset::energies() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) out[static_cast<Eigen::Index>(i)] = records[i].energy();
  return out;
}

void validate_record(const BitstreamRecord& r, const std::string& where, bool require_energy) {
  if (r.stream_id.empty()) throw DataError(where + ": empty stream_id");
  const auto violations = validate_vector(feature_set(r.codec()), r.features);
  if (!violations.empty()) throw DataError(where + ": " + violations.front().message);
  if (r.energy_joules) {
    if (!std::isfinite(*r.energy_joules) || *r.energy_joules <= 0)
      throw DataError(where + ": nonpositive energy (" + format_number(*r.energy_joules) + " J)");
  } else if (require_energy) {
    throw DataError(where + ": missing energy");
  }
  if (r.width < 0 || r.height < 0 || r.frames < 0 || !(r.file_size_bytes >= 0) || r.intra_frames < 0)
    throw DataError(where + ": negative stream facts");
  if (r.intra_frames > r.frames) throw DataError(where + ": intra_frames exceeds frames");
}

DatasetFormat format_for_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".json" ? DatasetFormat::json : DatasetFormat::csv;
}

std::vector<std::string> dataset_csv_header(Codec codec) {
  std::vector<std::string> out(kFixedColumns.begin(), kFixedColumns.end());
  for (auto& n : feature_set(codec).names()) out.push_back(std::move(n));
  return out;
}

Dataset read_dataset_csv(std::istream& in, const LoadOptions& opts) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset: no header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line, "header");
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) throw DataError("header: duplicate column '" + header[i] + "'");
  }
  for (auto name : kFixedColumns)
    if (!column.count(std::string(name))) throw DataError("schema error: missing column '" + std::string(name) + "'");

  Dataset ds;
  bool codec_known = false;
  std::vector<std::size_t> feature_cols;
  std::vector<std::size_t> tag_cols;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::string where = "row " + std::to_string(row);
    const auto cells = split_csv_line(line, where);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    auto cell = [&](std::string_view name) -> const std::string& { return cells[column.at(std::string(name))]; };

    const auto codec = parse_codec(cell("codec"));
    if (!codec) throw DataError(where + ": unknown codec '" + cell("codec") + "'");
    if (!codec_known) {
      ds.codec = *codec;
      codec_known = true;
      const auto& fs = feature_set(ds.codec);
      std::set<std::size_t> known;
      for (auto name : kFixedColumns) known.insert(column.at(std::string(name)));
      for (const auto& name : fs.names()) {
        auto it = column.find(name);
        if (it == column.end()) throw DataError("schema error: missing column '" + name + "'");
        feature_cols.push_back(it->second);
        known.insert(it->second);
      }
      for (std::size_t i = 0; i < header.size(); ++i)
        if (!known.count(i)) tag_cols.push_back(i);
    } else if (*codec != ds.codec) {
      throw DataError(where + ": mixed codecs (" + cell("codec") + " in a " + std::string(to_string(ds.codec)) +
                      " dataset)");
    }

    BitstreamRecord r;
    r.stream_id = cell("stream_id");
    r.features = FeatureVector(ds.codec, Eigen::VectorXd(static_cast<Eigen::Index>(feature_cols.size())));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto& text = cells[feature_cols[k]];
      r.features.counts[static_cast<Eigen::Index>(k)] =
          text.empty() ? 0.0 : parse_double(text, where, header[feature_cols[k]]);
    }
    r.width = parse_int_or_zero(cell("width"), where, "width");
    r.height = parse_int_or_zero(cell("height"), where, "height");
    r.frames = parse_int_or_zero(cell("frames"), where, "frames");
    r.file_size_bytes = cell("file_size_bytes").empty() ? 0.0 : parse_double(cell("file_size_bytes"), where, "file_size_bytes");
    r.intra_frames = parse_int_or_zero(cell("intra_frames"), where, "intra_frames");
    if (!cell("energy_joules").empty()) r.energy_joules = parse_double(cell("energy_joules"), where, "energy_joules");
    for (auto c : tag_cols) r.tags.emplace_back(header[c], cells[c]);
    validate_record(r, where, opts.require_energy);
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw DataError("empty dataset: no data rows");
  check_unique_and_codec(ds);
  return ds;
}

Dataset read_dataset_json(std::istream& in, const LoadOptions& opts) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw DataError(std::string("malformed JSON dataset: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("codec") || !doc.contains("records"))
    throw DataError("schema error: JSON dataset needs 'codec' and 'records'");
  const auto codec = parse_codec(doc.at("codec").get<std::string>());
  if (!codec) throw DataError("unknown codec '" + doc.at("codec").get<std::string>() + "'");
  Dataset ds{*codec, {}};
  const auto& fs = feature_set(ds.codec);
  std::size_t index = 0;
  for (const auto& j : doc.at("records")) {
    ++index;
    const std::string where = "record " + std::to_string(index);
    try {
      BitstreamRecord r;
      r.stream_id = j.at("stream_id").get<std::string>();
      if (j.contains("codec") && parse_codec(j.at("codec").get<std::string>()) != ds.codec)
        throw DataError("mixed codecs");
      r.features = FeatureVector(ds.codec, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fs.size())));
      const auto& feats = j.at("features");
      for (const auto& name : fs.names()) {
        if (!feats.contains(name)) throw DataError("schema error: missing feature '" + name + "'");
        r.features[name] = feats.at(name).get<double>();
      }
      for (auto it = feats.begin(); it != feats.end(); ++it)
        if (!fs.index_of(it.key())) throw DataError("feature '" + it.key() + "' is not counted for this codec");
      r.width = j.value("width", 0);
      r.height = j.value("height", 0);
      r.frames = j.value("frames", 0);
      r.file_size_bytes = j.value("file_size_bytes", 0.0);
      r.intra_frames = j.value("intra_frames", 0);
      if (j.contains("energy_joules") && !j.at("energy_joules").is_null())
        r.energy_joules = j.at("energy_joules").get<double>();
      if (j.contains("tags"))
        for (auto it = j.at("tags").begin(); it != j.at("tags").end(); ++it)
          r.tags.emplace_back(it.key(), it.value().get<std::string>());
      validate_record(r, where, opts.require_energy);
      ds.records.push_back(std::move(r));
    } catch (const nlohmann::ordered_json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      throw DataError(where + ": " + msg);
    }
  }
  if (ds.records.empty()) throw DataError("empty dataset: no records");
  check_unique_and_codec(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open dataset");
  try {
    return format == DatasetFormat::json ? read_dataset_json(in, opts) : read_dataset_csv(in, opts);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts) {
  return load_dataset(path, format_for_path(path), opts);
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  if (ds.empty()) throw DataError("empty dataset");
  auto header = dataset_csv_header(ds.codec);
  std::vector<std::string> tag_names;
  for (const auto& [k, v] : ds.records.front().tags) tag_names.push_back(k);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  for (const auto& t : tag_names) out << ',' << csv_field(t);
  out << '\n';
  for (const auto& r : ds.records) {
    out << csv_field(r.stream_id) << ',' << to_string(r.codec()) << ',' << r.width << ',' << r.height << ','
        << r.frames << ',' << format_number(r.file_size_bytes) << ',' << r.intra_frames << ','
        << (r.energy_joules ? format_number(*r.energy_joules) : std::string());
    for (Eigen::Index i = 0; i < r.features.counts.size(); ++i) out << ',' << format_number(r.features.counts[i]);
    for (const auto& name : tag_names) {
      auto it = std::find_if(r.tags.begin(), r.tags.end(), [&](const auto& kv) { return kv.first == name; });
      out << ',' << (it == r.tags.end() ? std::string() : csv_field(it->second));
    }
    out << '\n';
  }
}

void write_dataset_json(std::ostream& out, const Dataset& ds) {
  if (ds.empty()) throw DataError("empty dataset");
  nlohmann::ordered_json doc;
  doc["codec"] = to_string(ds.codec);
  doc["records"] = nlohmann::ordered_json::array();
  const auto names = feature_set(ds.codec).names();
  for (const auto& r : ds.records) {
    nlohmann::ordered_json j;
    j["stream_id"] = r.stream_id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["frames"] = r.frames;
    j["file_size_bytes"] = r.file_size_bytes;
    j["intra_frames"] = r.intra_frames;
    j["energy_joules"] = r.energy_joules ? nlohmann::ordered_json(*r.energy_joules) : nlohmann::ordered_json();
    nlohmann::ordered_json feats = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < names.size(); ++i) feats[names[i]] = r.features.counts[static_cast<Eigen::Index>(i)];
    j["features"] = std::move(feats);
    if (!r.tags.empty()) {
      nlohmann::ordered_json tags = nlohmann::ordered_json::object();
      for (const auto& [k, v] : r.tags) tags[k] = v;
      j["tags"] = std::move(tags);
    }
    doc["records"].push_back(std::move(j));
  }
  out << doc.dump(2) << '\n';
}

void export_dataset(const Dataset& ds, const std::filesystem::path& path, DatasetFormat format) {
  if (ds.empty()) throw DataError("empty dataset");
  std::ostringstream buf;
  if (format == DatasetFormat::json) {
    write_dataset_json(buf, ds);
  } else {
    write_dataset_csv(buf, ds);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << buf.str();
  if (!out) throw DataError(path.string() + ": write failed");
}

void export_dataset(const Dataset& ds, const std::filesystem::path& path) {
  export_dataset(ds, path, format_for_path(path));
}

SynthSpec default_synth_spec(Codec codec, std::size_t count, double noise_sigma, std::uint64_t seed) {
  const auto& fs = feature_set(codec);
  SynthSpec spec;
  spec.codec = codec;
  spec.count = count;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  spec.true_params = SpecificEnergies::zero(codec);
  spec.ranges.resize(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& f = fs[i];
    const double s = f.block_size.value_or(1);
    const double area = s * s;
    FeatureRange range;
    double e = 0;
    switch (f.kind) {
      case FeatureKind::e0: range = {1, 1}; e = 0.12; break;
      case FeatureKind::frame: range = {8, 60}; e = 4e-3; break;
      case FeatureKind::intra: range = {0, 2e6 / area}; e = 6e-8 * std::pow(s, 1.8); break;
      case FeatureKind::inter: range = {0, 8e6 / area}; e = 3e-8 * std::pow(s, 1.7); break;
      case FeatureKind::obmc: range = {0, 2e4}; e = 8e-6; break;
      case FeatureKind::pel: range = {1e6, 1e8}; e = 2e-9; break;
      case FeatureKind::frac: range = {0, 1e8}; e = 3e-9; break;
      case FeatureKind::trans: range = {0, 6e6 / area}; e = 4e-8 * std::pow(s, 1.6); break;
      case FeatureKind::coeff: range = {1e4, 5e6}; e = f.entropy == EntropyMode::cabac ? 5e-8 : 3.5e-8; break;
      case FeatureKind::val: range = {1e4, 2e7}; e = f.entropy == EntropyMode::cabac ? 1.2e-8 : 0.8e-8; break;
      case FeatureKind::sao: range = {0, 2e4}; e = 3e-6; break;
    }
    spec.ranges[i] = range;
    spec.true_params.energies[static_cast<Eigen::Index>(i)] = e;
  }
  return spec;
}

Dataset synth_dataset(const SynthSpec& spec) {
  const auto& fs = feature_set(spec.codec);
  if (spec.count == 0) throw DataError("synthetic dataset needs at least one record");
  if (!(spec.noise_sigma >= 0)) throw DataError("noise sigma must be non-negative");
  if (spec.ranges.size() != fs.size()) throw DataError("one count range per feature is required");
  if (spec.true_params.codec != spec.codec || static_cast<std::size_t>(spec.true_params.energies.size()) != fs.size())
    throw DataError("true parameters do not match the codec's feature set");
  for (const auto& r : spec.ranges)
    if (r.lo < 0 || r.hi < r.lo) throw DataError("feature ranges must satisfy 0 <= lo <= hi");

  struct Resolution {
    int w, h;
  };
  static constexpr std::array<Resolution, 7> kResolutions{
      {{176, 144}, {352, 288}, {416, 240}, {832, 480}, {1280, 720}, {1920, 1080}, {2560, 1600}}};

  Rng rng(spec.seed);
  const auto frame_idx = fs.require("frame");
  const bool hevc = spec.codec == Codec::hevc;
  Dataset ds{spec.codec, {}};
  ds.records.reserve(spec.count);
  for (std::size_t m = 0; m < spec.count; ++m) {
    BitstreamRecord r;
    char id[48];
    std::snprintf(id, sizeof id, "synth-%s-%04zu", std::string(to_string(spec.codec)).c_str(), m + 1);
    r.stream_id = id;
    r.features = FeatureVector::empty_stream(spec.codec);
    for (std::size_t i = 1; i < fs.size(); ++i) {
      const auto& range = spec.ranges[i];
      double v = rng.uniform(range.lo, range.hi);
      if (i == frame_idx || fs[i].kind == FeatureKind::intra || fs[i].kind == FeatureKind::trans ||
          fs[i].kind == FeatureKind::coeff || fs[i].kind == FeatureKind::sao || fs[i].kind == FeatureKind::obmc) {
        v = std::round(v);
      } else if (fs[i].kind == FeatureKind::inter) {
        v = std::round(2.0 * v) / 2.0;  // half-weight rectangles
      } else if (fs[i].kind == FeatureKind::val && !hevc) {
        v = std::round(v);
      }
      r.features.counts[static_cast<Eigen::Index>(i)] = std::max(v, 0.0);
    }
    r.frames = std::max(1, static_cast<int>(r.features.counts[static_cast<Eigen::Index>(frame_idx)]));
    r.features.counts[static_cast<Eigen::Index>(frame_idx)] = r.frames;
    const auto res = kResolutions[rng.below(kResolutions.size())];
    r.width = res.w;
    r.height = res.h;
    r.intra_frames = static_cast<int>(rng.below(static_cast<std::uint64_t>(r.frames) + 1));

    double coded = 0;
    for (std::size_t i = 0; i < fs.size(); ++i)
      if (fs[i].category == Category::coeff) coded += r.features.counts[static_cast<Eigen::Index>(i)];
    r.file_size_bytes = std::max(1.0, std::round(0.25 * coded));

    const double clean = predict_feature_model(spec.true_params, r.features);
    if (!(clean > 0))
      throw DataError("synthetic spec produced a nonpositive energy for " + r.stream_id);
    double factor = 1.0;
    if (spec.noise_sigma > 0) {
      do {
        factor = 1.0 + spec.noise_sigma * rng.normal();
      } while (factor <= 0.0);
    }
    r.energy_joules = clean * factor;
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace decegy
