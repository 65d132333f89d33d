#include "decegy/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "decegy/error.hpp"

namespace decegy {
namespace {

using nlohmann::json;

constexpr bool is_block_edge(long v) { return v == 4 || v == 8 || v == 16 || v == 32 || v == 64; }

[[noreturn]] void fail_at(std::size_t line, std::size_t column, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

class LineReader {
 public:
  LineReader(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const { fail_at(line_, 1, what); }

  long integer(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return it->get<long>();
  }

  std::optional<long> opt_integer(const char* key) const {
    if (!obj_.contains(key)) return std::nullopt;
    return integer(key);
  }

  bool flag(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return false;
    if (!it->is_boolean()) fail(std::string("field '") + key + "' must be true or false");
    return it->get<bool>();
  }

  std::optional<std::string> opt_string(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  }

  int block_edge(const char* key) const {
    const long v = integer(key);
    if (!is_block_edge(v))
      fail("block size " + std::to_string(v) + " outside {4,8,16,32,64} for '" + key + "'");
    return static_cast<int>(v);
  }

 private:
  const json& obj_;
  std::size_t line_;
};

DecodeEvent parse_event(const json& obj, std::size_t line) {
  LineReader r(obj, line);
  const auto name = r.opt_string("event");
  if (!name) r.fail("missing field 'event'");
  if (*name == "frame_start") return FrameStart{r.flag("intra")};
  if (*name == "intra") return IntraBlock{r.block_edge("w"), r.block_edge("h")};
  if (*name == "inter") {
    return InterBlock{r.block_edge("w"), r.block_edge("h"), r.flag("bipred"),
                      r.flag("frac_h"),  r.flag("frac_v"),  r.flag("obmc")};
  }
  if (*name == "transform") return TransformBlock{r.block_edge("w"), r.block_edge("h")};
  if (*name == "coeff") {
    Coefficient c;
    c.value = r.integer("value");
    if (c.value == 0) r.fail("zero coefficient (only non-zero coefficients are traced)");
    if (auto bits = r.opt_integer("bits")) {
      if (*bits <= 0) r.fail("coded bits must be positive");
      c.coded_bits = static_cast<int>(*bits);
    }
    if (auto mode = r.opt_string("entropy")) {
      if (*mode == "cavlc") {
        c.entropy = EntropyMode::cavlc;
      } else if (*mode == "cabac") {
        c.entropy = EntropyMode::cabac;
      } else if (*mode != "na") {
        r.fail("unknown entropy mode '" + *mode + "'");
      }
    }
    return c;
  }
  if (*name == "sao") return SaoBlock{};
  r.fail("unknown event '" + *name + "'");
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
}

struct EdgeRule {
  std::vector<int> counted;  // descending
  int max_edge;              // largest edge the codec can code at all
  bool allow_rect;
};

std::vector<WeightedFeature> map_block(Codec codec, FeatureKind kind, const EdgeRule& rule, int w, int h) {
  const char* what = kind == FeatureKind::intra ? "intra" : kind == FeatureKind::inter ? "inter" : "transform";
  const auto dims = std::to_string(w) + "x" + std::to_string(h);
  if (!is_block_edge(w) || !is_block_edge(h) || w > rule.max_edge || h > rule.max_edge)
    throw DataError(std::string("illegal ") + what + " block " + dims + " for " + std::string(to_string(codec)));
  if (w != h && !rule.allow_rect)
    throw DataError(std::string(what) + " blocks must be square, got " + dims);

  int size = std::max(w, h);
  const double weight = w == h ? 1.0 : 0.5;
  if (size > rule.counted.front()) {
    size = rule.counted.front();
  } else if (size < rule.counted.back()) {
    size = rule.counted.back();
  } else if (std::find(rule.counted.begin(), rule.counted.end(), size) == rule.counted.end()) {
    throw DataError(std::string("illegal ") + what + " block " + dims + " for " + std::string(to_string(codec)));
  }
  return {{FeatureId{codec, feature_category(kind), kind, size, std::nullopt}, weight}};
}

EdgeRule intra_rule(Codec codec) {
  switch (codec) {
    case Codec::h263: return {{16}, 16, false};
    case Codec::h264: return {{16, 4}, 16, false};
    case Codec::hevc:
    case Codec::vp9: return {{32, 16, 8, 4}, 64, false};
  }
  throw std::invalid_argument("unknown codec");
}

EdgeRule inter_rule(Codec codec) {
  switch (codec) {
    case Codec::h263: return {{16, 8}, 16, true};
    case Codec::h264: return {{16, 8, 4}, 16, true};
    case Codec::hevc: return {{64, 32, 16, 8}, 64, true};
    case Codec::vp9: return {{64, 32, 16, 8, 4}, 64, true};
  }
  throw std::invalid_argument("unknown codec");
}

EdgeRule transform_rule(Codec codec) {
  switch (codec) {
    case Codec::h263: return {{8}, 16, false};
    case Codec::h264: return {{4}, 16, false};
    case Codec::hevc:
    case Codec::vp9: return {{32, 16, 8, 4}, 64, false};
  }
  throw std::invalid_argument("unknown codec");
}

FeatureId plain(Codec codec, FeatureKind kind, std::optional<EntropyMode> mode = {}) {
  return FeatureId{codec, feature_category(kind), kind, std::nullopt, mode};
}

}  // namespace

DecodeTrace parse_trace(std::istream& in, const TraceDefaults& defaults) {
  DecodeTrace trace;
  bool have_codec = false;
  if (defaults.codec) {
    trace.header.codec = *defaults.codec;
    have_codec = true;
  }
  trace.header.stream_id = defaults.stream_id;

  std::string text;
  std::size_t line = 0;
  bool first = true;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (is_blank(text)) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail_at(line, e.byte, "malformed JSON");
    }
    if (!obj.is_object()) fail_at(line, 1, "expected a JSON object");

    if (first && !obj.contains("event")) {
      LineReader r(obj, line);
      if (auto id = r.opt_string("stream_id")) trace.header.stream_id = *id;
      if (auto name = r.opt_string("codec")) {
        auto codec = parse_codec(*name);
        if (!codec) r.fail("unknown codec '" + *name + "'");
        if (defaults.codec && *defaults.codec != *codec)
          r.fail("trace codec " + *name + " differs from requested " + std::string(to_string(*defaults.codec)));
        trace.header.codec = *codec;
        have_codec = true;
      }
      trace.header.width = static_cast<int>(r.opt_integer("width").value_or(0));
      trace.header.height = static_cast<int>(r.opt_integer("height").value_or(0));
      if (auto it = obj.find("file_size_bytes"); it != obj.end()) {
        if (!it->is_number() || it->get<double>() < 0) r.fail("file_size_bytes must be a non-negative number");
        trace.header.file_size_bytes = it->get<double>();
      }
      first = false;
      continue;
    }
    first = false;
    trace.events.push_back(parse_event(obj, line));
  }
  if (!have_codec) throw DataError("trace has no header naming its codec and no codec was given");
  return trace;
}

DecodeTrace parse_trace_file(const std::string& path, const TraceDefaults& defaults) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open trace");
  TraceDefaults d = defaults;
  if (d.stream_id.empty()) {
    auto slash = path.find_last_of('/');
    d.stream_id = slash == std::string::npos ? path : path.substr(slash + 1);
    if (auto dot = d.stream_id.rfind('.'); dot != std::string::npos && dot > 0) d.stream_id.resize(dot);
  }
  try {
    return parse_trace(in, d);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_trace(std::ostream& out, const DecodeTrace& trace) {
  json header{{"stream_id", trace.header.stream_id}, {"codec", to_string(trace.header.codec)}};
  if (trace.header.width > 0) header["width"] = trace.header.width;
  if (trace.header.height > 0) header["height"] = trace.header.height;
  if (trace.header.file_size_bytes > 0) header["file_size_bytes"] = trace.header.file_size_bytes;
  out << header.dump() << '\n';
  for (const auto& ev : trace.events) {
    json j = std::visit(
        [](const auto& e) -> json {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, FrameStart>) {
            json f{{"event", "frame_start"}};
            if (e.intra) f["intra"] = true;
            return f;
          } else if constexpr (std::is_same_v<T, IntraBlock>) {
            return {{"event", "intra"}, {"w", e.w}, {"h", e.h}};
          } else if constexpr (std::is_same_v<T, InterBlock>) {
            return {{"event", "inter"}, {"w", e.w},           {"h", e.h},       {"bipred", e.bipred},
                    {"frac_h", e.frac_h}, {"frac_v", e.frac_v}, {"obmc", e.obmc}};
          } else if constexpr (std::is_same_v<T, TransformBlock>) {
            return {{"event", "transform"}, {"w", e.w}, {"h", e.h}};
          } else if constexpr (std::is_same_v<T, Coefficient>) {
            json c{{"event", "coeff"}, {"value", e.value}};
            if (e.coded_bits > 0) c["bits"] = e.coded_bits;
            c["entropy"] = e.entropy ? std::string(to_string(*e.entropy)) : std::string("na");
            return c;
          } else {
            return {{"event", "sao"}};
          }
        },
        ev);
    out << j.dump() << '\n';
  }
}

std::vector<WeightedFeature> map_inter_block(Codec codec, int w, int h) {
  return map_block(codec, FeatureKind::inter, inter_rule(codec), w, h);
}

std::vector<WeightedFeature> map_intra_block(Codec codec, int w, int h) {
  return map_block(codec, FeatureKind::intra, intra_rule(codec), w, h);
}

std::vector<WeightedFeature> map_transform_block(Codec codec, int w, int h) {
  return map_block(codec, FeatureKind::trans, transform_rule(codec), w, h);
}

double coeff_value_contribution(Codec codec, long value, int coded_bits) {
  if (value == 0) throw DataError("zero coefficient");
  if (codec == Codec::hevc) return std::log2(std::fabs(static_cast<double>(value)));
  if (coded_bits <= 0)
    throw DataError("coefficient without coded bits in a " + std::string(to_string(codec)) + " trace");
  return static_cast<double>(coded_bits);
}

PelCounts pel_and_frac_counts(const InterBlock& block) {
  const double base = static_cast<double>(block.w) * static_cast<double>(block.h);
  const double hypotheses = block.bipred ? 2.0 : 1.0;
  const double dims = (block.frac_h ? 1.0 : 0.0) + (block.frac_v ? 1.0 : 0.0);
  return {base * hypotheses, base * dims * hypotheses};
}

FeatureVector analyze(const DecodeTrace& trace) {
  const Codec codec = trace.codec();
  const FeatureSet& fs = feature_set(codec);
  FeatureVector out = FeatureVector::empty_stream(codec);
  auto& n = out.counts;

  auto bump = [&](const FeatureId& id, double w) { n[static_cast<Eigen::Index>(*fs.index_of(id))] += w; };
  auto bump_all = [&](const std::vector<WeightedFeature>& mapped) {
    for (const auto& m : mapped) bump(m.feature, m.weight);
  };

  const auto frame_idx = fs.require("frame");
  const auto pel_idx = fs.require("pel");
  const auto frac_idx = fs.require("frac");
  bool in_frame = false;
  std::size_t event_no = 0;

  for (const auto& ev : trace.events) {
    ++event_no;
    auto context = [&] { return "event " + std::to_string(event_no) + " of " + trace.stream_id() + ": "; };
    if (std::holds_alternative<FrameStart>(ev)) {
      in_frame = true;
      n[static_cast<Eigen::Index>(frame_idx)] += 1.0;
      continue;
    }
    if (!in_frame) throw DataError(context() + "block event before the first frame_start");

    try {
      if (const auto* b = std::get_if<IntraBlock>(&ev)) {
        bump_all(map_intra_block(codec, b->w, b->h));
      } else if (const auto* b = std::get_if<InterBlock>(&ev)) {
        auto mapped = map_inter_block(codec, b->w, b->h);
        if (b->obmc) {
          if (codec != Codec::h263) throw DataError("OBMC only exists in H.263");
          bump(plain(codec, FeatureKind::obmc), mapped.front().weight);
        } else {
          bump_all(mapped);
        }
        const auto pc = pel_and_frac_counts(*b);
        n[static_cast<Eigen::Index>(pel_idx)] += pc.pels;
        n[static_cast<Eigen::Index>(frac_idx)] += pc.fracs;
      } else if (const auto* b = std::get_if<TransformBlock>(&ev)) {
        bump_all(map_transform_block(codec, b->w, b->h));
      } else if (const auto* c = std::get_if<Coefficient>(&ev)) {
        std::optional<EntropyMode> mode;
        if (codec == Codec::h264) {
          if (!c->entropy) throw DataError("H.264 coefficient without entropy mode (cavlc|cabac)");
          mode = c->entropy;
        } else if (c->entropy) {
          throw DataError("entropy mode is only distinguished for H.264");
        }
        bump(plain(codec, FeatureKind::coeff, mode), 1.0);
        bump(plain(codec, FeatureKind::val, mode), coeff_value_contribution(codec, c->value, c->coded_bits));
      } else if (std::holds_alternative<SaoBlock>(ev)) {
        if (codec != Codec::hevc) throw DataError("SAO only exists in HEVC");
        bump(plain(codec, FeatureKind::sao), 1.0);
      }
    } catch (const DataError& e) {
      throw DataError(context() + e.what());
    }
  }
  return out;
}

int count_frames(const DecodeTrace& trace) {
  return static_cast<int>(std::count_if(trace.events.begin(), trace.events.end(),
                                        [](const DecodeEvent& e) { return std::holds_alternative<FrameStart>(e); }));
}

int count_intra_frames(const DecodeTrace& trace) {
  return static_cast<int>(std::count_if(trace.events.begin(), trace.events.end(), [](const DecodeEvent& e) {
    const auto* f = std::get_if<FrameStart>(&e);
    return f != nullptr && f->intra;
  }));
}

}  // namespace decegy
