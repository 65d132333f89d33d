#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <array>
#include <sstream>

#include "decegy/error.hpp"
#include "decegy/random.hpp"
#include "decegy/trace.hpp"

using namespace decegy;

namespace {

DecodeTrace parse(const std::string& text, std::optional<Codec> codec = std::nullopt) {
  std::istringstream in(text);
  return parse_trace(in, TraceDefaults{codec, "t"});
}

DecodeTrace make_trace(Codec codec, std::vector<DecodeEvent> events) {
  DecodeTrace t;
  t.header.codec = codec;
  t.header.stream_id = "s";
  t.events = std::move(events);
  return t;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// Hand-written inter-block table; rows w = 4..64, columns h = 4..64.
// "S:W" means counted as inter<S> with weight W, "x" means illegal.
const std::map<Codec, std::array<std::array<const char*, 5>, 5>> kInterTable{
    {Codec::h263,
     {{{"8:1", "8:.5", "16:.5", "x", "x"},
       {"8:.5", "8:1", "16:.5", "x", "x"},
       {"16:.5", "16:.5", "16:1", "x", "x"},
       {"x", "x", "x", "x", "x"},
       {"x", "x", "x", "x", "x"}}}},
    {Codec::h264,
     {{{"4:1", "8:.5", "16:.5", "x", "x"},
       {"8:.5", "8:1", "16:.5", "x", "x"},
       {"16:.5", "16:.5", "16:1", "x", "x"},
       {"x", "x", "x", "x", "x"},
       {"x", "x", "x", "x", "x"}}}},
    {Codec::hevc,
     {{{"8:1", "8:.5", "16:.5", "32:.5", "64:.5"},
       {"8:.5", "8:1", "16:.5", "32:.5", "64:.5"},
       {"16:.5", "16:.5", "16:1", "32:.5", "64:.5"},
       {"32:.5", "32:.5", "32:.5", "32:1", "64:.5"},
       {"64:.5", "64:.5", "64:.5", "64:.5", "64:1"}}}},
    {Codec::vp9,
     {{{"4:1", "8:.5", "16:.5", "32:.5", "64:.5"},
       {"8:.5", "8:1", "16:.5", "32:.5", "64:.5"},
       {"16:.5", "16:.5", "16:1", "32:.5", "64:.5"},
       {"32:.5", "32:.5", "32:.5", "32:1", "64:.5"},
       {"64:.5", "64:.5", "64:.5", "64:.5", "64:1"}}}},
};

// Counts pels and fractional filter operations one pel at a time.
PelCounts pel_oracle(const InterBlock& b) {
  PelCounts c;
  for (int hyp = 0; hyp < (b.bipred ? 2 : 1); ++hyp)
    for (int y = 0; y < b.h; ++y)
      for (int x = 0; x < b.w; ++x) {
        c.pels += 1;
        if (b.frac_h) c.fracs += 1;
        if (b.frac_v) c.fracs += 1;
      }
  return c;
}

constexpr std::array<int, 5> kEdges{4, 8, 16, 32, 64};

// Random legal trace for property tests. Frames hold blocks of every kind.
DecodeTrace random_trace(Codec codec, Rng& rng, int frames) {
  DecodeTrace t;
  t.header.codec = codec;
  t.header.stream_id = "rnd";
  const int max_idx = (codec == Codec::h263 || codec == Codec::h264) ? 3 : 5;
  auto edge = [&] { return kEdges[rng.below(static_cast<std::uint64_t>(max_idx))]; };
  for (int f = 0; f < frames; ++f) {
    t.events.push_back(FrameStart{rng.below(4) == 0});
    const int blocks = 1 + static_cast<int>(rng.below(30));
    for (int b = 0; b < blocks; ++b) {
      switch (rng.below(codec == Codec::hevc ? 5 : 4)) {
        case 0: {
          int s = edge();
          if (codec == Codec::h263) s = 16;
          if (codec == Codec::h264) s = rng.below(2) ? 16 : 4;
          t.events.push_back(IntraBlock{s, s});
          break;
        }
        case 1: {
          InterBlock ib{edge(), edge(), rng.below(2) == 1, rng.below(2) == 1, rng.below(2) == 1, false};
          if (codec == Codec::h263) ib.obmc = rng.below(3) == 0;
          t.events.push_back(ib);
          break;
        }
        case 2: {
          const int s = edge();
          t.events.push_back(TransformBlock{s, s});
          break;
        }
        case 3: {
          Coefficient c;
          c.value = static_cast<long>(rng.below(200)) - 100;
          if (c.value == 0) c.value = 7;
          c.coded_bits = 1 + static_cast<int>(rng.below(20));
          if (codec == Codec::h264) c.entropy = rng.below(2) ? EntropyMode::cabac : EntropyMode::cavlc;
          t.events.push_back(c);
          break;
        }
        default: t.events.push_back(SaoBlock{}); break;
      }
    }
  }
  return t;
}

}  // namespace

TEST(ParseTrace, TwoEvents) {
  const auto t = parse("{\"event\":\"frame_start\"}\n{\"event\":\"sao\"}\n", Codec::hevc);
  ASSERT_EQ(t.events.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<FrameStart>(t.events[0]));
  EXPECT_TRUE(std::holds_alternative<SaoBlock>(t.events[1]));
}

TEST(ParseTrace, HeaderAndAllEventShapes) {
  const auto t = parse(
      "{\"stream_id\":\"foreman\",\"codec\":\"h264\",\"width\":352,\"height\":288,\"file_size_bytes\":31300}\n"
      "{\"event\":\"frame_start\",\"intra\":true}\n"
      "{\"event\":\"intra\",\"w\":16,\"h\":16}\n"
      "{\"event\":\"inter\",\"w\":16,\"h\":8,\"bipred\":false,\"frac_h\":true,\"frac_v\":false,\"obmc\":false}\n"
      "{\"event\":\"transform\",\"w\":4,\"h\":4}\n"
      "{\"event\":\"coeff\",\"value\":-3,\"bits\":5,\"entropy\":\"cabac\"}\n");
  EXPECT_EQ(t.stream_id(), "foreman");
  EXPECT_EQ(t.codec(), Codec::h264);
  EXPECT_EQ(t.header.width, 352);
  EXPECT_EQ(t.header.file_size_bytes, 31300);
  ASSERT_EQ(t.events.size(), 5u);
  EXPECT_EQ(std::get<FrameStart>(t.events[0]).intra, true);
  EXPECT_EQ(std::get<InterBlock>(t.events[2]), (InterBlock{16, 8, false, true, false, false}));
  EXPECT_EQ(std::get<Coefficient>(t.events[4]), (Coefficient{-3, 5, EntropyMode::cabac}));
}

TEST(ParseTrace, EmptyFileGivesEmptyTrace) {
  const auto t = parse("", Codec::hevc);
  EXPECT_TRUE(t.events.empty());
  const auto n = analyze(t);
  EXPECT_EQ(n.counts[0], 1.0);
  EXPECT_EQ(n.counts.tail(18).cwiseAbs().sum(), 0.0);
}

TEST(ParseTrace, Errors) {
  EXPECT_NE(error_of([] { parse("{\"event\":\"coeff\",\"value\":0,\"bits\":3}\n", Codec::hevc); })
                .find("zero coefficient"),
            std::string::npos);
  const auto bad_json = error_of([] { parse("{\"event\":\"sao\"}\n{\"event\": sao}\n", Codec::hevc); });
  EXPECT_NE(bad_json.find("line 2, column"), std::string::npos) << bad_json;
  EXPECT_NE(error_of([] { parse("{\"event\":\"deblock\"}\n", Codec::hevc); }).find("unknown event"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse("{\"event\":\"intra\",\"w\":12,\"h\":12}\n", Codec::hevc); }).find("outside"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse("{\"event\":\"sao\"}\n"); }).find("codec"), std::string::npos);
  EXPECT_NE(error_of([] { parse("{\"codec\":\"vp9\"}\n", Codec::hevc); }).find("differs"), std::string::npos);
}

TEST(ParseTrace, WriteRoundTrip) {
  Rng rng(7);
  for (Codec c : kAllCodecs) {
    auto t = random_trace(c, rng, 3);
    t.header.width = 416;
    t.header.height = 240;
    std::stringstream buf;
    write_trace(buf, t);
    const auto back = parse_trace(buf);
    EXPECT_EQ(back.events, t.events);
    EXPECT_EQ(back.header.width, 416);
  }
}

TEST(MapInterBlock, Examples) {
  EXPECT_EQ(map_inter_block(Codec::h264, 8, 16),
            (std::vector<WeightedFeature>{{feature_set(Codec::h264)[feature_set(Codec::h264).require("inter16")], 0.5}}));
  const auto hevc = map_inter_block(Codec::hevc, 32, 32);
  ASSERT_EQ(hevc.size(), 1u);
  EXPECT_EQ(hevc[0].feature.name(), "inter32");
  EXPECT_EQ(hevc[0].weight, 1.0);
  const auto vp9 = map_inter_block(Codec::vp9, 4, 8);
  EXPECT_EQ(vp9[0].feature.name(), "inter8");
  EXPECT_EQ(vp9[0].weight, 0.5);
}

TEST(MapInterBlock, BruteForceAgainstTable) {
  for (const auto& [codec, table] : kInterTable) {
    for (std::size_t wi = 0; wi < kEdges.size(); ++wi) {
      for (std::size_t hi = 0; hi < kEdges.size(); ++hi) {
        const std::string cell = table[wi][hi];
        const int w = kEdges[wi], h = kEdges[hi];
        SCOPED_TRACE(std::string(to_string(codec)) + " " + std::to_string(w) + "x" + std::to_string(h));
        if (cell == "x") {
          EXPECT_THROW(map_inter_block(codec, w, h), DataError);
          continue;
        }
        const auto colon = cell.find(':');
        const std::string size = cell.substr(0, colon);
        const double weight = std::stod("0" + cell.substr(colon + 1));
        const auto mapped = map_inter_block(codec, w, h);
        ASSERT_EQ(mapped.size(), 1u);
        EXPECT_EQ(mapped[0].feature.name(), "inter" + size);
        EXPECT_EQ(mapped[0].weight, weight);
        EXPECT_TRUE(feature_set(codec).index_of(mapped[0].feature));
      }
    }
  }
}

TEST(MapIntraAndTransform, ClampAndReject) {
  EXPECT_EQ(map_intra_block(Codec::hevc, 64, 64)[0].feature.name(), "intra32");
  EXPECT_EQ(map_intra_block(Codec::hevc, 64, 64)[0].weight, 1.0);
  EXPECT_EQ(map_intra_block(Codec::h264, 4, 4)[0].feature.name(), "intra4");
  EXPECT_THROW(map_intra_block(Codec::h264, 8, 8), DataError);
  EXPECT_THROW(map_intra_block(Codec::hevc, 8, 16), DataError);
  EXPECT_EQ(map_transform_block(Codec::h263, 4, 4)[0].feature.name(), "trans8");
  EXPECT_EQ(map_transform_block(Codec::h263, 16, 16)[0].feature.name(), "trans8");
  EXPECT_EQ(map_transform_block(Codec::h264, 16, 16)[0].feature.name(), "trans4");
  EXPECT_EQ(map_transform_block(Codec::vp9, 16, 16)[0].feature.name(), "trans16");
  EXPECT_THROW(map_transform_block(Codec::h264, 32, 32), DataError);
}

TEST(CoeffValue, Contributions) {
  EXPECT_EQ(coeff_value_contribution(Codec::hevc, 4, 0), 2.0);
  EXPECT_EQ(coeff_value_contribution(Codec::hevc, -2, 9), 1.0);
  EXPECT_EQ(coeff_value_contribution(Codec::hevc, 1, 0), 0.0);
  EXPECT_EQ(coeff_value_contribution(Codec::h264, -3, 5), 5.0);
  EXPECT_EQ(coeff_value_contribution(Codec::vp9, 100, 11), 11.0);
  EXPECT_THROW(coeff_value_contribution(Codec::hevc, 0, 1), DataError);
  EXPECT_THROW(coeff_value_contribution(Codec::h263, 5, 0), DataError);
}

TEST(CoeffValue, Log2AgainstHighPrecision) {
  using boost::multiprecision::cpp_bin_float_50;
  for (long v : {3L, -5L, 7L, 1000L, -123457L}) {
    const cpp_bin_float_50 ref = log(cpp_bin_float_50(std::abs(v))) / log(cpp_bin_float_50(2));
    EXPECT_NEAR(coeff_value_contribution(Codec::hevc, v, 0), ref.convert_to<double>(), 1e-15) << v;
  }
  EXPECT_NEAR(coeff_value_contribution(Codec::hevc, 3, 0), 1.58496, 1e-5);
}

TEST(PelAndFrac, Examples) {
  auto c = pel_and_frac_counts(InterBlock{8, 8, true, false, false, false});
  EXPECT_EQ(c.pels, 128);
  EXPECT_EQ(c.fracs, 0);
  c = pel_and_frac_counts(InterBlock{16, 16, false, true, false, false});
  EXPECT_EQ(c.pels, 256);
  EXPECT_EQ(c.fracs, 256);
  c = pel_and_frac_counts(InterBlock{4, 4, false, false, false, false});
  EXPECT_EQ(c.pels, 16);
  EXPECT_EQ(c.fracs, 0);
}

TEST(PelAndFrac, MatchesPerPelOracleAndScalesWithArea) {
  for (int w : kEdges)
    for (int h : kEdges)
      for (int mask = 0; mask < 8; ++mask) {
        const InterBlock b{w, h, (mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, false};
        const auto got = pel_and_frac_counts(b);
        const auto ref = pel_oracle(b);
        EXPECT_EQ(got.pels, ref.pels);
        EXPECT_EQ(got.fracs, ref.fracs);
        EXPECT_GE(got.pels, got.fracs / 2);
        EXPECT_GE(got.fracs, 0);
        const auto doubled = pel_and_frac_counts(InterBlock{2 * w, h, b.bipred, b.frac_h, b.frac_v, false});
        EXPECT_EQ(doubled.pels, 2 * got.pels);
        EXPECT_EQ(doubled.fracs, 2 * got.fracs);
      }
}

TEST(Analyze, EmptyHevcTrace) {
  const auto n = analyze(make_trace(Codec::hevc, {}));
  ASSERT_EQ(n.counts.size(), 19);
  EXPECT_EQ(n["e0"], 1.0);
  EXPECT_EQ(n.counts.sum(), 1.0);
}

TEST(Analyze, H263Obmc) {
  const auto n = analyze(make_trace(Codec::h263, {FrameStart{}, InterBlock{16, 16, false, false, false, true}}));
  EXPECT_EQ(n["frame"], 1);
  EXPECT_EQ(n["obmc"], 1);
  EXPECT_EQ(n["inter16"], 0);
  EXPECT_EQ(n["pel"], 256);
}

TEST(Analyze, HevcIntraTransformCoefficients) {
  const auto n = analyze(make_trace(Codec::hevc, {FrameStart{}, IntraBlock{16, 16}, TransformBlock{4, 4},
                                                  Coefficient{4, 0, {}}, Coefficient{-2, 0, {}}, Coefficient{1, 0, {}}}));
  EXPECT_EQ(n["intra16"], 1);
  EXPECT_EQ(n["trans4"], 1);
  EXPECT_EQ(n["coeff"], 3);
  EXPECT_EQ(n["val"], 3.0);
  EXPECT_EQ(n["frame"], 1);
  EXPECT_EQ(n["e0"], 1);
}

TEST(Analyze, H264EntropyRouting) {
  const auto n = analyze(make_trace(Codec::h264, {FrameStart{}, Coefficient{-3, 5, EntropyMode::cabac},
                                                  Coefficient{2, 3, EntropyMode::cavlc},
                                                  Coefficient{9, 7, EntropyMode::cavlc}}));
  EXPECT_EQ(n["coeff_cabac"], 1);
  EXPECT_EQ(n["val_cabac"], 5);
  EXPECT_EQ(n["coeff_cavlc"], 2);
  EXPECT_EQ(n["val_cavlc"], 10);
}

TEST(Analyze, BitsBasedValueOutsideHevc) {
  for (Codec c : {Codec::h263, Codec::vp9}) {
    const auto n = analyze(make_trace(c, {FrameStart{}, Coefficient{-40, 12, {}}}));
    EXPECT_EQ(n["coeff"], 1);
    EXPECT_EQ(n["val"], 12);
  }
}

TEST(Analyze, HalfWeightBipredAndFractional) {
  const auto n = analyze(make_trace(Codec::h264, {FrameStart{}, InterBlock{8, 16, true, true, true, false},
                                                  InterBlock{16, 8, false, false, true, false}}));
  EXPECT_EQ(n["inter16"], 1.0);  // two halves
  EXPECT_EQ(n["pel"], 8 * 16 * 2 + 16 * 8);
  EXPECT_EQ(n["frac"], 8 * 16 * 2 * 2 + 16 * 8);
}

TEST(Analyze, SaoCounting) {
  const auto n = analyze(make_trace(Codec::hevc, {FrameStart{}, SaoBlock{}, SaoBlock{}, FrameStart{}, SaoBlock{}}));
  EXPECT_EQ(n["sao"], 3);
  EXPECT_EQ(n["frame"], 2);
}

TEST(Analyze, IllegalEventsForCodec) {
  EXPECT_THROW(analyze(make_trace(Codec::vp9, {FrameStart{}, SaoBlock{}})), DataError);
  EXPECT_THROW(analyze(make_trace(Codec::hevc, {FrameStart{}, InterBlock{16, 16, false, false, false, true}})),
               DataError);
  EXPECT_THROW(analyze(make_trace(Codec::hevc, {IntraBlock{8, 8}})), DataError);
  EXPECT_THROW(analyze(make_trace(Codec::h264, {FrameStart{}, Coefficient{1, 1, {}}})), DataError);
  EXPECT_THROW(analyze(make_trace(Codec::hevc, {FrameStart{}, Coefficient{1, 1, EntropyMode::cabac}})), DataError);
  EXPECT_THROW(analyze(make_trace(Codec::h264, {FrameStart{}, InterBlock{32, 32, false, false, false, false}})),
               DataError);
}

TEST(AnalyzeProperties, ValidFrameCountAndOrderInsensitive) {
  Rng rng(2024);
  for (int round = 0; round < 40; ++round) {
    const Codec codec = kAllCodecs[static_cast<std::size_t>(round) % 4];
    auto t = random_trace(codec, rng, 1 + static_cast<int>(rng.below(5)));
    const auto n = analyze(t);
    EXPECT_TRUE(validate_vector(feature_set(codec), n).empty());
    EXPECT_EQ(n["frame"], count_frames(t));

    // Shuffle block events inside each frame.
    auto shuffled = t;
    auto begin = shuffled.events.begin();
    while (begin != shuffled.events.end()) {
      auto end = std::find_if(begin + 1, shuffled.events.end(),
                              [](const DecodeEvent& e) { return std::holds_alternative<FrameStart>(e); });
      for (auto n_left = end - (begin + 1); n_left > 1; --n_left)
        std::iter_swap(begin + n_left, begin + 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(n_left))));
      begin = end;
    }
    const auto m = analyze(shuffled);
    for (Eigen::Index i = 0; i < n.counts.size(); ++i)
      EXPECT_NEAR(m.counts[i], n.counts[i], 1e-12 * std::max(1.0, std::abs(n.counts[i])));
  }
}

TEST(AnalyzeProperties, ConcatenationAddsCounts) {
  Rng rng(99);
  for (Codec codec : kAllCodecs) {
    const auto a = random_trace(codec, rng, 3);
    const auto b = random_trace(codec, rng, 2);
    auto ab = a;
    ab.events.insert(ab.events.end(), b.events.begin(), b.events.end());
    const auto na = analyze(a), nb = analyze(b), nab = analyze(ab);
    EXPECT_EQ(nab.counts[0], 1.0);
    for (Eigen::Index i = 1; i < nab.counts.size(); ++i)
      EXPECT_NEAR(nab.counts[i], na.counts[i] + nb.counts[i], 1e-12 * std::max(1.0, nab.counts[i]));
  }
}
