#include "decegy/models.hpp"

namespace decegy {
namespace {

void check_shared(const SpecificEnergies& e, const FeatureVector& n) {
  if (e.codec != n.codec)
    throw DataError("feature-set mismatch: energies for " + std::string(to_string(e.codec)) + ", counts for " +
                    std::string(to_string(n.codec)));
  if (e.energies.size() != n.counts.size())
    throw DataError("feature-set mismatch: " + std::to_string(e.energies.size()) + " energies vs " +
                    std::to_string(n.counts.size()) + " counts");
}

}  // namespace

void check_high_level(const HighLevelInfo& h) {
  if (!(h.pixels_per_frame > 0) || !(h.frames > 0) || !(h.file_size_bytes > 0))
    throw DataError("high-level info needs positive resolution, frame count and file size");
  if (!(h.intra_rate >= 0.0 && h.intra_rate <= 1.0)) throw DataError("intra-frame rate outside [0,1]");
}

double predict_feature_model(const SpecificEnergies& e, const FeatureVector& n) {
  check_shared(e, n);
  return compensated_dot(n.counts, e.energies);
}

CategoryEnergies category_breakdown(const SpecificEnergies& e, const FeatureVector& n) {
  check_shared(e, n);
  const FeatureSet& fs = e.feature_set();
  CategoryEnergies out{};
  for (Category cat : kAllCategories) {
    Eigen::VectorXd masked = Eigen::VectorXd::Zero(e.energies.size());
    for (std::size_t i = 0; i < fs.size(); ++i)
      if (fs[i].category == cat) masked[static_cast<Eigen::Index>(i)] = e.energies[static_cast<Eigen::Index>(i)];
    out[static_cast<std::size_t>(cat)] = compensated_dot(n.counts, masked);
  }
  return out;
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::feature: return "feature";
    case ModelKind::hl1: return "hl1";
    case ModelKind::hl2: return "hl2";
  }
  return "";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "feature") return ModelKind::feature;
  if (text == "hl1") return ModelKind::hl1;
  if (text == "hl2") return ModelKind::hl2;
  return std::nullopt;
}

nlohmann::json to_json(const ModelParams& p) {
  nlohmann::json j{{"model", to_string(p.kind())}, {"codec", to_string(p.codec)}};
  if (const auto* e = std::get_if<SpecificEnergies>(&p.params)) {
    nlohmann::json energies = nlohmann::json::object();
    const auto& fs = e->feature_set();
    for (std::size_t i = 0; i < fs.size(); ++i) energies[fs[i].name()] = e->energies[static_cast<Eigen::Index>(i)];
    j["energies"] = std::move(energies);
  } else if (const auto* h1 = std::get_if<HL1Params>(&p.params)) {
    j["C"] = h1->offset;
    j["alpha"] = h1->per_pixel;
    j["beta"] = h1->rate_scale;
    j["gamma"] = h1->rate_exponent;
  } else {
    const auto& h2 = std::get<HL2Params>(p.params);
    for (int i = 0; i < 4; ++i) j["c" + std::to_string(i + 1)] = h2.c[i];
  }
  return j;
}

ModelParams model_params_from_json(const nlohmann::json& j) {
  auto number = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw DataError(std::string("parameter file: missing number '") + key + "'");
    return it->get<double>();
  };
  if (!j.is_object() || !j.contains("model") || !j.contains("codec"))
    throw DataError("parameter file: expected an object with 'model' and 'codec'");
  const auto kind = parse_model_kind(j.at("model").get<std::string>());
  if (!kind) throw DataError("parameter file: unknown model '" + j.at("model").get<std::string>() + "'");
  const auto codec = parse_codec(j.at("codec").get<std::string>());
  if (!codec) throw DataError("parameter file: unknown codec '" + j.at("codec").get<std::string>() + "'");

  ModelParams out{*codec, HL1Params{}};
  switch (*kind) {
    case ModelKind::feature: {
      auto e = SpecificEnergies::zero(*codec);
      const auto& energies = j.at("energies");
      const auto& fs = feature_set(*codec);
      for (auto it = energies.begin(); it != energies.end(); ++it) {
        auto idx = fs.index_of(it.key());
        if (!idx)
          throw DataError("parameter file: feature '" + it.key() + "' is not counted for " +
                          std::string(to_string(*codec)));
        e.energies[static_cast<Eigen::Index>(*idx)] = it.value().get<double>();
      }
      for (const auto& name : fs.names())
        if (!energies.contains(name)) throw DataError("parameter file: missing energy for '" + name + "'");
      out.params = std::move(e);
      break;
    }
    case ModelKind::hl1:
      out.params = HL1Params{number("C"), number("alpha"), number("beta"), number("gamma")};
      break;
    case ModelKind::hl2: {
      HL2Params p;
      p.c = Eigen::Vector4d(number("c1"), number("c2"), number("c3"), number("c4"));
      out.params = p;
      break;
    }
  }
  return out;
}

}  // namespace decegy
