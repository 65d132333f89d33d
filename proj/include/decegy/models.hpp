#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>

#include "decegy/error.hpp"
#include "decegy/taxonomy.hpp"

namespace decegy {

/// Neumaier-compensated inner product. Feature counts span ~10 orders of
/// magnitude (pel vs E0), so plain summation loses the small terms.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar compensated_dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  eigen_assert(a.size() == b.size());
  Scalar sum(0);
  Scalar carry(0);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Scalar term = a.derived().coeff(i) * b.derived().coeff(i);
    const Scalar t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      carry += (sum - t) + term;
    } else {
      carry += (term - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

/// Per-occurrence energies e_f in joules, in canonical feature order.
struct SpecificEnergies {
  Codec codec{};
  Eigen::VectorXd energies;

  const FeatureSet& feature_set() const { return decegy::feature_set(codec); }
  double operator[](std::string_view name) const { return energies[feature_set().require(name)]; }
  double& operator[](std::string_view name) { return energies[feature_set().require(name)]; }

  static SpecificEnergies zero(Codec c) {
    return {c, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(decegy::feature_set(c).size()))};
  }
};

/// Stream-level facts used by the high-level models.
struct HighLevelInfo {
  double pixels_per_frame = 0;  // S, luma samples
  double frames = 0;            // N
  double file_size_bytes = 0;   // B
  double intra_rate = 0;        // p_I in [0,1]

  double pixel_count() const { return pixels_per_frame * frames; }
  double bytes_per_pixel() const { return file_size_bytes / pixel_count(); }
};

/// Throws DataError when S, N, B are not positive or p_I is outside [0,1].
void check_high_level(const HighLevelInfo& h);

/// E = C + S*N*(alpha + beta*(B/(S*N))^gamma)
template <typename Scalar>
struct Hl1Params {
  Scalar offset{0};         // C, J
  Scalar per_pixel{0};      // alpha, J/pixel
  Scalar rate_scale{0};     // beta, J/pixel
  Scalar rate_exponent{1};  // gamma
};
using HL1Params = Hl1Params<double>;

/// E = (c1*p_I*B/(S*N) + c2*p_I + c3*B/(S*N) + c4) * N * S
template <typename Scalar>
struct Hl2Params {
  Eigen::Matrix<Scalar, 4, 1> c = Eigen::Matrix<Scalar, 4, 1>::Zero();
};
using HL2Params = Hl2Params<double>;

template <typename Scalar>
Scalar predict_hl1(const Hl1Params<Scalar>& p, const HighLevelInfo& h) {
  using std::pow;
  const Scalar pixels(h.pixel_count());
  const Scalar x = Scalar(h.file_size_bytes) / pixels;
  return p.offset + pixels * (p.per_pixel + p.rate_scale * pow(x, p.rate_exponent));
}

/// Regressor row (p_I*x, p_I, x, 1) * N*S with x = B/(S*N).
inline Eigen::Vector4d hl2_regressors(const HighLevelInfo& h) {
  const double pixels = h.pixel_count();
  const double x = h.bytes_per_pixel();
  return Eigen::Vector4d(h.intra_rate * x, h.intra_rate, x, 1.0) * pixels;
}

template <typename Scalar>
Scalar predict_hl2(const Hl2Params<Scalar>& p, const HighLevelInfo& h) {
  const Scalar pixels(h.pixel_count());
  const Scalar x = Scalar(h.file_size_bytes) / pixels;
  const Scalar pi(h.intra_rate);
  return (p.c[0] * pi * x + p.c[1] * pi + p.c[2] * x + p.c[3]) * pixels;
}

/// Sum over features of n_f * e_f. Throws DataError on codec or length mismatch.
double predict_feature_model(const SpecificEnergies& e, const FeatureVector& n);

using CategoryEnergies = std::array<double, kCategoryCount>;

inline double category_value(const CategoryEnergies& c, Category cat) {
  return c[static_cast<std::size_t>(cat)];
}

/// Estimated energy split by feature category.
CategoryEnergies category_breakdown(const SpecificEnergies& e, const FeatureVector& n);

enum class ModelKind { feature, hl1, hl2 };
std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view text);

/// Fitted parameters of any of the three models, tagged with the codec of
/// the data they were trained on.
struct ModelParams {
  Codec codec{};
  std::variant<SpecificEnergies, HL1Params, HL2Params> params;

  ModelKind kind() const { return static_cast<ModelKind>(params.index()); }
};

nlohmann::json to_json(const ModelParams& p);
ModelParams model_params_from_json(const nlohmann::json& j);

}  // namespace decegy
