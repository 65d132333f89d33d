#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "decegy/dataset.hpp"
#include "decegy/fitting.hpp"
#include "decegy/random.hpp"

using namespace decegy;

namespace {

// Normal-equations solution, computed with a full-pivot LU in long double.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  using ML = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const ML al = a.cast<long double>();
  const VL bl = b.cast<long double>();
  const VL x = (al.transpose() * al).fullPivLu().solve(al.transpose() * bl);
  return x.cast<double>();
}

// Best non-negative solution found by trying every support set.
Eigen::VectorXd nnls_brute_force(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto n = a.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_res = b.squaredNorm();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    const Eigen::VectorXd s = normal_equations(sub, b);
    if ((s.array() < 0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = s[static_cast<Eigen::Index>(k)];
    const double res = (a * x - b).squaredNorm();
    if (res < best_res) {
      best_res = res;
      best = x;
    }
  }
  return best;
}

std::vector<HighLevelInfo> random_info(std::size_t m, Rng& rng, bool vary_intra = true) {
  std::vector<HighLevelInfo> out;
  for (std::size_t i = 0; i < m; ++i) {
    const double s = std::array{176.0 * 144, 416.0 * 240, 832.0 * 480, 1920.0 * 1080}[rng.below(4)];
    const double n = std::floor(rng.uniform(8, 61));
    const double x = std::exp(rng.uniform(std::log(0.005), std::log(0.5)));
    out.push_back({s, n, std::round(x * s * n), vary_intra ? rng.uniform(0, 1) : 1.0});
  }
  return out;
}

Eigen::VectorXd hl1_energies(const HL1Params& p, const std::vector<HighLevelInfo>& info) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(info.size()));
  for (std::size_t i = 0; i < info.size(); ++i) e[static_cast<Eigen::Index>(i)] = predict_hl1(p, info[i]);
  return e;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(LinearLs, ExactSystem) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 1, 2, 3;
  const auto fit = fit_linear_ls(a, b);
  EXPECT_NEAR(fit.coefficients[0], 1, 1e-14);
  EXPECT_NEAR(fit.coefficients[1], 2, 1e-14);
  EXPECT_EQ(fit.diagnostics.rank, 2);
  EXPECT_EQ(fit.diagnostics.method, "qr-column-pivoting");
  EXPECT_NEAR(fit.diagnostics.residual_norm, 0, 1e-14);
}

TEST(LinearLs, OverdeterminedMatchesNormalEquations) {
  Eigen::MatrixXd a(4, 2);
  a << 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd b(4);
  b << 6, 5, 7, 10;
  const auto fit = fit_linear_ls(a, b);
  EXPECT_NEAR(fit.coefficients[0], 3.5, 1e-13);
  EXPECT_NEAR(fit.coefficients[1], 1.4, 1e-13);
}

TEST(LinearLs, ResidualOrthogonalToColumns) {
  Rng rng(1);
  for (int round = 0; round < 30; ++round) {
    const Eigen::Index m = 20 + static_cast<Eigen::Index>(rng.below(40)), n = 2 + static_cast<Eigen::Index>(rng.below(10));
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double scale = std::pow(10.0, rng.uniform(-3, 6));
      for (Eigen::Index i = 0; i < m; ++i) a(i, j) = scale * rng.uniform(0, 1);
    }
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) b[i] = rng.normal();
    const auto fit = fit_linear_ls(a, b);
    const Eigen::VectorXd r = b - a * fit.coefficients;
    for (Eigen::Index j = 0; j < n; ++j)
      EXPECT_LE(std::abs(a.col(j).dot(r)), 1e-8 * a.col(j).norm() * r.norm());
  }
}

TEST(LinearLs, RecoversNineteenFeatureEnergies) {
  const auto spec = default_synth_spec(Codec::hevc, 200, 0.0, 8);
  const auto ds = synth_dataset(spec);
  const auto fit = fit_feature_model(ds.feature_vectors(), ds.energies());
  ASSERT_EQ(fit.diagnostics.rank, 19);
  for (Eigen::Index i = 0; i < 19; ++i)
    EXPECT_LT(rel(fit.energies.energies[i], spec.true_params.energies[i]), 1e-6) << i;
}

TEST(LinearLs, RankDeficientPinsColumnToZero) {
  Eigen::MatrixXd a(5, 3);
  a << 1, 2, 3, 1, 4, 5, 1, 6, 7, 1, 8, 9, 1, 1, 2;  // col2 = col0 + col1
  Eigen::VectorXd b(5);
  b << 1, 2, 3, 4, 5;
  const auto fit = fit_linear_ls(a, b, LinearFitOptions{}, {"a", "b", "c"});
  EXPECT_EQ(fit.diagnostics.rank, 2);
  ASSERT_EQ(fit.diagnostics.dropped_columns.size(), 1u);
  EXPECT_FALSE(fit.diagnostics.warnings.empty());
  int zeros = 0;
  for (Eigen::Index j = 0; j < 3; ++j) zeros += fit.coefficients[j] == 0.0;
  EXPECT_EQ(zeros, 1);
  const Eigen::VectorXd r = b - a * fit.coefficients;
  EXPECT_LE((a.transpose() * r).norm(), 1e-10 * a.norm() * b.norm());
}

TEST(Nnls, MatchesBruteForce) {
  Rng rng(31);
  for (int round = 0; round < 60; ++round) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd a(12, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0, 1);
    Eigen::VectorXd b(12);
    for (Eigen::Index i = 0; i < 12; ++i) b[i] = rng.normal();
    const auto fit = fit_linear_ls(a, b, LinearFitOptions{true});
    const auto ref = nnls_brute_force(a, b);
    EXPECT_TRUE((fit.coefficients.array() >= 0).all());
    EXPECT_LE((fit.coefficients - ref).norm(), 1e-9 * std::max(1.0, ref.norm())) << round;
    EXPECT_LE(fit.diagnostics.kkt_violation, 1e-8);
    EXPECT_EQ(fit.diagnostics.method, "nnls-active-set");
  }
}

TEST(Nnls, ClampsNegativeCoefficient) {
  Eigen::MatrixXd a(4, 2);
  a << 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd b(4);
  b << 4, 3, 2, 1;  // unconstrained slope is -1
  const auto fit = fit_linear_ls(a, b, LinearFitOptions{true}, {"offset", "slope"});
  EXPECT_EQ(fit.coefficients[1], 0.0);
  EXPECT_NEAR(fit.coefficients[0], 2.5, 1e-14);
  EXPECT_EQ(fit.diagnostics.clamped_columns, std::vector<std::string>{"slope"});
}

TEST(TrustRegion, ScalarResidual) {
  Eigen::VectorXd x0(1);
  x0 << 0;
  const auto res = fit_trust_region<double>(
      [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] - 3); },
      [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 1); }, x0);
  EXPECT_TRUE(res.converged());
  EXPECT_NEAR(res.x[0], 3, 1e-12);
}

TEST(TrustRegion, Rosenbrock) {
  auto r = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(2);
    out << 10 * (x[1] - x[0] * x[0]), 1 - x[0];
    return out;
  };
  auto j = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd out(2, 2);
    out << -20 * x[0], 10, -1, 0;
    return out;
  };
  for (auto start : {std::pair{-1.2, 1.0}, std::pair{3.0, -2.0}, std::pair{0.0, 0.0}}) {
    Eigen::VectorXd x0(2);
    x0 << start.first, start.second;
    const auto res = fit_trust_region<double>(r, j, x0);
    EXPECT_TRUE(res.converged()) << to_string(res.termination);
    EXPECT_NEAR(res.x[0], 1, 1e-6);
    EXPECT_NEAR(res.x[1], 1, 1e-6);
    for (std::size_t i = 1; i < res.accepted_costs.size(); ++i)
      EXPECT_LE(res.accepted_costs[i], res.accepted_costs[i - 1]);
  }
}

TEST(TrustRegion, RejectsNonFiniteStart) {
  Eigen::VectorXd x0(1);
  x0 << std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW((fit_trust_region<double>([](const Eigen::VectorXd& x) { return x; },
                                         [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 1); }, x0)),
               NumericalError);
}

TEST(Hl1Jacobian, MatchesCentralDifferences) {
  Rng rng(41);
  for (int round = 0; round < 100; ++round) {
    const auto info = random_info(6, rng);
    const HL1Params p{rng.uniform(0.05, 1), rng.uniform(1e-9, 1e-7), rng.uniform(1e-8, 1e-6), rng.uniform(0.3, 1.8)};
    const Eigen::VectorXd e = hl1_energies(p, info) * 1.01;
    const auto an = hl1_residuals_jacobian(p, info, e);
    const std::array<double, 4> base{p.offset, p.per_pixel, p.rate_scale, p.rate_exponent};
    for (int k = 0; k < 4; ++k) {
      const double h = 1e-5 * std::abs(base[static_cast<std::size_t>(k)]);
      auto shifted = [&](double d) {
        auto q = base;
        q[static_cast<std::size_t>(k)] += d;
        return hl1_residuals_jacobian(HL1Params{q[0], q[1], q[2], q[3]}, info, e).residuals;
      };
      const Eigen::VectorXd fd = (shifted(h) - shifted(-h)) / (2 * h);
      const double err = (fd - an.jacobian.col(k)).norm() / an.jacobian.col(k).norm();
      EXPECT_LT(err, 1e-4) << "column " << k;
    }
  }
}

TEST(Hl1Fit, RecoversNoiselessParameters) {
  Rng rng(43);
  for (double gamma : {0.7, 1.0, 1.3}) {
    const auto info = random_info(60, rng);
    const HL1Params truth{0.3, 2e-8, 4e-7, gamma};
    const auto fit = fit_hl1(info, hl1_energies(truth, info));
    EXPECT_TRUE(fit.diagnostics.converged) << fit.diagnostics.termination;
    EXPECT_LT(rel(fit.params.offset, truth.offset), 1e-3);
    EXPECT_LT(rel(fit.params.per_pixel, truth.per_pixel), 1e-3);
    EXPECT_LT(rel(fit.params.rate_scale, truth.rate_scale), 1e-3);
    EXPECT_NEAR(fit.params.rate_exponent, truth.rate_exponent, 1e-3);
    EXPECT_TRUE(fit.exponent_identifiable);
  }
}

TEST(Hl1Fit, DegenerateRateTerm) {
  Rng rng(47);
  const auto info = random_info(30, rng);
  const HL1Params truth{0.3, 2e-8, 0.0, 1.0};
  const auto fit = fit_hl1(info, hl1_energies(truth, info));
  EXPECT_FALSE(fit.exponent_identifiable);
  EXPECT_LT(rel(fit.params.offset, 0.3), 1e-4);
  EXPECT_LT(rel(fit.params.per_pixel, 2e-8), 1e-4);
}

TEST(Hl1Fit, NoisyTrainingErrorNearNoiseLevel) {
  Rng rng(53);
  const auto info = random_info(300, rng);
  const HL1Params truth{0.3, 2e-8, 4e-7, 0.8};
  Eigen::VectorXd e = hl1_energies(truth, info);
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] *= 1 + 0.05 * rng.normal();
  const auto fit = fit_hl1(info, e);
  double mre = 0;
  for (std::size_t i = 0; i < info.size(); ++i)
    mre += std::abs(predict_hl1(fit.params, info[i]) - e[static_cast<Eigen::Index>(i)]) / e[static_cast<Eigen::Index>(i)];
  mre /= static_cast<double>(info.size());
  EXPECT_LE(mre, 0.05);
  EXPECT_TRUE(fit.diagnostics.converged);
}

TEST(Hl1Fit, UnderDetermined) {
  Rng rng(59);
  const auto info = random_info(3, rng);
  EXPECT_THROW(fit_hl1(info, hl1_energies({0.3, 2e-8, 4e-7, 1.0}, info)), NumericalError);
}

TEST(Hl2Fit, RecoversAndMatchesNormalEquations) {
  Rng rng(61);
  const auto info = random_info(80, rng);
  HL2Params truth;
  truth.c << 5e-7, 1e-8, 2e-7, 3e-8;
  Eigen::VectorXd e(80), noisy(80);
  Eigen::MatrixXd a(80, 4);
  for (Eigen::Index i = 0; i < 80; ++i) {
    e[i] = predict_hl2(truth, info[static_cast<std::size_t>(i)]);
    noisy[i] = e[i] * (1 + 0.05 * rng.normal());
    a.row(i) = hl2_regressors(info[static_cast<std::size_t>(i)]).transpose();
  }
  const auto exact = fit_hl2(info, e);
  for (int k = 0; k < 4; ++k) EXPECT_LT(rel(exact.params.c[k], truth.c[k]), 1e-8);
  const auto fit = fit_hl2(info, noisy);
  const auto ref = normal_equations(a, noisy);
  for (int k = 0; k < 4; ++k) EXPECT_LT(rel(fit.params.c[k], ref[k]), 1e-8);
  EXPECT_EQ(fit_hl2(info, noisy).params.c, fit.params.c);
}

TEST(Hl2Fit, AllIntraIsRankDeficient) {
  Rng rng(67);
  const auto info = random_info(40, rng, false);
  HL2Params truth;
  truth.c << 5e-7, 1e-8, 2e-7, 3e-8;
  Eigen::VectorXd e(40);
  for (Eigen::Index i = 0; i < 40; ++i) e[i] = predict_hl2(truth, info[static_cast<std::size_t>(i)]);
  const auto fit = fit_hl2(info, e);
  EXPECT_EQ(fit.diagnostics.rank, 2);
  EXPECT_EQ(fit.diagnostics.dropped_columns.size(), 2u);
  EXPECT_FALSE(fit.diagnostics.warnings.empty());
  for (std::size_t i = 0; i < info.size(); ++i)
    EXPECT_LT(rel(predict_hl2(fit.params, info[i]), e[static_cast<Eigen::Index>(i)]), 1e-9);
}

TEST(Hl2Fit, UnderDetermined) {
  Rng rng(71);
  const auto info = random_info(3, rng);
  EXPECT_THROW(fit_hl2(info, Eigen::VectorXd::Ones(3)), NumericalError);
}

TEST(FeatureFit, NonNegativeClampsAndReportsKkt) {
  auto spec = default_synth_spec(Codec::h263, 60, 0.0, 3);
  spec.true_params["obmc"] = -1e-6;
  const auto ds = synth_dataset(spec);
  const auto free_fit = fit_feature_model(ds.feature_vectors(), ds.energies());
  EXPECT_LT(free_fit.energies["obmc"], 0);
  const auto fit = fit_feature_model(ds.feature_vectors(), ds.energies(), true);
  EXPECT_EQ(fit.energies["obmc"], 0.0);
  EXPECT_TRUE((fit.energies.energies.array() >= 0).all());
  EXPECT_NE(std::find(fit.diagnostics.clamped_columns.begin(), fit.diagnostics.clamped_columns.end(), "obmc"),
            fit.diagnostics.clamped_columns.end());
  EXPECT_LE(fit.diagnostics.kkt_violation, 1e-8);
}

TEST(Fits, BitIdenticalOnRepeat) {
  const auto ds = synth_dataset(default_synth_spec(Codec::h264, 70, 0.05, 21));
  const auto a = fit_feature_model(ds.feature_vectors(), ds.energies());
  const auto b = fit_feature_model(ds.feature_vectors(), ds.energies());
  EXPECT_EQ(a.energies.energies, b.energies.energies);
  const auto n1 = fit_feature_model(ds.feature_vectors(), ds.energies(), true);
  const auto n2 = fit_feature_model(ds.feature_vectors(), ds.energies(), true);
  EXPECT_EQ(n1.energies.energies, n2.energies.energies);
  const auto info = ds.high_level();
  const auto h1 = fit_hl1(info, ds.energies());
  const auto h2 = fit_hl1(info, ds.energies());
  EXPECT_EQ(h1.params.offset, h2.params.offset);
  EXPECT_EQ(h1.params.per_pixel, h2.params.per_pixel);
  EXPECT_EQ(h1.params.rate_scale, h2.params.rate_scale);
  EXPECT_EQ(h1.params.rate_exponent, h2.params.rate_exponent);
  EXPECT_EQ(h1.diagnostics.iterations, h2.diagnostics.iterations);
}
