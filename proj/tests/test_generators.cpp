#include "misslin/classifiers.hpp"
#include "misslin/generators.hpp"
#include "misslin/missingness.hpp"
#include "misslin/separability.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace misslin;

namespace {

struct ClassMoments {
  Vec mean_pos, mean_neg, var_pos, var_neg;
  double n_pos = 0, n_neg = 0;
};

ClassMoments class_moments(const Mat& x, const std::vector<int>& y) {
  const Eigen::Index d = x.cols();
  ClassMoments m{Vec::Zero(d), Vec::Zero(d), Vec::Zero(d), Vec::Zero(d)};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (y[i] == 1) {
      m.mean_pos += x.row(i).transpose();
      m.n_pos += 1;
    } else {
      m.mean_neg += x.row(i).transpose();
      m.n_neg += 1;
    }
  }
  m.mean_pos /= m.n_pos;
  m.mean_neg /= m.n_neg;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vec r = x.row(i).transpose() - (y[i] == 1 ? m.mean_pos : m.mean_neg);
    (y[i] == 1 ? m.var_pos : m.var_neg) += r.cwiseProduct(r);
  }
  m.var_pos /= m.n_pos - 1;
  m.var_neg /= m.n_neg - 1;
  return m;
}

LdaModel unit_lda() { return LdaModel(Vec::Ones(2), -Vec::Ones(2), SpdMatrix::identity(2)); }

}  // namespace

TEST(SampleLda, ClassMeansWithinCltTolerance) {
  Rng rng(10);
  const auto data = sample_lda(unit_lda(), 100000, rng);
  const auto m = class_moments(data.x, data.y);
  const double tol = 3 * std::sqrt(1.0 / 1e5 * 2);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(m.mean_pos(j), 1.0, tol);
    EXPECT_NEAR(m.mean_neg(j), -1.0, tol);
  }
}

TEST(SampleLda, LabelFraction) {
  Rng rng(11);
  const auto data = sample_lda(unit_lda(), 1000000, rng);
  const double pos = std::count(data.y.begin(), data.y.end(), 1) / 1e6;
  EXPECT_NEAR(pos, 0.5, 0.0015);
}

TEST(SampleLda, SingularCovarianceRejected) {
  EXPECT_THROW(LdaModel(Vec::Zero(2), Vec::Ones(2), SpdMatrix(Vec{{0.0, 1.0}}.asDiagonal().toDenseMatrix())),
               NotPd);
}

TEST(SampleLda, CovarianceMatchesToeplitz) {
  Rng rng(12);
  const LdaModel model(Vec::Zero(3), Vec::Zero(3), SpdMatrix::toeplitz(3, 0.6));
  const auto data = sample_lda(model, 200000, rng);
  const Mat centered = data.x.rowwise() - data.x.colwise().mean();
  const Mat cov = centered.transpose() * centered / (data.n() - 1.0);
  EXPECT_LT((cov - model.sigma.matrix()).cwiseAbs().maxCoeff(), 0.02);
}

TEST(SampleLogistic, CoinFlip) {
  Rng rng(13);
  const auto data = sample_logistic(LogisticModel(0.0, Vec::Zero(2), SpdMatrix::identity(2)), 1000000, rng);
  EXPECT_NEAR(std::count(data.y.begin(), data.y.end(), 1) / 1e6, 0.5, 0.0015);
}

TEST(SampleLogistic, SaturatedIntercept) {
  Rng rng(14);
  const auto data = sample_logistic(LogisticModel(10.0, Vec::Zero(2), SpdMatrix::identity(2)), 100000, rng);
  EXPECT_GE(std::count(data.y.begin(), data.y.end(), 1) / 1e5, 0.9999);
}

TEST(SampleLogistic, BinConditionalFrequency) {
  Rng rng(15);
  const auto data = sample_logistic(LogisticModel(0.0, Vec{{1.0, 0.0}}, SpdMatrix::identity(2)), 1000000, rng);
  double in_bin = 0, pos = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.x(i, 0) >= 0.9 && data.x(i, 0) <= 1.1) {
      in_bin += 1;
      pos += data.y[i] == 1;
    }
  }
  EXPECT_NEAR(pos / in_bin, 1.0 / (1.0 + std::exp(-1.0)), 0.02);
}

TEST(SampleGpmm, SinglePatternIsUnmaskedLda) {
  const GpmmModel model = GpmmModel::from_lda_mcar(unit_lda(), Vec::Zero(2));
  ASSERT_EQ(model.components().size(), 1u);
  Rng rng(16);
  const auto ds = sample_gpmm(model, 50000, rng);
  const auto h = pattern_histogram(ds);
  ASSERT_EQ(h.size(), 1u);
  const auto sub = ds.rows_with_pattern(Pattern::complete(2));
  const auto m = class_moments(sub.x, sub.y);
  const double tol = 4 * std::sqrt(2.0 / 50000);
  EXPECT_NEAR(m.mean_pos(0), 1.0, tol);
  EXPECT_NEAR(m.mean_neg(1), -1.0, tol);
}

TEST(SampleGpmm, PatternFrequenciesAndMeans) {
  std::map<Pattern, GpmmComponent> comps;
  comps[Pattern::parse("01")] = {Vec{{5.0}}, Vec{{-5.0}}, SpdMatrix::identity(1), 0.35, 0.35};
  comps[Pattern::parse("00")] = {Vec::Ones(2), -Vec::Ones(2), SpdMatrix::identity(2), 0.15, 0.15};
  const GpmmModel model(2, comps);
  EXPECT_TRUE(model.pattern_balanced());
  Rng rng(17);
  const std::size_t n = 100000;
  const auto ds = sample_gpmm(model, n, rng);
  const auto h = pattern_histogram(ds);
  const double sd = std::sqrt(n * 0.7 * 0.3);
  EXPECT_NEAR(static_cast<double>(h.at(Pattern::parse("01")).total), 0.7 * n, 3 * sd);

  const auto sub = ds.rows_with_pattern(Pattern::parse("01"));
  ASSERT_EQ(sub.dim(), 1);
  const auto m = class_moments(sub.x, sub.y);
  EXPECT_NEAR(m.mean_pos(0), 5.0, 3 / std::sqrt(m.n_pos));
  EXPECT_NEAR(m.mean_neg(0), -5.0, 3 / std::sqrt(m.n_neg));
}

TEST(SampleGpmm, LdaMcarComponentsSumToOne) {
  const GpmmModel model = GpmmModel::from_lda_mcar(unit_lda(), Vec{{0.3, 0.6}});
  double total = 0;
  for (const auto& [m, c] : model.components()) total += c.p();
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(model.components().size(), 4u);
  EXPECT_NEAR(model.find(Pattern::parse("11"))->p(), 0.18, 1e-12);
}

TEST(TwoBalls, L2Containment) {
  Rng rng(18);
  const BallConfig cfg{Vec::Zero(2), Vec{{4.0, 0.0}}};
  const auto data = sample_two_balls_with_radii(cfg, 1.0, 1.0, 5000, rng);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Vec c = data.y[i] == 1 ? cfg.c1 : cfg.c2;
    ASSERT_LE((data.x.row(i).transpose() - c).norm(), 1.0);
  }
}

TEST(TwoBalls, LinfContainment) {
  Rng rng(19);
  BallConfig cfg{Vec::Zero(2), Vec{{4.0, 0.0}}};
  cfg.norm_p = std::numeric_limits<double>::infinity();
  const auto data = sample_two_balls_with_radii(cfg, 1.0, 1.0, 5000, rng);
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (data.y[i] == 1) ASSERT_LE(data.x.row(i).cwiseAbs().maxCoeff(), 1.0);
}

TEST(TwoBalls, DrawnRadiiSeparateCompleteData) {
  Rng rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 4;
    const BallConfig cfg{rng.normal_vector(d), rng.normal_vector(d)};
    const auto s = sample_two_balls(cfg, 200, rng);
    const double gap = (cfg.c1 - cfg.c2).norm();
    ASSERT_LE(s.r1, gap / 2);
    ASSERT_LE(s.r2, gap / 2);
    ASSERT_TRUE(balls_disjoint(cfg.c1, cfg.c2, s.r1, s.r2, 2.0));
    // the hyperplane orthogonal to c1 - c2 through the point at distance r1 from c1 separates the balls
    const Vec u = (cfg.c1 - cfg.c2) / gap;
    const double t = u.dot(cfg.c1) - (s.r1 + (gap - s.r1 - s.r2) / 2);
    for (Eigen::Index i = 0; i < s.data.n(); ++i)
      ASSERT_EQ(sign(u.dot(s.data.x.row(i).transpose()) - t), s.data.y[i]);
  }
}

TEST(TwoBalls, EqualRadiusMode) {
  Rng rng(21);
  BallConfig cfg{Vec::Zero(3), Vec{{1.0, 2.0, 2.0}}};
  cfg.radius_mode = RadiusMode::UniformEqual;
  cfg.norm_p = 1.0;
  const auto s = sample_two_balls(cfg, 100, rng);
  EXPECT_EQ(s.r1, s.r2);
  EXPECT_LE(s.r1, 2.5);
  for (Eigen::Index i = 0; i < s.data.n(); ++i) {
    const Vec c = s.data.y[i] == 1 ? cfg.c1 : cfg.c2;
    ASSERT_LE(lp_norm(s.data.x.row(i).transpose() - c, 1.0), s.r1);
  }
}

TEST(LpNorm, Examples) {
  const Vec v{{3.0, -4.0}};
  EXPECT_DOUBLE_EQ(lp_norm(v, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(lp_norm(v, 1.0), 7.0);
  EXPECT_DOUBLE_EQ(lp_norm(v, std::numeric_limits<double>::infinity()), 4.0);
}

TEST(PerceptronCounterexample, CompleteSeparableMaskedNot) {
  const auto ce = perceptron_counterexample();
  EXPECT_EQ(ce.complete.y[0], -ce.complete.y[1]);
  EXPECT_TRUE(train_perceptron(ce.complete.x, ce.complete.y, 1000).converged);

  const auto a = ce.masked.row(0), b = ce.masked.row(1);
  ASSERT_EQ(a.pattern, b.pattern);
  EXPECT_TRUE(a.pattern.missing(ce.masked_coordinate));
  ASSERT_EQ(a.observed.size(), b.observed.size());
  EXPECT_EQ(std::memcmp(a.observed.data(), b.observed.data(), a.observed.size() * sizeof(double)), 0);
  EXPECT_EQ(a.label, -b.label);

  const auto sub = ce.masked.rows_with_pattern(a.pattern);
  const auto fit = train_perceptron(sub.x, sub.y, 1000);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.epochs, 1000);
}

TEST(SelfMask, CalibrationHitsTargetRate) {
  const std::vector<GaussianComponent> mix{{0.5, -2.0, 1.0}, {0.5, 3.0, 1.5}};
  for (double eta : {0.1, 0.5, 0.8}) {
    const double b = calibrate_self_mask_intercept(mix, eta);
    EXPECT_NEAR(self_mask_rate(mix, b), eta, 1e-9);
  }
  // Monte Carlo oracle for the rate itself
  Rng rng(22);
  double acc = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const auto& c = mix[rng.bernoulli(0.5) ? 0 : 1];
    acc += sigmoid(0.3 + c.mean + c.sd * rng.normal());
  }
  EXPECT_NEAR(self_mask_rate(mix, 0.3), acc / n, 0.003);
}

TEST(Presets, DeterministicUnderModelSeed) {
  const CovarianceSpec cov = CovarianceSpec::parse("toeplitz(0.6)");
  Rng a(99), b(99);
  const LdaModel m1 = preset_fig1_lda(5, cov, a);
  const LdaModel m2 = preset_fig1_lda(5, cov, b);
  EXPECT_EQ(m1.mu_pos, m2.mu_pos);
  EXPECT_EQ(m1.mu_neg, m2.mu_neg);
  const Vec step = (m1.mu_pos - m1.mu_neg).cwiseAbs();
  for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(step(j), 1.5);
  EXPECT_NEAR(m1.sigma(0, 1), 0.6, 1e-15);

  Rng c(7), e(7);
  const LogisticModel l1 = preset_fig1_logistic(4, CovarianceSpec{}, c);
  const LogisticModel l2 = preset_fig1_logistic(4, CovarianceSpec{}, e);
  EXPECT_EQ(l1.beta, l2.beta);
  EXPECT_EQ(l1.beta0, 0.0);
}

TEST(Presets, CovarianceSpecRoundTrip) {
  for (const std::string s : {"identity", "toeplitz(0.6)"}) EXPECT_EQ(CovarianceSpec::parse(s).str(), s);
  EXPECT_THROW(CovarianceSpec::parse("banded"), Error);
}

TEST(Generators, DeterministicUnderSeed) {
  Rng a(5), b(5);
  const auto x = sample_lda(unit_lda(), 1000, a);
  const auto y = sample_lda(unit_lda(), 1000, b);
  EXPECT_EQ(x.x, y.x);
  EXPECT_EQ(x.y, y.y);
}

TEST(GaussianProjection, ObservedBlockMomentsUnderMcar) {
  Rng rng(23);
  const LdaModel model(Vec{{1.0, -2.0, 0.5}}, Vec{{0.0, 1.0, -0.5}}, SpdMatrix::toeplitz(3, 0.6));
  const auto ds = apply_mechanism(sample_lda(model, 100000, rng), mcar_constant(3, 0.3), rng);
  for (const auto& [m, c] : pattern_histogram(ds)) {
    if (m.is_all_missing() || c.pos < 1000 || c.neg < 1000) continue;
    const auto sub = ds.rows_with_pattern(m);
    const auto mom = class_moments(sub.x, sub.y);
    const auto obs = m.obs_indices();
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const int j = obs[k];
      const double var = model.sigma(j, j);
      EXPECT_NEAR(mom.mean_pos(k), model.mu_pos(j), 4 * std::sqrt(var / mom.n_pos)) << m.str();
      EXPECT_NEAR(mom.mean_neg(k), model.mu_neg(j), 4 * std::sqrt(var / mom.n_neg)) << m.str();
      EXPECT_NEAR(mom.var_pos(k), var, 4 * var * std::sqrt(2 / (mom.n_pos - 1))) << m.str();
      EXPECT_NEAR(mom.var_neg(k), var, 4 * var * std::sqrt(2 / (mom.n_neg - 1))) << m.str();
    }
  }
}
