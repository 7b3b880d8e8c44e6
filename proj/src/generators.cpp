#include "misslin/generators.hpp"

#include <charconv>
#include <cmath>

namespace misslin {

LdaModel::LdaModel(Vec mu_pos_, Vec mu_neg_, SpdMatrix sigma_, double pi_pos_)
    : mu_pos(std::move(mu_pos_)), mu_neg(std::move(mu_neg_)), sigma(std::move(sigma_)), pi_pos(pi_pos_) {
  if (mu_pos.size() != mu_neg.size() || mu_pos.size() != sigma.dim())
    throw DimMismatch("LdaModel: mean and covariance dimensions differ");
  if (!(pi_pos > 0.0 && pi_pos < 1.0)) throw Error("LdaModel: pi_pos must lie in (0, 1)");
}

LogisticModel::LogisticModel(double beta0_, Vec beta_, SpdMatrix sigma_x_)
    : beta0(beta0_), beta(std::move(beta_)), sigma_x(std::move(sigma_x_)) {
  if (beta.size() != sigma_x.dim()) throw DimMismatch("LogisticModel: beta and covariance dimensions differ");
  if (!std::isfinite(beta0) || !beta.allFinite()) throw Error("LogisticModel: coefficients must be finite");
}

GpmmModel::GpmmModel(int dim, std::map<Pattern, GpmmComponent> components) : dim_(dim) {
  double total = 0;
  for (auto& [m, c] : components) {
    if (m.dim() != dim) throw DimMismatch("GpmmModel: pattern dimension differs");
    if (c.pi_pos < 0 || c.pi_neg < 0) throw Error("GpmmModel: negative probability");
    if (c.p() == 0.0) continue;  // zero-probability patterns are not stored
    const int k = m.n_observed();
    if (c.mu_pos.size() != k || c.mu_neg.size() != k) throw DimMismatch("GpmmModel: mean length != |obs(m)|");
    if (k > 0 && (!c.sigma || c.sigma->dim() != k)) throw DimMismatch("GpmmModel: covariance size != |obs(m)|");
    total += c.p();
    components_.emplace(m, std::move(c));
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("GpmmModel: pattern probabilities must sum to 1");
}

GpmmModel GpmmModel::from_lda_mcar(const LdaModel& model, const Vec& eta) {
  const int d = model.dim();
  if (eta.size() != d) throw DimMismatch("from_lda_mcar: eta length differs");
  std::map<Pattern, GpmmComponent> comps;
  for_each_pattern(d, [&](const Pattern& m) {
    double pm = 1;
    for (int j = 0; j < d; ++j) pm *= m.missing(j) ? eta(j) : 1 - eta(j);
    if (pm == 0.0) return;
    GpmmComponent c;
    c.mu_pos = gather_observed(model.mu_pos, m);
    c.mu_neg = gather_observed(model.mu_neg, m);
    if (!m.is_all_missing()) c.sigma = submatrix(model.sigma, m);
    c.pi_pos = pm * model.pi_pos;
    c.pi_neg = pm * model.pi_neg();
    comps.emplace(m, std::move(c));
  });
  return GpmmModel(d, std::move(comps));
}

const GpmmComponent* GpmmModel::find(const Pattern& m) const {
  auto it = components_.find(m);
  return it == components_.end() ? nullptr : &it->second;
}

bool GpmmModel::pattern_balanced(double tol) const {
  for (const auto& [m, c] : components_)
    if (std::abs(c.pi_pos - c.pi_neg) > tol) return false;
  return true;
}

double lp_norm(const Vec& v, double p) {
  if (std::isinf(p)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  if (p == 2.0) return v.norm();
  if (p == 1.0) return v.cwiseAbs().sum();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Sampling

LabeledData sample_lda(const LdaModel& model, Eigen::Index n, Rng& rng) {
  const int d = model.dim();
  const Mat& chol = model.sigma.cholesky_factor();
  LabeledData out{Mat(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = rng.bernoulli(model.pi_pos) ? 1 : -1;
    const Vec z = rng.normal_vector(d);
    out.x.row(i) = ((y == 1 ? model.mu_pos : model.mu_neg) + chol * z).transpose();
    out.y[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

LabeledData sample_logistic(const LogisticModel& model, Eigen::Index n, Rng& rng) {
  const int d = model.dim();
  const Mat& chol = model.sigma_x.cholesky_factor();
  LabeledData out{Mat(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec x = chol * rng.normal_vector(d);
    out.x.row(i) = x.transpose();
    out.y[static_cast<std::size_t>(i)] = rng.bernoulli(sigmoid(model.beta0 + model.beta.dot(x))) ? 1 : -1;
  }
  return out;
}

MaskedDataset sample_gpmm(const GpmmModel& model, Eigen::Index n, Rng& rng) {
  // cumulative table over (pattern, class)
  struct Cell {
    const Pattern* m;
    const GpmmComponent* c;
    int y;
    double cum;
  };
  std::vector<Cell> cells;
  double acc = 0;
  for (const auto& [m, c] : model.components()) {
    if (c.pi_pos > 0) cells.push_back({&m, &c, 1, acc += c.pi_pos});
    if (c.pi_neg > 0) cells.push_back({&m, &c, -1, acc += c.pi_neg});
  }
  MaskedDataset ds(model.dim());
  ds.reserve(static_cast<std::size_t>(n), static_cast<std::size_t>(n * model.dim()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::lower_bound(cells.begin(), cells.end(), u, [](const Cell& c, double v) { return c.cum <= v; });
    if (it == cells.end()) --it;
    const GpmmComponent& c = *it->c;
    Vec obs = it->y == 1 ? c.mu_pos : c.mu_neg;
    if (c.sigma) obs += c.sigma->cholesky_factor() * rng.normal_vector(static_cast<int>(obs.size()));
    ds.add(*it->m, std::span<const double>(obs.data(), static_cast<std::size_t>(obs.size())), it->y);
  }
  return ds;
}

namespace {

Vec uniform_in_ball(const Vec& center, double radius, double p, Rng& rng) {
  const auto d = center.size();
  if (radius == 0.0) return center;
  Vec offset(d);
  for (;;) {
    for (Eigen::Index j = 0; j < d; ++j) offset(j) = rng.uniform(-radius, radius);
    if (lp_norm(offset, p) <= radius) return center + offset;
  }
}

}  // namespace

LabeledData sample_two_balls_with_radii(const BallConfig& cfg, double r1, double r2, Eigen::Index n_per_class,
                                        Rng& rng) {
  if (cfg.c1.size() != cfg.c2.size()) throw DimMismatch("two balls: centroid dimensions differ");
  const int d = static_cast<int>(cfg.c1.size());
  LabeledData out{Mat(2 * n_per_class, d), std::vector<int>(static_cast<std::size_t>(2 * n_per_class))};
  for (Eigen::Index i = 0; i < n_per_class; ++i) {
    out.x.row(i) = uniform_in_ball(cfg.c1, r1, cfg.norm_p, rng).transpose();
    out.y[static_cast<std::size_t>(i)] = 1;
  }
  for (Eigen::Index i = 0; i < n_per_class; ++i) {
    out.x.row(n_per_class + i) = uniform_in_ball(cfg.c2, r2, cfg.norm_p, rng).transpose();
    out.y[static_cast<std::size_t>(n_per_class + i)] = -1;
  }
  return out;
}

TwoBallSample sample_two_balls(const BallConfig& cfg, Eigen::Index n_per_class, Rng& rng) {
  if (cfg.c1 == cfg.c2) throw Error("two balls: centroids must differ");
  double r1 = 0;
  double r2 = 0;
  if (cfg.radius_mode == RadiusMode::UniformPaired) {
    const double half = 0.5 * (cfg.c1 - cfg.c2).norm();
    r1 = rng.uniform(0, half);
    r2 = rng.uniform(0, half);
  } else {
    r1 = rng.uniform(0, 0.5 * lp_norm(cfg.c1 - cfg.c2, cfg.norm_p));
    r2 = r1;
  }
  return {sample_two_balls_with_radii(cfg, r1, r2, n_per_class, rng), r1, r2};
}

PerceptronCounterexample perceptron_counterexample() {
  constexpr int kMasked = 1;
  LabeledData complete{Mat(2, 2), {1, -1}};
  complete.x << 1.0, 1.0,  //
      1.0, -1.0;
  MaskedDataset masked(2);
  const Pattern m(std::uint64_t{1} << kMasked, 2);
  for (Eigen::Index i = 0; i < 2; ++i) masked.add_masked(complete.x.row(i).transpose(), m, complete.y[i]);
  return {std::move(complete), std::move(masked), kMasked};
}

// ---------------------------------------------------------------------------
// Presets and self-masking calibration

std::vector<GaussianComponent> marginal(const LdaModel& model, int j) {
  const double sd = std::sqrt(model.sigma(j, j));
  return {{model.pi_pos, model.mu_pos(j), sd}, {model.pi_neg(), model.mu_neg(j), sd}};
}

std::vector<GaussianComponent> marginal(const LogisticModel& model, int j) {
  return {{1.0, 0.0, std::sqrt(model.sigma_x(j, j))}};
}

double self_mask_rate(const std::vector<GaussianComponent>& marginal, double intercept) {
  const auto& gh = gauss_hermite_probabilists(64);
  double rate = 0;
  for (const auto& c : marginal)
    for (std::size_t k = 0; k < gh.nodes.size(); ++k)
      rate += c.weight * gh.weights[k] * sigmoid(intercept + c.mean + c.sd * gh.nodes[k]);
  return rate;
}

double calibrate_self_mask_intercept(const std::vector<GaussianComponent>& marginal, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw Error("self-mask calibration needs eta in (0, 1)");
  double lo = -1.0;
  double hi = 1.0;
  while (self_mask_rate(marginal, lo) > eta) lo *= 2;
  while (self_mask_rate(marginal, hi) < eta) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (self_mask_rate(marginal, mid) < eta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SpdMatrix CovarianceSpec::build(int d) const {
  return kind == CovarianceKind::Identity ? SpdMatrix::identity(d) : SpdMatrix::toeplitz(d, rho);
}

std::string CovarianceSpec::str() const {
  if (kind == CovarianceKind::Identity) return "identity";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, rho);
  return "toeplitz(" + std::string(buf, res.ptr) + ")";
}

CovarianceSpec CovarianceSpec::parse(const std::string& s) {
  if (s == "identity") return {CovarianceKind::Identity, 0.0};
  if (s.rfind("toeplitz(", 0) == 0 && s.back() == ')') {
    CovarianceSpec spec{CovarianceKind::Toeplitz, std::stod(s.substr(9, s.size() - 10))};
    if (!(std::abs(spec.rho) < 1.0)) throw Error("toeplitz rho must satisfy |rho| < 1");
    return spec;
  }
  if (s == "toeplitz") return {CovarianceKind::Toeplitz, 0.6};
  throw Error("unknown covariance '" + s + "' (expected identity or toeplitz(rho))");
}

LdaModel preset_fig1_lda(int d, const CovarianceSpec& cov, Rng& model_rng) {
  Vec mu_neg = 5.0 * model_rng.normal_vector(d);
  Vec mu_pos(d);
  for (int j = 0; j < d; ++j) mu_pos(j) = mu_neg(j) + (model_rng.bernoulli(0.5) ? 1.5 : -1.5);
  return LdaModel(std::move(mu_pos), std::move(mu_neg), cov.build(d), 0.5);
}

LogisticModel preset_fig1_logistic(int d, const CovarianceSpec& cov, Rng& model_rng) {
  return LogisticModel(0.0, model_rng.normal_vector(d), cov.build(d));
}

const std::vector<PresetInfo>& preset_list() {
  static const std::vector<PresetInfo> presets = {
      {"fig1-lda",
       "LDA: mu_-1 ~ N(0, 25 I), mu_1 = mu_-1 + 1.5 * Rademacher, balanced, covariance identity or toeplitz(0.6)"},
      {"fig1-logistic", "Logistic: X ~ N(0, Sigma), beta ~ N(0, I), beta0 = 0"},
  };
  return presets;
}

}  // namespace misslin
