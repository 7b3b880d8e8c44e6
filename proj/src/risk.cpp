#include "misslin/risk.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace misslin {

double binomial_ci_halfwidth(double r, std::size_t n) {
  return n == 0 ? 0.0 : 1.96 * std::sqrt(r * (1 - r) / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Closed-form Bayes risks

namespace {

/// |Sigma_obs^{-1/2} (mu_1 - mu_-1)_obs|
double mahalanobis_gap(const LdaModel& model, const Pattern& m) {
  if (m.is_all_missing()) return 0.0;
  const Vec gap = gather_observed(model.gap(), m);
  if (gap.isZero(0.0)) return 0.0;
  const SpdMatrix sub = m.is_complete() ? model.sigma : submatrix(model.sigma, m);
  return std::sqrt(sub.inverse_quadratic(gap));
}

double two_class_risk(double norm, double pi_pos, double pi_neg) {
  if (norm == 0.0) return std::min(pi_pos, pi_neg);
  const double a = std::log(pi_neg / pi_pos) / norm;
  const double b = norm / 2;
  return pi_neg * std_normal_cdf(-a - b) + pi_pos * std_normal_cdf(a - b);
}

}  // namespace

double bayes_risk_pattern(const LdaModel& model, const Pattern& m) {
  return two_class_risk(mahalanobis_gap(model, m), model.pi_pos, model.pi_neg());
}

double bayes_risk_complete(const LdaModel& model) {
  const double norm = mahalanobis_gap(model, Pattern::complete(model.dim()));
  if (norm == 0.0) throw ZeroSignal(std::min(model.pi_pos, model.pi_neg()));
  return two_class_risk(norm, model.pi_pos, model.pi_neg());
}

double mcar_pattern_probability(const Vec& eta, const Pattern& m) {
  double p = 1;
  for (int j = 0; j < m.dim(); ++j) p *= m.missing(j) ? eta(j) : 1 - eta(j);
  return p;
}

double bayes_risk_missing_mcar(const LdaModel& model, const Vec& eta) {
  const int d = model.dim();
  if (eta.size() != d) throw DimMismatch("eta length differs from model dimension");
  if (d > kMaxEnumerationDim)
    throw DimensionTooLarge("exact Bayes risk enumeration requires d <= 20; use the sampled estimate");
  // Neumaier-compensated sum over patterns
  double sum = 0;
  double comp = 0;
  for_each_pattern(d, [&](const Pattern& m) {
    const double pm = mcar_pattern_probability(eta, m);
    if (pm == 0.0) return;
    const double term = pm * bayes_risk_pattern(model, m);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  });
  return sum + comp;
}

RiskReport bayes_risk_missing_mcar_sampled(const LdaModel& model, const Vec& eta, std::size_t n_patterns, Rng& rng) {
  const int d = model.dim();
  if (eta.size() != d) throw DimMismatch("eta length differs from model dimension");
  double sum = 0;
  double sum_sq = 0;
  for (std::size_t i = 0; i < n_patterns; ++i) {
    std::uint64_t bits = 0;
    for (int j = 0; j < d; ++j)
      if (rng.bernoulli(eta(j))) bits |= std::uint64_t{1} << j;
    const double r = bayes_risk_pattern(model, Pattern(bits, d));
    sum += r;
    sum_sq += r * r;
  }
  RiskReport rep;
  rep.n_test = n_patterns;
  rep.risk_estimate = sum / static_cast<double>(n_patterns);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n_patterns) - rep.risk_estimate * rep.risk_estimate);
  rep.ci_halfwidth = 1.96 * std::sqrt(var / static_cast<double>(n_patterns));
  return rep;
}

// ---------------------------------------------------------------------------
// Bounds

double BoundInputs::epsilon() const { return eta + std::exp(-snr() * snr() / 8) * (1 - eta); }

BoundInputs BoundInputs::from_model(const LdaModel& model, double eta, double n) {
  BoundInputs b;
  b.d = model.dim();
  b.n = n;
  b.eta = eta;
  const Vec gap = model.gap().cwiseAbs();
  b.mu = gap(0);
  if ((gap.array() - b.mu).abs().maxCoeff() > 1e-12 * std::max(1.0, b.mu))
    throw Error("bound inputs need equal-magnitude mean gaps |(mu_1 - mu_-1)_j| = mu");
  const EigenExtremes ev = eigen_extremes(model.sigma);
  b.lambda_min = ev.lambda_min;
  b.lambda_max = ev.lambda_max;
  b.kappa = model.sigma.matrix().diagonal().maxCoeff() / ev.lambda_min;
  b.mu_inf_norm = std::max(model.mu_pos.cwiseAbs().maxCoeff(), model.mu_neg.cwiseAbs().maxCoeff());
  return b;
}

namespace {

/// x^k - y^k for 0 <= y <= x, computed as y^k expm1(k log1p((x - y)/y)) when y > 0.
double power_difference(double x, double y, int k) {
  if (k == 0) return 0.0;
  if (y == 0.0) return std::pow(x, k);
  return std::pow(y, k) * std::expm1(k * std::log1p((x - y) / y));
}

}  // namespace

double bias_bound(const BoundInputs& b) {
  const double eta_d = std::pow(b.eta, b.d);
  if (b.eta == 0.0) return 0.0;
  const double coeff = b.mu * b.eta / (2 * std::sqrt(2 * M_PI)) * std::sqrt(b.d / b.lambda_min);
  return eta_d / 2 + coeff * power_difference(b.epsilon(), b.eta, b.d - 1);
}

double estimation_bound(const BoundInputs& b) {
  const double decay = std::exp(b.n * std::log((1 + b.eta) / 2));
  const double inner = decay * b.mu_inf_norm * b.mu_inf_norm * b.d * (1 - b.eta) / b.lambda_min + 4 * b.kappa * b.d / b.n;
  return 2 / std::sqrt(2 * M_PI) * std::sqrt(inner);
}

double estimation_bound_asymptotic(const BoundInputs& b) {
  return 2 / std::sqrt(2 * M_PI) * std::sqrt(4 * b.kappa * b.d / b.n);
}

double combined_bound(const BoundInputs& b) { return estimation_bound(b) + bias_bound(b); }

MnarBound mnar_bound(const GpmmModel& model, double tau, double n) {
  MnarBound out;
  out.tau_below_rate = tau < std::sqrt(model.dim() / n);
  const double c1 = 4 / std::sqrt(2 * M_PI);
  const double c2 = 8 / std::sqrt(M_PI);
  const double c3 = std::sqrt(2.0) / std::sqrt(M_PI);
  for (const auto& [m, c] : model.components()) {
    MnarBoundTerms t;
    t.pattern = m;
    t.p = c.p();
    if (c.sigma) {
      t.mu_norm_pos = c.mu_pos.norm();
      t.mu_norm_neg = c.mu_neg.norm();
      t.mu_norm = std::max(t.mu_norm_pos, t.mu_norm_neg);
      t.lambda_min = eigen_extremes(*c.sigma).lambda_min;
    }
    const double ratio = c.sigma ? t.mu_norm / std::sqrt(t.lambda_min) : 0.0;
    t.capped_term = (c1 + c2 * ratio) * std::min(tau, t.p);
    if (t.p >= tau) t.tail_term = c3 * ratio * t.p * std::exp(n / 2 * std::log1p(-t.p));
    out.capped_sum += t.capped_term;
    out.tail_sum += t.tail_term;
    out.complexity += std::min(tau, t.p);
    out.terms.push_back(t);
  }
  out.total = out.capped_sum + out.tail_sum;
  return out;
}

double pattern_complexity(const GpmmModel& model, double tau) {
  double s = 0;
  for (const auto& [m, c] : model.components()) s += std::min(tau, c.p());
  return s;
}

MisclassProbs conditional_misclass_prob(const Vec& mu_hat_pos, const Vec& mu_hat_neg, const LdaModel& model,
                                        const Pattern& m) {
  if (m.is_all_missing()) throw DegenerateDirection();
  const Vec gap_hat = gather_observed(mu_hat_pos - mu_hat_neg, m);
  if (gap_hat.isZero(0.0)) throw DegenerateDirection();
  const SpdMatrix sub = m.is_complete() ? model.sigma : submatrix(model.sigma, m);
  const Vec mid_hat = gather_observed(0.5 * (mu_hat_pos + mu_hat_neg), m);
  const Vec dir = sub.solve(gap_hat);  // Sigma_obs^{-1} gap_hat
  const double scale = std::sqrt(gap_hat.dot(dir));
  const double fp_arg = dir.dot(gather_observed(model.mu_neg, m) - mid_hat) / scale;
  const double fn_arg = -dir.dot(gather_observed(model.mu_pos, m) - mid_hat) / scale;
  return {std_normal_cdf(fp_arg), std_normal_cdf(fn_arg), false};
}

MisclassProbs conditional_misclass_prob_or_constant(const Vec& mu_hat_pos, const Vec& mu_hat_neg,
                                                    const LdaModel& model, const Pattern& m) {
  try {
    return conditional_misclass_prob(mu_hat_pos, mu_hat_neg, model, m);
  } catch (const DegenerateDirection&) {
    // decision value is 0 everywhere: sign(0) = +1 always predicts the positive class
    return {1.0, 0.0, true};
  }
}

double plugin_lda_risk_mcar(const Vec& mu_hat_pos, const Vec& mu_hat_neg, const LdaModel& model, const Vec& eta) {
  double risk = 0;
  for_each_pattern(model.dim(), [&](const Pattern& m) {
    const double pm = mcar_pattern_probability(eta, m);
    if (pm == 0.0) return;
    const MisclassProbs p = conditional_misclass_prob_or_constant(mu_hat_pos, mu_hat_neg, model, m);
    risk += pm * (model.pi_neg() * p.false_pos + model.pi_pos * p.false_neg);
  });
  return risk;
}

// ---------------------------------------------------------------------------
// Monte Carlo

MaskedSource lda_source(const LdaModel& model, MechanismSpec mechanism) {
  return [model, mechanism](std::size_t n, Rng& rng) {
    const LabeledData data = sample_lda(model, static_cast<Eigen::Index>(n), rng);
    return apply_mechanism(data, mechanism, rng);
  };
}

MaskedSource logistic_source(const LogisticModel& model, MechanismSpec mechanism) {
  return [model, mechanism](std::size_t n, Rng& rng) {
    const LabeledData data = sample_logistic(model, static_cast<Eigen::Index>(n), rng);
    return apply_mechanism(data, mechanism, rng);
  };
}

MaskedSource gpmm_source(const GpmmModel& model) {
  return [model](std::size_t n, Rng& rng) { return sample_gpmm(model, static_cast<Eigen::Index>(n), rng); };
}

std::size_t count_errors(const MaskedClassifier& clf, const MaskedDataset& test) {
  std::size_t errors = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = test.row(i);
    errors += clf.predict(r) != r.label;
  }
  return errors;
}

RiskReport risk_on(const MaskedClassifier& clf, const MaskedDataset& test) {
  RiskReport rep;
  rep.n_test = test.size();
  rep.errors = count_errors(clf, test);
  rep.risk_estimate = rep.n_test ? static_cast<double>(rep.errors) / static_cast<double>(rep.n_test) : 0.0;
  rep.ci_halfwidth = binomial_ci_halfwidth(rep.risk_estimate, rep.n_test);
  return rep;
}

RiskReport monte_carlo_risk(const MaskedClassifier& clf, const MaskedSource& source, std::size_t n_test, Rng& rng,
                            int threads) {
  if (n_test < 100) throw Error("monte_carlo_risk: n_test must be >= 100");
  constexpr std::size_t kShard = 1 << 15;
  const std::size_t shards = (n_test + kShard - 1) / kShard;
  std::vector<std::size_t> errors(shards, 0);
  auto run_shard = [&](std::size_t s) {
    Rng shard_rng = rng.split("mc-shard", s);
    const std::size_t len = std::min(kShard, n_test - s * kShard);
    errors[s] = count_errors(clf, source(len, shard_rng));
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || shards == 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, shards); ++w)
      pool.emplace_back([&] {
        for (std::size_t s; (s = next.fetch_add(1)) < shards;) run_shard(s);
      });
  }
  RiskReport rep;
  rep.n_test = n_test;
  for (std::size_t e : errors) rep.errors += e;
  rep.risk_estimate = static_cast<double>(rep.errors) / static_cast<double>(n_test);
  rep.ci_halfwidth = binomial_ci_halfwidth(rep.risk_estimate, n_test);
  return rep;
}

}  // namespace misslin
