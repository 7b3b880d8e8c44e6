#include "misslin/oracles.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace misslin {

namespace {

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0 / base;
  double r = 0;
  while (i > 0) {
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
    f /= base;
  }
  return r;
}

GaussianRule build_rule(int k) {
  GaussianRule rule;
  if (k == 0) {
    rule.nodes = Mat(0, 1);
    rule.weights = Vec::Ones(1);
    return rule;
  }
  if (k <= 3) {
    const auto& gh = gauss_hermite_probabilists(k <= 2 ? 32 : 10);
    const auto per_axis = static_cast<Eigen::Index>(gh.nodes.size());
    Eigen::Index total = 1;
    for (int a = 0; a < k; ++a) total *= per_axis;
    rule.nodes.resize(k, total);
    rule.weights.resize(total);
    for (Eigen::Index t = 0; t < total; ++t) {
      Eigen::Index rem = t;
      double w = 1;
      for (int a = 0; a < k; ++a) {
        const auto idx = static_cast<std::size_t>(rem % per_axis);
        rem /= per_axis;
        rule.nodes(a, t) = gh.nodes[idx];
        w *= gh.weights[idx];
      }
      rule.weights(t) = w;
    }
    return rule;
  }
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                   59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
  if (k > static_cast<int>(std::size(primes))) throw DimensionTooLarge("quadrature limited to 32 missing coordinates");
  constexpr Eigen::Index kPoints = 1024;
  rule.nodes.resize(k, kPoints);
  rule.weights = Vec::Constant(kPoints, 1.0 / kPoints);
  for (Eigen::Index t = 0; t < kPoints; ++t)
    for (int a = 0; a < k; ++a)
      rule.nodes(a, t) = std_normal_quantile(radical_inverse(static_cast<std::uint64_t>(t + 1), primes[a]));
  return rule;
}

}  // namespace

const GaussianRule& gaussian_rule(int k) {
  static std::mutex mu;
  static std::map<int, GaussianRule> rules;
  std::lock_guard lock(mu);
  auto it = rules.find(k);
  if (it == rules.end()) it = rules.emplace(k, build_rule(k)).first;
  return it->second;
}

const ConditionalGaussian& ConditionalCache::get(const Pattern& m) const {
  {
    std::shared_lock lock(mu_);
    if (auto it = cache_.find(m); it != cache_.end()) return *it->second;
  }
  auto cg = std::make_unique<ConditionalGaussian>();
  cg->obs = m.obs_indices();
  cg->mis = m.mis_indices();
  const auto no = static_cast<Eigen::Index>(cg->obs.size());
  const auto nm = static_cast<Eigen::Index>(cg->mis.size());
  const Mat& s = sigma_.matrix();
  Mat s_mm(nm, nm), s_mo(nm, no);
  for (Eigen::Index i = 0; i < nm; ++i) {
    for (Eigen::Index j = 0; j < nm; ++j) s_mm(i, j) = s(cg->mis[i], cg->mis[j]);
    for (Eigen::Index j = 0; j < no; ++j) s_mo(i, j) = s(cg->mis[i], cg->obs[j]);
  }
  if (no > 0 && nm > 0) {
    const SpdMatrix s_oo = submatrix(sigma_, m);
    cg->gain = Eigen::LLT<Mat>(s_oo.matrix()).solve(s_mo.transpose()).transpose();
  } else {
    cg->gain = Mat::Zero(nm, no);
  }
  Mat cond = s_mm - cg->gain * s_mo.transpose();
  cond = 0.5 * (cond + cond.transpose()).eval();
  cg->chol = nm > 0 ? Mat(Eigen::LLT<Mat>(cond).matrixL()) : Mat(0, 0);
  std::unique_lock lock(mu_);
  auto [it, inserted] = cache_.try_emplace(m, std::move(cg));
  return *it->second;
}

// ---------------------------------------------------------------------------

LogisticBayes::LogisticBayes(LogisticModel model, std::optional<Vec> self_mask_intercepts)
    : model_(std::move(model)), intercepts_(std::move(self_mask_intercepts)), cache_(model_.sigma_x) {
  if (intercepts_ && intercepts_->size() != model_.dim()) throw DimMismatch("intercepts length differs from d");
}

double LogisticBayes::posterior(const Pattern& m, std::span<const double> observed) const {
  const ConditionalGaussian& cg = cache_.get(m);
  const auto no = static_cast<Eigen::Index>(cg.obs.size());
  const auto nm = static_cast<Eigen::Index>(cg.mis.size());
  Vec x_obs(no);
  double lin = model_.beta0;
  for (Eigen::Index k = 0; k < no; ++k) {
    x_obs(k) = observed[static_cast<std::size_t>(k)];
    lin += model_.beta(cg.obs[k]) * x_obs(k);
  }
  if (nm == 0) return sigmoid(lin);
  const Vec cond_mean = cg.gain * x_obs;
  Vec beta_mis(nm);
  for (Eigen::Index k = 0; k < nm; ++k) beta_mis(k) = model_.beta(cg.mis[k]);

  if (!intercepts_) {
    // beta_mis^T X_mis is a scalar Gaussian: one-dimensional Gauss-Hermite
    const double mean = lin + beta_mis.dot(cond_mean);
    const double sd = (cg.chol.transpose() * beta_mis).norm();
    const auto& gh = gauss_hermite_probabilists(32);
    double p = 0;
    for (std::size_t t = 0; t < gh.nodes.size(); ++t) p += gh.weights[t] * sigmoid(mean + sd * gh.nodes[t]);
    return p;
  }
  const GaussianRule& rule = gaussian_rule(static_cast<int>(nm));
  double num = 0;
  double den = 0;
  Vec x_mis(nm);
  for (Eigen::Index t = 0; t < rule.weights.size(); ++t) {
    x_mis = cond_mean + cg.chol * rule.nodes.col(t);
    double g = rule.weights(t);
    for (Eigen::Index k = 0; k < nm; ++k) g *= sigmoid((*intercepts_)(cg.mis[k]) + x_mis(k));
    den += g;
    num += g * sigmoid(lin + beta_mis.dot(x_mis));
  }
  return den > 0 ? num / den : 0.5;
}

SelfMaskLdaBayes::SelfMaskLdaBayes(LdaModel model, Vec intercepts)
    : model_(std::move(model)), intercepts_(std::move(intercepts)), cache_(model_.sigma) {
  if (intercepts_.size() != model_.dim()) throw DimMismatch("intercepts length differs from d");
}

double SelfMaskLdaBayes::posterior(const Pattern& m, std::span<const double> observed) const {
  const ConditionalGaussian& cg = cache_.get(m);
  const auto no = static_cast<Eigen::Index>(cg.obs.size());
  const auto nm = static_cast<Eigen::Index>(cg.mis.size());
  const Vec x_obs = Eigen::Map<const Vec>(observed.data(), no);

  double log_odds = std::log(model_.pi_pos / model_.pi_neg());
  if (no > 0) log_odds += lda_rule(model_.mu_pos, model_.mu_neg, model_.sigma, m).decision(observed);
  if (nm > 0) {
    const GaussianRule& rule = gaussian_rule(static_cast<int>(nm));
    auto mask_mass = [&](const Vec& mu) {
      Vec mu_obs(no), mu_mis(nm);
      for (Eigen::Index k = 0; k < no; ++k) mu_obs(k) = mu(cg.obs[k]);
      for (Eigen::Index k = 0; k < nm; ++k) mu_mis(k) = mu(cg.mis[k]);
      const Vec cond_mean = mu_mis + cg.gain * (x_obs - mu_obs);
      double h = 0;
      Vec x_mis(nm);
      for (Eigen::Index t = 0; t < rule.weights.size(); ++t) {
        x_mis = cond_mean + cg.chol * rule.nodes.col(t);
        double g = rule.weights(t);
        for (Eigen::Index k = 0; k < nm; ++k) g *= sigmoid(intercepts_(cg.mis[k]) + x_mis(k));
        h += g;
      }
      return h;
    };
    const double h_pos = mask_mass(model_.mu_pos);
    const double h_neg = mask_mass(model_.mu_neg);
    if (h_pos > 0 && h_neg > 0) log_odds += std::log(h_pos) - std::log(h_neg);
  }
  return sigmoid(log_odds);
}

RiskReport posterior_bayes_risk(const PosteriorClassifier& oracle, const MaskedDataset& test) {
  RiskReport rep;
  rep.n_test = test.size();
  double sum = 0;
  double sum_sq = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = test.row(i);
    const double p = oracle.posterior(r.pattern, r.observed);
    const double e = std::min(p, 1 - p);
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(test.size());
  rep.risk_estimate = sum / n;
  rep.ci_halfwidth = 1.96 * std::sqrt(std::max(0.0, sum_sq / n - rep.risk_estimate * rep.risk_estimate) / n);
  return rep;
}

}  // namespace misslin
