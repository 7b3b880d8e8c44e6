#pragma once

#include "misslin/classifiers.hpp"
#include "misslin/generators.hpp"
#include "misslin/risk.hpp"

#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

namespace misslin {

/// Gaussian expectation rule E[f(Z)], Z ~ N(0, I_k): tensor Gauss-Hermite for
/// k <= 3 (32 nodes per axis up to k = 2, 10 for k = 3), a 1024-point Halton
/// set pushed through the normal quantile for k >= 4.
struct GaussianRule {
  Mat nodes;  // k x N
  Vec weights;
};
const GaussianRule& gaussian_rule(int k);

/// Classifier that also exposes P(Y = 1 | X_obs = x, M = m).
class PosteriorClassifier : public MaskedClassifier {
 public:
  virtual double posterior(const Pattern& m, std::span<const double> observed) const = 0;
  int predict(const Pattern& m, std::span<const double> observed) const override {
    return posterior(m, observed) >= 0.5 ? 1 : -1;
  }
  using MaskedClassifier::predict;
};

/// Missing-given-observed Gaussian conditional for one pattern, cached per pattern.
struct ConditionalGaussian {
  std::vector<int> obs;
  std::vector<int> mis;
  Mat gain;      // |mis| x |obs|: Sigma_mo Sigma_oo^{-1}
  Mat chol;      // |mis| x |mis| Cholesky factor of the conditional covariance
};

class ConditionalCache {
 public:
  explicit ConditionalCache(SpdMatrix sigma) : sigma_(std::move(sigma)) {}
  const ConditionalGaussian& get(const Pattern& m) const;

 private:
  SpdMatrix sigma_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<Pattern, std::unique_ptr<ConditionalGaussian>, PatternHash> cache_;
};

/// Bayes rule for logistic data under MCAR (intercepts empty) or self-masking MNAR.
class LogisticBayes : public PosteriorClassifier {
 public:
  LogisticBayes(LogisticModel model, std::optional<Vec> self_mask_intercepts);
  double posterior(const Pattern& m, std::span<const double> observed) const override;

 private:
  LogisticModel model_;
  std::optional<Vec> intercepts_;
  ConditionalCache cache_;
};

/// Bayes rule for LDA data under self-masking MNAR.
class SelfMaskLdaBayes : public PosteriorClassifier {
 public:
  SelfMaskLdaBayes(LdaModel model, Vec intercepts);
  double posterior(const Pattern& m, std::span<const double> observed) const override;

 private:
  LdaModel model_;
  Vec intercepts_;
  ConditionalCache cache_;
};

/// Mean of min(P, 1 - P) over a test set: the Bayes risk estimate from posteriors.
RiskReport posterior_bayes_risk(const PosteriorClassifier& oracle, const MaskedDataset& test);

}  // namespace misslin
