#pragma once

#include "misslin/classifiers.hpp"
#include "misslin/core.hpp"
#include "misslin/generators.hpp"
#include "misslin/missingness.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace misslin {

/// Misclassification estimate with a 95% normal interval and optional reference values.
struct RiskReport {
  double risk_estimate = 0;
  double ci_halfwidth = 0;
  std::size_t n_test = 0;
  std::size_t errors = 0;
  std::optional<double> bayes_risk;
  std::optional<double> excess;
  std::map<std::string, double> bound_values;

  void attach_bayes(double bayes) {
    bayes_risk = bayes;
    excess = risk_estimate - bayes;
  }
};

/// 1.96 * sqrt(r (1 - r) / n)
double binomial_ci_halfwidth(double r, std::size_t n);

// ---------------------------------------------------------------------------
// Closed-form Bayes risks

struct ZeroSignal : Error {
  explicit ZeroSignal(double risk)
      : Error("class means coincide; Bayes risk is min(pi_1, pi_-1)"), risk(risk) {}
  double risk;
};

/// Risk of the LDA Bayes rule restricted to pattern m (balanced or not).
/// Empty or signal-free patterns contribute min(pi_1, pi_-1).
double bayes_risk_pattern(const LdaModel& model, const Pattern& m);

/// Complete-data Bayes risk. Throws ZeroSignal (carrying min(pi_1, pi_-1)) when mu_1 == mu_-1.
double bayes_risk_complete(const LdaModel& model);

/// P(M = m) under independent coordinate missingness rates eta.
double mcar_pattern_probability(const Vec& eta, const Pattern& m);

/// Exact P-b-P Bayes risk under MCAR by enumerating all 2^d patterns (d <= 20).
double bayes_risk_missing_mcar(const LdaModel& model, const Vec& eta);

/// Pattern-sampled estimate of the same quantity for large d.
RiskReport bayes_risk_missing_mcar_sampled(const LdaModel& model, const Vec& eta, std::size_t n_patterns, Rng& rng);

// ---------------------------------------------------------------------------
// Bounds

/// Scalar summary of a problem instance used by the bias and estimation bounds.
struct BoundInputs {
  int d = 1;
  double n = 1;
  double eta = 0;          // common missingness probability
  double mu = 1;           // per-coordinate |mu_1 - mu_-1|
  double lambda_min = 1;
  double lambda_max = 1;
  double mu_inf_norm = 1;  // |mu|_inf entering the estimation bound
  double kappa = 1;        // max_i Sigma_ii / lambda_min

  double snr() const { return mu / std::sqrt(lambda_max); }
  /// eta + exp(-SNR^2 / 8) (1 - eta)
  double epsilon() const;

  /// Fills d, eta, mu, eigenvalues, kappa and |mu|_inf from a model with equal-magnitude gaps.
  static BoundInputs from_model(const LdaModel& model, double eta, double n);
};

/// eta^d / 2 + mu eta / (2 sqrt(2 pi)) sqrt(d / lambda_min) (eps^{d-1} - eta^{d-1})
double bias_bound(const BoundInputs& b);

/// (2 / sqrt(2 pi)) ( ((1+eta)/2)^n |mu|_inf^2 d (1-eta) / lambda_min + 4 kappa d / n )^{1/2}
double estimation_bound(const BoundInputs& b);
/// Large-n form (2 / sqrt(2 pi)) sqrt(4 kappa d / n).
double estimation_bound_asymptotic(const BoundInputs& b);

double combined_bound(const BoundInputs& b);

struct MnarBoundTerms {
  Pattern pattern;
  double p = 0;
  double mu_norm = 0;  // max_k |mu_{m,k}|
  double mu_norm_pos = 0;
  double mu_norm_neg = 0;
  double lambda_min = 0;
  double capped_term = 0;  // (4/sqrt(2 pi) + 8/sqrt(pi) |mu_m| / sqrt(lambda_min)) (tau ^ p_m)
  double tail_term = 0;    // sqrt(2) |mu_m| / sqrt(pi lambda_min) p_m (1 - p_m)^{n/2}, when p_m >= tau
};

struct MnarBound {
  double total = 0;
  double capped_sum = 0;
  double tail_sum = 0;
  double complexity = 0;  // sum_m min(tau, p_m)
  bool tau_below_rate = false;  // tau < sqrt(d/n)
  std::vector<MnarBoundTerms> terms;
};

MnarBound mnar_bound(const GpmmModel& model, double tau, double n);
double pattern_complexity(const GpmmModel& model, double tau);

/// Conditional misclassification probabilities of a plug-in LDA rule on pattern m:
/// P(h(X) = 1 | Y = -1) and P(h(X) = -1 | Y = 1), given trained means.
struct MisclassProbs {
  double false_pos;
  double false_neg;
  bool degenerate = false;
};

struct DegenerateDirection : Error {
  DegenerateDirection() : Error("trained mean gap is zero on the observed coordinates") {}
};

/// Throws DegenerateDirection when the trained gap vanishes on obs(m); see
/// conditional_misclass_prob_or_constant for the sign(0) = +1 convention.
MisclassProbs conditional_misclass_prob(const Vec& mu_hat_pos, const Vec& mu_hat_neg, const LdaModel& model,
                                        const Pattern& m);
/// Same, mapping a vanished gap to the constant +1 rule: (1, 0).
MisclassProbs conditional_misclass_prob_or_constant(const Vec& mu_hat_pos, const Vec& mu_hat_neg,
                                                    const LdaModel& model, const Pattern& m);

/// Exact MCAR risk of the plug-in P-b-P LDA with the given means (balanced model, true Sigma).
double plugin_lda_risk_mcar(const Vec& mu_hat_pos, const Vec& mu_hat_neg, const LdaModel& model, const Vec& eta);

// ---------------------------------------------------------------------------
// Monte Carlo

/// Produces n fresh masked test draws from the given stream.
using MaskedSource = std::function<MaskedDataset(std::size_t n, Rng& rng)>;

MaskedSource lda_source(const LdaModel& model, MechanismSpec mechanism);
MaskedSource logistic_source(const LogisticModel& model, MechanismSpec mechanism);
MaskedSource gpmm_source(const GpmmModel& model);

/// Test draws are generated in fixed-size shards with streams split from rng,
/// so the report does not depend on the number of worker threads.
RiskReport monte_carlo_risk(const MaskedClassifier& clf, const MaskedSource& source, std::size_t n_test, Rng& rng,
                            int threads = 1);

/// Error count of clf on a fixed test set.
std::size_t count_errors(const MaskedClassifier& clf, const MaskedDataset& test);
RiskReport risk_on(const MaskedClassifier& clf, const MaskedDataset& test);

}  // namespace misslin
