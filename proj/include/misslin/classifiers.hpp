#pragma once

#include "misslin/core.hpp"
#include "misslin/dataset.hpp"
#include "misslin/generators.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace misslin {

/// Anything that labels a masked sample (pattern, observed values).
class MaskedClassifier {
 public:
  virtual ~MaskedClassifier() = default;
  virtual int predict(const Pattern& m, std::span<const double> observed) const = 0;

  int predict(const MaskedDataset::Row& r) const { return predict(r.pattern, r.observed); }
  std::vector<int> predict(const MaskedDataset& ds) const;
};

/// Affine rule sign(w^T x_obs + b) on the observed coordinates of one pattern.
struct LinearRule {
  Vec w;
  double b = 0;

  double decision(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return sign(decision(x)); }
};

/// One affine rule per missing pattern. Each stored rule has length |obs(m)|,
/// so a prediction cannot read a masked coordinate. Rules are either trained
/// explicitly or produced on first use by a resolver and cached.
class PbpLinearClassifier : public MaskedClassifier {
 public:
  using Resolver = std::function<std::optional<LinearRule>(const Pattern&)>;

  PbpLinearClassifier(int dim, int fallback_label);

  void set_rule(const Pattern& m, LinearRule rule);
  void set_resolver(Resolver resolver) { resolver_ = std::move(resolver); }

  int dim() const { return dim_; }
  int fallback_label() const { return fallback_; }
  /// Trained or resolved rule; empty for untrained patterns.
  std::optional<LinearRule> rule(const Pattern& m) const;
  bool trained(const Pattern& m) const { return rule(m).has_value(); }
  std::size_t n_explicit_rules() const { return rules_.size(); }
  const std::unordered_map<Pattern, LinearRule, PatternHash>& explicit_rules() const { return rules_; }
  /// Number of predictions that fell back because the pattern had no rule.
  std::size_t fallback_hits() const { return cache_->fallback_hits.load(); }

  int predict(const Pattern& m, std::span<const double> observed) const override;
  using MaskedClassifier::predict;

 private:
  struct Cache {
    std::shared_mutex mu;
    std::unordered_map<Pattern, std::optional<LinearRule>, PatternHash> rules;
    std::atomic<std::size_t> fallback_hits{0};
  };

  const LinearRule* lookup(const Pattern& m) const;

  int dim_;
  int fallback_;
  std::unordered_map<Pattern, LinearRule, PatternHash> rules_;
  Resolver resolver_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// ---------------------------------------------------------------------------
// Bayes predictors

/// LDA direction on obs(m): w = sigma_obs^{-1} (mu_pos - mu_neg)_obs, b = -w^T midpoint_obs.
LinearRule lda_rule(const Vec& mu_pos, const Vec& mu_neg, const SpdMatrix& sigma, const Pattern& m);

/// Pattern-by-pattern Bayes classifier of a balanced LDA model under MCAR.
PbpLinearClassifier bayes_pbp_lda(const LdaModel& model);

/// Pattern-by-pattern Bayes classifier of a GPMM, including the log prior-ratio offset.
/// Unknown patterns predict +1 and are counted by fallback_hits().
PbpLinearClassifier bayes_mnar(const GpmmModel& model);

// ---------------------------------------------------------------------------
// LDA estimators

/// Per-coordinate class means over every row where the coordinate is observed (0/0 = 0).
struct PooledMeanEstimates {
  Vec mu_hat_pos;
  Vec mu_hat_neg;
  Eigen::VectorXi count_pos;
  Eigen::VectorXi count_neg;
};

PooledMeanEstimates pooled_means(const MaskedDataset& ds);

/// Pairwise-complete within-class covariance: entry (j,l) averages the class-centered
/// products over rows where both j and l are observed. Not guaranteed SPD.
Mat pairwise_pooled_covariance(const MaskedDataset& ds, const PooledMeanEstimates& means);

struct TrainNotes {
  std::vector<std::string> warnings;
};

/// Plug-in P-b-P LDA with pooled means. With sigma unset the covariance is
/// estimated pairwise; a non-SPD estimate falls back to its diagonal (noted).
struct LdaMcarFit {
  PbpLinearClassifier classifier;
  PooledMeanEstimates means;
  SpdMatrix sigma;
};
LdaMcarFit fit_lda_mcar(const MaskedDataset& ds, const std::optional<SpdMatrix>& known_sigma,
                        TrainNotes* notes = nullptr);
inline PbpLinearClassifier train_lda_mcar(const MaskedDataset& ds, const std::optional<SpdMatrix>& known_sigma,
                                          TrainNotes* notes = nullptr) {
  return fit_lda_mcar(ds, known_sigma, notes).classifier;
}

/// LDA fitted separately on each pattern's rows. Patterns with fewer than
/// min_per_class rows in either class predict the training majority label.
PbpLinearClassifier train_lda_patternwise(const MaskedDataset& ds, int min_per_class = 2,
                                          TrainNotes* notes = nullptr);

/// Per-pattern means zeroed when N_{m,k}/n <= tau, with known per-pattern covariances.
using PatternCovariance = std::function<SpdMatrix(const Pattern&)>;
PbpLinearClassifier train_lda_mnar_thresholded(const MaskedDataset& ds, double tau, const PatternCovariance& sigmas);
PbpLinearClassifier train_lda_mnar_thresholded(const MaskedDataset& ds, double tau,
                                               const std::map<Pattern, SpdMatrix>& sigmas);
inline double default_mnar_tau(int d, std::size_t n) { return std::sqrt(static_cast<double>(d) / static_cast<double>(n)); }

// ---------------------------------------------------------------------------
// Logistic regression and perceptron on complete matrices

struct LogisticOptions {
  int max_iter = 100;
  double tol = 1e-8;
  double ridge = 0.0;
};

struct LogisticFit {
  double beta0 = 0;
  Vec beta;
  bool converged = false;
  int iterations = 0;
  bool clipped = false;

  LinearRule rule() const { return {beta, beta0}; }
};

/// Newton's method with step halving on the mean logistic loss plus ridge * |beta|^2
/// (intercept unpenalized). Diverging fits are stopped and rescaled to |(beta0, beta)|_inf <= 30.
LogisticFit train_logistic(const Mat& x, const std::vector<int>& y, const LogisticOptions& opts = {});

/// Standard errors (intercept first) from the inverse observed information.
Vec logistic_standard_errors(const Mat& x, const LogisticFit& fit);

struct PerceptronFit {
  Vec w;
  double b = 0;
  bool converged = false;
  int epochs = 0;
  std::size_t updates = 0;

  LinearRule rule() const { return {w, b}; }
};

/// Rosenblatt perceptron, cyclic order, unit learning rate. Converged iff a full pass has no mistake.
PerceptronFit train_perceptron(const Mat& x, const std::vector<int>& y, int max_epochs = 1000);

/// Full-matrix LDA: class means, pooled covariance (falls back to diagonal), no prior offset.
LinearRule train_lda_full(const Mat& x, const std::vector<int>& y, TrainNotes* notes = nullptr);

struct PbpOptions {
  LogisticOptions logistic;
  int max_epochs = 1000;
  /// Minimum rows of each class for a pattern to be trained.
  int min_per_class = 1;
};

PbpLinearClassifier train_pbp_logistic(const MaskedDataset& ds, const PbpOptions& opts = {});
PbpLinearClassifier train_pbp_perceptron(const MaskedDataset& ds, const PbpOptions& opts = {});

/// Majority label of ds (ties -> +1).
int majority_label(const std::vector<int>& y);

// ---------------------------------------------------------------------------
// Imputation

enum class ImputerKind { Zero, Constant, Ice };
enum class BaseLearner { Logistic, Perceptron, Lda };

struct ImputerSpec {
  ImputerKind kind = ImputerKind::Zero;
  Vec alpha;       // Constant only
  int iters = 10;  // Ice only
  double ice_ridge = 1e-6;

  static ImputerSpec zero() { return {}; }
  static ImputerSpec constant(Vec a) { return {ImputerKind::Constant, std::move(a)}; }
  static ImputerSpec ice(int iters = 10) { return {ImputerKind::Ice, Vec(), iters}; }
};

/// Frozen imputation map fitted on training data.
struct FittedImputer {
  ImputerKind kind = ImputerKind::Zero;
  Vec constants;  // fill values (zero, alpha, or ICE column means)
  Mat ice_coef;   // d x (d+1): intercept then one coefficient per column (own column unused)

  /// Completes one masked row into a length-d vector.
  Vec complete(const Pattern& m, std::span<const double> observed) const;
};

/// Fits the imputer on ds and returns it with the completed training matrix.
std::pair<FittedImputer, Mat> fit_imputer(const MaskedDataset& ds, const ImputerSpec& spec);

/// sign(b + w^T x~), x~ the imputed row.
class ImputedLinearClassifier : public MaskedClassifier {
 public:
  ImputedLinearClassifier(FittedImputer imputer, Vec w, double b);

  const FittedImputer& imputer() const { return imputer_; }
  const Vec& w() const { return w_; }
  double b() const { return b_; }

  double decision(const Pattern& m, std::span<const double> observed) const;
  int predict(const Pattern& m, std::span<const double> observed) const override;
  using MaskedClassifier::predict;

 private:
  FittedImputer imputer_;
  Vec w_;
  double b_;
};

struct ImputeTrainOptions {
  LogisticOptions logistic;
  int max_epochs = 1000;
};

ImputedLinearClassifier impute_then_train(const MaskedDataset& ds, const ImputerSpec& imputer, BaseLearner base,
                                          const ImputeTrainOptions& opts = {}, TrainNotes* notes = nullptr);

/// Rewrites a constant-imputation classifier as P-b-P: w_m = w_obs, b_m = b + sum_{mis} w_j alpha_j.
PbpLinearClassifier to_pbp(const ImputedLinearClassifier& clf);

struct ImputationConstants {
  Vec alpha;
  /// True when Sigma is diagonal, the only case where constant imputation is Bayes optimal.
  bool bayes_optimal;
  std::string note;
};

/// Midpoint constants alpha_j = (mu_{1,j} + mu_{-1,j}) / 2.
ImputationConstants optimal_imputation_constants(const LdaModel& model);

/// Population LDA applied after midpoint imputation.
ImputedLinearClassifier optimal_imputed_lda(const LdaModel& model);

// ---------------------------------------------------------------------------
// Selection by id

/// Everything a trainer may need. Models are only present when known.
struct TrainContext {
  const MaskedDataset* train = nullptr;
  const LdaModel* lda = nullptr;
  const GpmmModel* gpmm = nullptr;
  /// Known class covariance for lda-mcar / pbp-lda-mnar; estimated when empty.
  std::optional<SpdMatrix> known_sigma;
  LogisticOptions logistic;
  int max_epochs = 1000;
  int min_per_class = 2;
  /// Threshold for pbp-lda-mnar; negative means sqrt(d/n).
  double tau = -1;
};

const std::vector<std::string>& classifier_ids();
bool is_known_classifier(const std::string& id);
/// Oracle ids (bayes-*) need population parameters rather than training data.
bool is_oracle_classifier(const std::string& id);

std::unique_ptr<MaskedClassifier> build_classifier(const std::string& id, const TrainContext& ctx,
                                                   TrainNotes* notes = nullptr);

}  // namespace misslin
