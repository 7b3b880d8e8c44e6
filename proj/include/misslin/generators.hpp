#pragma once

#include "misslin/core.hpp"
#include "misslin/dataset.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace misslin {

/// Two Gaussian classes with shared covariance: X | Y=k ~ N(mu_k, sigma), P(Y=1) = pi_pos.
struct LdaModel {
  LdaModel(Vec mu_pos, Vec mu_neg, SpdMatrix sigma, double pi_pos = 0.5);

  Vec mu_pos;
  Vec mu_neg;
  SpdMatrix sigma;
  double pi_pos;

  double pi_neg() const { return 1.0 - pi_pos; }
  bool balanced() const { return pi_pos == 0.5; }
  int dim() const { return static_cast<int>(mu_pos.size()); }
  Vec gap() const { return mu_pos - mu_neg; }
  Vec midpoint() const { return 0.5 * (mu_pos + mu_neg); }
};

/// X ~ N(0, sigma_x), P(Y=1 | X) = sigmoid(beta0 + beta^T X).
struct LogisticModel {
  LogisticModel(double beta0, Vec beta, SpdMatrix sigma_x);

  double beta0;
  Vec beta;
  SpdMatrix sigma_x;

  int dim() const { return static_cast<int>(beta.size()); }
};

/// Per-pattern Gaussian class conditionals with joint pattern/class probabilities.
struct GpmmComponent {
  Vec mu_pos;                      // length |obs(m)|
  Vec mu_neg;                      // length |obs(m)|
  std::optional<SpdMatrix> sigma;  // empty only for the all-missing pattern
  double pi_pos = 0;               // P(Y=1, M=m)
  double pi_neg = 0;               // P(Y=-1, M=m)

  double p() const { return pi_pos + pi_neg; }
};

class GpmmModel {
 public:
  GpmmModel(int dim, std::map<Pattern, GpmmComponent> components);

  /// GPMM induced by an LDA model under MCAR masking with per-coordinate rates eta.
  static GpmmModel from_lda_mcar(const LdaModel& model, const Vec& eta);

  int dim() const { return dim_; }
  const std::map<Pattern, GpmmComponent>& components() const { return components_; }
  const GpmmComponent* find(const Pattern& m) const;
  /// pi_{m,1} == pi_{m,-1} for every listed pattern.
  bool pattern_balanced(double tol = 1e-12) const;

 private:
  int dim_;
  std::map<Pattern, GpmmComponent> components_;
};

enum class RadiusMode {
  UniformPaired,  // R1, R2 i.i.d. U(0, |c1-c2|_2 / 2)
  UniformEqual,   // R1 ~ U(0, |c1-c2|_p / 2), R2 = R1
};

struct BallConfig {
  Vec c1;
  Vec c2;
  double norm_p = 2.0;  // >= 1, infinity allowed
  RadiusMode radius_mode = RadiusMode::UniformPaired;
};

/// l^p norm; p = infinity gives the max norm.
double lp_norm(const Vec& v, double p);

LabeledData sample_lda(const LdaModel& model, Eigen::Index n, Rng& rng);
LabeledData sample_logistic(const LogisticModel& model, Eigen::Index n, Rng& rng);
MaskedDataset sample_gpmm(const GpmmModel& model, Eigen::Index n, Rng& rng);

struct TwoBallSample {
  LabeledData data;  // class +1 around c1, class -1 around c2
  double r1;
  double r2;
};

/// Uniform points in each l^p ball by rejection from the bounding box.
/// The acceptance rate falls quickly with d (about 0.25% for the l^2 ball at d=10).
TwoBallSample sample_two_balls(const BallConfig& cfg, Eigen::Index n_per_class, Rng& rng);
/// Same, with radii fixed by the caller.
LabeledData sample_two_balls_with_radii(const BallConfig& cfg, double r1, double r2, Eigen::Index n_per_class,
                                        Rng& rng);

/// Two points that differ only at one coordinate, with opposite labels, both masked there.
struct PerceptronCounterexample {
  LabeledData complete;
  MaskedDataset masked;
  int masked_coordinate;
};
PerceptronCounterexample perceptron_counterexample();

// ---------------------------------------------------------------------------
// Presets

/// One Gaussian component of a scalar marginal.
struct GaussianComponent {
  double weight;
  double mean;
  double sd;
};

std::vector<GaussianComponent> marginal(const LdaModel& model, int j);
std::vector<GaussianComponent> marginal(const LogisticModel& model, int j);

/// E[sigmoid(intercept + X)] for X with the given mixture marginal (Gauss-Hermite, 64 nodes).
double self_mask_rate(const std::vector<GaussianComponent>& marginal, double intercept);
/// Intercept b such that E[sigmoid(b + X)] = eta, found by bisection.
double calibrate_self_mask_intercept(const std::vector<GaussianComponent>& marginal, double eta);

enum class CovarianceKind { Identity, Toeplitz };

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::Identity;
  double rho = 0.6;

  SpdMatrix build(int d) const;
  std::string str() const;
  static CovarianceSpec parse(const std::string& s);
};

/// mu_neg ~ N(0, 25 I), mu_pos = mu_neg + 1.5 * rademacher, balanced classes.
LdaModel preset_fig1_lda(int d, const CovarianceSpec& cov, Rng& model_rng);
/// X ~ N(0, sigma), beta ~ N(0, I), beta0 = 0.
LogisticModel preset_fig1_logistic(int d, const CovarianceSpec& cov, Rng& model_rng);

struct PresetInfo {
  std::string name;
  std::string description;
};
const std::vector<PresetInfo>& preset_list();

}  // namespace misslin
