#include "misslin/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace misslin {

std::vector<int> MaskedClassifier::predict(const MaskedDataset& ds) const {
  std::vector<int> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = predict(ds.row(i));
  return out;
}

double LinearRule::decision(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != w.size()) throw DimMismatch("rule length differs from observed values");
  double s = b;
  for (std::size_t k = 0; k < x.size(); ++k) s += w(static_cast<Eigen::Index>(k)) * x[k];
  return s;
}

// ---------------------------------------------------------------------------
// PbpLinearClassifier

PbpLinearClassifier::PbpLinearClassifier(int dim, int fallback_label) : dim_(dim), fallback_(fallback_label) {
  if (fallback_label != 1 && fallback_label != -1) throw Error("fallback label must be +1 or -1");
}

void PbpLinearClassifier::set_rule(const Pattern& m, LinearRule rule) {
  if (m.dim() != dim_) throw DimMismatch("rule pattern dimension differs from classifier");
  if (rule.w.size() != m.n_observed()) throw DimMismatch("rule length must equal |obs(m)|");
  rules_[m] = std::move(rule);
}

const LinearRule* PbpLinearClassifier::lookup(const Pattern& m) const {
  if (auto it = rules_.find(m); it != rules_.end()) return &it->second;
  if (!resolver_) return nullptr;
  {
    std::shared_lock lock(cache_->mu);
    if (auto it = cache_->rules.find(m); it != cache_->rules.end()) return it->second ? &*it->second : nullptr;
  }
  auto resolved = resolver_(m);
  if (resolved && resolved->w.size() != m.n_observed()) throw DimMismatch("resolver produced a rule of wrong length");
  std::unique_lock lock(cache_->mu);
  auto [it, inserted] = cache_->rules.try_emplace(m, std::move(resolved));
  return it->second ? &*it->second : nullptr;
}

std::optional<LinearRule> PbpLinearClassifier::rule(const Pattern& m) const {
  const LinearRule* r = lookup(m);
  return r ? std::optional<LinearRule>(*r) : std::nullopt;
}

int PbpLinearClassifier::predict(const Pattern& m, std::span<const double> observed) const {
  if (m.dim() != dim_) throw DimMismatch("pattern dimension differs from classifier");
  const LinearRule* r = lookup(m);
  if (!r) {
    cache_->fallback_hits.fetch_add(1, std::memory_order_relaxed);
    return fallback_;
  }
  return r->predict(observed);
}

// ---------------------------------------------------------------------------
// Bayes predictors

LinearRule lda_rule(const Vec& mu_pos, const Vec& mu_neg, const SpdMatrix& sigma, const Pattern& m) {
  if (m.is_all_missing()) return {Vec(0), 0.0};
  const Vec gap = gather_observed(mu_pos - mu_neg, m);
  const Vec mid = gather_observed(0.5 * (mu_pos + mu_neg), m);
  const SpdMatrix sub = m.is_complete() ? sigma : submatrix(sigma, m);
  Vec w = sub.solve(gap);
  const double b = -w.dot(mid);
  return {std::move(w), b};
}

PbpLinearClassifier bayes_pbp_lda(const LdaModel& model) {
  if (!model.balanced()) throw Error("bayes_pbp_lda requires balanced classes; use bayes_mnar on a GPMM embedding");
  PbpLinearClassifier clf(model.dim(), 1);
  clf.set_resolver([model](const Pattern& m) -> std::optional<LinearRule> {
    return lda_rule(model.mu_pos, model.mu_neg, model.sigma, m);
  });
  return clf;
}

PbpLinearClassifier bayes_mnar(const GpmmModel& model) {
  PbpLinearClassifier clf(model.dim(), 1);
  for (const auto& [m, c] : model.components()) {
    double offset;
    if (c.pi_pos == 0.0)
      offset = -std::numeric_limits<double>::infinity();
    else if (c.pi_neg == 0.0)
      offset = std::numeric_limits<double>::infinity();
    else
      offset = -std::log(c.pi_neg / c.pi_pos);
    if (m.is_all_missing() || !std::isfinite(offset)) {
      clf.set_rule(m, {Vec::Zero(m.n_observed()), std::isfinite(offset) ? offset : (offset > 0 ? 1.0 : -1.0)});
      continue;
    }
    const Vec gap = c.mu_pos - c.mu_neg;
    Vec w = c.sigma->solve(gap);
    const double b = -w.dot(0.5 * (c.mu_pos + c.mu_neg)) + offset;
    clf.set_rule(m, {std::move(w), b});
  }
  return clf;
}

// ---------------------------------------------------------------------------
// LDA estimators

PooledMeanEstimates pooled_means(const MaskedDataset& ds) {
  const int d = ds.dim();
  Vec sum_pos = Vec::Zero(d);
  Vec sum_neg = Vec::Zero(d);
  Eigen::VectorXi cnt_pos = Eigen::VectorXi::Zero(d);
  Eigen::VectorXi cnt_neg = Eigen::VectorXi::Zero(d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.row(i);
    std::size_t k = 0;
    for (int j = 0; j < d; ++j) {
      if (r.pattern.missing(j)) continue;
      if (r.label == 1) {
        sum_pos(j) += r.observed[k];
        ++cnt_pos(j);
      } else {
        sum_neg(j) += r.observed[k];
        ++cnt_neg(j);
      }
      ++k;
    }
  }
  PooledMeanEstimates est{Vec::Zero(d), Vec::Zero(d), cnt_pos, cnt_neg};
  for (int j = 0; j < d; ++j) {
    if (cnt_pos(j) > 0) est.mu_hat_pos(j) = sum_pos(j) / cnt_pos(j);
    if (cnt_neg(j) > 0) est.mu_hat_neg(j) = sum_neg(j) / cnt_neg(j);
  }
  return est;
}

Mat pairwise_pooled_covariance(const MaskedDataset& ds, const PooledMeanEstimates& means) {
  const int d = ds.dim();
  Mat sum = Mat::Zero(d, d);
  Eigen::MatrixXi cnt = Eigen::MatrixXi::Zero(d, d);
  std::vector<int> idx;
  std::vector<double> c;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.row(i);
    const Vec& mu = r.label == 1 ? means.mu_hat_pos : means.mu_hat_neg;
    idx.clear();
    c.clear();
    std::size_t k = 0;
    for (int j = 0; j < d; ++j) {
      if (r.pattern.missing(j)) continue;
      idx.push_back(j);
      c.push_back(r.observed[k++] - mu(j));
    }
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a; b < idx.size(); ++b) {
        sum(idx[a], idx[b]) += c[a] * c[b];
        ++cnt(idx[a], idx[b]);
      }
  }
  Mat cov = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int l = j; l < d; ++l) {
      if (cnt(j, l) == 0) continue;
      cov(j, l) = cov(l, j) = sum(j, l) / std::max(cnt(j, l) - 2, 1);
    }
  return cov;
}

namespace {

void note(TrainNotes* notes, std::string msg) {
  if (notes) notes->warnings.push_back(std::move(msg));
}

/// Diagonal of `cov` with non-positive entries replaced by 1.
SpdMatrix diagonal_fallback(const Mat& cov) {
  Vec diag = cov.diagonal();
  for (Eigen::Index j = 0; j < diag.size(); ++j)
    if (!(diag(j) > 0)) diag(j) = 1.0;
  return SpdMatrix::diagonal(diag);
}

SpdMatrix spd_or_diagonal(const Mat& cov, TrainNotes* notes, const char* what) {
  try {
    return SpdMatrix(cov);
  } catch (const NotPd&) {
    note(notes, std::string(what) + ": covariance estimate not SPD, using its diagonal");
    return diagonal_fallback(cov);
  }
}

Mat sub_block(const Mat& a, const Pattern& m) {
  const auto obs = m.obs_indices();
  const auto k = static_cast<Eigen::Index>(obs.size());
  Mat out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = a(obs[i], obs[j]);
  return out;
}

struct ClassMeans {
  Vec pos;
  Vec neg;
  Eigen::Index n_pos = 0;
  Eigen::Index n_neg = 0;
};

ClassMeans class_means(const Mat& x, const std::vector<int>& y) {
  ClassMeans cm{Vec::Zero(x.cols()), Vec::Zero(x.cols())};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (y[static_cast<std::size_t>(i)] == 1) {
      cm.pos += x.row(i).transpose();
      ++cm.n_pos;
    } else {
      cm.neg += x.row(i).transpose();
      ++cm.n_neg;
    }
  }
  if (cm.n_pos) cm.pos /= static_cast<double>(cm.n_pos);
  if (cm.n_neg) cm.neg /= static_cast<double>(cm.n_neg);
  return cm;
}

Mat within_class_covariance(const Mat& x, const std::vector<int>& y, const ClassMeans& cm) {
  Mat centered = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    centered.row(i) -= (y[static_cast<std::size_t>(i)] == 1 ? cm.pos : cm.neg).transpose();
  return centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(x.rows() - 2, 1));
}

}  // namespace

LdaMcarFit fit_lda_mcar(const MaskedDataset& ds, const std::optional<SpdMatrix>& known_sigma, TrainNotes* notes) {
  PooledMeanEstimates means = pooled_means(ds);
  SpdMatrix sigma = known_sigma ? *known_sigma
                                : spd_or_diagonal(pairwise_pooled_covariance(ds, means), notes, "lda-mcar");
  if (sigma.dim() != ds.dim()) throw DimMismatch("lda-mcar: covariance dimension differs from data");
  PbpLinearClassifier clf(ds.dim(), 1);
  clf.set_resolver([mp = means.mu_hat_pos, mn = means.mu_hat_neg, sigma](const Pattern& m) -> std::optional<LinearRule> {
    return lda_rule(mp, mn, sigma, m);
  });
  return {std::move(clf), std::move(means), std::move(sigma)};
}

int majority_label(const std::vector<int>& y) {
  long s = 0;
  for (int v : y) s += v;
  return s >= 0 ? 1 : -1;
}

PbpLinearClassifier train_lda_patternwise(const MaskedDataset& ds, int min_per_class, TrainNotes* notes) {
  PbpLinearClassifier clf(ds.dim(), majority_label(ds.labels()));
  const auto hist = pattern_histogram(ds);
  std::optional<Mat> shared_cov;
  for (const auto& [m, counts] : hist) {
    if (counts.pos < static_cast<std::size_t>(min_per_class) || counts.neg < static_cast<std::size_t>(min_per_class))
      continue;
    if (m.is_all_missing()) {
      clf.set_rule(m, {Vec(0), 0.0});
      continue;
    }
    const LabeledData rows = ds.rows_with_pattern(m);
    const ClassMeans cm = class_means(rows.x, rows.y);
    Mat cov;
    if (rows.n() >= m.n_observed() + 2) {
      cov = within_class_covariance(rows.x, rows.y, cm);
    } else {
      if (!shared_cov) shared_cov = pairwise_pooled_covariance(ds, pooled_means(ds));
      cov = sub_block(*shared_cov, m);
    }
    const SpdMatrix sigma = spd_or_diagonal(cov, notes, "pbp-lda");
    Vec w = sigma.solve(cm.pos - cm.neg);
    const double b = -w.dot(0.5 * (cm.pos + cm.neg));
    clf.set_rule(m, {std::move(w), b});
  }
  return clf;
}

PbpLinearClassifier train_lda_mnar_thresholded(const MaskedDataset& ds, double tau, const PatternCovariance& sigmas) {
  if (tau < 0) throw Error("tau must be non-negative");
  const double n = static_cast<double>(ds.size());
  PbpLinearClassifier clf(ds.dim(), 1);
  for (const auto& [m, counts] : pattern_histogram(ds)) {
    const int k = m.n_observed();
    const LabeledData rows = ds.rows_with_pattern(m);
    const ClassMeans cm = class_means(rows.x, rows.y);
    const Vec mu_pos = static_cast<double>(counts.pos) / n > tau ? cm.pos : Vec::Zero(k);
    const Vec mu_neg = static_cast<double>(counts.neg) / n > tau ? cm.neg : Vec::Zero(k);
    if (k == 0) {
      clf.set_rule(m, {Vec(0), 0.0});
      continue;
    }
    const SpdMatrix sigma = sigmas(m);
    if (sigma.dim() != k) throw DimMismatch("pbp-lda-mnar: covariance size differs from |obs(m)|");
    Vec w = sigma.solve(mu_pos - mu_neg);
    const double b = -w.dot(0.5 * (mu_pos + mu_neg));
    clf.set_rule(m, {std::move(w), b});
  }
  return clf;
}

PbpLinearClassifier train_lda_mnar_thresholded(const MaskedDataset& ds, double tau,
                                               const std::map<Pattern, SpdMatrix>& sigmas) {
  return train_lda_mnar_thresholded(ds, tau, [&sigmas](const Pattern& m) {
    auto it = sigmas.find(m);
    if (it == sigmas.end()) throw Error("pbp-lda-mnar: no covariance supplied for pattern " + m.str());
    return it->second;
  });
}

LinearRule train_lda_full(const Mat& x, const std::vector<int>& y, TrainNotes* notes) {
  const ClassMeans cm = class_means(x, y);
  if (x.cols() == 0) return {Vec(0), 0.0};
  const SpdMatrix sigma = spd_or_diagonal(within_class_covariance(x, y, cm), notes, "lda");
  Vec w = sigma.solve(cm.pos - cm.neg);
  const double b = -w.dot(0.5 * (cm.pos + cm.neg));
  return {std::move(w), b};
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct LogisticObjective {
  const Mat& x;
  const std::vector<int>& y;
  double ridge;

  double value(double beta0, const Vec& beta) const {
    const Vec eta = (x * beta).array() + beta0;
    double loss = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) loss += softplus(-y[static_cast<std::size_t>(i)] * eta(i));
    return loss / static_cast<double>(x.rows()) + ridge * beta.squaredNorm();
  }
};

}  // namespace

LogisticFit train_logistic(const Mat& x, const std::vector<int>& y, const LogisticOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw DimMismatch("train_logistic: label count differs from rows");
  if (n == 0) throw Error("train_logistic: empty training set");
  const LogisticObjective obj{x, y, opts.ridge};
  constexpr double kClip = 30.0;

  LogisticFit fit;
  fit.beta = Vec::Zero(d);
  double f = obj.value(fit.beta0, fit.beta);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (fit.iterations = 0; fit.iterations < opts.max_iter; ++fit.iterations) {
    const Vec eta = (x * fit.beta).array() + fit.beta0;
    Vec grad = Vec::Zero(d + 1);
    Mat hess = Mat::Zero(d + 1, d + 1);
    Vec weights(n);
    Vec resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(eta(i));
      const double yi01 = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
      resid(i) = p - yi01;
      weights(i) = p * (1 - p);
    }
    grad(0) = resid.sum() * inv_n;
    grad.tail(d) = x.transpose() * resid * inv_n + 2 * opts.ridge * fit.beta;
    hess(0, 0) = weights.sum() * inv_n;
    const Vec xw = x.transpose() * weights * inv_n;
    hess.block(0, 1, 1, d) = xw.transpose();
    hess.block(1, 0, d, 1) = xw;
    hess.bottomRightCorner(d, d) = x.transpose() * weights.asDiagonal() * x * inv_n;
    hess.bottomRightCorner(d, d).diagonal().array() += 2 * opts.ridge;

    if (grad.cwiseAbs().maxCoeff() <= opts.tol) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Mat> ldlt(hess);
    Vec step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || !(ldlt.vectorD().minCoeff() > 0)) {
      Mat reg = hess;
      reg.diagonal().array() += 1e-8 + 1e-8 * hess.diagonal().cwiseAbs().maxCoeff();
      step = reg.ldlt().solve(grad);
    }
    double t = 1.0;
    double beta0_new = 0;
    Vec beta_new;
    double f_new = 0;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      beta0_new = fit.beta0 - t * step(0);
      beta_new = fit.beta - t * step.tail(d);
      f_new = obj.value(beta0_new, beta_new);
      if (f_new <= f) break;
    }
    fit.beta0 = beta0_new;
    fit.beta = beta_new;
    f = f_new;

    const double size = std::max(std::abs(fit.beta0), d ? fit.beta.cwiseAbs().maxCoeff() : 0.0);
    if (size > kClip) {
      const double s = kClip / size;
      fit.beta0 *= s;
      fit.beta *= s;
      fit.clipped = true;
      ++fit.iterations;
      break;
    }
  }
  if (opts.ridge == 0 && !fit.clipped) {
    const Vec margin = ((x * fit.beta).array() + fit.beta0).matrix();
    bool separated = true;
    for (Eigen::Index i = 0; i < n && separated; ++i) separated = y[static_cast<std::size_t>(i)] * margin(i) > 0;
    const double size = std::max(std::abs(fit.beta0), d ? fit.beta.cwiseAbs().maxCoeff() : 0.0);
    if (separated && size > 0) {
      // the unpenalized optimum is at infinity; report the direction at the clip scale
      fit.beta0 *= kClip / size;
      fit.beta *= kClip / size;
      fit.clipped = true;
      fit.converged = false;
    }
  }
  return fit;
}

Vec logistic_standard_errors(const Mat& x, const LogisticFit& fit) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Mat info = Mat::Zero(d + 1, d + 1);
  Mat xt(n, d + 1);
  xt.col(0).setOnes();
  xt.rightCols(d) = x;
  const Vec eta = (x * fit.beta).array() + fit.beta0;
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = sigmoid(eta(i));
    w(i) = p * (1 - p);
  }
  info = xt.transpose() * w.asDiagonal() * xt;
  return info.inverse().diagonal().cwiseSqrt();
}

// ---------------------------------------------------------------------------
// Perceptron

PerceptronFit train_perceptron(const Mat& x, const std::vector<int>& y, int max_epochs) {
  if (max_epochs < 1) throw Error("perceptron: max_epochs must be >= 1");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw DimMismatch("perceptron: label count differs from rows");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = x;
  PerceptronFit fit;
  fit.w = Vec::Zero(d);
  for (fit.epochs = 1; fit.epochs <= max_epochs; ++fit.epochs) {
    std::size_t mistakes = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int yi = y[static_cast<std::size_t>(i)];
      const double act = rows.row(i).dot(fit.w) + fit.b;
      if (sign(act) != yi) {
        fit.w += yi * rows.row(i).transpose();
        fit.b += yi;
        ++mistakes;
      }
    }
    fit.updates += mistakes;
    if (mistakes == 0) {
      fit.converged = true;
      return fit;
    }
  }
  fit.epochs = max_epochs;
  return fit;
}

// ---------------------------------------------------------------------------
// Pattern-by-pattern logistic / perceptron

namespace {

template <class Train>
PbpLinearClassifier train_pbp(const MaskedDataset& ds, int min_per_class, Train&& train) {
  PbpLinearClassifier clf(ds.dim(), majority_label(ds.labels()));
  const auto need = static_cast<std::size_t>(std::max(min_per_class, 1));
  for (const auto& [m, counts] : pattern_histogram(ds)) {
    if (counts.pos < need || counts.neg < need) continue;
    const LabeledData rows = ds.rows_with_pattern(m);
    clf.set_rule(m, train(rows));
  }
  return clf;
}

}  // namespace

PbpLinearClassifier train_pbp_logistic(const MaskedDataset& ds, const PbpOptions& opts) {
  return train_pbp(ds, opts.min_per_class,
                   [&](const LabeledData& rows) { return train_logistic(rows.x, rows.y, opts.logistic).rule(); });
}

PbpLinearClassifier train_pbp_perceptron(const MaskedDataset& ds, const PbpOptions& opts) {
  return train_pbp(ds, opts.min_per_class,
                   [&](const LabeledData& rows) { return train_perceptron(rows.x, rows.y, opts.max_epochs).rule(); });
}

// ---------------------------------------------------------------------------
// Imputation

Vec FittedImputer::complete(const Pattern& m, std::span<const double> observed) const {
  const int d = static_cast<int>(constants.size());
  if (m.dim() != d) throw DimMismatch("imputer: pattern dimension differs");
  Vec x(d);
  std::size_t k = 0;
  for (int j = 0; j < d; ++j) x(j) = m.missing(j) ? constants(j) : observed[k++];
  if (kind == ImputerKind::Ice && !m.is_complete()) {
    for (int j = 0; j < d; ++j) {
      if (m.observed(j)) continue;
      double v = ice_coef(j, 0);
      for (int l = 0; l < d; ++l)
        if (l != j) v += ice_coef(j, l + 1) * x(l);
      x(j) = v;
    }
  }
  return x;
}

std::pair<FittedImputer, Mat> fit_imputer(const MaskedDataset& ds, const ImputerSpec& spec) {
  const int d = ds.dim();
  FittedImputer imp;
  imp.kind = spec.kind;
  switch (spec.kind) {
    case ImputerKind::Zero:
      imp.constants = Vec::Zero(d);
      break;
    case ImputerKind::Constant:
      if (spec.alpha.size() != d) throw DimMismatch("constant imputer: alpha length differs from d");
      imp.constants = spec.alpha;
      break;
    case ImputerKind::Ice: {
      Vec sum = Vec::Zero(d);
      Eigen::VectorXi cnt = Eigen::VectorXi::Zero(d);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = ds.row(i);
        std::size_t k = 0;
        for (int j = 0; j < d; ++j)
          if (r.pattern.observed(j)) {
            sum(j) += r.observed[k++];
            ++cnt(j);
          }
      }
      imp.constants = Vec::Zero(d);
      for (int j = 0; j < d; ++j)
        if (cnt(j) > 0) imp.constants(j) = sum(j) / cnt(j);
      break;
    }
  }
  Mat x = ds.fill(imp.constants);
  if (spec.kind != ImputerKind::Ice) return {std::move(imp), std::move(x)};

  const auto n = static_cast<Eigen::Index>(ds.size());
  imp.ice_coef = Mat::Zero(d, d + 1);
  for (int j = 0; j < d; ++j) imp.ice_coef(j, 0) = imp.constants(j);
  std::vector<std::vector<Eigen::Index>> observed_rows(static_cast<std::size_t>(d));
  std::vector<std::vector<Eigen::Index>> missing_rows(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      (ds.pattern(static_cast<std::size_t>(i)).observed(j) ? observed_rows : missing_rows)[static_cast<std::size_t>(j)]
          .push_back(i);

  for (int it = 0; it < spec.iters; ++it) {
    for (int j = 0; j < d; ++j) {
      const auto& obs = observed_rows[static_cast<std::size_t>(j)];
      if (obs.empty() || d == 1) continue;
      const auto nj = static_cast<Eigen::Index>(obs.size());
      Mat z(nj, d);
      Vec target(nj);
      for (Eigen::Index r = 0; r < nj; ++r) {
        const Eigen::Index i = obs[static_cast<std::size_t>(r)];
        z(r, 0) = 1.0;
        Eigen::Index c = 1;
        for (int l = 0; l < d; ++l)
          if (l != j) z(r, c++) = x(i, l);
        target(r) = x(i, j);
      }
      Mat gram = z.transpose() * z;
      gram.diagonal().tail(d - 1).array() += spec.ice_ridge;
      gram(0, 0) += 1e-12;
      const Vec coef = gram.ldlt().solve(z.transpose() * target);
      imp.ice_coef(j, 0) = coef(0);
      Eigen::Index c = 1;
      for (int l = 0; l < d; ++l) imp.ice_coef(j, l + 1) = l == j ? 0.0 : coef(c++);
      for (Eigen::Index i : missing_rows[static_cast<std::size_t>(j)]) {
        double v = coef(0);
        c = 1;
        for (int l = 0; l < d; ++l)
          if (l != j) v += coef(c++) * x(i, l);
        x(i, j) = v;
      }
    }
  }
  return {std::move(imp), std::move(x)};
}

ImputedLinearClassifier::ImputedLinearClassifier(FittedImputer imputer, Vec w, double b)
    : imputer_(std::move(imputer)), w_(std::move(w)), b_(b) {
  if (w_.size() != imputer_.constants.size()) throw DimMismatch("imputed classifier: weight length differs");
}

double ImputedLinearClassifier::decision(const Pattern& m, std::span<const double> observed) const {
  return b_ + w_.dot(imputer_.complete(m, observed));
}

int ImputedLinearClassifier::predict(const Pattern& m, std::span<const double> observed) const {
  return sign(decision(m, observed));
}

ImputedLinearClassifier impute_then_train(const MaskedDataset& ds, const ImputerSpec& spec, BaseLearner base,
                                          const ImputeTrainOptions& opts, TrainNotes* notes) {
  auto [imp, x] = fit_imputer(ds, spec);
  const std::vector<int>& y = ds.labels();
  LinearRule rule;
  switch (base) {
    case BaseLearner::Logistic:
      rule = train_logistic(x, y, opts.logistic).rule();
      break;
    case BaseLearner::Perceptron:
      rule = train_perceptron(x, y, opts.max_epochs).rule();
      break;
    case BaseLearner::Lda:
      rule = train_lda_full(x, y, notes);
      break;
  }
  return ImputedLinearClassifier(std::move(imp), std::move(rule.w), rule.b);
}

PbpLinearClassifier to_pbp(const ImputedLinearClassifier& clf) {
  if (clf.imputer().kind == ImputerKind::Ice) throw Error("to_pbp: only constant imputation has a P-b-P form");
  const Vec w = clf.w();
  const Vec alpha = clf.imputer().constants;
  const double b = clf.b();
  PbpLinearClassifier out(static_cast<int>(w.size()), 1);
  out.set_resolver([w, alpha, b](const Pattern& m) -> std::optional<LinearRule> {
    double bm = b;
    for (int j : m.mis_indices()) bm += w(j) * alpha(j);
    return LinearRule{gather_observed(w, m), bm};
  });
  return out;
}

ImputationConstants optimal_imputation_constants(const LdaModel& model) {
  if (!model.balanced()) throw Error("optimal imputation constants are defined for balanced models");
  ImputationConstants out{model.midpoint(), model.sigma.is_diagonal(), ""};
  if (!out.bayes_optimal)
    out.note = "covariance is not diagonal: constant imputation is not Bayes optimal for this model";
  return out;
}

ImputedLinearClassifier optimal_imputed_lda(const LdaModel& model) {
  const ImputationConstants c = optimal_imputation_constants(model);
  FittedImputer imp{ImputerKind::Constant, c.alpha, Mat()};
  Vec w = model.sigma.solve(model.gap());
  const double b = -w.dot(c.alpha);
  return ImputedLinearClassifier(std::move(imp), std::move(w), b);
}

// ---------------------------------------------------------------------------
// Selection by id

const std::vector<std::string>& classifier_ids() {
  static const std::vector<std::string> ids = {
      "bayes-pbp-lda",   "bayes-mnar",     "lda-mcar",        "pbp-lda", "pbp-lda-mnar",
      "pbp-logreg",      "0imp-logreg",    "ice-logreg",      "pbp-perceptron",
      "0imp-perceptron", "ice-perceptron", "0imp-lda",        "ice-lda", "opt-imp-lda"};
  return ids;
}

bool is_known_classifier(const std::string& id) {
  const auto& ids = classifier_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

bool is_oracle_classifier(const std::string& id) { return id.rfind("bayes-", 0) == 0; }

std::unique_ptr<MaskedClassifier> build_classifier(const std::string& id, const TrainContext& ctx, TrainNotes* notes) {
  if (id == "bayes-pbp-lda") {
    if (!ctx.lda) throw Error("bayes-pbp-lda needs the LDA model parameters");
    return std::make_unique<PbpLinearClassifier>(bayes_pbp_lda(*ctx.lda));
  }
  if (id == "bayes-mnar") {
    if (!ctx.gpmm) throw Error("bayes-mnar needs GPMM model parameters");
    return std::make_unique<PbpLinearClassifier>(bayes_mnar(*ctx.gpmm));
  }
  if (!ctx.train) throw Error(id + " needs a training set");
  const MaskedDataset& ds = *ctx.train;
  const ImputeTrainOptions iopts{ctx.logistic, ctx.max_epochs};
  const PbpOptions popts{ctx.logistic, ctx.max_epochs, 1};

  if (id == "lda-mcar") return std::make_unique<PbpLinearClassifier>(train_lda_mcar(ds, ctx.known_sigma, notes));
  if (id == "pbp-lda") return std::make_unique<PbpLinearClassifier>(train_lda_patternwise(ds, ctx.min_per_class, notes));
  if (id == "pbp-lda-mnar") {
    const double tau = ctx.tau >= 0 ? ctx.tau : default_mnar_tau(ds.dim(), ds.size());
    SpdMatrix sigma = ctx.known_sigma
                          ? *ctx.known_sigma
                          : spd_or_diagonal(pairwise_pooled_covariance(ds, pooled_means(ds)), notes, "pbp-lda-mnar");
    return std::make_unique<PbpLinearClassifier>(
        train_lda_mnar_thresholded(ds, tau, [sigma](const Pattern& m) { return submatrix(sigma, m); }));
  }
  if (id == "pbp-logreg") return std::make_unique<PbpLinearClassifier>(train_pbp_logistic(ds, popts));
  if (id == "pbp-perceptron") return std::make_unique<PbpLinearClassifier>(train_pbp_perceptron(ds, popts));

  auto imputed = [&](ImputerSpec spec, BaseLearner base) {
    return std::make_unique<ImputedLinearClassifier>(impute_then_train(ds, spec, base, iopts, notes));
  };
  if (id == "0imp-logreg") return imputed(ImputerSpec::zero(), BaseLearner::Logistic);
  if (id == "ice-logreg") return imputed(ImputerSpec::ice(), BaseLearner::Logistic);
  if (id == "0imp-perceptron") return imputed(ImputerSpec::zero(), BaseLearner::Perceptron);
  if (id == "ice-perceptron") return imputed(ImputerSpec::ice(), BaseLearner::Perceptron);
  if (id == "0imp-lda") return imputed(ImputerSpec::zero(), BaseLearner::Lda);
  if (id == "ice-lda") return imputed(ImputerSpec::ice(), BaseLearner::Lda);
  if (id == "opt-imp-lda") {
    const PooledMeanEstimates means = pooled_means(ds);
    return imputed(ImputerSpec::constant(0.5 * (means.mu_hat_pos + means.mu_hat_neg)), BaseLearner::Lda);
  }
  throw Error("unknown classifier id '" + id + "'");
}

}  // namespace misslin
