#include "misslin/core.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace misslin {

// ---------------------------------------------------------------------------
// Pattern

Pattern::Pattern(std::uint64_t bits, int dim) : bits_(bits), dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw DimMismatch("pattern dimension must be in [1, 63]");
  if (bits >> dim != 0) throw DimMismatch("pattern bits exceed dimension");
}

Pattern Pattern::all_missing(int dim) { return Pattern((std::uint64_t{1} << dim) - 1, dim); }

std::vector<int> Pattern::obs_indices() const {
  std::vector<int> out;
  out.reserve(n_observed());
  for (int j = 0; j < dim_; ++j)
    if (observed(j)) out.push_back(j);
  return out;
}

std::vector<int> Pattern::mis_indices() const {
  std::vector<int> out;
  out.reserve(n_missing());
  for (int j = 0; j < dim_; ++j)
    if (missing(j)) out.push_back(j);
  return out;
}

std::string Pattern::str() const {
  std::string s(dim_, '0');
  for (int j = 0; j < dim_; ++j)
    if (missing(j)) s[j] = '1';
  return s;
}

Pattern Pattern::parse(const std::string& s) {
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == '1')
      bits |= std::uint64_t{1} << j;
    else if (s[j] != '0')
      throw Error("invalid pattern string '" + s + "'");
  }
  return Pattern(bits, static_cast<int>(s.size()));
}

// ---------------------------------------------------------------------------
// SpdMatrix

SpdMatrix::SpdMatrix(Mat entries) : a_(std::move(entries)) {
  if (a_.rows() != a_.cols() || a_.rows() == 0) throw DimMismatch("SpdMatrix must be square and non-empty");
  const double scale = a_.cwiseAbs().maxCoeff();
  if (!std::isfinite(scale)) throw NotPd("SpdMatrix has non-finite entries");
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw NotPd("matrix is not symmetric");
  a_ = 0.5 * (a_ + a_.transpose()).eval();

  const Eigen::Index d = a_.rows();
  const double pivot_floor = 1e-12 * a_.trace() / static_cast<double>(d);
  l_ = Mat::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = a_(j, j) - l_.row(j).head(j).squaredNorm();
    if (!(pivot > pivot_floor) || pivot <= 0.0) throw NotPd("Cholesky pivot below tolerance");
    l_(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i)
      l_(i, j) = (a_(i, j) - l_.row(i).head(j).dot(l_.row(j).head(j))) / l_(j, j);
  }
}

SpdMatrix SpdMatrix::toeplitz(int d, double rho) {
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = std::pow(rho, std::abs(i - j));
  return SpdMatrix(std::move(a));
}

SpdMatrix SpdMatrix::diagonal(const Vec& diag) { return SpdMatrix(Mat(diag.asDiagonal())); }

bool SpdMatrix::is_diagonal(double tol) const {
  for (Eigen::Index i = 0; i < a_.rows(); ++i)
    for (Eigen::Index j = 0; j < a_.cols(); ++j)
      if (i != j && std::abs(a_(i, j)) > tol) return false;
  return true;
}

Vec SpdMatrix::solve(const Vec& v) const {
  if (v.size() != a_.rows()) throw DimMismatch("solve: dimension mismatch");
  const auto lower = l_.triangularView<Eigen::Lower>();
  Vec y = lower.solve(v);
  return lower.transpose().solve(y);
}

double SpdMatrix::inverse_quadratic(const Vec& v) const {
  Vec y = l_.triangularView<Eigen::Lower>().solve(v);
  return y.squaredNorm();
}

SpdMatrix submatrix(const SpdMatrix& sigma, const Pattern& p) {
  if (p.dim() != sigma.dim()) throw DimMismatch("submatrix: pattern dimension differs from matrix");
  if (p.is_all_missing()) throw AllMissing();
  const auto obs = p.obs_indices();
  const auto k = static_cast<Eigen::Index>(obs.size());
  Mat out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = sigma(obs[i], obs[j]);
  return SpdMatrix(std::move(out));
}

EigenExtremes eigen_extremes(const SpdMatrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma.matrix(), Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

// ---------------------------------------------------------------------------
// Normal distribution

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double std_normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // Halley refinement
  const double e = std_normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

const GaussHermite& gauss_hermite_probabilists(int n) {
  static std::mutex mu;
  static std::map<int, GaussHermite> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    gh.nodes[i] = es.eigenvalues()(i);
    gh.weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    total += gh.weights[i];
  }
  for (double& w : gh.weights) w /= total;
  return cache.emplace(n, std::move(gh)).first->second;
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {
std::mt19937_64 seeded_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seeded_engine(seed)) {}

Rng Rng::split(std::uint64_t key) const { return Rng(splitmix64(seed_ ^ splitmix64(key + 0x632BE59BD9B4E019ULL))); }

Rng Rng::split(std::string_view label, std::uint64_t index) const {
  // FNV-1a over the label
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return split(splitmix64(h) ^ index);
}

Vec Rng::normal_vector(int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = normal();
  return v;
}

}  // namespace misslin
