#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace misslin {

template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

/// Largest dimension a Pattern can describe.
inline constexpr int kMaxDim = 63;
/// Largest dimension for which all 2^d patterns may be enumerated.
inline constexpr int kMaxEnumerationDim = 20;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllMissing : Error {
  AllMissing() : Error("pattern has no observed coordinate") {}
};
struct NotPd : Error {
  using Error::Error;
};
struct DimMismatch : Error {
  using Error::Error;
};
struct DimensionTooLarge : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Pattern

/// Missingness pattern over d coordinates: bit j set iff coordinate j is missing.
class Pattern {
 public:
  constexpr Pattern() = default;
  Pattern(std::uint64_t bits, int dim);

  static Pattern complete(int dim) { return Pattern(0, dim); }
  static Pattern all_missing(int dim);

  std::uint64_t bits() const { return bits_; }
  int dim() const { return dim_; }

  bool missing(int j) const { return (bits_ >> j) & 1U; }
  bool observed(int j) const { return !missing(j); }
  int n_missing() const { return std::popcount(bits_); }
  int n_observed() const { return dim_ - n_missing(); }
  bool is_complete() const { return bits_ == 0; }
  bool is_all_missing() const { return n_observed() == 0; }

  std::vector<int> obs_indices() const;
  std::vector<int> mis_indices() const;

  /// "0101"-style string, coordinate 0 first; '1' marks a missing entry.
  std::string str() const;
  static Pattern parse(const std::string& s);

  friend bool operator==(const Pattern&, const Pattern&) = default;
  friend auto operator<=>(const Pattern& a, const Pattern& b) {
    return a.dim_ != b.dim_ ? a.dim_ <=> b.dim_ : a.bits_ <=> b.bits_;
  }

 private:
  std::uint64_t bits_ = 0;
  int dim_ = 0;
};

struct PatternHash {
  std::size_t operator()(const Pattern& p) const noexcept {
    return std::hash<std::uint64_t>{}(p.bits() * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(p.dim()));
  }
};

/// Calls f(Pattern) for each of the 2^dim patterns, in increasing bit order.
template <class F>
void for_each_pattern(int dim, F&& f) {
  if (dim > kMaxEnumerationDim)
    throw DimensionTooLarge("pattern enumeration requires d <= " + std::to_string(kMaxEnumerationDim));
  const std::uint64_t count = std::uint64_t{1} << dim;
  for (std::uint64_t b = 0; b < count; ++b) f(Pattern(b, dim));
}

/// Gathers the observed entries of x (length dim) into a vector of length |obs(p)|.
template <class Derived>
Vector<typename Derived::Scalar> gather_observed(const Eigen::MatrixBase<Derived>& x, const Pattern& p) {
  Vector<typename Derived::Scalar> out(p.n_observed());
  Eigen::Index k = 0;
  for (int j = 0; j < p.dim(); ++j)
    if (p.observed(j)) out(k++) = x(j);
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric positive-definite matrices

/// Symmetric positive-definite matrix with a cached Cholesky factor.
/// Construction fails with NotPd rather than regularizing.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(Mat entries);

  static SpdMatrix identity(int d) { return SpdMatrix(Mat::Identity(d, d)); }
  /// (rho^|i-j|)_{ij}
  static SpdMatrix toeplitz(int d, double rho);
  static SpdMatrix diagonal(const Vec& diag);

  int dim() const { return static_cast<int>(a_.rows()); }
  const Mat& matrix() const { return a_; }
  double operator()(int i, int j) const { return a_(i, j); }
  /// Lower-triangular L with L L^T = A.
  const Mat& cholesky_factor() const { return l_; }
  bool is_diagonal(double tol = 0.0) const;

  /// Solves A x = v.
  Vec solve(const Vec& v) const;
  /// v^T A^{-1} v, the squared Mahalanobis norm.
  double inverse_quadratic(const Vec& v) const;

 private:
  Mat a_;
  Mat l_;
};

/// Principal submatrix over obs(p). Throws AllMissing for the all-missing pattern.
SpdMatrix submatrix(const SpdMatrix& sigma, const Pattern& p);

/// Solves sigma * x = v through the Cholesky factor.
template <class Derived>
Vec spd_solve(const SpdMatrix& sigma, const Eigen::MatrixBase<Derived>& v) {
  if (v.size() != sigma.dim()) throw DimMismatch("spd_solve: dimension mismatch");
  return sigma.solve(v.template cast<double>());
}

struct EigenExtremes {
  double lambda_min;
  double lambda_max;
};

EigenExtremes eigen_extremes(const SpdMatrix& sigma);

// ---------------------------------------------------------------------------
// Scalar helpers

/// Standard normal c.d.f., erfc-based.
double std_normal_cdf(double x);
double std_normal_pdf(double x);
/// Inverse standard normal c.d.f. (Acklam rational approximation + one Halley step).
double std_normal_quantile(double p);

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// sign(x) = 1_{x>=0} - 1_{x<0}
inline int sign(double x) { return x >= 0.0 ? 1 : -1; }

/// Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1): returns (nodes, weights) with weights summing to 1.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite_probabilists(int n);

// ---------------------------------------------------------------------------
// Random numbers

/// Seeded random stream. Streams for replicates and shards are derived with
/// split(), so results do not depend on scheduling or thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  /// Independent child stream keyed by (seed, key).
  Rng split(std::uint64_t key) const;
  /// Child stream keyed by a string label and an index.
  Rng split(std::string_view label, std::uint64_t index = 0) const;

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
  Vec normal_vector(int d);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace misslin
