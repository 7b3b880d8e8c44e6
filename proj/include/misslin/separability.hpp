#pragma once

#include "misslin/core.hpp"

#include <string>

namespace misslin {

/// l^p balls B(c1, r1), B(c2, r2) are disjoint iff r1 + r2 < |c1 - c2|_p.
bool balls_disjoint(const Vec& c1, const Vec& c2, double r1, double r2, double p);

struct SeparabilityBounds {
  double alpha;       // <1 - eta, (c1 - c2)^2> / |c1 - c2|_2^2
  double sqrt_alpha;
};

/// alpha <= P(projected balls stay disjoint) <= sqrt(alpha) under MCAR with rates eta.
SeparabilityBounds separability_bounds(const Vec& c1, const Vec& c2, const Vec& eta);

/// Exact P(R1 + R2 < |(1 - M) . (c1 - c2)|_2) with R1, R2 i.i.d. U(0, |c1-c2|_2 / 2), by pattern
/// enumeration (d <= 20): sum_m p_m F(2 r_m), r_m = |(1 - m) . (c1 - c2)|_2 / |c1 - c2|_2 and F the
/// CDF of a sum of two standard uniforms.
double exact_separability(const Vec& c1, const Vec& c2, const Vec& eta);

/// min(1, 2 sqrt(alpha)), from P(R1 + R2 < L) <= P(R1 < L) = E[min(1, 2 r)] and Jensen.
double separability_upper_bound_corrected(double alpha);

struct SeparabilityResult {
  double mc_estimate = 0;
  double ci_halfwidth = 0;
  double lower_bound = 0;
  double upper_bound = 0;
  std::size_t replications = 0;
  std::size_t successes = 0;
};

/// Draws R1, R2 i.i.d. U(0, |c1-c2|_2 / 2) and an MCAR pattern per replicate;
/// success iff R1 + R2 < |(1 - M) . (c1 - c2)|_2.
SeparabilityResult mc_separability(const Vec& c1, const Vec& c2, const Vec& eta, std::size_t reps, Rng& rng);

/// Limit (1 - rho)^{1/p} of the separation probability with equal radii; p = infinity gives 1 for rho < 1.
double asymptotic_separability(double rho, double p);

enum class CentroidLaw { GaussianDifference, UniformDifference };
CentroidLaw parse_centroid_law(const std::string& s);

struct AsymptoticCheck {
  double estimate = 0;
  double ci_halfwidth = 0;
  double limit = 0;
  std::size_t replications = 0;
};

/// Random centroids with i.i.d. coordinate differences, R1 = R2 ~ U(0, |C1-C2|_p / 2),
/// M uniform over patterns with exactly s missing entries.
AsymptoticCheck mc_asymptotic_check(int d, int s, double p, CentroidLaw law, std::size_t reps, Rng& rng,
                                    int threads = 1);

}  // namespace misslin
