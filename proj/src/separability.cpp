#include "misslin/separability.hpp"

#include "misslin/generators.hpp"
#include "misslin/risk.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace misslin {

bool balls_disjoint(const Vec& c1, const Vec& c2, double r1, double r2, double p) {
  if (r1 < 0 || r2 < 0) throw Error("radii must be non-negative");
  if (!(p >= 1)) throw Error("norm order must be >= 1");
  return r1 + r2 < lp_norm(c1 - c2, p);
}

SeparabilityBounds separability_bounds(const Vec& c1, const Vec& c2, const Vec& eta) {
  if (c1.size() != c2.size() || eta.size() != c1.size()) throw DimMismatch("separability_bounds: dimension mismatch");
  const Vec sq = (c1 - c2).array().square();
  const double total = sq.sum();
  if (total == 0.0) throw Error("centroids must differ");
  const double alpha = std::clamp((Vec::Ones(eta.size()) - eta).dot(sq) / total, 0.0, 1.0);
  return {alpha, std::sqrt(alpha)};
}

double exact_separability(const Vec& c1, const Vec& c2, const Vec& eta) {
  if (c1.size() != c2.size() || eta.size() != c1.size()) throw DimMismatch("exact_separability: dimension mismatch");
  const Vec sq = (c1 - c2).array().square();
  const double total = sq.sum();
  if (total == 0.0) throw Error("centroids must differ");
  const int d = static_cast<int>(sq.size());
  double prob = 0;
  for_each_pattern(d, [&](const Pattern& m) {
    double p = 1;
    double kept = 0;
    for (int j = 0; j < d; ++j) {
      p *= m.missing(j) ? eta(j) : 1 - eta(j);
      if (m.observed(j)) kept += sq(j);
    }
    if (p == 0) return;
    const double t = 2 * std::sqrt(kept / total);
    prob += p * (t <= 1 ? 0.5 * t * t : 1 - 0.5 * (2 - t) * (2 - t));
  });
  return prob;
}

double separability_upper_bound_corrected(double alpha) { return std::min(1.0, 2 * std::sqrt(alpha)); }

SeparabilityResult mc_separability(const Vec& c1, const Vec& c2, const Vec& eta, std::size_t reps, Rng& rng) {
  const SeparabilityBounds bounds = separability_bounds(c1, c2, eta);
  const Vec sq = (c1 - c2).array().square();
  const double half = 0.5 * std::sqrt(sq.sum());
  const auto d = sq.size();
  SeparabilityResult res;
  res.lower_bound = bounds.alpha;
  res.upper_bound = bounds.sqrt_alpha;
  res.replications = reps;
  for (std::size_t r = 0; r < reps; ++r) {
    const double r1 = rng.uniform(0, half);
    const double r2 = rng.uniform(0, half);
    double kept = 0;
    for (Eigen::Index j = 0; j < d; ++j)
      if (!rng.bernoulli(eta(j))) kept += sq(j);
    res.successes += r1 + r2 < std::sqrt(kept);
  }
  res.mc_estimate = static_cast<double>(res.successes) / static_cast<double>(reps);
  res.ci_halfwidth = binomial_ci_halfwidth(res.mc_estimate, reps);
  return res;
}

double asymptotic_separability(double rho, double p) {
  if (!(rho >= 0 && rho <= 1)) throw Error("rho must lie in [0, 1]");
  if (std::isinf(p)) return rho < 1 ? 1.0 : 0.0;
  return std::pow(1 - rho, 1 / p);
}

CentroidLaw parse_centroid_law(const std::string& s) {
  if (s == "gaussian") return CentroidLaw::GaussianDifference;
  if (s == "uniform") return CentroidLaw::UniformDifference;
  throw Error("unknown centroid law '" + s + "' (expected gaussian or uniform)");
}

AsymptoticCheck mc_asymptotic_check(int d, int s, double p, CentroidLaw law, std::size_t reps, Rng& rng,
                                    int threads) {
  if (s < 0 || s > d) throw Error("s must lie in [0, d]");
  constexpr std::size_t kShard = 1024;
  const std::size_t shards = (reps + kShard - 1) / kShard;
  std::vector<std::size_t> hits(shards, 0);

  auto run_shard = [&](std::size_t shard) {
    Rng srng = rng.split("asymptotic-shard", shard);
    const std::size_t len = std::min(kShard, reps - shard * kShard);
    Vec diff(d);
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < len; ++r) {
      for (int j = 0; j < d; ++j)
        diff(j) = law == CentroidLaw::GaussianDifference ? srng.normal() - srng.normal()
                                                         : srng.uniform() - srng.uniform();
      const double full = lp_norm(diff, p);
      const double radius = srng.uniform(0, 0.5 * full);
      // s missing coordinates by partial Fisher-Yates
      std::iota(idx.begin(), idx.end(), 0);
      for (int k = 0; k < s; ++k) {
        const auto pick = static_cast<std::size_t>(k) + srng.below(static_cast<std::uint64_t>(d - k));
        std::swap(idx[static_cast<std::size_t>(k)], idx[pick]);
        diff(idx[static_cast<std::size_t>(k)]) = 0.0;
      }
      hits[shard] += 2 * radius < lp_norm(diff, p);
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < shards; ++i) run_shard(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, shards); ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < shards;) run_shard(i);
      });
  }
  AsymptoticCheck out;
  out.replications = reps;
  std::size_t total = 0;
  for (auto h : hits) total += h;
  out.estimate = static_cast<double>(total) / static_cast<double>(reps);
  out.ci_halfwidth = binomial_ci_halfwidth(out.estimate, reps);
  out.limit = asymptotic_separability(d > 0 ? static_cast<double>(s) / d : 0.0, p);
  return out;
}

}  // namespace misslin
