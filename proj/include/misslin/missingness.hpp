#pragma once

#include "misslin/core.hpp"
#include "misslin/dataset.hpp"

#include <string>
#include <variant>

namespace misslin {

/// M_j ~ Bernoulli(eta_j), independent of (X, Y).
struct Mcar {
  Vec eta;
};
/// M_j ~ Bernoulli(sigmoid(intercept_j + X_j)).
struct SelfMaskMnar {
  Vec intercepts;
};
/// M = (0, 1{X_1 > 0}); d = 2 only.
struct MarExample {};
/// M uniform over the C(d, s) patterns with exactly s missing entries.
struct UniformS {
  int s;
};

using MechanismSpec = std::variant<Mcar, SelfMaskMnar, MarExample, UniformS>;

inline Mcar mcar_constant(int d, double eta) { return Mcar{Vec::Constant(d, eta)}; }

/// Draws one pattern for a full row x.
Pattern draw_pattern(const MechanismSpec& spec, const Vec& x, Rng& rng);

MaskedDataset apply_mechanism(const LabeledData& data, const MechanismSpec& spec, Rng& rng);

/// Checks the spec against dimension d; throws DimMismatch or Error.
void validate(const MechanismSpec& spec, int d);

std::string describe(const MechanismSpec& spec);

}  // namespace misslin
