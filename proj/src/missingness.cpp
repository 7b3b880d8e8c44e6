#include "misslin/missingness.hpp"

#include <numeric>

namespace misslin {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

void validate(const MechanismSpec& spec, int d) {
  std::visit(overloaded{
                 [d](const Mcar& m) {
                   if (m.eta.size() != d) throw DimMismatch("MCAR: eta length differs from d");
                   for (Eigen::Index j = 0; j < d; ++j)
                     if (!(m.eta(j) >= 0.0 && m.eta(j) <= 1.0)) throw Error("MCAR: eta_j must lie in [0, 1]");
                 },
                 [d](const SelfMaskMnar& m) {
                   if (m.intercepts.size() != d) throw DimMismatch("self-mask: intercept length differs from d");
                 },
                 [d](const MarExample&) {
                   if (d != 2) throw DimMismatch("MAR example requires d = 2");
                 },
                 [d](const UniformS& m) {
                   if (m.s < 0 || m.s > d) throw Error("uniform-s: s must lie in [0, d]");
                 },
             },
             spec);
}

Pattern draw_pattern(const MechanismSpec& spec, const Vec& x, Rng& rng) {
  const int d = static_cast<int>(x.size());
  std::uint64_t bits = 0;
  std::visit(overloaded{
                 [&](const Mcar& m) {
                   for (int j = 0; j < d; ++j)
                     if (rng.bernoulli(m.eta(j))) bits |= std::uint64_t{1} << j;
                 },
                 [&](const SelfMaskMnar& m) {
                   for (int j = 0; j < d; ++j)
                     if (rng.bernoulli(sigmoid(m.intercepts(j) + x(j)))) bits |= std::uint64_t{1} << j;
                 },
                 [&](const MarExample&) {
                   if (x(0) > 0) bits = 2;
                 },
                 [&](const UniformS& m) {
                   // partial Fisher-Yates over coordinates
                   std::vector<int> idx(static_cast<std::size_t>(d));
                   std::iota(idx.begin(), idx.end(), 0);
                   for (int k = 0; k < m.s; ++k) {
                     const auto r = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(d - k));
                     std::swap(idx[static_cast<std::size_t>(k)], idx[r]);
                     bits |= std::uint64_t{1} << idx[static_cast<std::size_t>(k)];
                   }
                 },
             },
             spec);
  return Pattern(bits, d);
}

MaskedDataset apply_mechanism(const LabeledData& data, const MechanismSpec& spec, Rng& rng) {
  const int d = data.dim();
  validate(spec, d);
  if (static_cast<std::size_t>(data.n()) != data.y.size()) throw DimMismatch("label count differs from rows");
  MaskedDataset ds(d);
  ds.reserve(data.y.size(), static_cast<std::size_t>(data.x.size()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Vec x = data.x.row(i).transpose();
    ds.add_masked(x, draw_pattern(spec, x, rng), data.y[static_cast<std::size_t>(i)]);
  }
  return ds;
}

std::string describe(const MechanismSpec& spec) {
  return std::visit(overloaded{
                        [](const Mcar&) { return std::string("mcar"); },
                        [](const SelfMaskMnar&) { return std::string("mnar-selfmask"); },
                        [](const MarExample&) { return std::string("mar-example"); },
                        [](const UniformS& m) { return "uniform-s(" + std::to_string(m.s) + ")"; },
                    },
                    spec);
}

}  // namespace misslin
