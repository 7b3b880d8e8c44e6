#include "misslin/dataset.hpp"
#include "misslin/generators.hpp"
#include "misslin/missingness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

using namespace misslin;

TEST(MaskedDataset, StoresOnlyObservedValues) {
  MaskedDataset ds(3);
  const double a[] = {1.5, -2.0};
  ds.add(Pattern::parse("010"), a, 1);
  ds.add(Pattern::parse("111"), {}, -1);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.row(0).observed.size(), 2u);
  EXPECT_EQ(ds.row(1).observed.size(), 0u);
  EXPECT_EQ(ds.value(0, 0), 1.5);
  EXPECT_EQ(ds.value(0, 2), -2.0);
  EXPECT_THROW(ds.value(0, 1), Error);
  EXPECT_EQ(ds.label(1), -1);
}

TEST(MaskedDataset, RejectsBadRows) {
  MaskedDataset ds(2);
  const double one[] = {1.0};
  EXPECT_THROW(ds.add(Pattern::parse("00"), one, 1), DimMismatch);
  EXPECT_THROW(ds.add(Pattern::parse("010"), one, 1), DimMismatch);
  EXPECT_THROW(ds.add(Pattern::parse("01"), one, 0), Error);
}

TEST(MaskedDataset, AddMaskedGathersObservedCoordinates) {
  MaskedDataset ds(4);
  ds.add_masked(Vec{{1.0, 2.0, 3.0, 4.0}}, Pattern::parse("0110"), 1);
  const auto r = ds.row(0);
  ASSERT_EQ(r.observed.size(), 2u);
  EXPECT_EQ(r.observed[0], 1.0);
  EXPECT_EQ(r.observed[1], 4.0);
}

TEST(MaskedDataset, RowsWithPatternAndFill) {
  MaskedDataset ds(2);
  ds.add_masked(Vec{{1.0, 2.0}}, Pattern::parse("00"), 1);
  ds.add_masked(Vec{{3.0, 9.0}}, Pattern::parse("01"), -1);
  ds.add_masked(Vec{{5.0, 9.0}}, Pattern::parse("01"), 1);
  const LabeledData sub = ds.rows_with_pattern(Pattern::parse("01"));
  ASSERT_EQ(sub.n(), 2);
  ASSERT_EQ(sub.dim(), 1);
  EXPECT_EQ(sub.x(0, 0), 3.0);
  EXPECT_EQ(sub.x(1, 0), 5.0);
  EXPECT_EQ(sub.y, (std::vector<int>{-1, 1}));

  const Mat full = ds.fill(Vec{{-7.0, -8.0}});
  EXPECT_EQ(full(1, 1), -8.0);
  EXPECT_EQ(full(0, 1), 2.0);
}

TEST(PatternHistogram, Examples) {
  Rng rng(1);
  LdaModel model(Vec::Ones(2), -Vec::Ones(2), SpdMatrix::identity(2));
  const LabeledData data = sample_lda(model, 1000, rng);

  const auto complete = pattern_histogram(MaskedDataset::from_complete(data));
  ASSERT_EQ(complete.size(), 1u);
  EXPECT_EQ(complete.begin()->first, Pattern::complete(2));
  EXPECT_EQ(complete.begin()->second.total, 1000u);
  EXPECT_EQ(complete.begin()->second.pos + complete.begin()->second.neg, 1000u);

  const auto all = pattern_histogram(apply_mechanism(data, mcar_constant(2, 1.0), rng));
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all.begin()->first, Pattern::all_missing(2));
}

TEST(PatternHistogram, McarHalfGivesFourEqualCells) {
  Rng rng(2);
  LdaModel model(Vec::Ones(2), -Vec::Ones(2), SpdMatrix::identity(2));
  const std::size_t n = 100000;
  const auto h = pattern_histogram(apply_mechanism(sample_lda(model, n, rng), mcar_constant(2, 0.5), rng));
  ASSERT_EQ(h.size(), 4u);
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (const auto& [m, c] : h) EXPECT_NEAR(static_cast<double>(c.total), 25000.0, 3 * sd) << m.str();
}

TEST(Csv, BitExactRoundTrip) {
  Rng rng(3);
  LdaModel model(Vec{{0.1, -3.0, 1e-7}}, Vec{{2.0, 5.5, -1e8}}, SpdMatrix::toeplitz(3, 0.6));
  const MaskedDataset ds = apply_mechanism(sample_lda(model, 500, rng), mcar_constant(3, 0.4), rng);
  std::stringstream ss;
  write_csv(ss, ds);
  const MaskedDataset back = read_csv(ss);
  ASSERT_EQ(back.size(), ds.size());
  ASSERT_EQ(back.dim(), 3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto a = ds.row(i), b = back.row(i);
    ASSERT_EQ(a.pattern, b.pattern);
    ASSERT_EQ(a.label, b.label);
    ASSERT_EQ(a.observed.size(), b.observed.size());
    ASSERT_EQ(std::memcmp(a.observed.data(), b.observed.data(), a.observed.size() * sizeof(double)), 0);
  }
}

TEST(Csv, HeaderAndEmptyCells) {
  MaskedDataset ds(2);
  ds.add_masked(Vec{{0.5, 2.0}}, Pattern::parse("10"), -1);
  std::stringstream ss;
  write_csv(ss, ds);
  EXPECT_EQ(ss.str(), "x0,x1,y\n,2,-1\n");
}

TEST(Csv, RejectsMalformedInput) {
  std::stringstream bad("x0,x1,y\n1,2\n");
  EXPECT_THROW(read_csv(bad), Error);
  std::stringstream label("x0,y\n1,3\n");
  EXPECT_THROW(read_csv(label), Error);
}

TEST(FormatDouble, SeventeenSignificantDigits) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
}
