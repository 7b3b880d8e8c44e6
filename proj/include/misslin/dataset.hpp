#pragma once

#include "misslin/core.hpp"

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace misslin {

/// Complete (unmasked) labeled sample; labels are +1 / -1.
struct LabeledData {
  Mat x;
  std::vector<int> y;

  Eigen::Index n() const { return x.rows(); }
  int dim() const { return static_cast<int>(x.cols()); }
};

/// Labeled sample where each row stores only its observed values.
/// No placeholder is kept for missing entries.
class MaskedDataset {
 public:
  struct Row {
    Pattern pattern;
    std::span<const double> observed;
    int label;
  };

  MaskedDataset() = default;
  explicit MaskedDataset(int dim) : dim_(dim) {}

  /// observed.size() must equal |obs(pattern)|.
  void add(Pattern pattern, std::span<const double> observed, int label);
  /// Masks a full row x (length d) with pattern.
  template <class Derived>
  void add_masked(const Eigen::MatrixBase<Derived>& x, Pattern pattern, int label) {
    Vec obs = gather_observed(x, pattern);
    add(pattern, std::span<const double>(obs.data(), static_cast<std::size_t>(obs.size())), label);
  }
  static MaskedDataset from_complete(const LabeledData& data);

  int dim() const { return dim_; }
  std::size_t size() const { return patterns_.size(); }
  bool empty() const { return patterns_.empty(); }

  Row row(std::size_t i) const {
    return {patterns_[i], std::span<const double>(values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]),
            labels_[i]};
  }
  const Pattern& pattern(std::size_t i) const { return patterns_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }

  /// Value of coordinate j in row i; requires coordinate j observed.
  double value(std::size_t i, int j) const;

  /// Rows with the given pattern as a |rows| x |obs(m)| matrix plus labels.
  LabeledData rows_with_pattern(const Pattern& m) const;

  /// Full n x d matrix with missing entries set to fill[j].
  Mat fill(const Vec& fill) const;

  void reserve(std::size_t n, std::size_t values);

 private:
  int dim_ = 0;
  std::vector<Pattern> patterns_;
  std::vector<int> labels_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_{0};
};

/// Per-pattern counts, total and split by class.
struct PatternCounts {
  std::size_t total = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
};

std::map<Pattern, PatternCounts> pattern_histogram(const MaskedDataset& ds);

/// CSV with columns x0..x{d-1},y; missing entries are empty cells; values use 17 significant digits.
void write_csv(std::ostream& out, const MaskedDataset& ds);
MaskedDataset read_csv(std::istream& in);

/// Shortest-roundtrip-safe formatting with 17 significant digits.
std::string format_double(double v);

}  // namespace misslin
