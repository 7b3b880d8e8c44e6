#include "misslin/dataset.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace misslin {

void MaskedDataset::add(Pattern pattern, std::span<const double> observed, int label) {
  if (pattern.dim() != dim_) throw DimMismatch("row pattern dimension differs from dataset");
  if (static_cast<int>(observed.size()) != pattern.n_observed())
    throw DimMismatch("row must store exactly |obs(pattern)| values");
  if (label != 1 && label != -1) throw Error("labels must be +1 or -1");
  patterns_.push_back(pattern);
  labels_.push_back(label);
  values_.insert(values_.end(), observed.begin(), observed.end());
  offsets_.push_back(values_.size());
}

MaskedDataset MaskedDataset::from_complete(const LabeledData& data) {
  MaskedDataset ds(data.dim());
  ds.reserve(static_cast<std::size_t>(data.n()), static_cast<std::size_t>(data.x.size()));
  const Pattern full = Pattern::complete(data.dim());
  for (Eigen::Index i = 0; i < data.n(); ++i) ds.add_masked(data.x.row(i).transpose(), full, data.y[i]);
  return ds;
}

void MaskedDataset::reserve(std::size_t n, std::size_t values) {
  patterns_.reserve(n);
  labels_.reserve(n);
  offsets_.reserve(n + 1);
  values_.reserve(values);
}

double MaskedDataset::value(std::size_t i, int j) const {
  const Pattern& p = patterns_[i];
  if (p.missing(j)) throw Error("value(): coordinate is missing");
  // rank of j among observed coordinates
  const std::uint64_t below = (std::uint64_t{1} << j) - 1;
  const int rank = j - std::popcount(p.bits() & below);
  return values_[offsets_[i] + rank];
}

LabeledData MaskedDataset::rows_with_pattern(const Pattern& m) const {
  std::size_t count = 0;
  for (const auto& p : patterns_) count += (p == m);
  LabeledData out;
  out.x.resize(static_cast<Eigen::Index>(count), m.n_observed());
  out.y.reserve(count);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (patterns_[i] != m) continue;
    const Row rw = row(i);
    for (std::size_t k = 0; k < rw.observed.size(); ++k) out.x(r, static_cast<Eigen::Index>(k)) = rw.observed[k];
    out.y.push_back(rw.label);
    ++r;
  }
  return out;
}

Mat MaskedDataset::fill(const Vec& fill) const {
  if (fill.size() != dim_) throw DimMismatch("fill vector length differs from dimension");
  Mat out(static_cast<Eigen::Index>(size()), dim_);
  for (std::size_t i = 0; i < size(); ++i) {
    const Row rw = row(i);
    std::size_t k = 0;
    for (int j = 0; j < dim_; ++j)
      out(static_cast<Eigen::Index>(i), j) = rw.pattern.missing(j) ? fill(j) : rw.observed[k++];
  }
  return out;
}

std::map<Pattern, PatternCounts> pattern_histogram(const MaskedDataset& ds) {
  std::map<Pattern, PatternCounts> hist;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& c = hist[ds.pattern(i)];
    ++c.total;
    if (ds.label(i) == 1)
      ++c.pos;
    else
      ++c.neg;
  }
  return hist;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const MaskedDataset& ds) {
  for (int j = 0; j < ds.dim(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto rw = ds.row(i);
    std::size_t k = 0;
    for (int j = 0; j < ds.dim(); ++j) {
      if (rw.pattern.observed(j)) out << format_double(rw.observed[k++]);
      out << ',';
    }
    out << rw.label << '\n';
  }
}

MaskedDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV input");
  int dim = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    bool saw_y = false;
    while (std::getline(hs, cell, ',')) {
      if (cell == "y") {
        saw_y = true;
        break;
      }
      ++dim;
    }
    if (!saw_y || dim == 0) throw Error("CSV header must be x0,...,x{d-1},y");
  }
  MaskedDataset ds(dim);
  std::vector<double> obs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    obs.clear();
    std::uint64_t bits = 0;
    std::size_t pos = 0;
    for (int j = 0; j < dim; ++j) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) throw Error("CSV line " + std::to_string(line_no) + ": too few columns");
      if (comma == pos)
        bits |= std::uint64_t{1} << j;
      else
        obs.push_back(std::stod(line.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    const int label = std::stoi(line.substr(pos));
    ds.add(Pattern(bits, dim), obs, label);
  }
  return ds;
}

}  // namespace misslin
