#pragma once

#include "misslin/core.hpp"
#include "misslin/generators.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace misslin {

/// Parse or validation failure tied to a line (0 when not file-backed) and a field.
struct ConfigError : Error {
  ConfigError(std::string origin, int line, std::string field, const std::string& message);
  std::string origin;
  int line;
  std::string field;
  std::string detail;
};

/// Flat `key = value` text with `#` comments.
class KeyValues {
 public:
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };

  static KeyValues parse(std::string_view text, std::string origin);

  const std::string& origin() const { return origin_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(std::string_view key) const;
  /// Throws ConfigError naming any key outside `known`.
  void require_known(const std::vector<std::string>& known) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  /// Comma-separated list; `a..b` expands an integer range.
  std::vector<std::string> get_list(std::string_view key, std::vector<std::string> fallback) const;
  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const;

 private:
  std::string origin_;
  std::vector<Entry> entries_;
};

enum class ModelFamily { Lda, Logistic };
enum class MaskKind { Mcar, SelfMask };

struct ExperimentConfig {
  std::string name;  // scenario column; derived when empty
  ModelFamily family = ModelFamily::Lda;
  MaskKind mask = MaskKind::Mcar;
  CovarianceSpec covariance;
  int d = 5;
  double eta = 0.5;
  std::vector<std::size_t> n_grid{100, 300, 1000, 3000, 10000};
  std::size_t n_test = 100000;
  int replicates = 30;
  std::vector<std::string> classifiers;
  std::uint64_t seed = 1;
  std::string output;
  int threads = 1;
  /// LDA scenarios: give lda-mcar and pbp-lda-mnar the true Sigma.
  bool known_sigma = true;
  /// Ridge of the logistic objective; negative means 1 / (2 n).
  double logistic_ridge = -1;
  int max_epochs = 1000;
  int min_per_class = 2;
  double tau = -1;

  std::string scenario() const;
  /// Applies one key=value; throws ConfigError on bad input.
  void set(const std::string& key, const std::string& value, const std::string& origin = "override", int line = 0);
  /// Checks cross-field invariants.
  void validate() const;
};

ExperimentConfig parse_config(std::string_view text, const std::string& origin);
/// Reads a config file, or a builtin config when `path` names one and no such file exists.
ExperimentConfig load_config(const std::string& path);
std::optional<std::string> builtin_config(const std::string& name);
std::vector<std::string> builtin_config_names();

struct ResultRow {
  std::string scenario;
  std::string classifier;
  std::size_t n_train = 0;
  int replicate = 0;
  double risk = 0;
  double excess = 0;
  double ci_halfwidth = 0;
  double bayes_risk_mis = 0;
  double wall_time_ms = 0;
  std::string error;  // empty on success
};

struct RunOptions {
  bool timing = true;
  std::ostream* progress = nullptr;
};

/// Rows sorted by (classifier position in the config, n_train, replicate).
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

const std::vector<std::string>& result_columns();
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& is);

/// Bayes risk reference of one replicate's population, computed as in run_experiment.
struct BayesReference {
  double risk = 0;
  double ci_halfwidth = 0;  // 0 for the closed form
  bool closed_form = false;
};

// ---------------------------------------------------------------------------
// Sweeps

/// A CSV table with a violation flag for `--strict`.
struct SweepTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::size_t violations = 0;

  void write_csv(std::ostream& os) const;
};

/// kind = bias | estimation; see README for the keys.
SweepTable run_bounds_sweep(const KeyValues& grid);
/// kind = sandwich | asymptotic.
SweepTable run_separability_sweep(const KeyValues& grid);

}  // namespace misslin
