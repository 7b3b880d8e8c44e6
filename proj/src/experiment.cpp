#include "misslin/experiment.hpp"

#include "misslin/classifiers.hpp"
#include "misslin/missingness.hpp"
#include "misslin/oracles.hpp"
#include "misslin/risk.hpp"
#include "misslin/separability.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace misslin {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos
                                                                                         : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long long> to_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // accept integral scientific notation such as 1e5
    const auto d = to_double(s);
    if (d && std::isfinite(*d) && *d == std::floor(*d) && std::abs(*d) < 9e18) return static_cast<long long>(*d);
    return std::nullopt;
  }
  return v;
}

std::string csv_cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

// Runs f(0..jobs-1) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t jobs, int threads, F&& f) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < jobs;) f(i);
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// KeyValues

ConfigError::ConfigError(std::string origin_, int line_, std::string field_, const std::string& message)
    : Error(origin_ + (line_ > 0 ? ":" + std::to_string(line_) : std::string()) +
            (field_.empty() ? std::string() : " [" + field_ + "]") + ": " + message),
      origin(std::move(origin_)),
      line(line_),
      field(std::move(field_)),
      detail(message) {}

KeyValues KeyValues::parse(std::string_view text, std::string origin) {
  KeyValues kv;
  kv.origin_ = std::move(origin);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (!content.empty()) {
      const auto eq = content.find('=');
      if (eq == std::string::npos) throw ConfigError(kv.origin_, line_no, "", "expected key = value");
      std::string key = trim(std::string_view(content).substr(0, eq));
      std::string value = trim(std::string_view(content).substr(eq + 1));
      if (key.empty()) throw ConfigError(kv.origin_, line_no, "", "empty key");
      if (kv.find(key)) throw ConfigError(kv.origin_, line_no, key, "duplicate key");
      kv.entries_.push_back({line_no, std::move(key), std::move(value)});
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return kv;
}

const KeyValues::Entry* KeyValues::find(std::string_view key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

void KeyValues::require_known(const std::vector<std::string>& known) const {
  for (const auto& e : entries_)
    if (std::find(known.begin(), known.end(), e.key) == known.end())
      throw ConfigError(origin_, e.line, e.key, "unknown key");
}

std::string KeyValues::get_string(std::string_view key, std::string fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  const auto v = to_double(e->value);
  if (!v) throw ConfigError(origin_, e->line, e->key, "expected a number, got '" + e->value + "'");
  return *v;
}

long long KeyValues::get_int(std::string_view key, long long fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  const auto v = to_int(e->value);
  if (!v) throw ConfigError(origin_, e->line, e->key, "expected an integer, got '" + e->value + "'");
  return *v;
}

std::vector<std::string> KeyValues::get_list(std::string_view key, std::vector<std::string> fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<std::string> out;
  for (const auto& item : split_list(e->value)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(item);
      continue;
    }
    const auto lo = to_int(trim(std::string_view(item).substr(0, dots)));
    const auto hi = to_int(trim(std::string_view(item).substr(dots + 2)));
    if (!lo || !hi || *lo > *hi) throw ConfigError(origin_, e->line, e->key, "bad range '" + item + "'");
    for (long long v = *lo; v <= *hi; ++v) out.push_back(std::to_string(v));
  }
  if (out.empty()) throw ConfigError(origin_, e->line, e->key, "empty list");
  return out;
}

std::vector<double> KeyValues::get_double_list(std::string_view key, std::vector<double> fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : get_list(key, {})) {
    const auto v = to_double(item);
    if (!v) throw ConfigError(origin_, e->line, e->key, "expected a number, got '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

std::string ExperimentConfig::scenario() const {
  if (!name.empty()) return name;
  return std::string(family == ModelFamily::Lda ? "lda" : "logistic") + "-" +
         (mask == MaskKind::Mcar ? "mcar" : "mnar") + "-" + covariance.str();
}

void ExperimentConfig::set(const std::string& key, const std::string& value, const std::string& origin, int line) {
  auto fail = [&](const std::string& msg) -> ConfigError { return ConfigError(origin, line, key, msg); };
  auto as_int = [&](long long lo) {
    const auto v = to_int(value);
    if (!v) throw fail("expected an integer, got '" + value + "'");
    if (*v < lo) throw fail("must be >= " + std::to_string(lo));
    return *v;
  };
  auto as_double = [&] {
    const auto v = to_double(value);
    if (!v || !std::isfinite(*v)) throw fail("expected a finite number, got '" + value + "'");
    return *v;
  };

  if (key == "name") {
    name = value;
  } else if (key == "scenario") {
    const auto dash = value.find('-');
    const std::string fam = value.substr(0, dash);
    const std::string mech = dash == std::string::npos ? "" : value.substr(dash + 1);
    if (fam == "lda") family = ModelFamily::Lda;
    else if (fam == "logistic") family = ModelFamily::Logistic;
    else throw fail("unknown model family '" + fam + "' (expected lda or logistic)");
    if (mech == "mcar") mask = MaskKind::Mcar;
    else if (mech == "mnar" || mech == "mnar-selfmask") mask = MaskKind::SelfMask;
    else throw fail("unknown mechanism '" + mech + "' (expected mcar or mnar-selfmask)");
  } else if (key == "covariance") {
    try {
      covariance = CovarianceSpec::parse(value);
    } catch (const Error& e) {
      throw fail(e.what());
    }
  } else if (key == "d") {
    d = static_cast<int>(as_int(1));
    if (d > kMaxEnumerationDim) throw fail("d above " + std::to_string(kMaxEnumerationDim) + " is not supported");
  } else if (key == "eta") {
    eta = as_double();
    if (eta < 0 || eta >= 1) throw fail("eta must lie in [0, 1)");
  } else if (key == "n_grid") {
    n_grid.clear();
    for (const auto& item : split_list(value)) {
      const auto v = to_int(item);
      if (!v || *v < 2) throw fail("entries must be integers >= 2, got '" + item + "'");
      n_grid.push_back(static_cast<std::size_t>(*v));
    }
  } else if (key == "n_test") {
    n_test = static_cast<std::size_t>(as_int(100));
  } else if (key == "replicates") {
    replicates = static_cast<int>(as_int(1));
  } else if (key == "classifiers") {
    classifiers = split_list(value);
    for (const auto& id : classifiers)
      if (!is_known_classifier(id)) throw fail("unknown classifier id '" + id + "'");
  } else if (key == "seed") {
    const auto v = to_int(value);
    if (!v || *v < 0) throw fail("expected a non-negative integer");
    seed = static_cast<std::uint64_t>(*v);
  } else if (key == "output") {
    output = value;
  } else if (key == "threads") {
    threads = static_cast<int>(as_int(1));
  } else if (key == "known_sigma") {
    if (value == "true" || value == "1") known_sigma = true;
    else if (value == "false" || value == "0") known_sigma = false;
    else throw fail("expected true or false");
  } else if (key == "logistic_ridge") {
    logistic_ridge = value == "auto" ? -1.0 : as_double();
  } else if (key == "max_epochs") {
    max_epochs = static_cast<int>(as_int(1));
  } else if (key == "min_per_class") {
    min_per_class = static_cast<int>(as_int(1));
  } else if (key == "tau") {
    tau = value == "auto" ? -1.0 : as_double();
  } else {
    throw fail("unknown key");
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) { return ConfigError("config", 0, field, msg); };
  if (n_grid.empty()) throw fail("n_grid", "must be nonempty");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw fail("n_grid", "must be strictly ascending");
  if (classifiers.empty()) throw fail("classifiers", "must list at least one id");
  for (std::size_t i = 0; i < classifiers.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (classifiers[i] == classifiers[j]) throw fail("classifiers", "duplicate id '" + classifiers[i] + "'");
  if (replicates < 1) throw fail("replicates", "must be >= 1");
  if (n_test < 100) throw fail("n_test", "must be >= 100");
  if (d < 1) throw fail("d", "must be >= 1");
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
  const KeyValues kv = KeyValues::parse(text, origin);
  ExperimentConfig cfg;
  for (const auto& e : kv.entries()) cfg.set(e.key, e.value, origin, e.line);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const auto* entry = kv.find(e.field);
    throw ConfigError(origin, entry ? entry->line : 0, e.field, e.detail);
  }
  return cfg;
}

namespace {

const std::map<std::string, std::string>& builtins() {
  static const std::string trainable =
      "pbp-logreg, 0imp-logreg, ice-logreg, pbp-perceptron, 0imp-perceptron, ice-perceptron, pbp-lda, "
      "0imp-lda, ice-lda, lda-mcar";
  auto make = [&](const std::string& scenario, const std::string& extra) {
    return "# d = 5, eta = 0.5, five training sizes\n"
           "scenario = " + scenario + "\n"
           "covariance = identity\n"
           "d = 5\n"
           "eta = 0.5\n"
           "n_grid = 100, 300, 1000, 3000, 10000\n"
           "n_test = 100000\n"
           "replicates = 30\n"
           "classifiers = " + trainable + extra + "\n"
           "seed = 20240601\n";
  };
  static const std::map<std::string, std::string> m = {
      {"fig1-lda-mcar", make("lda-mcar", ", bayes-pbp-lda")},
      {"fig1-lda-mnar", make("lda-mnar-selfmask", "")},
      {"fig1-logistic-mcar", make("logistic-mcar", "")},
      {"fig1-logistic-mnar", make("logistic-mnar-selfmask", "")},
  };
  return m;
}

}  // namespace

std::optional<std::string> builtin_config(const std::string& name) {
  const auto& m = builtins();
  const auto it = m.find(name);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> builtin_config_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : builtins()) out.push_back(k);
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
  }
  if (const auto text = builtin_config(path)) return parse_config(*text, path);
  throw ConfigError(path, 0, "", "no such file or builtin config");
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

struct Population {
  std::optional<LdaModel> lda;
  std::optional<LogisticModel> logistic;
  MechanismSpec mechanism;
  std::optional<GpmmModel> gpmm;  // LDA + MCAR only

  LabeledData sample(std::size_t n, Rng& rng) const {
    return lda ? sample_lda(*lda, static_cast<Eigen::Index>(n), rng)
               : sample_logistic(*logistic, static_cast<Eigen::Index>(n), rng);
  }
  MaskedDataset sample_masked(std::size_t n, Rng& rng) const { return apply_mechanism(sample(n, rng), mechanism, rng); }
};

Population build_population(const ExperimentConfig& cfg, Rng& model_rng) {
  Population pop{std::nullopt, std::nullopt, Mcar{}, std::nullopt};
  std::vector<std::vector<GaussianComponent>> margins;
  if (cfg.family == ModelFamily::Lda) {
    pop.lda = preset_fig1_lda(cfg.d, cfg.covariance, model_rng);
    for (int j = 0; j < cfg.d; ++j) margins.push_back(marginal(*pop.lda, j));
  } else {
    pop.logistic = preset_fig1_logistic(cfg.d, cfg.covariance, model_rng);
    for (int j = 0; j < cfg.d; ++j) margins.push_back(marginal(*pop.logistic, j));
  }
  if (cfg.mask == MaskKind::Mcar) {
    pop.mechanism = mcar_constant(cfg.d, cfg.eta);
    if (pop.lda) pop.gpmm = GpmmModel::from_lda_mcar(*pop.lda, Vec::Constant(cfg.d, cfg.eta));
  } else {
    Vec b(cfg.d);
    for (int j = 0; j < cfg.d; ++j)
      b(j) = cfg.eta == 0 ? -std::numeric_limits<double>::infinity()
                          : calibrate_self_mask_intercept(margins[static_cast<std::size_t>(j)], cfg.eta);
    pop.mechanism = SelfMaskMnar{b};
  }
  return pop;
}

BayesReference bayes_reference(const ExperimentConfig& cfg, const Population& pop, const MaskedDataset& test) {
  if (pop.lda && cfg.mask == MaskKind::Mcar)
    return {bayes_risk_missing_mcar(*pop.lda, Vec::Constant(cfg.d, cfg.eta)), 0.0, true};
  std::unique_ptr<PosteriorClassifier> oracle;
  if (pop.lda) {
    oracle = std::make_unique<SelfMaskLdaBayes>(*pop.lda, std::get<SelfMaskMnar>(pop.mechanism).intercepts);
  } else {
    std::optional<Vec> b;
    if (cfg.mask == MaskKind::SelfMask) b = std::get<SelfMaskMnar>(pop.mechanism).intercepts;
    oracle = std::make_unique<LogisticBayes>(*pop.logistic, b);
  }
  const RiskReport rep = posterior_bayes_risk(*oracle, test);
  return {rep.risk_estimate, rep.ci_halfwidth, false};
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const Rng root(cfg.seed);
  const std::string scenario = cfg.scenario();
  const std::size_t n_cls = cfg.classifiers.size();
  const std::size_t n_ns = cfg.n_grid.size();
  std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.replicates) * n_ns * n_cls);
  auto slot = [&](int rep, std::size_t ni, std::size_t ci) -> ResultRow& {
    return rows[(ci * n_ns + ni) * static_cast<std::size_t>(cfg.replicates) + static_cast<std::size_t>(rep)];
  };

  for (int rep = 0; rep < cfg.replicates; ++rep) {
    Rng model_rng = root.split("model", static_cast<std::uint64_t>(rep));
    const Population pop = build_population(cfg, model_rng);
    Rng test_rng = root.split("test", static_cast<std::uint64_t>(rep));
    const MaskedDataset test = pop.sample_masked(cfg.n_test, test_rng);
    const BayesReference bayes = bayes_reference(cfg, pop, test);
    std::optional<SpdMatrix> known;
    if (pop.lda && cfg.known_sigma) known = pop.lda->sigma;

    parallel_for(n_ns, cfg.threads, [&](std::size_t ni) {
      const std::size_t n = cfg.n_grid[ni];
      Rng train_rng = root.split("train", static_cast<std::uint64_t>(rep) * 1024 + ni);
      const MaskedDataset train = pop.sample_masked(n, train_rng);
      TrainContext ctx;
      ctx.train = &train;
      ctx.lda = pop.lda ? &*pop.lda : nullptr;
      ctx.gpmm = pop.gpmm ? &*pop.gpmm : nullptr;
      ctx.known_sigma = known;
      ctx.logistic.ridge = cfg.logistic_ridge >= 0 ? cfg.logistic_ridge : 1.0 / (2.0 * static_cast<double>(n));
      ctx.max_epochs = cfg.max_epochs;
      ctx.min_per_class = cfg.min_per_class;
      ctx.tau = cfg.tau;
      for (std::size_t ci = 0; ci < n_cls; ++ci) {
        ResultRow& row = slot(rep, ni, ci);
        row.scenario = scenario;
        row.classifier = cfg.classifiers[ci];
        row.n_train = n;
        row.replicate = rep;
        row.bayes_risk_mis = bayes.risk;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const auto clf = build_classifier(row.classifier, ctx);
          const RiskReport r = risk_on(*clf, test);
          row.risk = r.risk_estimate;
          row.ci_halfwidth = r.ci_halfwidth;
          row.excess = r.risk_estimate - bayes.risk;
        } catch (const std::exception& e) {
          const double nan = std::numeric_limits<double>::quiet_NaN();
          row.risk = row.excess = row.ci_halfwidth = nan;
          row.error = sanitize(e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_time_ms = opts.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
      }
    });
    if (opts.progress) *opts.progress << "replicate " << rep + 1 << "/" << cfg.replicates << " done" << std::endl;
  }
  return rows;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {"scenario",       "classifier",   "n_train",      "replicate",
                                                "risk",           "excess",       "ci_halfwidth", "bayes_risk_mis",
                                                "wall_time_ms",   "error"};
  return cols;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.classifier << ',' << r.n_train << ',' << r.replicate << ',' << csv_cell(r.risk)
       << ',' << csv_cell(r.excess) << ',' << csv_cell(r.ci_halfwidth) << ',' << csv_cell(r.bayes_risk_mis) << ','
       << csv_cell(r.wall_time_ms) << ',' << r.error << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("empty results CSV");
  std::vector<ResultRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto num = [&](const std::string& s) { return s.empty() ? nan : std::stod(s); };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != result_columns().size()) throw Error("malformed results row: " + line);
    ResultRow r;
    r.scenario = f[0];
    r.classifier = f[1];
    r.n_train = static_cast<std::size_t>(std::stoull(f[2]));
    r.replicate = std::stoi(f[3]);
    r.risk = num(f[4]);
    r.excess = num(f[5]);
    r.ci_halfwidth = num(f[6]);
    r.bayes_risk_mis = num(f[7]);
    r.wall_time_ms = num(f[8]);
    r.error = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepTable::write_csv(std::ostream& os) const {
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
}

namespace {

LdaModel symmetric_model(int d, double gap, const CovarianceSpec& cov) {
  const Vec half = Vec::Constant(d, gap / 2);
  return LdaModel(half, -half, cov.build(d));
}

std::vector<int> int_list(const KeyValues& grid, const std::string& key, std::vector<int> fallback, int lo) {
  std::vector<int> out;
  const auto* e = grid.find(key);
  if (!e) return fallback;
  for (const auto& item : grid.get_list(key, {})) {
    const auto v = to_int(item);
    if (!v || *v < lo) throw ConfigError(grid.origin(), e->line, key, "expected integers >= " + std::to_string(lo));
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

std::vector<CovarianceSpec> covariance_list(const KeyValues& grid) {
  std::vector<CovarianceSpec> out;
  const auto* e = grid.find("covariance");
  for (const auto& item : grid.get_list("covariance", {"identity"})) {
    try {
      out.push_back(CovarianceSpec::parse(item));
    } catch (const Error& err) {
      throw ConfigError(grid.origin(), e ? e->line : 0, "covariance", err.what());
    }
  }
  return out;
}

void check_unit_interval(const KeyValues& grid, const std::string& key, const std::vector<double>& v, bool closed_top) {
  for (double x : v)
    if (!(x >= 0 && (closed_top ? x <= 1 : x < 1))) {
      const auto* e = grid.find(key);
      throw ConfigError(grid.origin(), e ? e->line : 0, key, "values must lie in [0, 1" + std::string(closed_top ? "]" : ")"));
    }
}

std::string pass_cell(bool ok) { return ok ? "pass" : "fail"; }

SweepTable bias_sweep(const KeyValues& grid) {
  grid.require_known({"kind", "d", "eta", "mu", "covariance"});
  const auto ds = int_list(grid, "d", {2, 3, 4, 5, 6, 7, 8}, 1);
  const auto etas = grid.get_double_list("eta", {0.1, 0.3, 0.5, 0.8});
  check_unit_interval(grid, "eta", etas, false);
  const auto mus = grid.get_double_list("mu", {0.5, 1, 2, 4});
  const auto covs = covariance_list(grid);

  SweepTable t;
  t.columns = {"d", "eta", "mu", "covariance", "bayes_complete", "bayes_missing", "bias", "bias_bound", "slack",
               "pass"};
  for (int d : ds)
    for (double eta : etas)
      for (double mu : mus)
        for (const auto& cov : covs) {
          const LdaModel model = symmetric_model(d, mu, cov);
          const double complete = bayes_risk_complete(model);
          const double missing = bayes_risk_missing_mcar(model, Vec::Constant(d, eta));
          const double bias = missing - complete;
          const double bound = bias_bound(BoundInputs::from_model(model, eta, 1));
          const bool ok = bias <= bound + 1e-12;
          t.violations += !ok;
          t.rows.push_back({std::to_string(d), format_double(eta), format_double(mu), cov.str(), format_double(complete),
                            format_double(missing), format_double(bias), format_double(bound),
                            format_double(bound - bias), pass_cell(ok)});
        }
  return t;
}

SweepTable estimation_sweep(const KeyValues& grid) {
  grid.require_known({"kind", "d", "eta", "mu", "covariance", "n", "replicates", "n_test", "seed", "threads"});
  const auto ds = int_list(grid, "d", {5}, 1);
  const auto etas = grid.get_double_list("eta", {0.5});
  check_unit_interval(grid, "eta", etas, false);
  const auto mus = grid.get_double_list("mu", {1.5});
  const auto covs = covariance_list(grid);
  const auto ns = int_list(grid, "n", {200, 500, 2000}, 2);
  const int reps = static_cast<int>(grid.get_int("replicates", 50));
  const auto n_test = static_cast<std::size_t>(grid.get_int("n_test", 100000));
  const auto seed = static_cast<std::uint64_t>(grid.get_int("seed", 1));
  const int threads = static_cast<int>(grid.get_int("threads", 1));
  if (reps < 2) throw ConfigError(grid.origin(), 0, "replicates", "must be >= 2");
  if (n_test < 100) throw ConfigError(grid.origin(), 0, "n_test", "must be >= 100");

  SweepTable t;
  t.columns = {"d",          "eta",        "mu",           "covariance",  "n",           "bayes_missing",
               "risk_mc",    "excess_mc",  "ci_halfwidth", "risk_exact",  "excess_exact", "estimation_bound",
               "slack",      "pass"};
  const Rng root(seed);
  std::uint64_t point = 0;
  for (int d : ds)
    for (double eta : etas)
      for (double mu : mus)
        for (const auto& cov : covs)
          for (int n : ns) {
            const LdaModel model = symmetric_model(d, mu, cov);
            const Vec eta_vec = Vec::Constant(d, eta);
            const double bayes = bayes_risk_missing_mcar(model, eta_vec);
            const MaskedSource source = lda_source(model, mcar_constant(d, eta));
            std::vector<double> mc(static_cast<std::size_t>(reps)), exact(static_cast<std::size_t>(reps));
            const Rng point_rng = root.split("point", point++);
            parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
              Rng train_rng = point_rng.split("train", r);
              const MaskedDataset train = source(static_cast<std::size_t>(n), train_rng);
              const LdaMcarFit fit = fit_lda_mcar(train, model.sigma);
              Rng test_rng = point_rng.split("test", r);
              mc[r] = monte_carlo_risk(fit.classifier, source, n_test, test_rng).risk_estimate;
              exact[r] = plugin_lda_risk_mcar(fit.means.mu_hat_pos, fit.means.mu_hat_neg, model, eta_vec);
            });
            double mean_mc = 0, mean_exact = 0, var = 0;
            for (int r = 0; r < reps; ++r) {
              mean_mc += mc[static_cast<std::size_t>(r)] / reps;
              mean_exact += exact[static_cast<std::size_t>(r)] / reps;
            }
            for (int r = 0; r < reps; ++r) var += std::pow(mc[static_cast<std::size_t>(r)] - mean_mc, 2) / (reps - 1);
            const double ci = 1.96 * std::sqrt(var / reps);
            const double bound = estimation_bound(BoundInputs::from_model(model, eta, n));
            const double excess = mean_mc - bayes;
            const bool ok = excess <= bound;
            t.violations += !ok;
            t.rows.push_back({std::to_string(d), format_double(eta), format_double(mu), cov.str(), std::to_string(n),
                              format_double(bayes), format_double(mean_mc), format_double(excess), format_double(ci),
                              format_double(mean_exact), format_double(mean_exact - bayes), format_double(bound),
                              format_double(bound - excess), pass_cell(ok)});
          }
  return t;
}

SweepTable sandwich_sweep(const KeyValues& grid) {
  grid.require_known({"kind", "configs", "d_max", "reps", "seed", "eta_min", "eta_max"});
  const int configs = static_cast<int>(grid.get_int("configs", 20));
  const int d_max = static_cast<int>(grid.get_int("d_max", 10));
  const auto reps = static_cast<std::size_t>(grid.get_int("reps", 200000));
  const auto seed = static_cast<std::uint64_t>(grid.get_int("seed", 1));
  const double eta_min = grid.get_double("eta_min", 0.05);
  const double eta_max = grid.get_double("eta_max", 0.95);
  if (configs < 1) throw ConfigError(grid.origin(), 0, "configs", "must be >= 1");
  if (d_max < 1) throw ConfigError(grid.origin(), 0, "d_max", "must be >= 1");
  if (reps < 1) throw ConfigError(grid.origin(), 0, "reps", "must be >= 1");
  if (!(0 <= eta_min && eta_min <= eta_max && eta_max < 1))
    throw ConfigError(grid.origin(), 0, "eta_min", "need 0 <= eta_min <= eta_max < 1");

  SweepTable t;
  t.columns = {"config",       "d",           "eta_constant", "alpha",        "sqrt_alpha",   "upper_corrected",
               "exact",        "estimate",    "ci_halfwidth", "slack_lower",  "slack_upper",  "lower_holds",
               "upper_holds",  "upper_corrected_holds",       "matches_exact", "bounds_exact", "pass"};
  const Rng root(seed);
  for (int i = 0; i < configs; ++i) {
    Rng cfg_rng = root.split("config", static_cast<std::uint64_t>(i));
    const int d = 1 + static_cast<int>(cfg_rng.below(static_cast<std::uint64_t>(d_max)));
    const Vec c1 = cfg_rng.normal_vector(d);
    const Vec c2 = cfg_rng.normal_vector(d);
    const bool constant = i % 2 == 0;
    Vec eta(d);
    if (constant) {
      eta.setConstant(cfg_rng.uniform(eta_min, eta_max));
    } else {
      for (int j = 0; j < d; ++j) eta(j) = cfg_rng.uniform(eta_min, eta_max);
    }
    Rng mc_rng = root.split("mc", static_cast<std::uint64_t>(i));
    const SeparabilityResult res = mc_separability(c1, c2, eta, reps, mc_rng);
    const double ci3 = 3 * res.ci_halfwidth;
    const double corrected = separability_upper_bound_corrected(res.lower_bound);
    const bool lower_ok = res.lower_bound - ci3 <= res.mc_estimate;
    const bool upper_ok = res.mc_estimate <= res.upper_bound + ci3;
    const bool corrected_ok = res.mc_estimate <= corrected + ci3;
    std::optional<double> exact;
    if (d <= kMaxEnumerationDim) exact = exact_separability(c1, c2, eta);
    const bool matches = !exact || std::abs(*exact - res.mc_estimate) <= ci3 + 1e-12;
    bool bounds_exact = true;
    if (constant)
      bounds_exact = std::abs(res.lower_bound - (1 - eta(0))) <= 1e-12 &&
                     std::abs(res.upper_bound - std::sqrt(1 - eta(0))) <= 1e-12;
    const bool ok = lower_ok && upper_ok && corrected_ok && matches && bounds_exact;
    t.violations += !ok;
    auto yn = [](bool b) { return std::string(b ? "yes" : "no"); };
    t.rows.push_back({std::to_string(i), std::to_string(d), constant ? "1" : "0", format_double(res.lower_bound),
                      format_double(res.upper_bound), format_double(corrected), exact ? format_double(*exact) : "",
                      format_double(res.mc_estimate), format_double(res.ci_halfwidth),
                      format_double(res.mc_estimate - (res.lower_bound - ci3)),
                      format_double(res.upper_bound + ci3 - res.mc_estimate), yn(lower_ok), yn(upper_ok),
                      yn(corrected_ok), yn(matches), constant ? yn(bounds_exact) : "", pass_cell(ok)});
  }
  return t;
}

SweepTable asymptotic_sweep(const KeyValues& grid) {
  grid.require_known({"kind", "d", "s", "p", "law", "reps", "seed", "tol", "threads"});
  const auto ds = int_list(grid, "d", {2000}, 1);
  const auto ss = int_list(grid, "s", {1000}, 0);
  const auto ps = grid.get_double_list("p", {2});
  const std::string law_name = grid.get_string("law", "gaussian");
  const auto reps = static_cast<std::size_t>(grid.get_int("reps", 100000));
  const auto seed = static_cast<std::uint64_t>(grid.get_int("seed", 1));
  const double tol = grid.get_double("tol", 0.02);
  const int threads = static_cast<int>(grid.get_int("threads", 1));
  CentroidLaw law;
  try {
    law = parse_centroid_law(law_name);
  } catch (const Error& e) {
    const auto* entry = grid.find("law");
    throw ConfigError(grid.origin(), entry ? entry->line : 0, "law", e.what());
  }
  for (double p : ps)
    if (!(p >= 1)) throw ConfigError(grid.origin(), grid.find("p") ? grid.find("p")->line : 0, "p", "must be >= 1");

  SweepTable t;
  t.columns = {"d", "s", "p", "law", "rho", "limit", "estimate", "ci_halfwidth", "deviation", "pass"};
  const Rng root(seed);
  std::uint64_t point = 0;
  for (int d : ds)
    for (int s : ss)
      for (double p : ps) {
        if (s > d) throw ConfigError(grid.origin(), 0, "s", "s must not exceed d");
        Rng rng = root.split("point", point++);
        const AsymptoticCheck res = mc_asymptotic_check(d, s, p, law, reps, rng, threads);
        const double dev = res.estimate - res.limit;
        const bool ok = std::abs(dev) <= tol;
        t.violations += !ok;
        t.rows.push_back({std::to_string(d), std::to_string(s), std::isinf(p) ? "inf" : format_double(p), law_name,
                          format_double(static_cast<double>(s) / d), format_double(res.limit),
                          format_double(res.estimate), format_double(res.ci_halfwidth), format_double(dev),
                          pass_cell(ok)});
      }
  return t;
}

const KeyValues::Entry& require_kind(const KeyValues& grid) {
  const auto* e = grid.find("kind");
  if (!e) throw ConfigError(grid.origin(), 0, "kind", "missing");
  return *e;
}

}  // namespace

SweepTable run_bounds_sweep(const KeyValues& grid) {
  const auto& kind = require_kind(grid);
  if (kind.value == "bias") return bias_sweep(grid);
  if (kind.value == "estimation") return estimation_sweep(grid);
  throw ConfigError(grid.origin(), kind.line, "kind", "expected bias or estimation, got '" + kind.value + "'");
}

SweepTable run_separability_sweep(const KeyValues& grid) {
  const auto& kind = require_kind(grid);
  if (kind.value == "sandwich") return sandwich_sweep(grid);
  if (kind.value == "asymptotic") return asymptotic_sweep(grid);
  throw ConfigError(grid.origin(), kind.line, "kind", "expected sandwich or asymptotic, got '" + kind.value + "'");
}

}  // namespace misslin
