#include "tubescore/cli.hpp"

#include "tubescore/errors.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace tubescore {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"null", {"family", "dim", "estimation", "supports", "weights"}},
      {"perturbation", {"family", "lower", "upper", "radius", "eta"}},
      {"test", {"alpha", "grid", "flip_exclusion", "removable_exclusion", "max_components"}},
      {"mc", {"replicates", "seed", "n", "mode", "thresholds", "sizes"}},
      {"output", {"path", "format"}},
      {"constants", {"d", "kappa0", "ell0", "euler"}},
      {"simulate", {"table1", "models", "etas", "sizes", "reps"}},
      {"tail", {"thresholds"}},
  };
  return keys;
}

struct Entry {
  std::string value;
  int line = 0;
};

// Typed access to the raw entries with line-numbered errors.
class Entries {
 public:
  std::map<std::string, Entry> map;  // "section.key"
  std::set<std::string> sections;

  const Entry* find(const std::string& key) const {
    auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  }
  bool has(const std::string& key) const { return find(key) != nullptr; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto* e = find(key);
    throw ConfigError("line " + std::to_string(e ? e->line : 0) + ": " + key + ": " + what);
  }

  template <class T>
  T number_from(const std::string& key, const std::string& text) const {
    T v{};
    if (!parse_number(text, v)) fail(key, "malformed number '" + text + "'");
    return v;
  }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (const auto* e = find(key)) out = number_from<T>(key, e->value);
  }
  template <class T>
  void get(const std::string& key, std::optional<T>& out) const {
    if (const auto* e = find(key)) out = number_from<T>(key, e->value);
  }
  void get_string(const std::string& key, std::string& out) const {
    if (const auto* e = find(key)) out = e->value;
  }
  template <class T>
  void get_list(const std::string& key, std::vector<T>& out) const {
    const auto* e = find(key);
    if (!e) return;
    out.clear();
    for (const auto& item : split(e->value, ',')) out.push_back(number_from<T>(key, item));
  }
  Vec point(const std::string& key, const std::string& text) const {
    const auto w = words(text);
    if (w.empty()) fail(key, "empty point");
    Vec v(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from<double>(key, w[i]);
    return v;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    fail(key, "expected true or false");
  }
};

Entries tokenize(const std::string& text, std::vector<std::string>& warnings) {
  Entries entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!known_keys().count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      entries.sections.insert(section);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + "key '" + key + "' appears before any section");
    if (!known_keys().at(section).count(key)) throw ConfigError(where + "unknown key '" + section + "." + key + "'");
    const std::string full = section + "." + key;
    if (const auto* prev = entries.find(full))
      warnings.push_back("duplicate key '" + full + "' at line " + std::to_string(line) + " overrides line " +
                         std::to_string(prev->line));
    entries.map[full] = Entry{value, line};
  }
  return entries;
}

NullEstimation parse_estimation(const Entries& e) {
  const auto* v = e.find("null.estimation");
  if (!v || v->value == "none") return NullEstimation::None;
  if (v->value == "weights") return NullEstimation::Weights;
  if (v->value == "weights_and_supports") return NullEstimation::WeightsAndSupports;
  e.fail("null.estimation", "expected none, weights or weights_and_supports");
}

void require(const Entries& e, const std::string& key) {
  if (!e.has(key)) throw ConfigError("missing required key '" + key + "'");
}

}  // namespace

DensityFamily RunConfig::family() const {
  if (null_family == "binomial2") return DensityFamily::binomial2();
  if (null_family == "normal") return DensityFamily::normal(dim);
  if (null_family == "poisson") return DensityFamily::poisson();
  throw ConfigError("unknown family '" + null_family + "' (expected binomial2, normal or poisson)");
}

NullModel RunConfig::null_model() const {
  if (supports.empty()) throw ConfigError("missing required key 'null.supports'");
  std::vector<double> w = weights;
  if (w.empty()) w.assign(supports.size(), 1.0 / static_cast<double>(supports.size()));
  if (w.size() != supports.size()) throw ConfigError("null.weights and null.supports differ in length");
  return NullModel::mixture(family(), MixingDistribution::sorted(supports, w), estimation);
}

TestSpec RunConfig::test_spec() const {
  if (!domain) throw ConfigError("the search domain is not configured");
  GeometryOptions geometry;
  if (flip_exclusion) geometry.flip_exclusion = *flip_exclusion;
  if (removable_exclusion) geometry.removable_exclusion = *removable_exclusion;
  return TestSpec{null_model(), *domain, alpha, grid, geometry, {}, KernelStrategy::Auto};
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  const Entries e = tokenize(text, c.warnings);

  const bool model_free = e.sections.count("constants") || e.sections.count("simulate");
  if (!model_free) {
    require(e, "null.family");
    require(e, "perturbation.family");
    if (!e.has("perturbation.radius")) {
      require(e, "perturbation.lower");
      require(e, "perturbation.upper");
    }
  }

  // [null]
  e.get_string("null.family", c.null_family);
  e.get("null.dim", c.dim);
  if (c.dim < 1 || c.dim > 2) e.fail("null.dim", "dimension must be 1 or 2");
  c.estimation = parse_estimation(e);
  if (const auto* s = e.find("null.supports"))
    for (const auto& item : split(s->value, ',')) {
      c.supports.push_back(e.point("null.supports", item));
      if (c.supports.back().size() != c.dim) e.fail("null.supports", "support dimension differs from null.dim");
    }
  e.get_list("null.weights", c.weights);
  if (c.has_model()) (void)c.family();

  // [perturbation]
  e.get_string("perturbation.family", c.perturbation_family);
  if (!c.perturbation_family.empty() && c.perturbation_family != c.null_family)
    e.fail("perturbation.family", "perturbation and null families must agree");
  if (const auto* r = e.find("perturbation.radius")) {
    const double radius = e.number_from<double>("perturbation.radius", r->value);
    if (!(std::isfinite(radius) && radius > 0.0)) e.fail("perturbation.radius", "radius must be finite and positive");
    c.domain = ThetaDomain::disk(radius);
  } else if (e.has("perturbation.lower") && e.has("perturbation.upper")) {
    const Vec lo = e.point("perturbation.lower", e.find("perturbation.lower")->value);
    const Vec hi = e.point("perturbation.upper", e.find("perturbation.upper")->value);
    if (lo.size() != hi.size()) e.fail("perturbation.upper", "bounds differ in dimension");
    if (!lo.allFinite() || !hi.allFinite()) e.fail("perturbation.lower", "bounds must be finite");
    if (!(lo.array() < hi.array()).all()) e.fail("perturbation.upper", "need lower < upper on every axis");
    c.domain = ThetaDomain::box(lo, hi);
  }
  if (c.domain && c.has_model() && c.domain->dim() != c.dim)
    e.fail("perturbation.lower", "domain dimension differs from null.dim");
  e.get("perturbation.eta", c.eta);
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) e.fail("perturbation.eta", "eta must lie in [0, 1]");

  // [test]
  e.get("test.alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha <= 0.5)) e.fail("test.alpha", "alpha must lie in (0, 0.5]");
  e.get("test.grid", c.grid);
  if (c.grid < 1) e.fail("test.grid", "grid must have at least one point per axis");
  e.get("test.flip_exclusion", c.flip_exclusion);
  e.get("test.removable_exclusion", c.removable_exclusion);
  e.get("test.max_components", c.max_components);
  if (c.max_components < 1) e.fail("test.max_components", "must be at least 1");

  // [mc]
  e.get("mc.replicates", c.replicates);
  if (c.replicates < 1) e.fail("mc.replicates", "must be at least 1");
  e.get("mc.seed", c.seed);
  e.get("mc.n", c.n);
  if (c.n < 1) e.fail("mc.n", "must be at least 1");
  e.get_string("mc.mode", c.mode);
  if (c.mode != "field" && c.mode != "null" && c.mode != "equivalence")
    e.fail("mc.mode", "expected field, null or equivalence");
  e.get_list("mc.thresholds", c.thresholds);
  e.get_list("mc.sizes", c.sizes);

  // [output]
  e.get_string("output.path", c.output_path);
  e.get_string("output.format", c.format);
  if (c.format != "json") e.fail("output.format", "only json is supported");

  // [constants]
  if (e.sections.count("constants")) {
    ConstantsSection k;
    require(e, "constants.kappa0");
    require(e, "constants.ell0");
    e.get("constants.d", k.d);
    e.get("constants.kappa0", k.kappa0);
    e.get("constants.ell0", k.ell0);
    e.get("constants.euler", k.euler);
    if (k.d != 1 && k.d != 2) e.fail("constants.d", "d must be 1 or 2");
    c.constants = k;
  }

  // [simulate]
  if (e.sections.count("simulate")) {
    SimulateSection s;
    s.table1 = e.get_bool("simulate.table1", false);
    e.get_list("simulate.models", s.models);
    e.get_list("simulate.etas", s.etas);
    e.get_list("simulate.sizes", s.sizes);
    e.get("simulate.reps", s.reps);
    if (s.reps < 1) e.fail("simulate.reps", "must be at least 1");
    c.simulate = s;
  }

  e.get_list("tail.thresholds", c.tail_thresholds);
  return c;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int row = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++row;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw ConfigError("CSV is empty");
  const auto header = split(trim(line), ',');
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] != "x" + std::to_string(k + 1))
      throw ConfigError("CSV header must read x1,...,xs (column " + std::to_string(k + 1) + " is '" + header[k] + "')");
  const auto s = header.size();

  std::vector<double> values;
  while (next_line()) {
    const auto cells = split(trim(line), ',');
    if (cells.size() != s)
      throw ConfigError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(s));
    for (std::size_t k = 0; k < s; ++k) {
      double v = 0.0;
      if (!parse_number(cells[k], v) || !std::isfinite(v))
        throw ConfigError("CSV row " + std::to_string(row) + " column " + std::to_string(k + 1) +
                          ": not a number '" + cells[k] + "'");
      values.push_back(v);
    }
  }
  if (values.empty()) throw ConfigError("CSV has no observations");
  return Dataset(static_cast<int>(s), std::move(values));
}

Dataset ingest_csv(const std::string& path) { return parse_csv(read_file(path)); }

Json to_json(const RunConfig& c) {
  Json j;
  if (c.has_model()) {
    Json supports = Json::array();
    for (const auto& s : c.supports) supports.push_back(to_json(s));
    j["null"] = Json{{"family", c.null_family},
                     {"dim", c.dim},
                     {"estimation", to_string(c.estimation)},
                     {"supports", supports},
                     {"weights", c.weights}};
    j["perturbation"] = Json{{"family", c.perturbation_family},
                             {"domain", c.domain ? to_json(*c.domain) : Json(nullptr)},
                             {"eta", c.eta}};
  }
  j["test"] = Json{{"alpha", c.alpha},
                   {"grid", c.grid},
                   {"flip_exclusion", c.flip_exclusion.value_or(GeometryOptions{}.flip_exclusion)},
                   {"removable_exclusion", c.removable_exclusion.value_or(GeometryOptions{}.removable_exclusion)},
                   {"max_components", c.max_components}};
  j["mc"] = Json{{"replicates", c.replicates}, {"seed", c.seed},         {"n", c.n},
                 {"mode", c.mode},             {"thresholds", c.thresholds}, {"sizes", c.sizes}};
  j["output"] = Json{{"path", c.output_path}, {"format", c.format}};
  if (c.constants)
    j["constants"] = Json{{"d", c.constants->d},
                          {"kappa0", c.constants->kappa0},
                          {"ell0", c.constants->ell0},
                          {"euler", c.constants->euler}};
  if (c.simulate)
    j["simulate"] = Json{{"table1", c.simulate->table1},
                         {"models", c.simulate->models},
                         {"etas", c.simulate->etas},
                         {"sizes", c.simulate->sizes},
                         {"reps", c.simulate->reps}};
  if (!c.tail_thresholds.empty()) j["tail"] = Json{{"thresholds", c.tail_thresholds}};
  return j;
}

namespace {

struct CommandResult {
  Json results;
  std::vector<std::string> warnings;
};

struct ModelGeometry {
  std::shared_ptr<const ScoreKernel> kernel;
  ManifoldSummary manifold;
  TubeConstants constants;
};

ModelGeometry model_geometry(const RunConfig& c) {
  const auto spec = c.test_spec();
  const auto kind = spec.null.estimation() == NullEstimation::None ? KernelKind::Fixed : KernelKind::NuisanceAdjusted;
  auto kernel = std::make_shared<const ScoreKernel>(spec.null, spec.domain, kind, spec.strategy);
  auto manifold = summarize_manifold(spec.domain, detect_singularities(*kernel, spec.geometry));
  auto constants = tube_constants(*kernel, manifold, spec.geometry);
  return {std::move(kernel), std::move(manifold), std::move(constants)};
}

TubeConstants configured_constants(const RunConfig& c) {
  if (c.constants) return make_constants(c.constants->d, c.constants->kappa0, c.constants->ell0, c.constants->euler);
  if (!c.has_model()) throw ConfigError("need a [constants] section or a model");
  return model_geometry(c).constants;
}

Dataset require_data(const std::string& path, const RunConfig& c) {
  if (path.empty()) throw ConfigError("this command needs --data");
  auto data = ingest_csv(path);
  if (data.dim() != c.dim) throw ConfigError("data have " + std::to_string(data.dim()) + " columns, null.dim is " +
                                             std::to_string(c.dim));
  return data;
}

CommandResult cmd_test(const RunConfig& c, const std::string& data_path) {
  const auto data = require_data(data_path, c);
  auto out = run_test(data, c.test_spec());
  return {to_json(out), out.warnings};
}

CommandResult cmd_build(const RunConfig& c, const std::string& data_path) {
  const auto data = require_data(data_path, c);
  if (!c.domain) throw ConfigError("the search domain is not configured");
  const auto est = c.estimation == NullEstimation::None ? NullEstimation::WeightsAndSupports : c.estimation;
  auto out = sequential_build(data, c.family(), *c.domain, c.alpha, c.max_components, c.grid, est);
  return {to_json(out), out.warnings};
}

CommandResult cmd_constants(const RunConfig& c) {
  if (!c.has_model()) throw ConfigError("the constants command needs a model");
  const auto g = model_geometry(c);
  return {Json{{"manifold", to_json(g.manifold)},
               {"constants", to_json(g.constants)},
               {"alpha", c.alpha},
               {"critical_value", critical_value(c.alpha, g.constants)}},
          {}};
}

CommandResult cmd_tail(const RunConfig& c) {
  const auto k = configured_constants(c);
  std::vector<double> th = c.tail_thresholds.empty() ? c.thresholds : c.tail_thresholds;
  if (th.empty()) throw ConfigError("missing required key 'tail.thresholds'");
  Json tail = Json::array();
  for (double t : th) tail.push_back(tail_probability(t, k));
  return {Json{{"constants", to_json(k)}, {"thresholds", th}, {"tail_probability", tail}}, {}};
}

CommandResult cmd_critical(const RunConfig& c) {
  const auto k = configured_constants(c);
  return {Json{{"constants", to_json(k)}, {"alpha", c.alpha}, {"critical_value", critical_value(c.alpha, k)}}, {}};
}

CommandResult cmd_oracle(const RunConfig& c) {
  const auto spec = c.test_spec();
  if (c.mode == "field") {
    const auto g = model_geometry(c);
    const auto grid = make_grid(spec.domain, g.manifold.singularities, spec.grid_points, spec.geometry);
    const auto pts = field_points(grid, *g.kernel);
    std::vector<double> th = c.thresholds;
    if (th.empty()) th.push_back(critical_value(c.alpha, g.constants));
    const auto curve = mc_sup_tail(*g.kernel, pts, c.replicates, c.seed, th);
    Json tube = Json::array();
    for (double t : th) tube.push_back(tail_probability(t, g.constants));
    return {Json{{"mode", "field"},
                 {"grid_points", pts.size()},
                 {"constants", to_json(g.constants)},
                 {"tube_tail", tube},
                 {"mc_tail", to_json(curve)}},
            {}};
  }
  if (c.mode == "null") {
    const auto truth = spec.null.with_estimation(NullEstimation::None);
    const auto d = mc_null_distribution(spec, truth, c.n, c.replicates, c.thresholds, c.seed);
    std::vector<std::string> w;
    if (!d.failed.empty()) w.push_back(std::to_string(d.failed.size()) + " replicates failed and were excluded");
    return {Json{{"mode", "null"}, {"n", c.n}, {"distribution", to_json(d)}}, w};
  }
  const auto rows = lrt_equivalence_report(spec, c.sizes, c.replicates, c.seed);
  Json table = Json::array();
  for (const auto& r : rows) table.push_back(to_json(r));
  return {Json{{"mode", "equivalence"}, {"rows", table}}, {}};
}

CommandResult cmd_simulate(const RunConfig& c) {
  const SimulateSection s = c.simulate.value_or(SimulateSection{});
  double lo = -4.0, hi = 4.0;
  if (c.domain) {
    if (c.domain->dim() != 1 || c.domain->shape() != ThetaDomain::Shape::Box)
      throw ConfigError("simulate needs a one-dimensional search interval");
    lo = c.domain->lower()[0];
    hi = c.domain->upper()[0];
  }
  std::vector<ExperimentSpec> specs;
  if (s.table1) {
    specs = table1_specs(s.reps, c.seed, c.grid);
  } else {
    for (int m : s.models)
      for (std::size_t n : s.sizes)
        for (double eta : s.etas) {
          ExperimentSpec e;
          e.model = m;
          e.eta = eta;
          e.n = n;
          e.reps = s.reps;
          e.seed = c.seed;
          e.grid_points = c.grid;
          specs.push_back(e);
        }
  }
  for (auto& e : specs) {
    e.alpha = c.alpha;
    e.theta_lower = lo;
    e.theta_upper = hi;
    e.validate();
  }
  const auto suite = run_suite(specs, "");
  std::vector<std::string> w;
  for (const auto& r : suite.reports)
    if (!r.failed.empty())
      w.push_back("model " + std::to_string(r.spec.model) + ": " + std::to_string(r.failed.size()) +
                  " replicates excluded after failures");
  return {to_json(suite), w};
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Score-process tests for mixture order with volume-of-tube calibration", "tubescore"};
  app.require_subcommand(1, 1);

  std::string config_path, data_path, output_path;
  std::optional<std::uint64_t> seed;
  const std::pair<const char*, const char*> commands[] = {
      {"test", "run the test on a dataset"},
      {"build", "sequential model building on a dataset"},
      {"constants", "tube constants of the configured model"},
      {"tail", "tube tail probabilities at thresholds"},
      {"critical", "critical value at the configured alpha"},
      {"oracle", "Monte Carlo checks (field sup, null distribution, LRT equivalence)"},
      {"simulate", "simulation experiments on the three-component normal model"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "configuration file")->required();
    sub->add_option("--data,-d", data_path, "CSV data file");
    sub->add_option("--output,-o", output_path, "report path (default: output.path or stdout)");
    sub->add_option("--seed,-s", seed, "overrides mc.seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const auto start = std::chrono::steady_clock::now();
    RunConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (!output_path.empty()) config.output_path = output_path;

    CommandResult r;
    if (command == "test")
      r = cmd_test(config, data_path);
    else if (command == "build")
      r = cmd_build(config, data_path);
    else if (command == "constants")
      r = cmd_constants(config);
    else if (command == "tail")
      r = cmd_tail(config);
    else if (command == "critical")
      r = cmd_critical(config);
    else if (command == "oracle")
      r = cmd_oracle(config);
    else
      r = cmd_simulate(config);

    std::vector<std::string> warnings = config.warnings;
    warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto doc = report_envelope(command, to_json(config), std::move(r.results), warnings, wall);
    const std::string text = doc.dump(2) + "\n";
    if (config.output_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(config.output_path);
      if (!out || !(out << text)) throw ConfigError("cannot write report to " + config.output_path);
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace tubescore
