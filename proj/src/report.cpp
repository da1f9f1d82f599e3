#include "tubescore/report.hpp"

#include <algorithm>
#include <map>

namespace tubescore {

namespace {

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json points(const std::vector<Vec>& v) {
  Json a = Json::array();
  for (const auto& p : v) a.push_back(to_json(p));
  return a;
}

}  // namespace

Json report_envelope(const std::string& command, Json config_echo, Json results,
                     const std::vector<std::string>& warnings, double wall_clock_seconds) {
  Json w = Json::array();
  for (const auto& s : warnings) w.push_back(s);
  return Json{{"schema_version", kReportSchemaVersion},
              {"command", command},
              {"config_echo", std::move(config_echo)},
              {"results", std::move(results)},
              {"warnings", w},
              {"wall_clock_seconds", wall_clock_seconds}};
}

const char* to_string(NullEstimation e) {
  switch (e) {
    case NullEstimation::None:
      return "none";
    case NullEstimation::Weights:
      return "weights";
    case NullEstimation::WeightsAndSupports:
      return "weights_and_supports";
  }
  return "none";
}

const char* to_string(SingularityClass c) { return c == SingularityClass::Flip ? "flip" : "removable"; }

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const MixingDistribution& q) {
  return Json{{"supports", points(q.supports())}, {"weights", numbers(q.weights())}};
}

Json to_json(const NullModel& null) {
  Json j{{"family", null.family().name()}, {"estimation", to_string(null.estimation())}};
  j["mixing"] = to_json(null.mixing());
  return j;
}

Json to_json(const ThetaDomain& domain) {
  if (domain.shape() == ThetaDomain::Shape::Disk) return Json{{"shape", "disk"}, {"radius", domain.radius()}};
  return Json{{"shape", "box"}, {"lower", to_json(domain.lower())}, {"upper", to_json(domain.upper())}};
}

Json to_json(const TubeConstants& c) {
  Json j{{"d", c.d}, {"zeta", to_json(c.zeta)}, {"kappa0", c.kappa0}, {"ell0", c.ell0}, {"euler", c.euler}};
  if (c.d == 2) j["euler_composite"] = c.euler_composite;
  return j;
}

Json to_json(const ManifoldSummary& m) {
  Json sing = Json::array();
  for (const auto& s : m.singularities)
    sing.push_back(Json{{"location", to_json(s.location)}, {"class", to_string(s.cls)}});
  return Json{{"d", m.d},          {"domain", to_json(m.domain)}, {"singularities", sing},
              {"segments", m.segments}, {"holes", m.holes},          {"euler", m.euler}};
}

Json to_json(const TestOutcome& t) {
  return Json{{"statistic", t.statistic},
              {"critical_value", t.critical_value},
              {"p_value", t.p_value},
              {"argmax", to_json(t.argmax)},
              {"reject", t.reject},
              {"fitted_null", to_json(t.fitted)},
              {"constants", to_json(t.constants)},
              {"manifold", to_json(t.manifold)}};
}

Json to_json(const BuildResult& b) {
  Json steps = Json::array();
  for (const auto& s : b.steps)
    steps.push_back(Json{{"components", s.components},
                         {"mixing", to_json(s.mixing)},
                         {"statistic", s.statistic},
                         {"critical_value", s.critical_value},
                         {"p_value", s.p_value},
                         {"kappa0", s.kappa0},
                         {"ell0", s.ell0},
                         {"argmax", to_json(s.argmax)},
                         {"reject", s.reject}});
  return Json{{"final", to_json(b.mixing)}, {"components", b.mixing.size()}, {"steps", steps}};
}

Json to_json(const TailCurve& t) {
  return Json{{"replicates", t.replicates},
              {"jitter", t.jitter},
              {"thresholds", numbers(t.thresholds)},
              {"exceedance", numbers(t.exceedance)},
              {"std_error", numbers(t.std_error)}};
}

Json to_json(const NullDistribution& d) {
  Json failed = Json::array();
  for (std::size_t i = 0; i < d.failed.size(); ++i)
    failed.push_back(Json{{"replicate", d.failed[i]}, {"message", d.failure_messages[i]}});
  return Json{{"replicates", d.replicates},
              {"reject_rate", d.reject_rate},
              {"thresholds", numbers(d.thresholds)},
              {"exceedance", numbers(d.exceedance)},
              {"std_error", numbers(d.std_error)},
              {"statistics", numbers(d.statistics)},
              {"failed", failed}};
}

Json to_json(const EquivalenceRow& row) {
  return Json{{"n", row.n}, {"median", row.median}, {"discrepancies", numbers(row.discrepancies)}};
}

Json to_json(const ExperimentSpec& s) {
  return Json{{"model", s.model},
              {"eta", s.eta},
              {"n", s.n},
              {"reps", s.reps},
              {"alpha", s.alpha},
              {"seed", s.seed},
              {"grid_points", s.grid_points},
              {"theta_domain", Json::array({s.theta_lower, s.theta_upper})}};
}

Json to_json(const ExperimentReport& r) {
  Json failed = Json::array();
  for (std::size_t i = 0; i < r.failed.size(); ++i)
    failed.push_back(Json{{"replicate", r.failed[i]}, {"message", r.failure_messages[i]}});
  Json j{{"spec", to_json(r.spec)},
         {"rejections", r.rejections},
         {"valid", r.valid},
         {"excluded", r.failed.size()},
         {"rate", r.rate},
         {"std_error", r.std_error},
         {"statistics", numbers(r.statistics)},
         {"critical_values", numbers(r.critical_values)},
         {"failed", failed},
         {"constants", r.constants ? to_json(*r.constants) : Json(nullptr)},
         {"wall_clock_seconds", r.wall_clock_seconds}};
  return j;
}

Json to_json(const SuiteReport& s) {
  Json reports = Json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));

  // Table layout: one row per model, one cell per (n, eta) in first-seen order.
  std::vector<std::pair<std::size_t, double>> columns;
  std::map<int, Json> rows;
  for (const auto& r : s.reports) {
    const std::pair<std::size_t, double> key{r.spec.n, r.spec.eta};
    if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    auto& row = rows[r.spec.model];
    if (row.is_null()) row = Json{{"model", r.spec.model}, {"cells", Json::array()}};
    row["cells"].push_back(Json{{"n", r.spec.n},
                                {"eta", r.spec.eta},
                                {"rejections", r.rejections},
                                {"valid", r.valid},
                                {"rate", r.rate}});
  }
  Json cols = Json::array();
  for (const auto& [n, eta] : columns) cols.push_back(Json{{"n", n}, {"eta", eta}});
  Json table = Json::array();
  for (auto& [model, row] : rows) table.push_back(row);
  return Json{{"reports", reports},
              {"summary", Json{{"columns", cols}, {"rows", table}}},
              {"wall_clock_seconds", s.wall_clock_seconds}};
}

}  // namespace tubescore
