#pragma once

// JSON views of the result types. Doubles are written in shortest round-trip
// form; NaN becomes null.

#include "tubescore/harness.hpp"
#include "tubescore/oracle.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace tubescore {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

Json to_json(const Vec& v);
Json to_json(const MixingDistribution& q);
Json to_json(const NullModel& null);
Json to_json(const ThetaDomain& domain);
Json to_json(const TubeConstants& c);
Json to_json(const ManifoldSummary& m);
Json to_json(const TestOutcome& t);
Json to_json(const BuildResult& b);
Json to_json(const TailCurve& t);
Json to_json(const NullDistribution& d);
Json to_json(const EquivalenceRow& row);
Json to_json(const ExperimentSpec& s);
Json to_json(const ExperimentReport& r);
/// Reports plus a summary in the layout of the published table (one row per model).
Json to_json(const SuiteReport& s);

/// Top-level report document shared by every command.
Json report_envelope(const std::string& command, Json config_echo, Json results,
                     const std::vector<std::string>& warnings, double wall_clock_seconds);

const char* to_string(NullEstimation e);
const char* to_string(SingularityClass c);

}  // namespace tubescore
