#pragma once

#include "diffstab/masanalysis.hpp"
#include "diffstab/simulate.hpp"

#include "json.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// System-description files: schema-validated JSON describing agents, the
// interaction graph, coupling, edge controllers, and an optional simulation
// scenario; plus the batch analysis reports built from them.

namespace diffstab {

/// Schema or dimension problem in a description; message carries the JSON
/// path of the offending element. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A supplied state-space realization carries an unstabilizable or
/// undetectable unstable mode. CLI exit code 3.
class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Agent or edge controller given either as a transfer-function grid or as
/// a raw realization.
struct AgentSpec {
    std::optional<RationalMatrix> tf;
    std::optional<StateSpace> ss;

    /// Transfer function of the spec; for raw realizations the unstable
    /// modes must pass the PBH stabilizability/detectability tests first
    /// (throws AssumptionError naming the mode otherwise).
    RationalMatrix transfer(double tol, const std::string& label) const;
};

struct SystemDescription {
    std::vector<AgentSpec> agents;
    Graph graph{1, {}};
    CouplingSpec::Kind coupling_kind = CouplingSpec::Kind::Incidence;
    Eigen::MatrixXd coupling_matrix; // CustomSymmetric only
    bool consensus_controllers = false;
    std::vector<AgentSpec> edge_controllers; // empty unless supplied
    std::optional<Scenario> scenario;
    std::optional<double> tolerance;

    CouplingSpec coupling() const;
    AgentSet agent_set(double tol) const;
    bool has_controllers() const { return consensus_controllers || !edge_controllers.empty(); }
    EdgeControllerSet controller_set(double tol) const;
};

SystemDescription parse_description(const nlohmann::json& j);
SystemDescription load_description(const std::string& path);
nlohmann::json description_to_json(const SystemDescription& d);

/// Built-in descriptions of the worked examples.
SystemDescription preset_description(const std::string& name);
std::vector<std::string> preset_names();

/// Full analysis: stabilizability verdict with certificate, per-agent pole
/// tables, and, when controllers are present, the four-block stability
/// report and per-pole cancellation reports.
struct AnalysisReport {
    nlohmann::json machine; // versioned with "schema": 1
    std::string text;
    StabilizabilityVerdict verdict;
    std::optional<bool> internally_stable;
};

AnalysisReport analyze_description(const SystemDescription& d, double tol = kDefaultTol);

/// Factor report for one agent: realizations, residuals, and optional
/// denominator evaluations at a user-supplied point.
struct FactorizationReport {
    nlohmann::json machine;
    std::string text;
};

FactorizationReport factorize_description(const SystemDescription& d, int agent_index,
                                          std::optional<Complex> eval_at,
                                          double tol = kDefaultTol);

} // namespace diffstab
