#pragma once

#include "diffstab/coprime.hpp"
#include "diffstab/graphnet.hpp"
#include "diffstab/ratpoly.hpp"
#include "diffstab/ssreal.hpp"

#include <optional>
#include <string>
#include <vector>

// Core analysis of diffusively coupled multi-agent systems: controller
// assembly from edge controllers, the four-block closed loop, internal
// stability, the shared-unstable-dynamics obstruction, and intrinsic
// cascade cancellations.

namespace diffstab {

/// Heterogeneous agents with common input/output dimensions.
struct AgentSet {
    std::vector<RationalMatrix> agents;
    int inputs = 0;  // per agent
    int outputs = 0; // per agent

    AgentSet() = default;
    explicit AgentSet(std::vector<RationalMatrix> list);

    int size() const { return static_cast<int>(agents.size()); }
    /// Block-diagonal aggregate plant.
    RationalMatrix aggregate() const;
    /// All agents equal at sample points.
    bool homogeneous(double rel_tol = 1e-9) const;
};

/// One controller per edge, each inputs x outputs ... i.e. m x p blocks.
struct EdgeControllerSet {
    std::vector<RationalMatrix> controllers;

    EdgeControllerSet() = default;
    explicit EdgeControllerSet(std::vector<RationalMatrix> list);
    /// K_e = -I on every edge (the consensus protocol); requires m == p.
    static EdgeControllerSet consensus(int edges, int dim);

    int size() const { return static_cast<int>(controllers.size()); }
};

/// Assembled controller (left x I_m) diag{K_e,j} (right x I_p). For
/// incidence coupling this is E kron I_m on the left and E^T kron I_p on
/// the right.
RationalMatrix assemble_controller(const CouplingSpec& coupling, const EdgeControllerSet& ke,
                                   double tol = kDefaultTol);

/// The four closed-loop maps from (d_y, d_u) to (y, u):
///   S  = (I - PK)^{-1}       T_d = (I - PK)^{-1} P
///   T_c = K (I - PK)^{-1}    T   = K (I - PK)^{-1} P
struct ClosedLoop {
    RationalMatrix S, T_d, T_c, T;
    StateSpace realization; // combined map (d_y, d_u) -> (y, u)
    bool stable = false;
    std::vector<Complex> unstable_poles;

    // Channel layout of `realization`.
    int agent_outputs_total = 0; // dim of y and d_y
    int agent_inputs_total = 0;  // dim of u and d_u
    int plant_states = 0;        // leading states belong to the plant

    // Per-block minimal realizations, in the order S, T_d, T_c, T.
    std::vector<StateSpace> block_realizations;
};

/// Builds the feedback interconnection of minimal realizations of P and K.
/// Throws std::domain_error when the loop is ill posed (I - PK rationally
/// singular or the direct-feedthrough loop is singular).
ClosedLoop closed_loop(const RationalMatrix& plant, const RationalMatrix& controller,
                       double tol = kDefaultTol);

struct BlockStability {
    std::string block; // "S", "T_d", "T_c", "T"
    std::vector<Complex> unstable_poles;
};

/// Per-block closed-right-half-plane pole scan; the verdict is the
/// conjunction over the four blocks.
std::pair<bool, std::vector<BlockStability>> internal_stability(const ClosedLoop& cl);

enum class Stabilizability {
    Obstructed,         // shared unstable dynamics: no edge controller works
    NoObstructionFound, // the necessary condition is silent; no guarantee
    Stabilizable,       // all agents stable: K_e = 0 works
};

/// Certificate attached to an Obstructed verdict for one branch of the
/// condition: the blocking direction and the per-agent direction subspaces.
struct BranchHit {
    Eigen::VectorXcd direction;
    std::vector<Subspace> per_agent_dirs;
    Subspace intersection;
    double kernel_residual = 0.0; // max_i |v^H M_i(lambda)| (or dual)
};

struct BlockingCertificate {
    Complex lambda;
    std::optional<BranchHit> input_branch;  // shared input pole directions
    std::optional<BranchHit> output_branch; // shared output pole directions
};

struct StabilizabilityVerdict {
    Stabilizability decision = Stabilizability::NoObstructionFound;
    bool stabilizable_by_diffusive() const { return decision != Stabilizability::Obstructed; }
    std::optional<BlockingCertificate> blocking;
    /// Shared closed-RHP pole candidates that were examined but not blocking.
    std::vector<Complex> cleared_candidates;
};

/// Scans the union of closed-right-half-plane agent poles for a pole common
/// to all agents whose input (or output) direction subspaces intersect
/// nontrivially. Cross-validates any hit against the coprime-denominator
/// kernels. Throws std::domain_error when an agent has an unstabilizable or
/// undetectable unstable mode.
StabilizabilityVerdict stabilizability_obstruction(const AgentSet& agents,
                                                   double tol = kDefaultTol);

struct CancellationReport {
    Complex lambda;
    bool canceled_in_pk = false;
    bool canceled_in_kp = false;
    int degree_deficit = 0; // deg P + deg K - deg minimal(P K)
    Subspace pbh_left_null; // uncontrollable-mode witness of the P K cascade
};

/// Checks whether lambda loses multiplicity in the cascades P(s)K(s) and
/// K(s)P(s). Throws std::domain_error when lambda is not a closed-RHP pole
/// of the plant.
CancellationReport cancellation_check(const RationalMatrix& plant,
                                      const RationalMatrix& controller, const Complex& lambda,
                                      double tol = kDefaultTol);

/// Integrator agents with unit-gain consensus edge controllers on the given
/// graph: the textbook averaging protocol.
struct ProtocolSetup {
    AgentSet agents;
    CouplingSpec coupling;
    EdgeControllerSet controllers;
};

ProtocolSetup consensus_protocol(const Graph& g);
ProtocolSetup consensus_protocol(int nu); // path graph on nu vertices

} // namespace diffstab
