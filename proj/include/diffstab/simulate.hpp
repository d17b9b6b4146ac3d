#pragma once

#include "diffstab/masanalysis.hpp"
#include "diffstab/ssreal.hpp"

#include <optional>
#include <string>
#include <vector>

// Time-domain simulation of the closed loop under step disturbances, using
// exact zero-order-hold discretization, plus the agreement metrics of the
// averaging protocol.

namespace diffstab {

struct StepSignal {
    double onset = 0.0;
    double amplitude = 0.0;
};

struct Disturbance {
    enum class Channel { LoadInput, MeasuredOutput }; // d_u resp. d_y
    int target_agent = 1;                             // 1-based
    Channel channel = Channel::LoadInput;
    std::optional<StepSignal> step; // absent means the zero signal
};

struct Scenario {
    std::vector<Eigen::VectorXd> initial_states; // per agent
    double t_final = 0.0;
    double dt = 0.0;
    std::vector<Disturbance> disturbances;

    void validate() const; // throws std::invalid_argument
    /// Earliest disturbance onset, or t_final when all signals are zero.
    double pre_disturbance_end() const;
};

/// Channel layout of a closed-loop realization: inputs (d_y, d_u), outputs
/// (y, u), plant states leading.
struct LoopLayout {
    int agents = 0;
    int outputs_per_agent = 0; // p
    int inputs_per_agent = 0;  // m
    int plant_states = 0;
};

struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd y; // one row per sample, agents x p columns
    Eigen::MatrixXd u; // one row per sample, agents x m columns
    Eigen::VectorXd disagreement;
    std::optional<double> consensus_value;
    double pre_disturbance_end = 0.0;
    bool truncated = false; // nonfinite state encountered, trajectory cut
    bool dt_warning = false; // dt too coarse for the fastest loop mode
};

/// Fixed-step simulation by exact discretization over each sample interval;
/// step inputs are held constant per sample, making the discretization
/// exact. Throws std::invalid_argument on layout/scenario mismatch.
Trajectory simulate(const StateSpace& realization, const Scenario& scenario,
                    const LoopLayout& layout);
Trajectory simulate(const ClosedLoop& cl, const Scenario& scenario);

struct AgreementMetrics {
    bool consensus_reached = false;
    double value = 0.0;         // common value at the pre-disturbance end
    double rate_estimate = 0.0; // exponential decay rate of the disagreement
};

AgreementMetrics agreement_metrics(const Trajectory& traj);

/// CSV with header t,y_1..y_k,u_1..u_k,disagreement; values formatted for
/// exact round trip.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

} // namespace diffstab
