#include "diffstab/simulate.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace diffstab {

void Scenario::validate() const {
    if (dt <= 0.0 || t_final < dt) {
        throw std::invalid_argument("Scenario: require 0 < dt <= t_final");
    }
    for (const Disturbance& d : disturbances) {
        if (d.target_agent < 1) {
            throw std::invalid_argument("Scenario: disturbance target out of range");
        }
        if (d.step && (d.step->onset < 0.0 || d.step->onset > t_final)) {
            throw std::invalid_argument("Scenario: step onset outside [0, t_final]");
        }
    }
}

double Scenario::pre_disturbance_end() const {
    double first = t_final;
    for (const Disturbance& d : disturbances) {
        if (d.step && d.step->amplitude != 0.0) {
            first = std::min(first, d.step->onset);
        }
    }
    return first;
}

namespace {

Eigen::VectorXd disturbance_vector(const Scenario& scenario, const LoopLayout& layout,
                                   double t) {
    const int ny = layout.agents * layout.outputs_per_agent;
    const int nu = layout.agents * layout.inputs_per_agent;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(ny + nu);
    for (const Disturbance& dist : scenario.disturbances) {
        if (!dist.step || t < dist.step->onset) {
            continue;
        }
        if (dist.channel == Disturbance::Channel::MeasuredOutput) {
            const int base = (dist.target_agent - 1) * layout.outputs_per_agent;
            for (int c = 0; c < layout.outputs_per_agent; ++c) {
                d(base + c) += dist.step->amplitude;
            }
        } else {
            const int base = ny + (dist.target_agent - 1) * layout.inputs_per_agent;
            for (int c = 0; c < layout.inputs_per_agent; ++c) {
                d(base + c) += dist.step->amplitude;
            }
        }
    }
    return d;
}

double disagreement_norm(const Eigen::VectorXd& y, int agents, int per_agent) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(per_agent);
    for (int a = 0; a < agents; ++a) {
        mean += y.segment(a * per_agent, per_agent);
    }
    mean /= static_cast<double>(agents);
    double acc = 0.0;
    for (int a = 0; a < agents; ++a) {
        acc += (y.segment(a * per_agent, per_agent) - mean).squaredNorm();
    }
    return std::sqrt(acc);
}

} // namespace

Trajectory simulate(const StateSpace& realization, const Scenario& scenario,
                    const LoopLayout& layout) {
    scenario.validate();
    const int ny = layout.agents * layout.outputs_per_agent;
    const int nu = layout.agents * layout.inputs_per_agent;
    if (realization.inputs() != ny + nu || realization.outputs() != ny + nu) {
        throw std::invalid_argument("simulate: realization does not match the loop layout");
    }
    for (const Disturbance& d : scenario.disturbances) {
        if (d.target_agent > layout.agents) {
            throw std::invalid_argument("simulate: disturbance target out of range");
        }
    }
    int x0_dim = 0;
    for (const Eigen::VectorXd& x : scenario.initial_states) {
        x0_dim += static_cast<int>(x.size());
    }
    if (static_cast<int>(scenario.initial_states.size()) != 0 &&
        (static_cast<int>(scenario.initial_states.size()) != layout.agents ||
         x0_dim != layout.plant_states)) {
        throw std::invalid_argument("simulate: initial states do not match the plant");
    }

    const int n = realization.states();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    int offset = 0;
    for (const Eigen::VectorXd& xi : scenario.initial_states) {
        x.segment(offset, xi.size()) = xi;
        offset += static_cast<int>(xi.size());
    }

    // Exact discretization of [A B; 0 0] over one sample interval.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + ny + nu, n + ny + nu);
    aug.topLeftCorner(n, n) = realization.A;
    aug.topRightCorner(n, ny + nu) = realization.B;
    const Eigen::MatrixXd expm = (aug * scenario.dt).exp();
    const Eigen::MatrixXd ad = expm.topLeftCorner(n, n);
    const Eigen::MatrixXd bd = expm.topRightCorner(n, ny + nu);

    Trajectory traj;
    traj.pre_disturbance_end = scenario.pre_disturbance_end();
    if (n > 0) {
        const double fastest = eigenvalues(realization.A)
                                   .empty()
                               ? 0.0
                               : [&] {
                                     double worst = 0.0;
                                     for (const Complex& ev : eigenvalues(realization.A)) {
                                         worst = std::max(worst, std::abs(ev.real()));
                                     }
                                     return worst;
                                 }();
        traj.dt_warning = fastest > 0.0 && scenario.dt > 0.1 / fastest;
    }

    const int steps = static_cast<int>(std::floor(scenario.t_final / scenario.dt + 0.5));
    traj.times.resize(steps + 1);
    traj.y.resize(steps + 1, ny);
    traj.u.resize(steps + 1, nu);
    traj.disagreement.resize(steps + 1);

    int produced = 0;
    for (int k = 0; k <= steps; ++k) {
        const double t = k * scenario.dt;
        const Eigen::VectorXd d = disturbance_vector(scenario, layout, t);
        const Eigen::VectorXd out = realization.C * x + realization.D * d;
        if (!out.allFinite() || !x.allFinite()) {
            traj.truncated = true;
            break;
        }
        traj.times(k) = t;
        traj.y.row(k) = out.head(ny).transpose();
        traj.u.row(k) = out.tail(nu).transpose();
        traj.disagreement(k) =
            disagreement_norm(out.head(ny), layout.agents, layout.outputs_per_agent);
        produced = k + 1;
        if (k < steps) {
            x = (ad * x + bd * d).eval();
        }
    }
    traj.times.conservativeResize(produced);
    traj.y.conservativeResize(produced, ny);
    traj.u.conservativeResize(produced, nu);
    traj.disagreement.conservativeResize(produced);

    // Common value at the pre-disturbance end, when the agents agree there.
    if (produced > 0) {
        const int pre_idx = std::min<int>(
            produced - 1,
            static_cast<int>(std::floor(traj.pre_disturbance_end / scenario.dt)));
        const double initial = traj.disagreement(0);
        const double at_pre = traj.disagreement(pre_idx);
        const bool agreed = initial > 1e-12 ? at_pre < 1e-3 * initial : at_pre < 1e-9;
        if (agreed) {
            traj.consensus_value = traj.y.row(pre_idx).mean();
        }
    }
    return traj;
}

Trajectory simulate(const ClosedLoop& cl, const Scenario& scenario) {
    LoopLayout layout;
    layout.plant_states = cl.plant_states;
    // Infer the per-agent split from the scenario's initial-state list.
    const int agents = static_cast<int>(scenario.initial_states.size());
    if (agents == 0) {
        throw std::invalid_argument("simulate: scenario must list per-agent initial states");
    }
    layout.agents = agents;
    layout.outputs_per_agent = cl.agent_outputs_total / agents;
    layout.inputs_per_agent = cl.agent_inputs_total / agents;
    if (layout.outputs_per_agent * agents != cl.agent_outputs_total ||
        layout.inputs_per_agent * agents != cl.agent_inputs_total) {
        throw std::invalid_argument("simulate: agent count does not divide the loop channels");
    }
    return simulate(cl.realization, scenario, layout);
}

AgreementMetrics agreement_metrics(const Trajectory& traj) {
    if (traj.times.size() == 0) {
        throw std::invalid_argument("agreement_metrics: empty trajectory");
    }
    AgreementMetrics m;
    const double t_pre = traj.pre_disturbance_end;
    int pre_idx = 0;
    for (int k = 0; k < traj.times.size(); ++k) {
        if (traj.times(k) <= t_pre) {
            pre_idx = k;
        }
    }
    const double initial = traj.disagreement(0);
    const double at_pre = traj.disagreement(pre_idx);
    m.consensus_reached = initial > 1e-12 ? at_pre < 1e-3 * initial : at_pre < 1e-9;
    m.value = traj.y.row(pre_idx).mean();

    // Exponential rate from a log-linear fit over the middle of the
    // pre-disturbance window, where the slowest disagreement mode dominates.
    const double t_lo = 0.2 * t_pre, t_hi = 0.8 * t_pre;
    double sum_t = 0.0, sum_l = 0.0, sum_tt = 0.0, sum_tl = 0.0;
    int count = 0;
    for (int k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times(k);
        const double d = traj.disagreement(k);
        if (t < t_lo || t > t_hi || d < 1e-12) {
            continue;
        }
        const double l = std::log(d);
        sum_t += t;
        sum_l += l;
        sum_tt += t * t;
        sum_tl += t * l;
        ++count;
    }
    if (count >= 2) {
        const double denom = count * sum_tt - sum_t * sum_t;
        if (std::abs(denom) > 1e-12) {
            m.rate_estimate = -(count * sum_tl - sum_t * sum_l) / denom;
        }
    }
    return m;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    }
    out << "t";
    for (int j = 0; j < traj.y.cols(); ++j) {
        out << ",y_" << (j + 1);
    }
    for (int j = 0; j < traj.u.cols(); ++j) {
        out << ",u_" << (j + 1);
    }
    out << ",disagreement\n";
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (int k = 0; k < traj.times.size(); ++k) {
        emit(traj.times(k));
        for (int j = 0; j < traj.y.cols(); ++j) {
            out << ",";
            emit(traj.y(k, j));
        }
        for (int j = 0; j < traj.u.cols(); ++j) {
            out << ",";
            emit(traj.u(k, j));
        }
        out << ",";
        emit(traj.disagreement(k));
        out << "\n";
    }
}

} // namespace diffstab
