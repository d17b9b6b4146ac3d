#include "diffstab/simulate.hpp"

#include "doctest.h"

#include <cstdio>
#include <fstream>

using namespace diffstab;

namespace {

Scenario fig_scenario(bool with_step) {
    Scenario sc;
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        sc.initial_states.push_back(Eigen::VectorXd::Constant(1, v));
    }
    sc.t_final = with_step ? 30.0 : 15.0;
    sc.dt = 0.01;
    if (with_step) {
        Disturbance d;
        d.target_agent = 1;
        d.channel = Disturbance::Channel::LoadInput;
        d.step = StepSignal{15.0, 1.0};
        sc.disturbances.push_back(d);
    }
    return sc;
}

ClosedLoop consensus_loop(const Graph& g) {
    const ProtocolSetup setup = consensus_protocol(g);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    return closed_loop(setup.agents.aggregate(), k);
}

} // namespace

TEST_CASE("averaging protocol converges to the mean of the initial states") {
    const ClosedLoop cl = consensus_loop(Graph::path(4));
    const Trajectory traj = simulate(cl, fig_scenario(false));
    REQUIRE_FALSE(traj.truncated);
    const int last = static_cast<int>(traj.times.size()) - 1;
    for (int j = 0; j < 4; ++j) {
        CHECK(traj.y(last, j) == doctest::Approx(2.5).epsilon(1e-3));
    }
    const AgreementMetrics m = agreement_metrics(traj);
    CHECK(m.consensus_reached);
    CHECK(m.value == doctest::Approx(2.5).epsilon(1e-3));
    // Disagreement decays at the algebraic connectivity of the path graph.
    const double lambda2 = 2.0 - std::sqrt(2.0);
    CHECK(std::abs(m.rate_estimate - lambda2) < 0.1 * lambda2);
}

TEST_CASE("post-step mean drift and bounded controls") {
    const ClosedLoop cl = consensus_loop(Graph::path(4));
    const Trajectory traj = simulate(cl, fig_scenario(true));
    REQUIRE_FALSE(traj.truncated);

    // Least-squares slope of the state mean over t in [20, 30].
    double sum_t = 0.0, sum_m = 0.0, sum_tt = 0.0, sum_tm = 0.0;
    int count = 0;
    double max_u = 0.0, max_y_pre = 0.0, max_y_post = 0.0;
    for (int k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times(k);
        max_u = std::max(max_u, traj.u.row(k).cwiseAbs().maxCoeff());
        if (t <= 15.0) {
            max_y_pre = std::max(max_y_pre, traj.y.row(k).cwiseAbs().maxCoeff());
        } else {
            max_y_post = std::max(max_y_post, traj.y.row(k).cwiseAbs().maxCoeff());
        }
        if (t < 20.0) {
            continue;
        }
        const double mean = traj.y.row(k).mean();
        sum_t += t;
        sum_m += mean;
        sum_tt += t * t;
        sum_tm += t * mean;
        ++count;
    }
    const double slope = (count * sum_tm - sum_t * sum_m) / (count * sum_tt - sum_t * sum_t);
    CHECK(slope == doctest::Approx(0.25).epsilon(1e-3));

    // Internal-stability failure signature: outputs run away, controls stay
    // bounded.
    CHECK(max_y_post > max_y_pre + 2.0);
    CHECK(max_u < 5.0);
}

TEST_CASE("zero initial conditions and zero disturbance stay identically zero") {
    const ClosedLoop cl = consensus_loop(Graph::path(3));
    Scenario sc;
    for (int i = 0; i < 3; ++i) {
        sc.initial_states.push_back(Eigen::VectorXd::Zero(1));
    }
    sc.t_final = 5.0;
    sc.dt = 0.05;
    const Trajectory traj = simulate(cl, sc);
    CHECK(traj.y.cwiseAbs().maxCoeff() == 0.0);
    CHECK(traj.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("disconnected components never agree") {
    const Graph g(4, {{1, 2}, {3, 4}});
    const ClosedLoop cl = consensus_loop(g);
    const Trajectory traj = simulate(cl, fig_scenario(false));
    const AgreementMetrics m = agreement_metrics(traj);
    CHECK_FALSE(m.consensus_reached);
}

TEST_CASE("halving the step leaves sampled states unchanged") {
    const ClosedLoop cl = consensus_loop(Graph::path(4));
    Scenario coarse = fig_scenario(true);
    Scenario fine = coarse;
    fine.dt = coarse.dt / 2.0;
    const Trajectory a = simulate(cl, coarse);
    const Trajectory b = simulate(cl, fine);
    const int last_a = static_cast<int>(a.times.size()) - 1;
    const int last_b = static_cast<int>(b.times.size()) - 1;
    REQUIRE(a.times(last_a) == doctest::Approx(b.times(last_b)));
    CHECK((a.y.row(last_a) - b.y.row(last_b)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.u.row(last_a) - b.u.row(last_b)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("state mean is conserved without disturbances") {
    const ClosedLoop cl = consensus_loop(Graph::cycle(5));
    Scenario sc;
    for (double v : {2.0, -1.0, 0.5, 3.0, 1.5}) {
        sc.initial_states.push_back(Eigen::VectorXd::Constant(1, v));
    }
    sc.t_final = 10.0;
    sc.dt = 0.02;
    const Trajectory traj = simulate(cl, sc);
    const double mean0 = traj.y.row(0).mean();
    for (int k = 0; k < traj.times.size(); ++k) {
        CHECK(std::abs(traj.y.row(k).mean() - mean0) < 1e-9);
    }
}

TEST_CASE("scenario validation") {
    Scenario sc;
    sc.t_final = 0.0;
    sc.dt = 0.1;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.t_final = 1.0;
    sc.dt = -0.1;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.dt = 0.1;
    Disturbance d;
    d.step = StepSignal{5.0, 1.0}; // onset past t_final
    sc.disturbances.push_back(d);
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("trajectory CSV round-trips through text") {
    const ClosedLoop cl = consensus_loop(Graph::path(3));
    Scenario sc;
    for (double v : {1.0, 0.0, -1.0}) {
        sc.initial_states.push_back(Eigen::VectorXd::Constant(1, v));
    }
    sc.t_final = 1.0;
    sc.dt = 0.25;
    const Trajectory traj = simulate(cl, sc);
    const std::string path = "test_traj.csv";
    write_trajectory_csv(traj, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,y_1,y_2,y_3,u_1,u_2,u_3,disagreement");
    int rows = 0;
    std::string line;
    double worst = 0.0;
    while (std::getline(in, line)) {
        // Parse back and compare bit-for-bit with the stored samples.
        std::vector<double> vals;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t next = line.find(',', pos);
            const std::string tok = line.substr(pos, next == std::string::npos
                                                         ? std::string::npos
                                                         : next - pos);
            vals.push_back(std::stod(tok));
            if (next == std::string::npos) {
                break;
            }
            pos = next + 1;
        }
        REQUIRE(vals.size() == 8);
        worst = std::max(worst, std::abs(vals[1] - traj.y(rows, 0)));
        worst = std::max(worst, std::abs(vals[7] - traj.disagreement(rows)));
        ++rows;
    }
    CHECK(rows == traj.times.size());
    CHECK(worst == 0.0);
    std::remove(path.c_str());
}
