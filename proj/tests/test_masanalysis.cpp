#include "diffstab/masanalysis.hpp"

#include "doctest.h"

#include <random>

using namespace diffstab;

namespace {

RationalFunction integrator() {
    return RationalFunction(Polynomial::one(), Polynomial{0.0, 1.0});
}

RationalMatrix scalar_tf(const RationalFunction& f) {
    RationalMatrix g(1, 1);
    g(0, 0) = f;
    return g;
}

// Example-2 style agents: P1 = [[s/(s+1), 0], [1/s, 1]], P2 = [[1/s, 0],
// [1, s/(s+1)]].
std::pair<RationalMatrix, RationalMatrix> split_direction_agents() {
    const RationalFunction lead(Polynomial{0.0, 1.0}, Polynomial{1.0, 1.0});
    RationalMatrix p1(2, 2), p2(2, 2);
    p1(0, 0) = lead;
    p1(1, 0) = integrator();
    p1(1, 1) = RationalFunction(1.0);
    p2(0, 0) = integrator();
    p2(1, 0) = RationalFunction(1.0);
    p2(1, 1) = lead;
    return {p1, p2};
}

RationalFunction random_siso(std::mt19937& rng, bool stable) {
    std::uniform_real_distribution<double> mag(0.2, 2.5);
    std::uniform_real_distribution<double> coeff(-1.5, 1.5);
    const double p1 = mag(rng), p2 = mag(rng);
    Polynomial den = Polynomial{stable ? p1 : -p1, 1.0} * Polynomial{p2, 1.0};
    Polynomial num{coeff(rng), coeff(rng)};
    if (num.is_zero()) {
        num = Polynomial::one();
    }
    return RationalFunction(num, den);
}

bool has_mode_near(const StateSpace& s, const Complex& lambda, double tol = 1e-6) {
    for (const Complex& ev : eigenvalues(s.A)) {
        if (std::abs(ev - lambda) < tol) {
            return true;
        }
    }
    return false;
}

} // namespace

TEST_CASE("consensus assembly reproduces the negative Laplacian") {
    const ProtocolSetup setup = consensus_protocol(Graph::star(3));
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const Eigen::MatrixXd e = incidence(setup.coupling.graph).cast<double>();
    const Eigen::MatrixXd laplacian = e * e.transpose();
    const Eigen::MatrixXcd got = k.eval(Complex(0.9, 1.1));
    CHECK((got + laplacian.cast<Complex>()).norm() < 1e-12);
}

TEST_CASE("single-edge assembly spreads the edge controller") {
    const Graph g(2, {{1, 2}});
    const RationalFunction ke(Polynomial{1.0, 2.0}, Polynomial{3.0, 1.0, 1.0});
    const RationalMatrix k =
        assemble_controller(CouplingSpec::diffusive(g), EdgeControllerSet({scalar_tf(ke)}));
    const Complex s0(0.4, 1.7);
    const Complex v = ke(s0);
    Eigen::MatrixXcd expect(2, 2);
    expect << v, -v, -v, v;
    CHECK((k.eval(s0) - expect).norm() < 1e-12);
}

TEST_CASE("directed-out assembly annihilates the ones vector from the right") {
    const Graph g(3, {{1, 3}, {2, 3}});
    const RationalMatrix k = assemble_controller(CouplingSpec::directed_out(g),
                                                 EdgeControllerSet::consensus(2, 1));
    const Eigen::MatrixXd bo = b_out(g).cast<double>();
    const Eigen::MatrixXd e = incidence(g).cast<double>();
    const Eigen::MatrixXcd got = k.eval(Complex(1.2, 0.5));
    CHECK((got + (bo * e.transpose()).cast<Complex>()).norm() < 1e-12);
    CHECK((got * Eigen::VectorXcd::Ones(3)).norm() < 1e-12);
}

TEST_CASE("assembled diffusive controllers have the structural left kernel") {
    std::mt19937 rng(311);
    std::uniform_int_distribution<int> pick_graph(0, 2);
    for (int trial = 0; trial < 12; ++trial) {
        const int nu = 2 + trial % 3;
        Graph g = pick_graph(rng) == 0   ? Graph::path(nu)
                  : pick_graph(rng) == 1 ? Graph::star(nu)
                                         : Graph::cycle(nu);
        const int m = 1 + trial % 2;
        std::vector<RationalMatrix> kes;
        for (int j = 0; j < g.edge_count(); ++j) {
            RationalMatrix ke(m, m);
            for (int a = 0; a < m; ++a) {
                for (int b = 0; b < m; ++b) {
                    ke(a, b) = random_siso(rng, trial % 2 == 0);
                }
            }
            kes.push_back(std::move(ke));
        }
        const RationalMatrix k =
            assemble_controller(CouplingSpec::diffusive(g), EdgeControllerSet(kes));
        const Eigen::MatrixXcd ones_mix =
            kron(Eigen::MatrixXd(Eigen::RowVectorXd::Ones(nu)), RationalMatrix::identity(m))
                .eval(Complex(0.0, 0.0));
        const Complex s0(0.73, 2.11);
        CHECK((ones_mix * k.eval(s0)).norm() < 1e-10);
    }
}

TEST_CASE("stable plant with zero controller is internally stable") {
    RationalMatrix p(2, 2);
    p(0, 0) = RationalFunction(Polynomial::one(), Polynomial{1.0, 1.0});
    p(1, 1) = RationalFunction(Polynomial{2.0}, Polynomial{3.0, 1.0});
    const ClosedLoop cl = closed_loop(p, RationalMatrix::zero(2, 2));
    CHECK(cl.stable);
    CHECK(rm_equal_sampled(cl.T_d, p));
    CHECK(rm_equal_sampled(cl.S, RationalMatrix::identity(2)));
    const auto [ok, blocks] = internal_stability(cl);
    CHECK(ok);
    // T_c and T vanish identically.
    CHECK(cl.block_realizations[2].states() == 0);
    CHECK((cl.block_realizations[2].D).isZero(1e-12));
}

TEST_CASE("first-order heterogeneous pair closes with the published gains") {
    const double alpha = 1.0, beta = 2.0;
    RationalMatrix p1(2, 2), p2(2, 2);
    p1(0, 0) = integrator();
    p1(1, 1) = RationalFunction(1.0);
    p2(0, 0) = integrator();
    p2(0, 1) = integrator() * beta;
    p2(1, 0) = integrator() * alpha;
    p2(1, 1) = integrator() * (alpha * beta);
    const AgentSet agents({p1, p2});

    Eigen::MatrixXd ke(2, 2);
    ke << (alpha - beta) * beta, -alpha, beta, 0.0;
    const Graph g(2, {{1, 2}});
    const RationalMatrix k = assemble_controller(CouplingSpec::diffusive(g),
                                                 EdgeControllerSet({RationalMatrix(ke)}));
    const ClosedLoop cl = closed_loop(agents.aggregate(), k);
    CHECK(cl.stable);
    const StateSpace combined = minimalize(cl.realization);
    CHECK(combined.states() == 2);
    CHECK(has_mode_near(combined, Complex(-alpha * alpha, 0.0)));
    CHECK(has_mode_near(combined, Complex(-beta * beta, 0.0)));

    // With alpha = 0 or beta = 0 the obstruction fires with direction e1.
    for (int which = 0; which < 2; ++which) {
        const double a2 = which == 0 ? 0.0 : 1.0;
        const double b2 = which == 0 ? 2.0 : 0.0;
        RationalMatrix q2(2, 2);
        q2(0, 0) = integrator();
        q2(0, 1) = integrator() * b2;
        q2(1, 0) = integrator() * a2;
        q2(1, 1) = integrator() * (a2 * b2);
        const StabilizabilityVerdict v = stabilizability_obstruction(AgentSet({p1, q2}));
        CHECK(v.decision == Stabilizability::Obstructed);
        REQUIRE(v.blocking.has_value());
        CHECK(std::abs(v.blocking->lambda) < 1e-7);
        Eigen::VectorXcd e1(2);
        e1 << 1.0, 0.0;
        if (which == 1) { // beta = 0: shared input directions
            REQUIRE(v.blocking->input_branch.has_value());
            CHECK(v.blocking->input_branch->intersection.residual(e1) < 1e-7);
            CHECK(v.blocking->input_branch->kernel_residual < 1e-6);
        } else { // alpha = 0: shared output directions
            REQUIRE(v.blocking->output_branch.has_value());
            CHECK(v.blocking->output_branch->intersection.residual(e1) < 1e-7);
            CHECK(v.blocking->output_branch->kernel_residual < 1e-6);
        }
    }

    // And the original (alpha, beta) = (1, 2) pair clears.
    const StabilizabilityVerdict clear = stabilizability_obstruction(agents);
    CHECK(clear.decision == Stabilizability::NoObstructionFound);
    CHECK_FALSE(clear.cleared_candidates.empty());
}

TEST_CASE("consensus on four integrators is internally unstable through T_d") {
    const ProtocolSetup setup = consensus_protocol(4);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const ClosedLoop cl = closed_loop(setup.agents.aggregate(), k);
    CHECK_FALSE(cl.stable);
    const auto [ok, blocks] = internal_stability(cl);
    CHECK_FALSE(ok);
    // The disturbance sensitivity T_d carries the origin pole; the other
    // three blocks are stable when consensus is attained.
    CHECK(blocks[0].unstable_poles.empty());
    REQUIRE(blocks[1].unstable_poles.size() == 1);
    CHECK(std::abs(blocks[1].unstable_poles[0]) < 1e-7);
    CHECK(blocks[2].unstable_poles.empty());
    CHECK(blocks[3].unstable_poles.empty());
}

TEST_CASE("split-direction agents with the integral edge controller leave T unstable") {
    const auto [p1, p2] = split_direction_agents();
    const AgentSet agents({p1, p2});
    RationalMatrix ke(2, 2);
    ke(0, 0) = RationalFunction(-1.0 / 3.0);
    ke(1, 1) = RationalFunction(Polynomial{-2.0 / 3.0}, Polynomial{0.0, 1.0});
    const Graph g(2, {{1, 2}});
    const RationalMatrix k =
        assemble_controller(CouplingSpec::diffusive(g), EdgeControllerSet({ke}));
    const ClosedLoop cl = closed_loop(agents.aggregate(), k);
    CHECK_FALSE(cl.stable);
    const auto [ok, blocks] = internal_stability(cl);
    CHECK_FALSE(ok);
    CHECK(blocks[0].unstable_poles.empty());
    CHECK(blocks[1].unstable_poles.empty());
    CHECK(blocks[2].unstable_poles.empty());
    REQUIRE(blocks[3].unstable_poles.size() == 1);
    CHECK(std::abs(blocks[3].unstable_poles[0]) < 1e-7);

    // Stable blocks draw their poles from the common denominator roots.
    const std::vector<Complex> allowed = {{-2.0, 0.0}, {-0.5, 0.0}, {-1.0 / 3.0, 0.0}};
    for (int blk = 0; blk < 3; ++blk) {
        for (const Complex& ev : eigenvalues(cl.block_realizations[blk].A)) {
            bool matched = false;
            for (const Complex& root : allowed) {
                matched = matched || std::abs(ev - root) < 1e-6;
            }
            CHECK(matched);
        }
    }
}

TEST_CASE("homogeneous integrators are obstructed at the origin on both branches") {
    std::vector<RationalMatrix> list(4, scalar_tf(integrator()));
    const StabilizabilityVerdict v = stabilizability_obstruction(AgentSet(list));
    CHECK(v.decision == Stabilizability::Obstructed);
    REQUIRE(v.blocking.has_value());
    CHECK(std::abs(v.blocking->lambda) < 1e-7);
    CHECK(v.blocking->input_branch.has_value());
    CHECK(v.blocking->output_branch.has_value());
    CHECK(v.blocking->input_branch->kernel_residual < 1e-6);
}

TEST_CASE("heterogeneous SISO pair: shared origin blocks, lone unstable pole clears") {
    const RationalMatrix a1 = scalar_tf(integrator());
    const RationalMatrix a2 = scalar_tf(
        RationalFunction(Polynomial{1.0, 1.0}, Polynomial{0.0, 1.0} * Polynomial{-2.0, 1.0}));
    const StabilizabilityVerdict v = stabilizability_obstruction(AgentSet({a1, a2}));
    CHECK(v.decision == Stabilizability::Obstructed);
    REQUIRE(v.blocking.has_value());
    CHECK(std::abs(v.blocking->lambda) < 1e-7);
    // The pole at +2 belongs to one agent only and is reported as cleared.
    bool saw_two = false;
    for (const Complex& c : v.cleared_candidates) {
        saw_two = saw_two || std::abs(c - Complex(2.0, 0.0)) < 1e-6;
    }
    CHECK(saw_two);
}

TEST_CASE("all-stable agents are reported stabilizable") {
    RationalMatrix a = scalar_tf(RationalFunction(Polynomial::one(), Polynomial{1.0, 1.0}));
    RationalMatrix b = scalar_tf(RationalFunction(Polynomial{2.0}, Polynomial{5.0, 1.0}));
    const StabilizabilityVerdict v = stabilizability_obstruction(AgentSet({a, b}));
    CHECK(v.decision == Stabilizability::Stabilizable);
}

TEST_CASE("static coupling cancels one integrator mode") {
    RationalMatrix g1(2, 2);
    g1(0, 0) = integrator();
    g1(1, 1) = integrator();
    Eigen::MatrixXd coupling(2, 2);
    coupling << 1.0, -1.0, -1.0, 1.0;
    const CancellationReport rep =
        cancellation_check(g1, RationalMatrix(coupling), Complex(0.0, 0.0));
    CHECK(rep.degree_deficit == 1);
    CHECK(rep.canceled_in_pk);
    CHECK(rep.canceled_in_kp);
    CHECK_FALSE(rep.pbh_left_null.is_trivial());
}

TEST_CASE("consensus coupling cancels the origin in both cascade orders") {
    const ProtocolSetup setup = consensus_protocol(4);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const CancellationReport rep =
        cancellation_check(setup.agents.aggregate(), k, Complex(0.0, 0.0));
    CHECK(rep.canceled_in_pk);
    CHECK(rep.canceled_in_kp);
    CHECK(rep.degree_deficit >= 1);
}

TEST_CASE("split-direction agents cancel in P K but keep K P intact") {
    const auto [p1, p2] = split_direction_agents();
    const AgentSet agents({p1, p2});
    std::mt19937 rng(512);
    RationalMatrix ke(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            ke(i, j) = random_siso(rng, true);
        }
    }
    const Graph g(2, {{1, 2}});
    const RationalMatrix k =
        assemble_controller(CouplingSpec::diffusive(g), EdgeControllerSet({ke}));
    const CancellationReport rep =
        cancellation_check(agents.aggregate(), k, Complex(0.0, 0.0));
    CHECK(rep.canceled_in_pk);
}

TEST_CASE("cancellation check rejects non-poles") {
    RationalMatrix g1(1, 1);
    g1(0, 0) = integrator();
    CHECK_THROWS_AS(cancellation_check(g1, RationalMatrix(Eigen::MatrixXd::Ones(1, 1)),
                                       Complex(1.0, 0.0)),
                    std::domain_error);
}

TEST_CASE("two-agent consensus closed loop has modes 0 and -2") {
    const ProtocolSetup setup = consensus_protocol(2);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const ClosedLoop cl = closed_loop(setup.agents.aggregate(), k);
    const StateSpace combined = minimalize(cl.realization);
    CHECK(has_mode_near(combined, Complex(0.0, 0.0)));
    CHECK(has_mode_near(combined, Complex(-2.0, 0.0)));
}

TEST_CASE("connected consensus loops keep exactly one origin mode") {
    for (const Graph& g : {Graph::path(4), Graph::star(3), Graph::cycle(5)}) {
        const ProtocolSetup setup = consensus_protocol(g);
        const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
        const ClosedLoop cl = closed_loop(setup.agents.aggregate(), k);
        int zero_modes = 0;
        for (const Complex& ev : eigenvalues(cl.realization.A)) {
            if (std::abs(ev) < 1e-8) {
                ++zero_modes;
            }
        }
        CHECK(zero_modes == 1);
    }
}

TEST_CASE("disturbance along the blocking direction excites the unstable pole") {
    const ProtocolSetup setup = consensus_protocol(3);
    const StabilizabilityVerdict v = stabilizability_obstruction(setup.agents);
    REQUIRE(v.blocking.has_value());
    REQUIRE(v.blocking->input_branch.has_value());
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const ClosedLoop cl = closed_loop(setup.agents.aggregate(), k);
    // Input column [0; ones kron v] applied to (d_y, d_u).
    const Eigen::VectorXd vdir = v.blocking->input_branch->direction.real();
    Eigen::MatrixXd col = Eigen::MatrixXd::Zero(cl.realization.inputs(), 1);
    for (int agent = 0; agent < 3; ++agent) {
        col.block(cl.agent_outputs_total + agent * vdir.size(), 0, vdir.size(), 1) = vdir;
    }
    const StateSpace driven = minimalize(postmultiply(cl.realization, col));
    CHECK(has_mode_near(driven, v.blocking->lambda, 1e-6));
}

TEST_CASE("stacked-denominator matrix stays regular exactly on stable loops") {
    // Random stable agents with mild stable edge controllers: the block
    // matrix [M_K, -N_P; -N_K, M_P] keeps its smallest singular value away
    // from zero over the axis; the obstructed consensus case collapses it
    // at the blocking frequency.
    std::mt19937 rng(901);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<RationalMatrix> agents;
        for (int i = 0; i < 2; ++i) {
            agents.push_back(scalar_tf(random_siso(rng, true)));
        }
        const AgentSet set(agents);
        RationalMatrix ke(1, 1);
        ke(0, 0) = random_siso(rng, true) * 0.05; // low gain keeps the loop stable
        const Graph g(2, {{1, 2}});
        const RationalMatrix k =
            assemble_controller(CouplingSpec::diffusive(g), EdgeControllerSet({ke}));
        const ClosedLoop cl = closed_loop(set.aggregate(), k);
        if (!cl.stable) {
            continue;
        }
        const CoprimeFactors fp = factorize(realize(set.aggregate()));
        const CoprimeFactors fk = factorize(realize(k));
        double min_sv = 1e9;
        for (int w = 0; w < 40; ++w) {
            const double omega = w == 0 ? 0.0 : std::pow(10.0, -2.0 + 4.0 * (w - 1) / 38.0);
            const Complex s(0.0, omega);
            Eigen::MatrixXcd theta(4, 4);
            theta.topLeftCorner(2, 2) = fk.M.eval(s);
            theta.topRightCorner(2, 2) = -fp.N.eval(s);
            theta.bottomLeftCorner(2, 2) = -fk.N.eval(s);
            theta.bottomRightCorner(2, 2) = fp.M.eval(s);
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(theta);
            min_sv = std::min(min_sv, svd.singularValues().minCoeff());
        }
        CHECK(min_sv > 1e-6);
    }

    const ProtocolSetup setup = consensus_protocol(2);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const CoprimeFactors fp = factorize(realize(setup.agents.aggregate()));
    const CoprimeFactors fk = factorize(realize(k));
    Eigen::MatrixXcd theta(4, 4);
    const Complex s0(0.0, 0.0); // blocking frequency of the integrator MAS
    theta.topLeftCorner(2, 2) = fk.M.eval(s0);
    theta.topRightCorner(2, 2) = -fp.N.eval(s0);
    theta.bottomLeftCorner(2, 2) = -fk.N.eval(s0);
    theta.bottomRightCorner(2, 2) = fp.M.eval(s0);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(theta);
    CHECK(svd.singularValues().minCoeff() < 1e-8);
}

TEST_CASE("block dimensions follow the loop layout") {
    const ProtocolSetup setup = consensus_protocol(3);
    const RationalMatrix k = assemble_controller(setup.coupling, setup.controllers);
    const ClosedLoop cl = closed_loop(setup.agents.aggregate(), k);
    CHECK(cl.S.rows() == 3);
    CHECK(cl.S.cols() == 3);
    CHECK(cl.T_d.rows() == 3);
    CHECK(cl.T_d.cols() == 3);
    CHECK(cl.T_c.rows() == 3);
    CHECK(cl.T.rows() == 3);
}

TEST_CASE("ill-posed loops are rejected") {
    // P = K = I makes I - P K singular as a rational matrix.
    const RationalMatrix eye = RationalMatrix::identity(2);
    CHECK_THROWS_AS(closed_loop(eye, eye), std::domain_error);
}
