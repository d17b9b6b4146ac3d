#include "diffstab/masanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diffstab {

namespace {

const char* kBlockNames[4] = {"S", "T_d", "T_c", "T"};

std::vector<Complex> closed_rhp_modes(const StateSpace& minimal) {
    std::vector<Complex> out;
    for (const Complex& ev : eigenvalues(minimal.A)) {
        if (ev.real() >= -kAxisMargin) {
            out.push_back(ev);
        }
    }
    return out;
}

int multiplicity_at(const StateSpace& s, const Complex& lambda, double tol) {
    int count = 0;
    for (const Complex& ev : eigenvalues(s.A)) {
        if (std::abs(ev - lambda) <= tol) {
            ++count;
        }
    }
    return count;
}

} // namespace

AgentSet::AgentSet(std::vector<RationalMatrix> list) : agents(std::move(list)) {
    if (agents.empty()) {
        throw std::invalid_argument("AgentSet: at least one agent required");
    }
    outputs = agents.front().rows();
    inputs = agents.front().cols();
    for (const auto& a : agents) {
        if (a.rows() != outputs || a.cols() != inputs) {
            throw std::invalid_argument("AgentSet: agents must share input/output dimensions");
        }
        if (!a.is_proper()) {
            throw std::invalid_argument("AgentSet: agents must be proper");
        }
    }
}

RationalMatrix AgentSet::aggregate() const {
    return RationalMatrix::block_diagonal(agents);
}

bool AgentSet::homogeneous(double rel_tol) const {
    for (std::size_t i = 1; i < agents.size(); ++i) {
        if (!rm_equal_sampled(agents[0], agents[i], rel_tol)) {
            return false;
        }
    }
    return true;
}

EdgeControllerSet::EdgeControllerSet(std::vector<RationalMatrix> list)
    : controllers(std::move(list)) {
    if (controllers.empty()) {
        throw std::invalid_argument("EdgeControllerSet: at least one edge controller required");
    }
    for (const auto& k : controllers) {
        if (k.rows() != controllers.front().rows() || k.cols() != controllers.front().cols()) {
            throw std::invalid_argument("EdgeControllerSet: controllers must share dimensions");
        }
    }
}

EdgeControllerSet EdgeControllerSet::consensus(int edges, int dim) {
    std::vector<RationalMatrix> list;
    list.reserve(static_cast<std::size_t>(edges));
    for (int j = 0; j < edges; ++j) {
        list.push_back(RationalMatrix(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(dim, dim))));
    }
    return EdgeControllerSet(std::move(list));
}

RationalMatrix assemble_controller(const CouplingSpec& coupling, const EdgeControllerSet& ke,
                                   double tol) {
    if (ke.size() != coupling.num_edges()) {
        throw std::invalid_argument("assemble_controller: one edge controller per edge required");
    }
    const int m = ke.controllers.front().rows();
    const int p = ke.controllers.front().cols();
    const RationalMatrix diag = RationalMatrix::block_diagonal(ke.controllers);
    const RationalMatrix left = kron(coupling.left_factor(), RationalMatrix::identity(m));
    const RationalMatrix right = kron(coupling.right_factor(), RationalMatrix::identity(p));
    RationalMatrix k = left * diag * right;
    // Entries were produced by sums of products; tidy them up.
    for (int i = 0; i < k.rows(); ++i) {
        for (int j = 0; j < k.cols(); ++j) {
            k(i, j) = k(i, j).simplified(tol);
        }
    }
    return k;
}

ClosedLoop closed_loop(const RationalMatrix& plant, const RationalMatrix& controller,
                       double tol) {
    if (plant.cols() != controller.rows() || plant.rows() != controller.cols()) {
        throw std::invalid_argument("closed_loop: plant and controller dimensions must be dual");
    }
    const StateSpace sp = realize(plant, tol);
    const StateSpace sk = realize(controller, tol);
    const int ny = sp.outputs(); // dim of y and d_y
    const int nu = sp.inputs();  // dim of u and d_u
    const int np = sp.states(), nk = sk.states();

    // Well-posedness of the algebraic loop.
    const Eigen::MatrixXd loop_gain =
        Eigen::MatrixXd::Identity(nu, nu) - sk.D * sp.D;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(loop_gain);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) {
        throw std::domain_error("closed_loop: ill-posed loop (singular direct feedthrough)");
    }
    // Rational singularity of I - P K: determinant identically zero.
    {
        double radius = 3.0;
        for (const Complex& pole : plant.entry_poles()) {
            radius = std::max(radius, 2.0 + std::abs(pole));
        }
        for (const Complex& pole : controller.entry_poles()) {
            radius = std::max(radius, 2.0 + std::abs(pole));
        }
        bool invertible_somewhere = false;
        for (int k = 0; k < 7 && !invertible_somewhere; ++k) {
            const double theta = 2.0 * 3.14159265358979323846 * (k + 0.123) / 7.0;
            const Complex s = radius * Complex(std::cos(theta), std::sin(theta));
            const Eigen::MatrixXcd gap = Eigen::MatrixXcd::Identity(ny, ny) -
                                         plant.eval(s) * controller.eval(s);
            if (std::abs(gap.partialPivLu().determinant()) > 1e-10) {
                invertible_somewhere = true;
            }
        }
        if (!invertible_somewhere) {
            throw std::domain_error("closed_loop: I - P K is rationally singular");
        }
    }

    const Eigen::MatrixXd w = lu.inverse();
    const Eigen::MatrixXd wdkcp = w * sk.D * sp.C; // nu x np
    const Eigen::MatrixXd wck = w * sk.C;          // nu x nk
    const Eigen::MatrixXd wdk = w * sk.D;          // nu x ny

    // States (x_P, x_K), inputs (d_y, d_u), outputs (y, u).
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(np + nk, np + nk);
    a.topLeftCorner(np, np) = sp.A + sp.B * wdkcp;
    a.topRightCorner(np, nk) = sp.B * wck;
    a.bottomLeftCorner(nk, np) = sk.B * (sp.C + sp.D * wdkcp);
    a.bottomRightCorner(nk, nk) = sk.A + sk.B * sp.D * wck;

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(np + nk, ny + nu);
    b.topLeftCorner(np, ny) = sp.B * wdk;
    b.topRightCorner(np, nu) =
        sp.B * (Eigen::MatrixXd::Identity(nu, nu) + wdk * sp.D);
    b.bottomLeftCorner(nk, ny) =
        sk.B * (Eigen::MatrixXd::Identity(ny, ny) + sp.D * wdk);
    b.bottomRightCorner(nk, nu) = sk.B * (sp.D + sp.D * wdk * sp.D);

    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ny + nu, np + nk);
    c.topLeftCorner(ny, np) = sp.C + sp.D * wdkcp;
    c.topRightCorner(ny, nk) = sp.D * wck;
    c.bottomLeftCorner(nu, np) = wdkcp;
    c.bottomRightCorner(nu, nk) = wck;

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(ny + nu, ny + nu);
    d.topLeftCorner(ny, ny) = Eigen::MatrixXd::Identity(ny, ny) + sp.D * wdk;
    d.topRightCorner(ny, nu) = sp.D + sp.D * wdk * sp.D;
    d.bottomLeftCorner(nu, ny) = wdk;
    d.bottomRightCorner(nu, nu) = wdk * sp.D;

    ClosedLoop cl;
    cl.realization = StateSpace(std::move(a), std::move(b), std::move(c), std::move(d), tol);
    cl.agent_outputs_total = ny;
    cl.agent_inputs_total = nu;
    cl.plant_states = np;

    const int row0[4] = {0, 0, ny, ny};
    const int col0[4] = {0, ny, 0, ny};
    const int rows[4] = {ny, ny, nu, nu};
    const int cols[4] = {ny, nu, ny, nu};
    std::vector<Complex> bad;
    for (int blk = 0; blk < 4; ++blk) {
        const StateSpace sub = minimalize(StateSpace(
            cl.realization.A, cl.realization.B.middleCols(col0[blk], cols[blk]),
            cl.realization.C.middleRows(row0[blk], rows[blk]),
            cl.realization.D.block(row0[blk], col0[blk], rows[blk], cols[blk]), tol));
        cl.block_realizations.push_back(sub);
        for (const Complex& ev : closed_rhp_modes(sub)) {
            bad.push_back(ev);
        }
    }
    cl.S = transfer_function(cl.block_realizations[0]);
    cl.T_d = transfer_function(cl.block_realizations[1]);
    cl.T_c = transfer_function(cl.block_realizations[2]);
    cl.T = transfer_function(cl.block_realizations[3]);
    for (const auto& [lambda, mult] : cluster_points(bad, kClusterTol)) {
        cl.unstable_poles.push_back(lambda);
    }
    cl.stable = cl.unstable_poles.empty();
    return cl;
}

std::pair<bool, std::vector<BlockStability>> internal_stability(const ClosedLoop& cl) {
    std::vector<BlockStability> report;
    bool stable = true;
    for (int blk = 0; blk < 4; ++blk) {
        BlockStability bs;
        bs.block = kBlockNames[blk];
        bs.unstable_poles = closed_rhp_modes(cl.block_realizations[static_cast<std::size_t>(blk)]);
        stable = stable && bs.unstable_poles.empty();
        report.push_back(std::move(bs));
    }
    return {stable, std::move(report)};
}

StabilizabilityVerdict stabilizability_obstruction(const AgentSet& agents, double tol) {
    const int nu = agents.size();
    std::vector<StateSpace> realizations;
    std::vector<std::vector<Complex>> rhp_poles(static_cast<std::size_t>(nu));
    std::vector<Complex> pole_union;
    for (int i = 0; i < nu; ++i) {
        StateSpace s = realize(agents.agents[static_cast<std::size_t>(i)], tol);
        for (const Complex& ev : closed_rhp_modes(s)) {
            rhp_poles[static_cast<std::size_t>(i)].push_back(ev);
            pole_union.push_back(ev);
        }
        realizations.push_back(std::move(s));
    }

    StabilizabilityVerdict verdict;
    if (pole_union.empty()) {
        // Every agent is stable: decoupling (K_e = 0) internally stabilizes.
        verdict.decision = Stabilizability::Stabilizable;
        return verdict;
    }

    for (const auto& [lambda, mult] : cluster_points(pole_union, kClusterTol)) {
        const bool shared = std::all_of(
            rhp_poles.begin(), rhp_poles.end(), [&](const std::vector<Complex>& list) {
                return std::any_of(list.begin(), list.end(), [&](const Complex& ev) {
                    return std::abs(ev - lambda) <= kClusterTol;
                });
            });
        if (!shared) {
            verdict.cleared_candidates.push_back(lambda);
            continue;
        }
        std::vector<Subspace> in_dirs, out_dirs;
        for (const StateSpace& s : realizations) {
            auto [in, out] = pole_directions(s, lambda);
            in_dirs.push_back(std::move(in));
            out_dirs.push_back(std::move(out));
        }
        const Subspace in_hit = subspace_intersect(in_dirs, tol);
        const Subspace out_hit = subspace_intersect(out_dirs, tol);
        if (in_hit.is_trivial() && out_hit.is_trivial()) {
            verdict.cleared_candidates.push_back(lambda);
            continue;
        }
        if (verdict.blocking.has_value()) {
            continue; // keep the first certificate; candidate also blocks
        }

        // Cross-validate against the denominator kernels of the coprime
        // factorizations; this also enforces the stabilizability /
        // detectability assumption per agent.
        std::vector<CoprimeFactors> factors;
        for (int i = 0; i < nu; ++i) {
            try {
                factors.push_back(factorize(realizations[static_cast<std::size_t>(i)], tol));
            } catch (const std::domain_error& e) {
                throw std::domain_error("agent " + std::to_string(i + 1) + ": " + e.what());
            }
        }
        BlockingCertificate cert;
        cert.lambda = lambda;
        if (!in_hit.is_trivial()) {
            BranchHit hit;
            hit.direction = in_hit.basis.col(0);
            hit.per_agent_dirs = in_dirs;
            hit.intersection = in_hit;
            for (const auto& f : factors) {
                const double res =
                    (hit.direction.adjoint() * f.M.eval(lambda)).norm();
                hit.kernel_residual = std::max(hit.kernel_residual, res);
            }
            cert.input_branch = std::move(hit);
        }
        if (!out_hit.is_trivial()) {
            BranchHit hit;
            hit.direction = out_hit.basis.col(0);
            hit.per_agent_dirs = out_dirs;
            hit.intersection = out_hit;
            for (const auto& f : factors) {
                const double res = (f.M_tilde.eval(lambda) * hit.direction).norm();
                hit.kernel_residual = std::max(hit.kernel_residual, res);
            }
            cert.output_branch = std::move(hit);
        }
        verdict.decision = Stabilizability::Obstructed;
        verdict.blocking = std::move(cert);
    }
    if (!verdict.blocking.has_value()) {
        verdict.decision = Stabilizability::NoObstructionFound;
    }
    return verdict;
}

CancellationReport cancellation_check(const RationalMatrix& plant,
                                      const RationalMatrix& controller, const Complex& lambda,
                                      double tol) {
    const StateSpace sp = realize(plant, tol);
    const StateSpace sk = realize(controller, tol);
    const int mult_p = multiplicity_at(sp, lambda, kClusterTol);
    if (lambda.real() < -kAxisMargin || mult_p == 0) {
        throw std::domain_error(
            "cancellation_check: lambda must be a closed-right-half-plane pole of the plant");
    }
    const int mult_k = multiplicity_at(sk, lambda, kClusterTol);

    const StateSpace pk = series(sk, sp); // P(s) K(s)
    const StateSpace kp = series(sp, sk); // K(s) P(s)
    const StateSpace pk_min = minimalize(pk);
    const StateSpace kp_min = minimalize(kp);

    CancellationReport report;
    report.lambda = lambda;
    report.degree_deficit = sp.states() + sk.states() - pk_min.states();
    report.canceled_in_pk = multiplicity_at(pk_min, lambda, kClusterTol) < mult_p + mult_k;
    report.canceled_in_kp = multiplicity_at(kp_min, lambda, kClusterTol) < mult_p + mult_k;

    auto [unctrl, left_null] = pbh_uncontrollable(pk.A, pk.B, lambda, tol);
    if (unctrl) {
        report.pbh_left_null = std::move(left_null);
    } else {
        // Cancellation may instead surface as an unobservable mode.
        auto [unobs, right_null] = pbh_unobservable(pk.A, pk.C, lambda, tol);
        report.pbh_left_null =
            unobs ? std::move(right_null) : Subspace::trivial(pk.states(), tol);
    }
    return report;
}

ProtocolSetup consensus_protocol(const Graph& g) {
    ProtocolSetup setup;
    RationalMatrix integ(1, 1);
    integ(0, 0) = RationalFunction(Polynomial::one(), Polynomial{0.0, 1.0});
    std::vector<RationalMatrix> agents(static_cast<std::size_t>(g.num_vertices), integ);
    setup.agents = AgentSet(std::move(agents));
    setup.coupling = CouplingSpec::diffusive(g);
    setup.controllers = EdgeControllerSet::consensus(g.edge_count(), 1);
    return setup;
}

ProtocolSetup consensus_protocol(int nu) {
    return consensus_protocol(Graph::path(nu));
}

} // namespace diffstab
