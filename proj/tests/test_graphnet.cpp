#include "diffstab/graphnet.hpp"

#include "diffstab/linalg.hpp"

#include "doctest.h"

#include <random>

using namespace diffstab;

namespace {

Graph random_graph(std::mt19937& rng) {
    std::uniform_int_distribution<int> nv(2, 8);
    const int v = nv(rng);
    std::uniform_int_distribution<int> ne(1, 2 * v);
    std::uniform_int_distribution<int> pick(1, v);
    std::vector<std::pair<int, int>> edges;
    const int count = ne(rng);
    while (static_cast<int>(edges.size()) < count) {
        const int a = pick(rng), b = pick(rng);
        if (a != b) {
            edges.emplace_back(a, b);
        }
    }
    return Graph(v, std::move(edges));
}

} // namespace

TEST_CASE("incidence matrix of the star on three nodes") {
    const Graph g(3, {{1, 3}, {2, 3}});
    Eigen::MatrixXi expect(3, 2);
    expect << 1, 0, 0, 1, -1, -1;
    CHECK(incidence(g) == expect);
}

TEST_CASE("incidence matrix of a single edge") {
    const Graph g(2, {{1, 2}});
    Eigen::MatrixXi expect(2, 1);
    expect << 1, -1;
    CHECK(incidence(g) == expect);
}

TEST_CASE("empty edge list gives a wide-open incidence matrix") {
    const Graph g(3, {});
    CHECK(incidence(g).rows() == 3);
    CHECK(incidence(g).cols() == 0);
}

TEST_CASE("head selector") {
    const Graph g(3, {{1, 3}, {2, 3}});
    Eigen::MatrixXi expect(3, 2);
    expect << 1, 0, 0, 1, 0, 0;
    CHECK(b_out(g) == expect);

    const Graph single(2, {{1, 2}});
    Eigen::MatrixXi e2(2, 1);
    e2 << 1, 0;
    CHECK(b_out(single) == e2);
}

TEST_CASE("columns of the incidence matrix sum to zero; b_out - b_in == E") {
    std::mt19937 rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const Graph g = random_graph(rng);
        const Eigen::MatrixXi e = incidence(g);
        CHECK((Eigen::RowVectorXi::Ones(g.num_vertices) * e).isZero());
        CHECK((b_out(g) - b_in(g)) == e);
    }
}

TEST_CASE("forest predicate") {
    CHECK(is_forest(Graph::path(4)));
    CHECK_FALSE(is_forest(Graph::cycle(3)));
}

TEST_CASE("forest iff nonsingular edge Laplacian") {
    std::mt19937 rng(405);
    for (int trial = 0; trial < 50; ++trial) {
        const Graph g = random_graph(rng);
        const Eigen::MatrixXd e = incidence(g).cast<double>();
        const Eigen::MatrixXd edge_lap = e.transpose() * e;
        const bool nonsingular =
            edge_lap.cols() == 0 ||
            numerical_rank<double>(edge_lap, kDefaultTol) == edge_lap.cols();
        CHECK(is_forest(g) == nonsingular);

        // Edge Laplacian is positive semidefinite.
        if (edge_lap.cols() > 0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(edge_lap);
            CHECK(es.eigenvalues().minCoeff() > -1e-10);
        }
    }
}

TEST_CASE("connectivity") {
    CHECK(is_connected(Graph::star(3)));
    CHECK_FALSE(is_connected(Graph(2, {})));
}

TEST_CASE("incidence rank equals vertices minus components") {
    std::mt19937 rng(406);
    for (int trial = 0; trial < 50; ++trial) {
        const Graph g = random_graph(rng);
        // Count components via repeated connectivity on an auxiliary graph.
        std::vector<int> comp(static_cast<std::size_t>(g.num_vertices), -1);
        int components = 0;
        for (int v = 0; v < g.num_vertices; ++v) {
            if (comp[static_cast<std::size_t>(v)] >= 0) {
                continue;
            }
            // BFS
            std::vector<int> queue{v};
            comp[static_cast<std::size_t>(v)] = components;
            while (!queue.empty()) {
                const int cur = queue.back();
                queue.pop_back();
                for (const auto& [h, t] : g.edges) {
                    int other = -1;
                    if (h - 1 == cur) {
                        other = t - 1;
                    } else if (t - 1 == cur) {
                        other = h - 1;
                    }
                    if (other >= 0 && comp[static_cast<std::size_t>(other)] < 0) {
                        comp[static_cast<std::size_t>(other)] = components;
                        queue.push_back(other);
                    }
                }
            }
            ++components;
        }
        const Eigen::MatrixXd e = incidence(g).cast<double>();
        const int rank = e.cols() == 0 ? 0 : numerical_rank<double>(e, kDefaultTol);
        CHECK(rank == g.num_vertices - components);
        CHECK(is_connected(g) == (components == 1));
    }
}

TEST_CASE("graph validation") {
    CHECK_THROWS_AS(Graph(2, {{1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(2, {{1, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(0, {}), std::invalid_argument);
}

TEST_CASE("coupling factors") {
    const CouplingSpec diff = CouplingSpec::diffusive(Graph::path(3));
    CHECK(diff.left_factor().rows() == 3);
    CHECK(diff.left_factor().cols() == 2);
    CHECK(diff.right_factor() == diff.left_factor().transpose());
    const auto ann = diff.structural_left_annihilator();
    REQUIRE(ann.has_value());
    CHECK((ann->transpose() * diff.left_factor()).isZero(1e-12));

    const CouplingSpec out = CouplingSpec::directed_out(Graph::star(3));
    CHECK_FALSE(out.structural_left_annihilator().has_value());
    // Measurement side still annihilates the ones vector.
    CHECK((out.right_factor() * Eigen::VectorXd::Ones(3)).isZero(1e-12));

    const CouplingSpec in = CouplingSpec::directed_in(Graph::star(3));
    const auto ann_in = in.structural_left_annihilator();
    REQUIRE(ann_in.has_value());
    CHECK((ann_in->transpose() * in.left_factor()).isZero(1e-12));

    Eigen::MatrixXd f(2, 3); // rows sum to zero: kernel contains ones
    f << 1.0, -1.0, 0.0, 0.0, 1.0, -1.0;
    const CouplingSpec cust = CouplingSpec::custom_symmetric(f);
    CHECK(cust.num_agents() == 3);
    CHECK(cust.num_edges() == 2);
    const auto ann_c = cust.structural_left_annihilator();
    REQUIRE(ann_c.has_value());
    CHECK((ann_c->transpose() * cust.left_factor()).isZero(1e-10));
}
