#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

// Interaction graphs, incidence matrices, and the coupling structures that
// sandwich the edge controllers. Incidence-type matrices are integer valued
// and promoted to floating point at the algebra boundary.

namespace diffstab {

/// Simple digraph with 1-based vertex ids; parallel edges are allowed,
/// self-loops are not.
struct Graph {
    int num_vertices = 0;
    std::vector<std::pair<int, int>> edges; // (head, tail)

    Graph() = default;
    Graph(int vertices, std::vector<std::pair<int, int>> edge_list);

    int edge_count() const { return static_cast<int>(edges.size()); }

    static Graph path(int vertices);
    static Graph star(int vertices); // last vertex is the center
    static Graph cycle(int vertices);
};

/// Oriented incidence matrix (vertices x edges): +1 at the head, -1 at the
/// tail of each edge. Columns sum to zero.
Eigen::MatrixXi incidence(const Graph& g);

/// Head selector (vertices x edges): 1 where the vertex heads the edge.
Eigen::MatrixXi b_out(const Graph& g);

/// Tail selector; satisfies b_out - b_in == incidence.
Eigen::MatrixXi b_in(const Graph& g);

/// No cycles in the undirected shadow (union-find).
bool is_forest(const Graph& g);

/// Undirected connectivity.
bool is_connected(const Graph& g);

/// How the edge controllers couple to the agents: the assembled controller
/// is (left x I_m) diag{K_e} (right x I_p).
struct CouplingSpec {
    enum class Kind { Incidence, CustomSymmetric, DirectedOut, DirectedIn };

    Kind kind = Kind::Incidence;
    Graph graph;
    // For CustomSymmetric: the measurement-side matrix (edges x vertices)
    // replacing the transposed incidence matrix.
    Eigen::MatrixXd custom;

    static CouplingSpec diffusive(Graph g);
    static CouplingSpec custom_symmetric(Eigen::MatrixXd f);
    static CouplingSpec directed_out(Graph g);
    static CouplingSpec directed_in(Graph g);

    int num_agents() const;
    int num_edges() const;
    Eigen::MatrixXd left_factor() const;  // agents x edges
    Eigen::MatrixXd right_factor() const; // edges x agents
    /// Nonzero w with w^T (left factor) = 0 when the structure guarantees
    /// one (the ones vector for incidence coupling, a kernel vector for
    /// custom coupling). Directed-out coupling has none.
    std::optional<Eigen::VectorXd> structural_left_annihilator(double tol = 1e-10) const;
};

} // namespace diffstab
