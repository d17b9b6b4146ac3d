#include "diffstab/graphnet.hpp"

#include "diffstab/linalg.hpp"

#include <numeric>
#include <stdexcept>

namespace diffstab {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            x = parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        }
        return x;
    }
    // Returns false when x and y were already connected.
    bool unite(int x, int y) {
        const int rx = find(x), ry = find(y);
        if (rx == ry) {
            return false;
        }
        parent[static_cast<std::size_t>(rx)] = ry;
        return true;
    }
};

} // namespace

Graph::Graph(int vertices, std::vector<std::pair<int, int>> edge_list)
    : num_vertices(vertices), edges(std::move(edge_list)) {
    if (vertices < 1) {
        throw std::invalid_argument("Graph: at least one vertex required");
    }
    for (const auto& [head, tail] : edges) {
        if (head < 1 || head > vertices || tail < 1 || tail > vertices) {
            throw std::invalid_argument("Graph: vertex id out of range");
        }
        if (head == tail) {
            throw std::invalid_argument("Graph: self-loops are not allowed");
        }
    }
}

Graph Graph::path(int vertices) {
    std::vector<std::pair<int, int>> e;
    for (int i = 1; i < vertices; ++i) {
        e.emplace_back(i, i + 1);
    }
    return Graph(vertices, std::move(e));
}

Graph Graph::star(int vertices) {
    std::vector<std::pair<int, int>> e;
    for (int i = 1; i < vertices; ++i) {
        e.emplace_back(i, vertices);
    }
    return Graph(vertices, std::move(e));
}

Graph Graph::cycle(int vertices) {
    std::vector<std::pair<int, int>> e;
    for (int i = 1; i < vertices; ++i) {
        e.emplace_back(i, i + 1);
    }
    e.emplace_back(vertices, 1);
    return Graph(vertices, std::move(e));
}

Eigen::MatrixXi incidence(const Graph& g) {
    Eigen::MatrixXi e = Eigen::MatrixXi::Zero(g.num_vertices, g.edge_count());
    for (int j = 0; j < g.edge_count(); ++j) {
        e(g.edges[static_cast<std::size_t>(j)].first - 1, j) = 1;
        e(g.edges[static_cast<std::size_t>(j)].second - 1, j) = -1;
    }
    return e;
}

Eigen::MatrixXi b_out(const Graph& g) {
    Eigen::MatrixXi b = Eigen::MatrixXi::Zero(g.num_vertices, g.edge_count());
    for (int j = 0; j < g.edge_count(); ++j) {
        b(g.edges[static_cast<std::size_t>(j)].first - 1, j) = 1;
    }
    return b;
}

Eigen::MatrixXi b_in(const Graph& g) {
    Eigen::MatrixXi b = Eigen::MatrixXi::Zero(g.num_vertices, g.edge_count());
    for (int j = 0; j < g.edge_count(); ++j) {
        b(g.edges[static_cast<std::size_t>(j)].second - 1, j) = 1;
    }
    return b;
}

bool is_forest(const Graph& g) {
    UnionFind uf(g.num_vertices);
    for (const auto& [head, tail] : g.edges) {
        if (!uf.unite(head - 1, tail - 1)) {
            return false;
        }
    }
    return true;
}

bool is_connected(const Graph& g) {
    UnionFind uf(g.num_vertices);
    for (const auto& [head, tail] : g.edges) {
        uf.unite(head - 1, tail - 1);
    }
    const int root = uf.find(0);
    for (int v = 1; v < g.num_vertices; ++v) {
        if (uf.find(v) != root) {
            return false;
        }
    }
    return true;
}

CouplingSpec CouplingSpec::diffusive(Graph g) {
    CouplingSpec c;
    c.kind = Kind::Incidence;
    c.graph = std::move(g);
    return c;
}

CouplingSpec CouplingSpec::custom_symmetric(Eigen::MatrixXd f) {
    CouplingSpec c;
    c.kind = Kind::CustomSymmetric;
    c.custom = std::move(f);
    return c;
}

CouplingSpec CouplingSpec::directed_out(Graph g) {
    CouplingSpec c;
    c.kind = Kind::DirectedOut;
    c.graph = std::move(g);
    return c;
}

CouplingSpec CouplingSpec::directed_in(Graph g) {
    CouplingSpec c;
    c.kind = Kind::DirectedIn;
    c.graph = std::move(g);
    return c;
}

int CouplingSpec::num_agents() const {
    return kind == Kind::CustomSymmetric ? static_cast<int>(custom.cols()) : graph.num_vertices;
}

int CouplingSpec::num_edges() const {
    return kind == Kind::CustomSymmetric ? static_cast<int>(custom.rows()) : graph.edge_count();
}

Eigen::MatrixXd CouplingSpec::left_factor() const {
    switch (kind) {
    case Kind::Incidence:
        return incidence(graph).cast<double>();
    case Kind::CustomSymmetric:
        return custom.transpose();
    case Kind::DirectedOut:
        return b_out(graph).cast<double>();
    case Kind::DirectedIn:
        return incidence(graph).cast<double>();
    }
    throw std::logic_error("CouplingSpec: unknown kind");
}

Eigen::MatrixXd CouplingSpec::right_factor() const {
    switch (kind) {
    case Kind::Incidence:
        return incidence(graph).cast<double>().transpose();
    case Kind::CustomSymmetric:
        return custom;
    case Kind::DirectedOut:
        return incidence(graph).cast<double>().transpose();
    case Kind::DirectedIn:
        return b_in(graph).cast<double>().transpose();
    }
    throw std::logic_error("CouplingSpec: unknown kind");
}

std::optional<Eigen::VectorXd> CouplingSpec::structural_left_annihilator(double tol) const {
    switch (kind) {
    case Kind::Incidence:
    case Kind::DirectedIn:
        return Eigen::VectorXd::Ones(num_agents());
    case Kind::CustomSymmetric: {
        const Eigen::MatrixXd kernel =
            null_space<double>(custom, std::max(tol, kDefaultTol));
        if (kernel.cols() == 0) {
            return std::nullopt;
        }
        return Eigen::VectorXd(kernel.col(0));
    }
    case Kind::DirectedOut:
        return std::nullopt;
    }
    throw std::logic_error("CouplingSpec: unknown kind");
}

} // namespace diffstab
