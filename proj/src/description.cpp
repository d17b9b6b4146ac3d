#include "diffstab/description.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace diffstab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ValidationError("at " + path + ": " + msg);
}

const json& require_field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) {
        fail(path, "expected an object");
    }
    if (!j.contains(key)) {
        fail(path, std::string("missing required field \"") + key + "\"");
    }
    return j.at(key);
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        fail(path, "expected a number");
    }
    return j.get<double>();
}

int as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        fail(path, "expected an integer");
    }
    return j.get<int>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) {
        fail(path, "expected an array of numbers");
    }
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = as_number(j[i], path + "/" + std::to_string(i));
    }
    return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        fail(path, "expected a non-empty array of rows");
    }
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) {
        fail(path + "/0", "expected a non-empty row");
    }
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string row_path = path + "/" + std::to_string(i);
        if (!j[i].is_array() || j[i].size() != cols) {
            fail(row_path, "rows must be arrays of equal length");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                as_number(j[i][k], row_path + "/" + std::to_string(k));
        }
    }
    return m;
}

RationalFunction as_rational(const json& j, const std::string& path) {
    const Eigen::VectorXd num = as_vector(require_field(j, "num", path), path + "/num");
    const Eigen::VectorXd den = as_vector(require_field(j, "den", path), path + "/den");
    Polynomial d{Eigen::VectorXd(den)};
    if (d.is_zero()) {
        fail(path + "/den", "denominator must not be the zero polynomial");
    }
    return RationalFunction(Polynomial(Eigen::VectorXd(num)), std::move(d));
}

RationalMatrix as_tf_grid(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        fail(path, "expected a non-empty grid of {num, den} entries");
    }
    const std::size_t cols = j[0].size();
    RationalMatrix g(static_cast<int>(j.size()), static_cast<int>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string row_path = path + "/" + std::to_string(i);
        if (!j[i].is_array() || j[i].size() != cols) {
            fail(row_path, "grid rows must have equal length");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            g(static_cast<int>(i), static_cast<int>(k)) =
                as_rational(j[i][k], row_path + "/" + std::to_string(k));
        }
    }
    return g;
}

StateSpace as_state_space(const json& j, const std::string& path) {
    const Eigen::MatrixXd a = as_matrix(require_field(j, "A", path), path + "/A");
    const Eigen::MatrixXd b = as_matrix(require_field(j, "B", path), path + "/B");
    const Eigen::MatrixXd c = as_matrix(require_field(j, "C", path), path + "/C");
    const Eigen::MatrixXd d = as_matrix(require_field(j, "D", path), path + "/D");
    try {
        return StateSpace(a, b, c, d);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

AgentSpec as_agent_spec(const json& j, const std::string& path) {
    AgentSpec spec;
    if (j.contains("tf")) {
        spec.tf = as_tf_grid(j.at("tf"), path + "/tf");
    } else if (j.contains("ss")) {
        spec.ss = as_state_space(j.at("ss"), path + "/ss");
    } else {
        fail(path, "expected either \"tf\" or \"ss\"");
    }
    return spec;
}

Scenario as_scenario(const json& j, const std::string& path) {
    Scenario sc;
    const json& x0 = require_field(j, "x0", path);
    if (!x0.is_array()) {
        fail(path + "/x0", "expected one initial-state entry per agent");
    }
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const std::string ip = path + "/x0/" + std::to_string(i);
        if (x0[i].is_number()) {
            sc.initial_states.push_back(Eigen::VectorXd::Constant(1, x0[i].get<double>()));
        } else {
            sc.initial_states.push_back(as_vector(x0[i], ip));
        }
    }
    sc.t_final = as_number(require_field(j, "t_final", path), path + "/t_final");
    sc.dt = as_number(require_field(j, "dt", path), path + "/dt");
    if (j.contains("disturbances")) {
        const json& list = j.at("disturbances");
        if (!list.is_array()) {
            fail(path + "/disturbances", "expected an array");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string dp = path + "/disturbances/" + std::to_string(i);
            Disturbance d;
            d.target_agent = as_integer(require_field(list[i], "target", dp), dp + "/target");
            const std::string channel =
                require_field(list[i], "channel", dp).get<std::string>();
            if (channel == "du") {
                d.channel = Disturbance::Channel::LoadInput;
            } else if (channel == "dy") {
                d.channel = Disturbance::Channel::MeasuredOutput;
            } else {
                fail(dp + "/channel", "expected \"du\" or \"dy\"");
            }
            const json& sig = require_field(list[i], "signal", dp);
            const std::string type = require_field(sig, "type", dp + "/signal").get<std::string>();
            if (type == "step") {
                StepSignal step;
                step.onset =
                    as_number(require_field(sig, "onset", dp + "/signal"), dp + "/signal/onset");
                step.amplitude = as_number(require_field(sig, "amplitude", dp + "/signal"),
                                           dp + "/signal/amplitude");
                d.step = step;
            } else if (type != "zero") {
                fail(dp + "/signal/type", "expected \"step\" or \"zero\"");
            }
            sc.disturbances.push_back(std::move(d));
        }
    }
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return sc;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            row.push_back(m(i, k));
        }
        out.push_back(std::move(row));
    }
    return out;
}

json complex_to_json(const Complex& c) {
    return json::array({c.real(), c.imag()});
}

json agent_spec_to_json(const AgentSpec& spec) {
    json j;
    if (spec.tf) {
        json grid = json::array();
        for (int i = 0; i < spec.tf->rows(); ++i) {
            json row = json::array();
            for (int k = 0; k < spec.tf->cols(); ++k) {
                const RationalFunction& f = (*spec.tf)(i, k);
                json entry;
                entry["num"] = vector_to_json(f.num().is_zero()
                                                  ? Eigen::VectorXd::Zero(1).eval()
                                                  : f.num().coeffs());
                entry["den"] = vector_to_json(f.den().coeffs());
                row.push_back(std::move(entry));
            }
            grid.push_back(std::move(row));
        }
        j["tf"] = std::move(grid);
    } else if (spec.ss) {
        j["ss"] = {{"A", matrix_to_json(spec.ss->A)},
                   {"B", matrix_to_json(spec.ss->B)},
                   {"C", matrix_to_json(spec.ss->C)},
                   {"D", matrix_to_json(spec.ss->D)}};
    }
    return j;
}

std::string complex_to_string(const Complex& c) {
    std::ostringstream os;
    const double re = std::abs(c.real()) < 5e-10 ? 0.0 : c.real();
    os << re;
    if (std::abs(c.imag()) > 5e-10) {
        os << (c.imag() > 0 ? " + " : " - ") << std::abs(c.imag()) << "i";
    }
    return os.str();
}

std::string direction_to_string(const Eigen::VectorXcd& v) {
    std::ostringstream os;
    os << "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) {
            os << ", ";
        }
        os << complex_to_string(v(i));
    }
    os << "]";
    return os.str();
}

json direction_to_json(const Eigen::VectorXcd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(complex_to_json(v(i)));
    }
    return out;
}

} // namespace

RationalMatrix AgentSpec::transfer(double tol, const std::string& label) const {
    if (tf) {
        if (!tf->is_proper()) {
            throw ValidationError(label + ": transfer function must be proper");
        }
        return *tf;
    }
    // Raw realizations must not hide unstabilizable or undetectable
    // unstable modes behind the conversion to a transfer function.
    for (const auto& [lambda, mult] : unstable_modes(*ss)) {
        if (pbh_uncontrollable(ss->A, ss->B, lambda, tol).first) {
            throw AssumptionError(label + ": unstabilizable mode at s = " +
                                  complex_to_string(lambda));
        }
        if (pbh_unobservable(ss->A, ss->C, lambda, tol).first) {
            throw AssumptionError(label + ": undetectable mode at s = " +
                                  complex_to_string(lambda));
        }
    }
    StateSpace copy = *ss;
    copy.tol = tol;
    return transfer_function(copy);
}

CouplingSpec SystemDescription::coupling() const {
    switch (coupling_kind) {
    case CouplingSpec::Kind::Incidence:
        return CouplingSpec::diffusive(graph);
    case CouplingSpec::Kind::CustomSymmetric:
        return CouplingSpec::custom_symmetric(coupling_matrix);
    case CouplingSpec::Kind::DirectedOut:
        return CouplingSpec::directed_out(graph);
    case CouplingSpec::Kind::DirectedIn:
        return CouplingSpec::directed_in(graph);
    }
    throw std::logic_error("SystemDescription: unknown coupling kind");
}

AgentSet SystemDescription::agent_set(double tol) const {
    std::vector<RationalMatrix> list;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        list.push_back(agents[i].transfer(tol, "agent " + std::to_string(i + 1)));
    }
    try {
        return AgentSet(std::move(list));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("at /agents: ") + e.what());
    }
}

EdgeControllerSet SystemDescription::controller_set(double tol) const {
    const int edges = coupling().num_edges();
    if (consensus_controllers) {
        const int m = agents.empty() ? 1 : agent_set(tol).inputs;
        return EdgeControllerSet::consensus(edges, m);
    }
    std::vector<RationalMatrix> list;
    for (std::size_t i = 0; i < edge_controllers.size(); ++i) {
        list.push_back(
            edge_controllers[i].transfer(tol, "edge controller " + std::to_string(i + 1)));
    }
    try {
        EdgeControllerSet set(std::move(list));
        if (set.size() != edges) {
            throw ValidationError("at /edge_controllers: expected one controller per edge (" +
                                  std::to_string(edges) + ")");
        }
        return set;
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("at /edge_controllers: ") + e.what());
    }
}

SystemDescription parse_description(const json& j) {
    SystemDescription d;
    const json& order = require_field(j, "order", "/");
    if (!order.is_string() || order.get<std::string>() != "asc") {
        fail("/order", "coefficient order must be declared as \"asc\" (ascending powers of s)");
    }

    const json& agents = require_field(j, "agents", "/");
    if (!agents.is_array() || agents.empty()) {
        fail("/agents", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
        d.agents.push_back(as_agent_spec(agents[i], "/agents/" + std::to_string(i)));
    }

    const json& graph = require_field(j, "graph", "/");
    const int nv = as_integer(require_field(graph, "num_vertices", "/graph"),
                              "/graph/num_vertices");
    std::vector<std::pair<int, int>> edges;
    const json& edge_list = require_field(graph, "edges", "/graph");
    if (!edge_list.is_array()) {
        fail("/graph/edges", "expected an array of [head, tail] pairs");
    }
    for (std::size_t i = 0; i < edge_list.size(); ++i) {
        const std::string ep = "/graph/edges/" + std::to_string(i);
        if (!edge_list[i].is_array() || edge_list[i].size() != 2) {
            fail(ep, "expected a [head, tail] pair");
        }
        edges.emplace_back(as_integer(edge_list[i][0], ep + "/0"),
                           as_integer(edge_list[i][1], ep + "/1"));
    }
    try {
        d.graph = Graph(nv, std::move(edges));
    } catch (const std::invalid_argument& e) {
        fail("/graph", e.what());
    }
    if (nv != static_cast<int>(d.agents.size())) {
        fail("/graph/num_vertices", "must equal the number of agents");
    }

    if (j.contains("coupling")) {
        const json& coupling = j.at("coupling");
        const std::string kind =
            require_field(coupling, "kind", "/coupling").get<std::string>();
        if (kind == "incidence") {
            d.coupling_kind = CouplingSpec::Kind::Incidence;
        } else if (kind == "custom") {
            d.coupling_kind = CouplingSpec::Kind::CustomSymmetric;
            d.coupling_matrix =
                as_matrix(require_field(coupling, "matrix", "/coupling"), "/coupling/matrix");
            if (d.coupling_matrix.cols() != static_cast<int>(d.agents.size())) {
                fail("/coupling/matrix", "column count must equal the number of agents");
            }
        } else if (kind == "directed_out") {
            d.coupling_kind = CouplingSpec::Kind::DirectedOut;
        } else if (kind == "directed_in") {
            d.coupling_kind = CouplingSpec::Kind::DirectedIn;
        } else {
            fail("/coupling/kind",
                 "expected incidence | custom | directed_out | directed_in");
        }
    }

    if (j.contains("edge_controllers")) {
        const json& ec = j.at("edge_controllers");
        if (ec.is_string()) {
            if (ec.get<std::string>() != "consensus") {
                fail("/edge_controllers", "the only shorthand is \"consensus\" (K_e = -I)");
            }
            d.consensus_controllers = true;
        } else if (ec.is_array()) {
            for (std::size_t i = 0; i < ec.size(); ++i) {
                d.edge_controllers.push_back(
                    as_agent_spec(ec[i], "/edge_controllers/" + std::to_string(i)));
            }
        } else {
            fail("/edge_controllers", "expected \"consensus\" or an array of controllers");
        }
    }

    if (j.contains("scenario")) {
        d.scenario = as_scenario(j.at("scenario"), "/scenario");
        if (d.scenario->initial_states.size() != d.agents.size()) {
            fail("/scenario/x0", "expected one initial-state entry per agent");
        }
    }

    if (j.contains("tolerances")) {
        const json& tols = j.at("tolerances");
        if (tols.contains("rank")) {
            d.tolerance = as_number(tols.at("rank"), "/tolerances/rank");
            if (*d.tolerance <= 0.0 || *d.tolerance >= 1.0) {
                fail("/tolerances/rank", "expected a value in (0, 1)");
            }
        }
    }
    return d;
}

SystemDescription load_description(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open description file: " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return parse_description(j);
}

json description_to_json(const SystemDescription& d) {
    json j;
    j["order"] = "asc";
    json agents = json::array();
    for (const AgentSpec& a : d.agents) {
        agents.push_back(agent_spec_to_json(a));
    }
    j["agents"] = std::move(agents);
    json edges = json::array();
    for (const auto& [head, tail] : d.graph.edges) {
        edges.push_back(json::array({head, tail}));
    }
    j["graph"] = {{"num_vertices", d.graph.num_vertices}, {"edges", std::move(edges)}};
    switch (d.coupling_kind) {
    case CouplingSpec::Kind::Incidence:
        j["coupling"] = {{"kind", "incidence"}};
        break;
    case CouplingSpec::Kind::CustomSymmetric:
        j["coupling"] = {{"kind", "custom"}, {"matrix", matrix_to_json(d.coupling_matrix)}};
        break;
    case CouplingSpec::Kind::DirectedOut:
        j["coupling"] = {{"kind", "directed_out"}};
        break;
    case CouplingSpec::Kind::DirectedIn:
        j["coupling"] = {{"kind", "directed_in"}};
        break;
    }
    if (d.consensus_controllers) {
        j["edge_controllers"] = "consensus";
    } else if (!d.edge_controllers.empty()) {
        json list = json::array();
        for (const AgentSpec& c : d.edge_controllers) {
            list.push_back(agent_spec_to_json(c));
        }
        j["edge_controllers"] = std::move(list);
    }
    if (d.scenario) {
        json sc;
        json x0 = json::array();
        for (const Eigen::VectorXd& x : d.scenario->initial_states) {
            x0.push_back(vector_to_json(x));
        }
        sc["x0"] = std::move(x0);
        sc["t_final"] = d.scenario->t_final;
        sc["dt"] = d.scenario->dt;
        json dists = json::array();
        for (const Disturbance& dist : d.scenario->disturbances) {
            json dd;
            dd["target"] = dist.target_agent;
            dd["channel"] =
                dist.channel == Disturbance::Channel::LoadInput ? "du" : "dy";
            if (dist.step) {
                dd["signal"] = {{"type", "step"},
                                {"onset", dist.step->onset},
                                {"amplitude", dist.step->amplitude}};
            } else {
                dd["signal"] = {{"type", "zero"}};
            }
            dists.push_back(std::move(dd));
        }
        if (!dists.empty()) {
            sc["disturbances"] = std::move(dists);
        }
        j["scenario"] = std::move(sc);
    }
    if (d.tolerance) {
        j["tolerances"] = {{"rank", *d.tolerance}};
    }
    return j;
}

namespace {

AgentSpec tf_agent(const RationalMatrix& g) {
    AgentSpec spec;
    spec.tf = g;
    return spec;
}

RationalFunction integrator_entry() {
    return RationalFunction(Polynomial::one(), Polynomial{0.0, 1.0});
}

} // namespace

SystemDescription preset_description(const std::string& name) {
    SystemDescription d;
    if (name == "fig1") {
        RationalMatrix integ(1, 1);
        integ(0, 0) = integrator_entry();
        for (int i = 0; i < 4; ++i) {
            d.agents.push_back(tf_agent(integ));
        }
        d.graph = Graph::path(4);
        d.consensus_controllers = true;
        Scenario sc;
        for (double v : {1.0, 2.0, 3.0, 4.0}) {
            sc.initial_states.push_back(Eigen::VectorXd::Constant(1, v));
        }
        sc.t_final = 30.0;
        sc.dt = 0.01;
        Disturbance dist;
        dist.target_agent = 1;
        dist.channel = Disturbance::Channel::LoadInput;
        dist.step = StepSignal{15.0, 1.0};
        sc.disturbances.push_back(dist);
        d.scenario = sc;
        return d;
    }
    if (name == "example-ab") {
        const double alpha = 1.0, beta = 2.0;
        RationalMatrix p1(2, 2), p2(2, 2);
        p1(0, 0) = integrator_entry();
        p1(1, 1) = RationalFunction(1.0);
        p2(0, 0) = integrator_entry();
        p2(0, 1) = integrator_entry() * beta;
        p2(1, 0) = integrator_entry() * alpha;
        p2(1, 1) = integrator_entry() * (alpha * beta);
        d.agents = {tf_agent(p1), tf_agent(p2)};
        d.graph = Graph(2, {{1, 2}});
        Eigen::MatrixXd ke(2, 2);
        ke << (alpha - beta) * beta, -alpha, beta, 0.0;
        d.edge_controllers = {tf_agent(RationalMatrix(ke))};
        return d;
    }
    if (name == "example2" || name == "example2-controller") {
        const RationalFunction lead(Polynomial{0.0, 1.0}, Polynomial{1.0, 1.0});
        RationalMatrix p1(2, 2), p2(2, 2);
        p1(0, 0) = lead;
        p1(1, 0) = integrator_entry();
        p1(1, 1) = RationalFunction(1.0);
        p2(0, 0) = integrator_entry();
        p2(1, 0) = RationalFunction(1.0);
        p2(1, 1) = lead;
        d.agents = {tf_agent(p1), tf_agent(p2)};
        d.graph = Graph(2, {{1, 2}});
        if (name == "example2-controller") {
            RationalMatrix ke(2, 2);
            ke(0, 0) = RationalFunction(-1.0 / 3.0);
            ke(1, 1) = RationalFunction(Polynomial{-2.0 / 3.0}, Polynomial{0.0, 1.0});
            d.edge_controllers = {tf_agent(ke)};
        }
        return d;
    }
    if (name == "cancellation-static") {
        RationalMatrix integ(1, 1);
        integ(0, 0) = integrator_entry();
        d.agents = {tf_agent(integ), tf_agent(integ)};
        d.graph = Graph(2, {{1, 2}});
        d.edge_controllers = {tf_agent(RationalMatrix(Eigen::MatrixXd::Ones(1, 1)))};
        return d;
    }
    throw ValidationError("unknown preset: " + name + " (available: fig1, example-ab, "
                          "example2, example2-controller, cancellation-static)");
}

std::vector<std::string> preset_names() {
    return {"fig1", "example-ab", "example2", "example2-controller", "cancellation-static"};
}

AnalysisReport analyze_description(const SystemDescription& d, double tol) {
    AnalysisReport report;
    const AgentSet agents = d.agent_set(tol);
    StabilizabilityVerdict verdict;
    try {
        verdict = stabilizability_obstruction(agents, tol);
    } catch (const std::domain_error& e) {
        throw AssumptionError(e.what());
    }
    report.verdict = verdict;

    std::ostringstream text;
    json machine;
    machine["schema"] = 1;
    machine["tolerance"] = tol;

    text << "== Stabilizability by diffusive coupling ==\n";
    json jverdict;
    switch (verdict.decision) {
    case Stabilizability::Obstructed: {
        text << "verdict: NOT diffusively stabilizable\n";
        jverdict["decision"] = "obstructed";
        const BlockingCertificate& cert = *verdict.blocking;
        text << "blocking frequency: lambda = " << complex_to_string(cert.lambda) << "\n";
        json branches;
        if (cert.input_branch) {
            text << "shared input directions (right-denominator kernel), certificate v = "
                 << direction_to_string(cert.input_branch->direction)
                 << ", kernel residual " << cert.input_branch->kernel_residual << "\n";
            branches["input"] = {
                {"direction", direction_to_json(cert.input_branch->direction)},
                {"kernel_residual", cert.input_branch->kernel_residual},
                {"intersection_dim", cert.input_branch->intersection.dim()}};
        }
        if (cert.output_branch) {
            text << "shared output directions (left-denominator kernel), certificate v = "
                 << direction_to_string(cert.output_branch->direction)
                 << ", kernel residual " << cert.output_branch->kernel_residual << "\n";
            branches["output"] = {
                {"direction", direction_to_json(cert.output_branch->direction)},
                {"kernel_residual", cert.output_branch->kernel_residual},
                {"intersection_dim", cert.output_branch->intersection.dim()}};
        }
        jverdict["blocking"] = {{"lambda", complex_to_json(cert.lambda)},
                                {"branches", std::move(branches)}};
        break;
    }
    case Stabilizability::NoObstructionFound:
        text << "verdict: no obstruction found (not a stabilizability guarantee)\n";
        jverdict["decision"] = "no_obstruction_found";
        break;
    case Stabilizability::Stabilizable:
        text << "verdict: stabilizable (all agents stable; the zero edge controller "
                "suffices)\n";
        jverdict["decision"] = "stabilizable";
        break;
    }
    jverdict["stabilizable_by_diffusive"] = verdict.stabilizable_by_diffusive();
    if (!verdict.cleared_candidates.empty()) {
        json cleared = json::array();
        text << "examined and cleared: ";
        for (std::size_t i = 0; i < verdict.cleared_candidates.size(); ++i) {
            if (i > 0) {
                text << ", ";
            }
            text << complex_to_string(verdict.cleared_candidates[i]);
            cleared.push_back(complex_to_json(verdict.cleared_candidates[i]));
        }
        text << "\n";
        jverdict["cleared_candidates"] = std::move(cleared);
    }
    machine["verdict"] = std::move(jverdict);

    text << "\n== Agents ==\n";
    json jagents = json::array();
    for (int i = 0; i < agents.size(); ++i) {
        const StateSpace s = realize(agents.agents[static_cast<std::size_t>(i)], tol);
        json ja;
        ja["index"] = i + 1;
        ja["mcmillan_degree"] = s.states();
        text << "agent " << (i + 1) << ": McMillan degree " << s.states();
        json jpoles = json::array();
        std::ostringstream pole_text;
        for (const PoleRecord& rec : poles(s)) {
            if (rec.lambda.real() < -kAxisMargin) {
                continue;
            }
            jpoles.push_back({{"lambda", complex_to_json(rec.lambda)},
                              {"multiplicity", rec.multiplicity},
                              {"in_dirs_dim", rec.in_dirs.dim()},
                              {"out_dirs_dim", rec.out_dirs.dim()}});
            pole_text << " " << complex_to_string(rec.lambda) << " (mult "
                      << rec.multiplicity << ", in-dim " << rec.in_dirs.dim()
                      << ", out-dim " << rec.out_dirs.dim() << ")";
        }
        ja["closed_rhp_poles"] = std::move(jpoles);
        if (pole_text.str().empty()) {
            text << "; stable\n";
        } else {
            text << "; closed-RHP poles:" << pole_text.str() << "\n";
        }
        jagents.push_back(std::move(ja));
    }
    machine["agents"] = std::move(jagents);

    if (d.has_controllers()) {
        const RationalMatrix k = assemble_controller(d.coupling(), d.controller_set(tol), tol);
        const RationalMatrix aggregate = agents.aggregate();
        const ClosedLoop cl = closed_loop(aggregate, k, tol);
        const auto [stable, blocks] = internal_stability(cl);
        report.internally_stable = stable;
        text << "\n== Internal stability ==\n";
        json jblocks = json::array();
        for (const BlockStability& b : blocks) {
            text << b.block << ": ";
            json jb;
            jb["name"] = b.block;
            json jpoles = json::array();
            if (b.unstable_poles.empty()) {
                text << "stable\n";
            } else {
                text << "UNSTABLE, closed-RHP poles:";
                for (const Complex& ev : b.unstable_poles) {
                    text << " " << complex_to_string(ev);
                    jpoles.push_back(complex_to_json(ev));
                }
                text << "\n";
            }
            jb["unstable_poles"] = std::move(jpoles);
            jblocks.push_back(std::move(jb));
        }
        text << "verdict: " << (stable ? "internally stable" : "internally UNSTABLE") << "\n";
        machine["internal_stability"] = {{"stable", stable}, {"blocks", std::move(jblocks)}};

        json jcanc = json::array();
        std::vector<Complex> rhp;
        for (const PoleRecord& rec : poles(realize(aggregate, tol))) {
            if (rec.lambda.real() >= -kAxisMargin) {
                rhp.push_back(rec.lambda);
            }
        }
        if (!rhp.empty()) {
            text << "\n== Cascade cancellations at plant poles ==\n";
        }
        for (const Complex& lambda : rhp) {
            const CancellationReport rep = cancellation_check(aggregate, k, lambda, tol);
            text << "lambda = " << complex_to_string(lambda) << ": canceled in PK: "
                 << (rep.canceled_in_pk ? "yes" : "no")
                 << "; canceled in KP: " << (rep.canceled_in_kp ? "yes" : "no")
                 << "; cascade degree deficit " << rep.degree_deficit << "\n";
            jcanc.push_back({{"lambda", complex_to_json(lambda)},
                             {"canceled_in_pk", rep.canceled_in_pk},
                             {"canceled_in_kp", rep.canceled_in_kp},
                             {"degree_deficit", rep.degree_deficit},
                             {"pbh_witness_dim", rep.pbh_left_null.dim()}});
        }
        machine["cancellations"] = std::move(jcanc);
    }

    report.machine = std::move(machine);
    report.text = text.str();
    return report;
}

FactorizationReport factorize_description(const SystemDescription& d, int agent_index,
                                          std::optional<Complex> eval_at, double tol) {
    if (agent_index < 1 || agent_index > static_cast<int>(d.agents.size())) {
        throw ValidationError("--agent index out of range (1.." +
                              std::to_string(d.agents.size()) + ")");
    }
    const RationalMatrix g = d.agents[static_cast<std::size_t>(agent_index - 1)].transfer(
        tol, "agent " + std::to_string(agent_index));
    CoprimeFactors f;
    try {
        f = factorize(realize(g, tol), tol);
    } catch (const std::domain_error& e) {
        throw AssumptionError("agent " + std::to_string(agent_index) + ": " + e.what());
    }

    const double bez = bezout_residual(f, 100);
    const double rec = reconstruction_residual(f);
    std::ostringstream text;
    json machine;
    machine["schema"] = 1;
    machine["agent"] = agent_index;

    const Eigen::IOFormat fmt(Eigen::StreamPrecision, 0, ", ", "; ", "", "", "[", "]");
    auto describe = [&](const char* name, const StateSpace& s) {
        text << name << ": states " << s.states();
        if (s.states() > 0) {
            text << ", A = " << s.A.format(fmt) << ", B = " << s.B.format(fmt)
                 << ", C = " << s.C.format(fmt);
        }
        text << ", D = " << s.D.format(fmt) << "\n";
        machine["factors"][name] = {{"A", matrix_to_json(s.A)},
                                    {"B", matrix_to_json(s.B)},
                                    {"C", matrix_to_json(s.C)},
                                    {"D", matrix_to_json(s.D)}};
    };
    text << "== Doubly-coprime factorization of agent " << agent_index << " ==\n";
    describe("M", f.M);
    describe("N", f.N);
    describe("M_tilde", f.M_tilde);
    describe("N_tilde", f.N_tilde);
    text << "Bezout residual over 100-point axis grid: " << bez << "\n";
    text << "reconstruction residual: " << rec << "\n";
    machine["bezout_residual"] = bez;
    machine["reconstruction_residual"] = rec;

    if (eval_at) {
        const Eigen::MatrixXcd m = f.M.eval(*eval_at);
        const Eigen::MatrixXcd mt = f.M_tilde.eval(*eval_at);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd_m(m);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd_mt(mt);
        const double smin_m = svd_m.singularValues().minCoeff();
        const double smin_mt = svd_mt.singularValues().minCoeff();
        text << "at lambda = " << complex_to_string(*eval_at) << ": sigma_min(M) = " << smin_m
             << (smin_m < 1e-6 ? " (singular)" : "") << ", sigma_min(M_tilde) = " << smin_mt
             << (smin_mt < 1e-6 ? " (singular)" : "") << "\n";
        machine["evaluation"] = {{"lambda", complex_to_json(*eval_at)},
                                 {"sigma_min_M", smin_m},
                                 {"sigma_min_M_tilde", smin_mt}};
    }

    FactorizationReport out;
    out.machine = std::move(machine);
    out.text = text.str();
    return out;
}

} // namespace diffstab
