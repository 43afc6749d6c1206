#include "msh2/problem.hpp"

#include "json.hpp"

#include <fstream>

namespace msh2 {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw std::invalid_argument(path + ": " + ex.what());
    }
    return j;
}

const json& field(const json& j, const std::string& name, const std::string& context) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw std::invalid_argument(context + ": missing field '" + name + "'");
    }
    return *it;
}

int int_field(const json& j, const std::string& name, const std::string& context) {
    const json& v = field(j, name, context);
    if (!v.is_number_integer()) {
        throw std::invalid_argument(context + "." + name + ": expected an integer");
    }
    return v.get<int>();
}

double num_field(const json& j, const std::string& name, const std::string& context) {
    const json& v = field(j, name, context);
    if (!v.is_number()) {
        throw std::invalid_argument(context + "." + name + ": expected a number");
    }
    return v.get<double>();
}

Vector parse_vector(const json& v, Index size, const std::string& what) {
    if (!v.is_array() || static_cast<Index>(v.size()) != size) {
        throw std::invalid_argument(what + ": expected an array of length " +
                                    std::to_string(size));
    }
    Vector out(size);
    for (Index i = 0; i < size; ++i) {
        if (!v[static_cast<size_t>(i)].is_number()) {
            throw std::invalid_argument(what + ": non-numeric entry");
        }
        out(i) = v[static_cast<size_t>(i)].get<double>();
    }
    return out;
}

Matrix parse_matrix(const json& v, Index rows, Index cols, const std::string& what) {
    // row-major flat array with declared dimensions
    const Vector flat = parse_vector(v, rows * cols, what);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            out(i, j) = flat(i * cols + j);
        }
    }
    return out;
}

json dump_matrix(const Matrix& m) {
    json arr = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            arr.push_back(m(i, j));
        }
    }
    return arr;
}

Plant parse_plant(const json& j) {
    const json& p = field(j, "plant", "problem");
    const int n = int_field(p, "n", "plant");
    const int pp = int_field(p, "p", "plant");
    const int q = int_field(p, "q", "plant");
    if (n < 1 || pp < 1 || q < 1) {
        throw std::invalid_argument("plant: dimensions must be positive");
    }
    return Plant(parse_matrix(field(p, "A", "plant"), n, n, "plant.A"),
                 parse_vector(field(p, "B1", "plant"), n, "plant.B1"),
                 parse_vector(field(p, "B2", "plant"), n, "plant.B2"),
                 parse_matrix(field(p, "C1", "plant"), pp, n, "plant.C1"),
                 parse_matrix(field(p, "C2", "plant"), q, n, "plant.C2"),
                 parse_vector(field(p, "D", "plant"), pp, "plant.D"));
}

ChannelSpec parse_channel(const json& j) {
    const json& c = field(j, "noise", "problem");
    const std::string type = field(c, "type", "noise").get<std::string>();
    if (type == "delay") {
        const json& alpha = field(c, "alpha", "noise");
        if (!alpha.is_array() || alpha.empty()) {
            throw std::invalid_argument("noise.alpha: expected a nonempty array");
        }
        const Index m = static_cast<Index>(alpha.size());
        return DelayChannel{parse_vector(alpha, m, "noise.alpha"),
                            parse_vector(field(c, "p", "noise"), m, "noise.p")};
    }
    if (type == "erasure") {
        return ErasureChannel{num_field(c, "e", "noise")};
    }
    if (type == "custom") {
        const json& mu = field(c, "mu", "noise");
        if (!mu.is_array() || mu.empty()) {
            throw std::invalid_argument("noise.mu: expected a nonempty array");
        }
        const Index m = static_cast<Index>(mu.size());
        return NoiseModel(parse_vector(mu, m, "noise.mu"),
                          parse_matrix(field(c, "beta", "noise"), m, m, "noise.beta"));
    }
    throw std::invalid_argument("noise.type: expected 'delay', 'erasure' or 'custom'");
}

}  // namespace

ProblemFile load_problem(const std::string& path) {
    const json j = read_json(path);
    if (!j.is_object()) {
        throw std::invalid_argument(path + ": top-level JSON object expected");
    }

    ProblemFile pf(parse_plant(j));
    pf.channel = parse_channel(j);
    pf.sim.channel = pf.channel;

    if (j.contains("design")) {
        const std::string d = j["design"].get<std::string>();
        if (d == "output_feedback") {
            pf.design = FeedbackKind::Output;
        } else if (d == "state_feedback") {
            pf.design = FeedbackKind::State;
        } else {
            throw std::invalid_argument(
                "design: expected 'output_feedback' or 'state_feedback'");
        }
    }

    if (j.contains("sim")) {
        const json& s = j["sim"];
        pf.sim.runs = int_field(s, "runs", "sim");
        pf.sim.horizon = int_field(s, "horizon", "sim");
        pf.sim.burn_in = s.contains("burn_in") ? int_field(s, "burn_in", "sim") : 200;
        pf.sim.seed = s.contains("seed")
                          ? static_cast<std::uint64_t>(s["seed"].get<std::int64_t>())
                          : 1;
        if (pf.sim.runs < 1) {
            throw std::invalid_argument("sim.runs: must be >= 1");
        }
        if (pf.sim.burn_in < 0 || pf.sim.burn_in >= pf.sim.horizon) {
            throw std::invalid_argument("sim.burn_in: must lie in [0, horizon)");
        }
    }

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        SweepSpec spec;
        const std::string param = field(s, "param", "sweep").get<std::string>();
        if (param == "e") {
            spec.param = SweepSpec::Param::ErasureRate;
        } else if (param == "p") {
            spec.param = SweepSpec::Param::DelayMass;
        } else {
            throw std::invalid_argument("sweep.param: expected 'e' or 'p'");
        }
        const json& grid = field(s, "grid", "sweep");
        if (!grid.is_array() || grid.empty()) {
            throw std::invalid_argument("sweep.grid: expected a nonempty array");
        }
        for (const auto& g : grid) {
            if (!g.is_number()) {
                throw std::invalid_argument("sweep.grid: non-numeric entry");
            }
            spec.grid.push_back(g.get<double>());
        }
        if (spec.param == SweepSpec::Param::DelayMass) {
            const json& mv = field(s, "move", "sweep");
            spec.move_from = int_field(mv, "from", "sweep.move");
            spec.move_to = int_field(mv, "to", "sweep.move");
            const int m = channel_horizon(pf.channel) + 1;
            if (spec.move_from < 0 || spec.move_from >= m || spec.move_to < 0 ||
                spec.move_to >= m || spec.move_from == spec.move_to) {
                throw std::invalid_argument("sweep.move: indices out of range");
            }
        }
        pf.sweep = std::move(spec);
    }
    return pf;
}

void save_controller(const std::string& path, const Controller& controller,
                     const SynthesisResult& result) {
    json j;
    j["type"] = "controller";
    j["feedback"] = controller.reads_state ? "state" : "output";
    j["order"] = controller.K.order();
    j["inputs"] = controller.K.inputs();
    j["A"] = dump_matrix(controller.K.A);
    j["B"] = dump_matrix(controller.K.B);
    j["C"] = dump_matrix(controller.K.C);
    j["D"] = dump_matrix(controller.K.D);
    j["J_opt"] = result.J_opt;
    j["ms_margin"] = result.ms_margin;
    j["F"] = dump_matrix(result.F);
    if (result.L.size() > 0) {
        j["L"] = dump_matrix(result.L);
        j["L0"] = dump_matrix(result.L0);
    }
    j["X"] = dump_matrix(result.X);

    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot write file: " + path);
    }
    out << j.dump(2) << "\n";
}

Controller load_controller(const std::string& path) {
    const json j = read_json(path);
    if (!j.is_object() || j.value("type", "") != "controller") {
        throw std::invalid_argument(path + ": not a controller file");
    }
    const Index order = j.at("order").get<Index>();
    const Index inputs = j.at("inputs").get<Index>();
    const std::string fb = j.at("feedback").get<std::string>();
    StateSpace K(parse_matrix(j.at("A"), order, order, "controller.A"),
                 parse_matrix(j.at("B"), order, inputs, "controller.B"),
                 parse_matrix(j.at("C"), 1, order, "controller.C"),
                 parse_matrix(j.at("D"), 1, inputs, "controller.D"));
    return Controller{std::move(K), fb == "state"};
}

}  // namespace msh2
