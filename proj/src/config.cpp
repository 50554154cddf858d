#include "palab/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "palab/errors.hpp"

namespace palab {

namespace {

namespace pt = boost::property_tree;

double to_real(const std::string& text, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size()) throw ConfigError(key, "expected a number, got '" + text + "'");
    if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
    return v;
}

std::size_t to_count(const std::string& text, const std::string& key) {
    const double v = to_real(text, key);
    if (v < 0.0 || v != std::floor(v)) throw ConfigError(key, "expected a nonnegative integer, got '" + text + "'");
    return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

std::map<std::string, std::map<std::string, Setter>> setters() {
    auto real = [](double RunConfig::*f) -> Setter {
        return [f](RunConfig& c, const std::string& v, const std::string& k) { c.*f = to_real(v, k); };
    };
    auto range = [](ControlRange SolverConfig::*r, int field) -> Setter {
        return [r, field](RunConfig& c, const std::string& v, const std::string& k) {
            ControlRange& cr = c.solver.*r;
            if (field == 0) cr.lo = to_real(v, k);
            else if (field == 1) cr.hi = to_real(v, k);
            else cr.points = to_count(v, k);
        };
    };
    std::map<std::string, std::map<std::string, Setter>> s;

    auto& market = s["market"];
    market["b"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.market.b[0] = to_real(v, k); };
    market["sigma"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.market.sigma(0, 0) = to_real(v, k);
    };
    market["x0"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.market.x0 = to_real(v, k); };
    market["alpha"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.market.alpha[0] = to_real(v, k);
    };
    market["eta"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.market.eta = to_real(v, k); };
    market["c_lo"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.market.c_lo[0] = to_real(v, k); };
    market["c_hi"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.market.c_hi[0] = to_real(v, k); };

    auto& law = s["default"];
    law["family"] = [](RunConfig& c, const std::string& v, const std::string&) {
        c.default_law.family = default_family_from_string(v);
    };
    law["a"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.default_law.a = to_real(v, k); };
    law["b"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.default_law.b = to_real(v, k); };
    law["rate"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.default_law.rate = to_real(v, k); };
    law["horizon"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.default_law.horizon = to_real(v, k);
    };
    law["hazard_cap"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.default_law.hazard_cap = to_real(v, k);
    };

    auto& agent = s["agent"];
    agent["r"] = real(&RunConfig::R);
    agent["contract_class"] = [](RunConfig& c, const std::string& v, const std::string&) {
        c.contract_class = contract_class_from_string(v);
    };
    agent["p"] = real(&RunConfig::p);

    auto& grid = s["grid"];
    grid["nt"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.nt = to_count(v, k); };
    grid["nx"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.nx = to_count(v, k); };
    grid["ny"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.ny = to_count(v, k); };
    grid["x_min"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.x_min = to_real(v, k); };
    grid["x_max"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.x_max = to_real(v, k); };
    grid["y_min"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.y_min = to_real(v, k); };
    grid["y_max"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.grid.y_max = to_real(v, k); };

    auto& solver = s["solver"];
    solver["max_iter"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.max_iter = to_count(v, k);
    };
    solver["tol"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.solver.tol = to_real(v, k); };
    const std::pair<const char*, ControlRange SolverConfig::*> ranges[] = {
        {"z", &SolverConfig::z}, {"z_x", &SolverConfig::z_x}, {"g", &SolverConfig::g},
        {"g_x", &SolverConfig::g_x}, {"u", &SolverConfig::u}};
    for (const auto& [name, member] : ranges) {
        solver[std::string(name) + "_min"] = range(member, 0);
        solver[std::string(name) + "_max"] = range(member, 1);
        solver[std::string(name) + "_points"] = range(member, 2);
    }
    solver["refine_levels"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.refine_levels = to_count(v, k);
    };
    solver["refine_points"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.refine_points = to_count(v, k);
    };
    solver["u_refine_points"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.u_refine_points = to_count(v, k);
    };
    solver["shrink"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.solver.shrink = to_real(v, k); };
    solver["w_start"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.w_start = to_real(v, k);
    };
    solver["w_end"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.solver.w_end = to_real(v, k); };
    solver["ramp"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.solver.ramp = to_count(v, k); };
    solver["include_jumps"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.include_jumps = to_bool(v, k);
    };
    solver["residual_tol"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.residual_tol = to_real(v, k);
    };
    solver["cfl_safety"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.solver.cfl_safety = to_real(v, k);
    };

    auto& sim = s["sim"];
    sim["n_paths"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.sim.n_paths = to_count(v, k); };
    sim["dt"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.sim.dt = to_real(v, k); };
    sim["seed"] = [](RunConfig& c, const std::string& v, const std::string& k) { c.sim.seed = to_count(v, k); };
    sim["freeze_mode"] = [](RunConfig& c, const std::string& v, const std::string&) {
        c.sim.freeze_mode = freeze_mode_from_string(v);
    };
    sim["p_grid"] = [](RunConfig& c, const std::string& v, const std::string& k) {
        c.p_grid = parse_real_list(v, k);
    };

    s["output"]["dir"] = [](RunConfig& c, const std::string& v, const std::string&) { c.out_dir = v; };
    return s;
}

}  // namespace

DefaultModel DefaultSection::model() const {
    try {
        switch (family) {
            case DefaultFamily::Beta: return DefaultModel::beta(a, b, horizon, hazard_cap);
            case DefaultFamily::Uniform: return DefaultModel::uniform(horizon, hazard_cap);
            case DefaultFamily::Exponential: return DefaultModel::exponential(rate, horizon, hazard_cap);
            case DefaultFamily::None: return DefaultModel::none(horizon);
        }
    } catch (const DomainError& e) {
        throw ConfigError("default", e.what());
    }
    throw ConfigError("family", "unknown default family");
}

void RunConfig::validate() const {
    try {
        market.validate();
    } catch (const Error& e) {
        throw ConfigError("market", e.what());
    }
    const DefaultModel m = default_law.model();
    if (!(R < 0.0)) throw ConfigError("agent.r", "reservation utility must be negative");
    if (contract_class == ContractClass::Linear && !std::isfinite(p)) throw ConfigError("agent.p", "must be finite");
    GridSpec g = grid;
    g.t_max = default_law.horizon;
    g.validate();
    if (market.x0 < g.x_min || market.x0 > g.x_max) throw ConfigError("market.x0", "lies outside the wealth grid");
    if (0.0 < g.y_min || 0.0 > g.y_max) throw ConfigError("grid.y_min", "the contract-value grid must contain 0");
    solver.validate(ScalarMarket::from(market));
    sim.validate(g.t_max, g.dt());
    if (p_grid.empty()) throw ConfigError("sim.p_grid", "needs at least one percentage");
    (void)m;
}

ExperimentSettings RunConfig::settings() const {
    ExperimentSettings s;
    s.market = market;
    s.grid = grid;
    s.grid.t_max = default_law.horizon;
    s.solver = solver;
    s.solver.contract_class = contract_class;
    s.solver.linear_p = p;
    s.sim = sim;
    s.sim.R = R;
    s.hazard_cap = default_law.hazard_cap;
    s.p_grid = p_grid;
    return s;
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config", std::string("malformed file: ") + e.message() + " (line " +
                                        std::to_string(e.line()) + ")");
    }
    const auto table = setters();
    for (const auto& [section, _] : tree)
        if (!table.count(section)) throw ConfigError(section, "unknown section [" + section + "]");
    for (const char* required : {"market", "default"})
        if (!tree.get_child_optional(required))
            throw ConfigError(required, std::string("missing required section [") + required + "]");

    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError(section, "expected a [section], found a bare key");
        const auto& keys = table.at(section);
        for (const auto& [key, value] : body) {
            const std::string name = section + "." + key;
            const auto it = keys.find(key);
            if (it == keys.end()) throw ConfigError(name, "unknown key");
            it->second(cfg, value.data(), name);
        }
    }
    cfg.grid.t_max = cfg.default_law.horizon;
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError(key, "empty entry in list '" + text + "'");
        out.push_back(to_real(item.substr(b, e - b + 1), key));
    }
    if (out.empty()) throw ConfigError(key, "empty list");
    return out;
}

}  // namespace palab
