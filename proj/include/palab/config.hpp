#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "palab/default_time.hpp"
#include "palab/hjb.hpp"
#include "palab/market.hpp"
#include "palab/monte_carlo.hpp"

namespace palab {

struct DefaultSection {
    DefaultFamily family = DefaultFamily::Uniform;
    double a = 1.0;
    double b = 1.0;
    double rate = 2.0;
    double horizon = 1.0;
    double hazard_cap = DefaultModel::kDefaultHazardCap;

    DefaultModel model() const;
};

/// A parsed run configuration. Sections: [market], [default] (both required),
/// [agent], [grid], [solver], [sim], [output]. Unknown sections or keys are
/// errors naming the entry.
struct RunConfig {
    MarketParams market = MarketParams::scalar(0.1, 0.3);
    DefaultSection default_law;
    double R = -1.0;
    ContractClass contract_class = ContractClass::General;
    double p = 0.0;
    GridSpec grid;
    SolverConfig solver;
    SimConfig sim;
    std::vector<double> p_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    std::filesystem::path out_dir = "out";

    /// Checks every section against its module invariants. Throws ConfigError.
    void validate() const;

    ExperimentSettings settings() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Comma-separated list of reals ("0,0.25,0.5").
std::vector<double> parse_real_list(const std::string& text, const std::string& key);

}  // namespace palab
