#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>

#include "palab/config.hpp"

namespace palab {

/// Command-line overrides of the [sim] section.
struct SimOverrides {
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> freeze_mode;
    std::optional<std::string> p_grid;

    void apply(RunConfig& cfg) const;
};

// Exit codes: 0 success, 1 runtime or check failure, 2 invalid configuration.

/// Solves the configured model; writes solution.csv and diagnostics.json.
int cmd_solve(const std::filesystem::path& config, std::string_view case_name, const std::filesystem::path& out,
              std::ostream& log = std::cout, std::ostream& err = std::cerr);

/// Simulates under a solution dump; writes the aggregate CSVs.
int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& policy,
                 const std::filesystem::path& out, const SimOverrides& o = {}, std::ostream& log = std::cout,
                 std::ostream& err = std::cerr);

/// Linear-contract comparison; writes linear.json.
int cmd_compare_linear(const std::filesystem::path& config, std::string_view case_name,
                       const std::filesystem::path& out, const SimOverrides& o = {}, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr);

/// Runs a scenario (fig1..fig4); writes its CSVs and manifest.json. Without a
/// config the built-in defaults are used.
int cmd_experiments(std::string_view scenario, const std::filesystem::path& out,
                    const std::optional<std::filesystem::path>& config = std::nullopt, const SimOverrides& o = {},
                    std::ostream& log = std::cout, std::ostream& err = std::cerr);

/// Runs a property suite: hazard, oracle, martingale or degenerate.
int cmd_check(std::string_view suite, const std::optional<std::filesystem::path>& config = std::nullopt,
              std::ostream& log = std::cout, std::ostream& err = std::cerr);

}  // namespace palab
