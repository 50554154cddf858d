// Acceptance run: one PASS/FAIL line per criterion at the baseline settings
// (40^3 grid, 10^4 paths). Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <vector>

#include "palab/checks.hpp"

using namespace palab;

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
    std::filesystem::create_directories(out);

    const ExperimentSettings s;
    SolveCache cache;

    std::vector<std::function<std::vector<CheckResult>()>> steps = {
        [] { return std::vector<CheckResult>{check_hazard_identity()}; },
        [] { return std::vector<CheckResult>{check_strategy_oracle()}; },
        [&] { return check_martingale(s, cache); },
        [&] { return std::vector<CheckResult>{check_degenerate(s)}; },
        [&] { return std::vector<CheckResult>{check_residual(s, cache)}; },
        [&] { return std::vector<CheckResult>{check_fig1_ordering(s, cache, out / "fig1")}; },
        [&] { return std::vector<CheckResult>{check_fig4_sandwich(s, cache, out / "fig4")}; },
        [&] { return std::vector<CheckResult>{check_linear_dominance(s, cache)}; },
        [&] { return std::vector<CheckResult>{check_determinism(s, out / "determinism")}; },
    };

    int failures = 0;
    for (const auto& step : steps) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<CheckResult> results;
        try {
            results = step();
        } catch (const std::exception& e) {
            results.push_back({"(criterion raised)", false, e.what()});
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& r : results) {
            std::printf("%s %s: %s [%.1fs]\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), secs);
            failures += !r.passed;
        }
        std::fflush(stdout);
    }
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
