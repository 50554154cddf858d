#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "palab/monte_carlo.hpp"

namespace palab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// max over t in [0, 0.999 T] of |exp(-Lambda_t) - (1 - F(t))| below 1e-8 for
/// Beta(2,4), Uniform, Beta(4,2), Exponential(2).
CheckResult check_hazard_identity(double horizon = 1.0);

/// generator_F against a brute-force maximisation of raw_f over C on a grid of
/// step 1e-3, for n random admissible tuples (PD margin 1e-3).
CheckResult check_strategy_oracle(std::size_t n = 1000, std::uint64_t seed = 2024);

/// With the solved bounded-uniform policy: E[R] within 3 standard errors of
/// -exp(-eta Y_0), and a forced constant strategy lower by more than 3.
std::vector<CheckResult> check_martingale(const ExperimentSettings& s, SolveCache& cache,
                                          std::size_t n_paths = 100000, double perturbed = 0.5);

/// No hazard and u grid {0}: both cases agree with the jump-free solve within
/// 1e-6 in sup norm on a 30^3 grid.
CheckResult check_degenerate(const ExperimentSettings& s, std::size_t n = 30);

/// Residual of the converged bounded-uniform solve.
CheckResult check_residual(const ExperimentSettings& s, SolveCache& cache);

/// Terminal mean wealth None >= Beta(4,2) >= Uniform >= Beta(2,4), each gap
/// larger than one combined standard error.
CheckResult check_fig1_ordering(const ExperimentSettings& s, SolveCache& cache, const std::filesystem::path& out);

/// Exponential-default mean strategy between the no-default and uniform means
/// on the last quarter of the horizon, within 1 SE.
CheckResult check_fig4_sandwich(const ExperimentSettings& s, SolveCache& cache, const std::filesystem::path& out);

/// V_linear(p) <= V_general + tol for every p in the grid and best gap >= -tol.
CheckResult check_linear_dominance(const ExperimentSettings& s, SolveCache& cache, double tol = 1e-4);

/// Two independent solve + simulate runs give byte-identical files.
CheckResult check_determinism(const ExperimentSettings& s, const std::filesystem::path& out);

}  // namespace palab
