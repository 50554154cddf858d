#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "palab/contract.hpp"
#include "palab/default_time.hpp"
#include "palab/hjb.hpp"
#include "palab/market.hpp"

namespace palab {

/// How defaulted paths enter the cross-path averages. carry_last keeps their
/// frozen values in every later average; alive_only averages surviving paths.
enum class FreezeMode { CarryLast, AliveOnly, Both };

std::string_view to_string(FreezeMode f);
FreezeMode freeze_mode_from_string(std::string_view name);

struct SimConfig {
    std::size_t n_paths = 10000;
    double dt = 0.0;  ///< 0 means the policy grid's time step
    std::uint64_t seed = 42;
    FreezeMode freeze_mode = FreezeMode::CarryLast;
    double R = -1.0;  ///< agent reservation utility, sets Y_0
    bool keep_paths = false;
    std::optional<double> forced_strategy;  ///< replaces the agent's best response

    /// Effective time step.
    double step(double grid_dt) const;
    void validate(double T, double grid_dt) const;
};

/// Cross-path statistics of one series at every time node.
struct SeriesStats {
    std::vector<double> mean;
    std::vector<double> se;
};

struct Aggregates {
    SeriesStats wealth;
    SeriesStats strategy;
    SeriesStats Y;
    SeriesStats u;
    SeriesStats z_x;
    SeriesStats g_x;
    std::vector<double> alive_frac;
    std::vector<std::size_t> count;  ///< paths contributing at each time
};

struct PathRecord {
    std::vector<double> X;
    std::vector<double> Y;
    std::vector<double> strategy;
    std::vector<ScalarControls> controls;
    std::vector<double> dY_drift;      ///< drift increment of step n
    std::vector<double> dY_diffusion;  ///< Brownian increment of step n
    double dY_jump = 0.0;
    double tau = 0.0;
    std::size_t default_step = 0;  ///< first node after default (n_steps + 1 if none)
    bool defaulted = false;
    double effort = 0.0;  ///< int (pi - alpha)^2 / 2 dt up to T ^ tau
};

struct SimDiagnostics {
    std::size_t clamp_events = 0;  ///< steps whose state left the policy grid
    std::size_t clamped_paths = 0;
    std::size_t defaults = 0;
};

struct PathEnsemble {
    std::vector<double> times;
    Aggregates carry_last;
    Aggregates alive_only;
    std::vector<PathRecord> paths;  ///< filled when keep_paths
    SimDiagnostics diagnostics;

    /// Agent utility R_{T ^ tau} = -exp(-eta (Y - effort)) statistics.
    double utility_mean = 0.0;
    double utility_se = 0.0;
    double Y0 = 0.0;
};

/// Euler-Maruyama simulation of wealth and contract value under the policy.
/// Controls are read by trilinear interpolation in (t, x, y) at the start of
/// every step, where y is the contract value net of Y_0. Default is drawn once
/// per path; at default Y jumps by u and the path is frozen.
PathEnsemble simulate(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy,
                      const ValueGrid& v, const SimConfig& cfg, const SolverConfig& solver = {});

struct MartingaleReport {
    double mean = 0.0;
    double se = 0.0;
    double target = 0.0;      ///< -exp(-eta Y_0)
    double deviation = 0.0;   ///< (mean - target) / se
    std::size_t n_paths = 0;
};

/// Estimates E[R_{T ^ tau}] and compares it with -exp(-eta Y_0).
MartingaleReport martingale_check(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy,
                                  const SimConfig& cfg, const SolverConfig& solver = {});

/// Writes the aggregate CSV: t,mean_wealth,se_wealth,mean_strategy,se_strategy,
/// mean_Y,se_Y,mean_u,mean_zx,mean_gx,alive_frac with 9 significant digits.
void write_aggregates_csv(const std::filesystem::path& path, const std::vector<double>& times,
                          const Aggregates& a);

/// Writes {name}.csv and/or {name}_alive_only.csv per the freeze mode; returns
/// the written paths.
std::vector<std::filesystem::path> write_ensemble(const std::filesystem::path& dir, const std::string& name,
                                                  const PathEnsemble& e, FreezeMode mode);

/// Everything needed to solve and simulate one model.
struct ExperimentSettings {
    MarketParams market = MarketParams::scalar(0.1, 0.3);
    GridSpec grid;
    SolverConfig solver;
    SimConfig sim;
    double hazard_cap = DefaultModel::kDefaultHazardCap;
    std::vector<double> p_grid{0.0, 0.25, 0.5, 0.75, 1.0};
};

struct ModelSpec {
    std::string name;
    DefaultModel model;
    PdeCase pde_case;
    ContractClass contract_class = ContractClass::General;
    double p = 0.0;
};

/// Memoises actor_critic results by model, case, contract class and p.
class SolveCache {
public:
    std::shared_ptr<const SolveResult> get(const ExperimentSettings& s, const ModelSpec& spec);

private:
    std::map<std::string, std::shared_ptr<const SolveResult>> entries_;
};

struct LinearEntry {
    double p = 0.0;
    double value = 0.0;
    double gap = 0.0;  ///< V_general - V_linear(p)
    bool converged = false;
};

struct LinearReport {
    double general_value = 0.0;
    bool general_converged = false;
    double general_mean_zx = 0.0;  ///< time average of the simulated mean z_x
    std::vector<LinearEntry> entries;
    double best_p = 0.0;
    double best_gap = 0.0;
};

/// Solves the general contract and the linear contract for every p, and
/// reports the principal values and optimality gaps.
LinearReport compare_linear(const ExperimentSettings& s, const DefaultModel& m, PdeCase c,
                            const std::vector<double>& p_grid, SolveCache* cache = nullptr);

/// Model set of a scenario: fig1/fig2 Beta(2,4), Uniform, Beta(4,2), None;
/// fig3 Uniform general and linear; fig4 None, Uniform, Exponential(2).
std::vector<ModelSpec> scenario_models(std::string_view scenario, double horizon, double hazard_cap);

struct ModelOutcome {
    ModelSpec spec;
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    PathEnsemble ensemble;
};

struct ExperimentResult {
    std::string scenario;
    std::vector<std::filesystem::path> files;
    std::vector<ModelOutcome> models;
    std::optional<LinearReport> linear;
};

/// Solves, simulates and writes the CSV set of a scenario into out_dir.
ExperimentResult experiment_suite(std::string_view scenario, const std::filesystem::path& out_dir,
                                  const ExperimentSettings& s, SolveCache* cache = nullptr);

}  // namespace palab
