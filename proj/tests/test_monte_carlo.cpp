#include <cmath>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "palab/errors.hpp"
#include "palab/monte_carlo.hpp"

using namespace palab;

namespace {

const MarketParams kMarket = MarketParams::scalar(0.1, 0.3);

GridSpec grid(std::size_t n) {
    GridSpec g;
    g.nt = g.nx = g.ny = n;
    return g;
}

ExperimentSettings tiny_settings() {
    ExperimentSettings s;
    s.grid = grid(12);
    s.sim.n_paths = 2000;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("palab_mc_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

class ThreadsEnv {
public:
    explicit ThreadsEnv(const char* value) {
        if (const char* old = std::getenv("PA_LAB_THREADS")) saved_ = old;
        setenv("PA_LAB_THREADS", value, 1);
    }
    ~ThreadsEnv() {
        if (saved_.empty()) unsetenv("PA_LAB_THREADS");
        else setenv("PA_LAB_THREADS", saved_.c_str(), 1);
    }

private:
    std::string saved_;
};

// Solved bounded-uniform policy on a 20^3 grid, shared by the statistical tests.
const SolveResult& baseline() {
    static const SolveResult r = actor_critic(kMarket, DefaultModel::uniform(), grid(20), {}, PdeCase::Bounded);
    return r;
}

}  // namespace

TEST(SimConfig, Validation) {
    SimConfig c;
    EXPECT_NO_THROW(c.validate(1.0, 0.05));
    c.dt = 0.3;
    EXPECT_THROW(c.validate(1.0, 0.05), ConfigError);
    c.dt = 0.25;
    EXPECT_NO_THROW(c.validate(1.0, 0.05));
    c.n_paths = 0;
    EXPECT_THROW(c.validate(1.0, 0.05), ConfigError);
    c = {};
    c.R = 0.0;
    EXPECT_THROW(c.validate(1.0, 0.05), ConfigError);
    EXPECT_THROW(freeze_mode_from_string("sometimes"), ConfigError);
}

TEST(Simulate, NoPositionKeepsWealthConstant) {
    MarketParams p = kMarket;
    p.alpha = Eigen::VectorXd::Zero(1);
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 200;
    cfg.keep_paths = true;
    const PathEnsemble e = simulate(p, DefaultModel::none(), PolicyGrid(g), ValueGrid(g), cfg);
    for (const auto& path : e.paths)
        for (double x : path.X) ASSERT_EQ(x, p.x0);
    for (double s : e.carry_last.wealth.se) EXPECT_EQ(s, 0.0);
}

TEST(Simulate, DeterministicLimitMatchesRungeKutta) {
    // Wealth-dependent incentive z_x(x) = 0.1 x, linear so the trilinear lookup is exact.
    MarketParams p = MarketParams::scalar(0.1, 1e-7, 5.0, 0.01, 1.0, -1.0, 1.0);
    p.ellipticity_floor = 1e-20;
    const double b = 0.1, alpha = 0.01;
    const GridSpec g = grid(11);
    PolicyGrid pol(g);
    for (std::size_t i = 0; i < g.nt; ++i)
        for (std::size_t j = 0; j < g.nx; ++j)
            for (std::size_t k = 0; k < g.ny; ++k) pol.at(i, j, k) = {0.0, 0.1 * g.x(j), 0.0, 0.0, 0.0};

    SimConfig cfg;
    cfg.n_paths = 3;
    cfg.dt = 1e-4;
    cfg.keep_paths = true;
    const PathEnsemble e = simulate(p, DefaultModel::none(), pol, ValueGrid(g), cfg);

    auto pi_of = [&](double x) { return 0.1 * x * b + alpha; };
    auto rhs = [&](double x, double& dx, double& dy) {
        const double pi = pi_of(x);
        dx = pi * b;
        dy = 0.5 * (pi - alpha) * (pi - alpha);
    };
    double x = 5.0, y = 0.0;
    const int steps = 1000;
    const double h = 1.0 / steps;
    for (int n = 0; n < steps; ++n) {
        double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
        rhs(x, k1x, k1y);
        rhs(x + 0.5 * h * k1x, k2x, k2y);
        rhs(x + 0.5 * h * k2x, k3x, k3y);
        rhs(x + h * k3x, k4x, k4y);
        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
        y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
    }
    for (const auto& path : e.paths) {
        EXPECT_NEAR(path.X.back(), x, 1e-6);
        EXPECT_NEAR(path.Y.back(), y, 1e-6);
    }
}

TEST(Simulate, NoDefaultKeepsEveryPathAlive) {
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 500;
    const PathEnsemble e = simulate(kMarket, DefaultModel::none(), PolicyGrid(g), ValueGrid(g), cfg);
    for (double a : e.carry_last.alive_frac) EXPECT_EQ(a, 1.0);
    EXPECT_EQ(e.diagnostics.defaults, 0u);
}

TEST(Simulate, AliveFractionMatchesSurvival) {
    const GridSpec g = grid(21);
    SimConfig cfg;
    cfg.n_paths = 20000;
    for (const auto& m : {DefaultModel::beta(2, 4), DefaultModel::uniform(), DefaultModel::beta(4, 2),
                          DefaultModel::exponential(2), DefaultModel::none()}) {
        const PathEnsemble e = simulate(kMarket, m, PolicyGrid(g), ValueGrid(g), cfg);
        for (std::size_t n = 0; n < e.times.size(); ++n) {
            const double s = m.survival(e.times[n]);
            const double se = std::sqrt(s * (1.0 - s) / static_cast<double>(cfg.n_paths));
            EXPECT_LE(std::abs(e.carry_last.alive_frac[n] - s), 3.0 * se + 1e-12)
                << m.label() << " t=" << e.times[n];
        }
    }
}

TEST(Simulate, PerPathInvariants) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.n_paths = 3000;
    cfg.keep_paths = true;
    const PathEnsemble e = simulate(kMarket, DefaultModel::uniform(), sol.policy, sol.value, cfg);
    std::size_t defaulted = 0;
    for (const auto& path : e.paths) {
        // Contract identity: Y rebuilt from its increments.
        double y = e.Y0;
        for (std::size_t n = 0; n < path.dY_drift.size(); ++n) y += path.dY_drift[n] + path.dY_diffusion[n];
        y += path.dY_jump;
        const double streamed = path.Y.back();
        EXPECT_NEAR(y, streamed, 1e-10 * std::max(1.0, std::abs(streamed)));
        if (!path.defaulted) continue;
        ++defaulted;
        const std::size_t d = path.default_step;
        ASSERT_GE(d, 1u);
        // The jump at default equals the compensation u of the pre-default state.
        const double before = path.Y[d - 1] + path.dY_drift[d - 1] + path.dY_diffusion[d - 1];
        EXPECT_NEAR(path.Y[d] - before, path.controls[d - 1].u, 1e-12);
        EXPECT_EQ(path.dY_jump, path.controls[d - 1].u);
        // Frozen after default.
        for (std::size_t n = d; n < path.X.size(); ++n) {
            EXPECT_EQ(path.X[n], path.X[d]);
            EXPECT_EQ(path.Y[n], path.Y[d]);
            EXPECT_EQ(path.strategy[n], path.strategy[d]);
            EXPECT_EQ(path.controls[n], path.controls[d]);
        }
    }
    EXPECT_GT(defaulted, 2000u);
}

TEST(Simulate, AliveOnlyAveragesSurvivors) {
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 1000;
    const PathEnsemble e = simulate(kMarket, DefaultModel::uniform(), PolicyGrid(g), ValueGrid(g), cfg);
    EXPECT_EQ(e.carry_last.count.back(), 1000u);
    EXPECT_EQ(e.alive_only.count.back(), 0u);
    EXPECT_TRUE(std::isnan(e.alive_only.wealth.mean.back()));
    EXPECT_EQ(e.alive_only.count.front(), 1000u);
}

TEST(Determinism, AggregatesIndependentOfWorkerCount) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.n_paths = 5000;
    cfg.seed = 99;
    PathEnsemble one, four;
    {
        ThreadsEnv env("1");
        one = simulate(kMarket, DefaultModel::uniform(), sol.policy, sol.value, cfg);
    }
    {
        ThreadsEnv env("4");
        four = simulate(kMarket, DefaultModel::uniform(), sol.policy, sol.value, cfg);
    }
    EXPECT_EQ(one.carry_last.wealth.mean, four.carry_last.wealth.mean);
    EXPECT_EQ(one.carry_last.wealth.se, four.carry_last.wealth.se);
    EXPECT_EQ(one.carry_last.Y.mean, four.carry_last.Y.mean);
    ASSERT_EQ(one.alive_only.strategy.mean.size(), four.alive_only.strategy.mean.size());
    EXPECT_EQ(std::memcmp(one.alive_only.strategy.mean.data(), four.alive_only.strategy.mean.data(),
                          sizeof(double) * one.alive_only.strategy.mean.size()),
              0);
    EXPECT_EQ(one.utility_mean, four.utility_mean);
}

TEST(Determinism, PathStreamsDoNotDependOnPathCount) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.keep_paths = true;
    cfg.n_paths = 10;
    const PathEnsemble small = simulate(kMarket, DefaultModel::uniform(), sol.policy, sol.value, cfg);
    cfg.n_paths = 2500;
    const PathEnsemble big = simulate(kMarket, DefaultModel::uniform(), sol.policy, sol.value, cfg);
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_EQ(small.paths[k].X, big.paths[k].X);
        EXPECT_EQ(small.paths[k].tau, big.paths[k].tau);
    }
}

TEST(Determinism, DifferentSeedsDiffer) {
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 100;
    const auto pol = PolicyGrid(g, {0.0, 1.0, 0.0, 0.0, 0.0});
    const PathEnsemble a = simulate(kMarket, DefaultModel::uniform(), pol, ValueGrid(g), cfg);
    cfg.seed = 43;
    const PathEnsemble b = simulate(kMarket, DefaultModel::uniform(), pol, ValueGrid(g), cfg);
    EXPECT_NE(a.carry_last.wealth.mean.back(), b.carry_last.wealth.mean.back());
}

TEST(Output, SchemaAndFreezeModes) {
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 300;
    const PathEnsemble e = simulate(kMarket, DefaultModel::uniform(), PolicyGrid(g), ValueGrid(g), cfg);
    const auto dir = scratch("schema");
    const auto both = write_ensemble(dir, "uniform", e, FreezeMode::Both);
    ASSERT_EQ(both.size(), 2u);
    EXPECT_EQ(both[0].filename(), "uniform.csv");
    EXPECT_EQ(both[1].filename(), "uniform_alive_only.csv");
    EXPECT_EQ(write_ensemble(dir, "x", e, FreezeMode::CarryLast).size(), 1u);
    EXPECT_EQ(write_ensemble(dir, "y", e, FreezeMode::AliveOnly).size(), 1u);

    const auto rows = lines(slurp(both[0]));
    ASSERT_EQ(rows.size(), g.nt + 1);
    EXPECT_EQ(rows[0], "t,mean_wealth,se_wealth,mean_strategy,se_strategy,mean_Y,se_Y,mean_u,mean_zx,mean_gx,alive_frac");
    for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_EQ(std::count(rows[r].begin(), rows[r].end(), ','), 10);
    EXPECT_EQ(rows[1].substr(0, 2), "0,");
    const auto alive_rows = lines(slurp(both[1]));
    EXPECT_NE(alive_rows.back().find("nan"), std::string::npos);
    EXPECT_EQ(slurp(both[0]).find('\r'), std::string::npos);
}

TEST(Martingale, TargetForZeroY0) {
    const GridSpec g = grid(11);
    SimConfig cfg;
    cfg.n_paths = 100;
    const MartingaleReport r = martingale_check(kMarket, DefaultModel::none(), PolicyGrid(g), cfg);
    EXPECT_DOUBLE_EQ(r.target, -1.0);
}

TEST(Martingale, OptimalPolicyIsAMartingale) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.n_paths = 100000;
    const MartingaleReport r = martingale_check(kMarket, DefaultModel::uniform(), sol.policy, cfg);
    EXPECT_TRUE(std::abs(r.deviation) <= 3.0 || std::abs(r.mean - r.target) <= 1e-12)
        << "mean " << r.mean << " target " << r.target << " se " << r.se;
}

TEST(Martingale, ShiftedReservationMovesTheTarget) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.R = -std::exp(-0.5);
    const MartingaleReport r = martingale_check(kMarket, DefaultModel::uniform(), sol.policy, cfg);
    EXPECT_NEAR(r.target, -std::exp(-0.5), 1e-15);
    EXPECT_TRUE(std::abs(r.deviation) <= 3.0 || std::abs(r.mean - r.target) <= 1e-12);
}

TEST(Martingale, SuboptimalStrategyIsASupermartingale) {
    const SolveResult& sol = baseline();
    SimConfig cfg;
    cfg.n_paths = 100000;
    for (double forced : {0.0, 0.5, 1.0}) {
        cfg.forced_strategy = forced;
        const MartingaleReport r = martingale_check(kMarket, DefaultModel::uniform(), sol.policy, cfg);
        EXPECT_LE(r.mean, r.target + 3.0 * r.se);
        if (forced >= 0.5) EXPECT_GT((r.target - r.mean) / r.se, 3.0);
    }
}

TEST(CompareLinear, EmptyGridIsRejected) {
    const ExperimentSettings s = tiny_settings();
    EXPECT_THROW(compare_linear(s, DefaultModel::uniform(), PdeCase::Bounded, {}), ConfigError);
}

TEST(CompareLinear, GeneralContractDominates) {
    const ExperimentSettings s = tiny_settings();
    SolveCache cache;
    const LinearReport rep = compare_linear(s, DefaultModel::uniform(), PdeCase::Bounded, s.p_grid, &cache);
    ASSERT_EQ(rep.entries.size(), s.p_grid.size());
    for (const auto& e : rep.entries) {
        EXPECT_LE(e.value, rep.general_value + 1e-4) << "p=" << e.p;
        EXPECT_NEAR(e.gap, rep.general_value - e.value, 1e-15);
    }
    EXPECT_GE(rep.best_gap, -1e-4);
    double best = -INFINITY;
    for (const auto& e : rep.entries) best = std::max(best, e.value);
    EXPECT_EQ(rep.general_value - best, rep.best_gap);

    // The p closest to the general contract's average wealth incentive does at least as well as
    // the most distant one.
    const LinearEntry* near = &rep.entries.front();
    const LinearEntry* far = &rep.entries.front();
    for (const auto& e : rep.entries) {
        if (std::abs(e.p - rep.general_mean_zx) < std::abs(near->p - rep.general_mean_zx)) near = &e;
        if (std::abs(e.p - rep.general_mean_zx) > std::abs(far->p - rep.general_mean_zx)) far = &e;
    }
    EXPECT_LE(near->gap, far->gap + 1e-4);
}

TEST(CompareLinear, ZeroPercentChangesTheStrategy) {
    const ExperimentSettings s = tiny_settings();
    SolveCache cache;
    const ModelSpec general{"uniform", DefaultModel::uniform(), PdeCase::Bounded};
    const ModelSpec linear{"uniform_linear", DefaultModel::uniform(), PdeCase::Bounded, ContractClass::Linear, 0.0};
    const auto g = cache.get(s, general);
    const auto l = cache.get(s, linear);
    const PathEnsemble eg = simulate(s.market, general.model, g->policy, g->value, s.sim, s.solver);
    const PathEnsemble el = simulate(s.market, linear.model, l->policy, l->value, s.sim, s.solver);
    EXPECT_NE(eg.carry_last.strategy.mean, el.carry_last.strategy.mean);
    for (double zx : el.carry_last.z_x.mean) EXPECT_EQ(zx, 0.0);
}

TEST(Scenarios, ModelSets) {
    EXPECT_EQ(scenario_models("fig1", 1.0, 1e4).size(), 4u);
    EXPECT_EQ(scenario_models("fig2", 1.0, 1e4).size(), 4u);
    EXPECT_EQ(scenario_models("fig3", 1.0, 1e4).size(), 2u);
    EXPECT_EQ(scenario_models("fig4", 1.0, 1e4).size(), 3u);
    EXPECT_THROW(scenario_models("fig5", 1.0, 1e4), ConfigError);
}

TEST(Scenarios, Fig1WritesFourSeriesOfEqualLength) {
    ExperimentSettings s = tiny_settings();
    s.sim.n_paths = 500;
    const auto dir = scratch("fig1");
    const ExperimentResult r = experiment_suite("fig1", dir, s);
    ASSERT_EQ(r.files.size(), 4u);
    std::size_t rows = 0;
    for (const auto& f : r.files) {
        const auto n = lines(slurp(f)).size();
        if (rows == 0) rows = n;
        EXPECT_EQ(n, rows);
    }
    EXPECT_EQ(rows, s.grid.nt + 1);
}

TEST(Scenarios, UnknownScenarioIsRejected) {
    EXPECT_THROW(experiment_suite("fig9", scratch("fig9"), tiny_settings()), ConfigError);
}
