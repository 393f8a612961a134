#include <gtest/gtest.h>

#include <set>

#include "thinlayer/thinlayer.hpp"

using namespace thinlayer;

TEST(Catalog, NamesAreUniqueAndFindable)
{
    std::set<std::string> names;
    for (const auto& s : scenario_catalog()) {
        EXPECT_TRUE(names.insert(s.name).second) << s.name;
        EXPECT_FALSE(s.description.empty());
        EXPECT_NO_THROW(validate_expectations(s));
        EXPECT_EQ(find_scenario(s.name).name, s.name);
    }
    EXPECT_GE(names.size(), 8u);
    EXPECT_THROW(find_scenario("no-such-scenario"), ParameterError);
}

TEST(Catalog, EveryScenarioMeetsItsExpectations)
{
    for (const auto& s : scenario_catalog()) {
        const auto r = run_scenario(s);
        EXPECT_TRUE(r.failure.empty()) << s.name << ": " << r.failure;
        EXPECT_EQ(r.ledger.size(), static_cast<std::size_t>(s.steps)) << s.name;
        EXPECT_TRUE(r.balance_closed()) << s.name << " max residual " << r.max_abs_balance();
        for (const auto& t : r.tags) EXPECT_TRUE(t.passed) << s.name << " " << t.tag << " " << t.detail;
        for (const auto& e : r.ledger) EXPECT_LE(e.R, e.retreat_bound) << s.name << " step " << e.n;
    }
}

TEST(Scenario, ZeroDynamicsHoldsMassExactly)
{
    const auto r = run_scenario(find_scenario("zero-dynamics"));
    ASSERT_EQ(r.ledger.size(), 10u);
    for (const auto& e : r.ledger) {
        EXPECT_EQ(e.M, r.initial_mass);
        EXPECT_EQ(e.C, 0.0);
        EXPECT_EQ(e.R, 0.0);
        EXPECT_EQ(e.B, 0.0);
        EXPECT_EQ(e.balance_residual, 0.0);
    }
    EXPECT_NEAR(r.initial_mass, 0.5, 1e-15);
}

TEST(Scenario, AblationRetreatsAndAdvanceDoesNot)
{
    const auto abl = run_scenario(find_scenario("ablation-margin"));
    EXPECT_GT(abl.sum_R(), 0.0);
    EXPECT_NE(abl.sum_B(), 0.0);
    const auto adv = run_scenario(find_scenario("advance-only"));
    for (const auto& e : adv.ledger) EXPECT_EQ(e.R, 0.0) << "step " << e.n;
    // the margin moves: the wet set at the end is larger than at the start
    const auto spec = find_scenario("advance-only");
    const auto u0 = initial_field(spec, spec.mesh.build());
    auto wet = [](const ThicknessField& u) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < u.size(); ++i) c += u[i] > 0.0;
        return c;
    };
    EXPECT_GT(wet(adv.final_field), wet(u0));
}

TEST(Scenario, FveReportsNonnegativeSlop)
{
    const auto r = run_scenario(find_scenario("ablation-margin-fve"));
    EXPECT_TRUE(r.ok()) << r.failure;
    for (const auto& e : r.ledger) EXPECT_GE(e.S, 0.0);
    EXPECT_GT(r.sum_S(), 0.0);
}

TEST(Scenario, RunsAreDeterministic)
{
    auto spec = find_scenario("ablation-margin");
    spec.steps = 40;
    const auto a = run_scenario(spec), b = run_scenario(spec);
    ASSERT_EQ(a.ledger.size(), b.ledger.size());
    for (std::size_t i = 0; i < a.ledger.size(); ++i) EXPECT_EQ(ledger_csv_row(a.ledger[i]), ledger_csv_row(b.ledger[i]));
}

TEST(Scenario, ObserverSeesEveryStep)
{
    auto spec = find_scenario("sstable2");
    spec.steps = 7;
    int calls = 0;
    std::size_t solves = 0;
    run_scenario(spec, [&](const LedgerEntry& e, const ThicknessField&, const StepReport& sr) {
        ++calls;
        EXPECT_EQ(e.n, sr.n);
        solves += sr.solves.size();
    });
    EXPECT_EQ(calls, 7);
    EXPECT_EQ(solves, 14u);
}

TEST(Scenario, SolverFailureIsReported)
{
    auto spec = find_scenario("ablation-margin");
    spec.solver.max_iter = 1;
    const auto r = run_scenario(spec);
    EXPECT_FALSE(r.failure.empty());
    EXPECT_FALSE(r.ok());
    for (const auto& t : r.tags) EXPECT_FALSE(t.passed);
}

TEST(Scenario, InvalidSpecsThrow)
{
    auto spec = find_scenario("zero-dynamics");
    spec.expect = {"R=1"};
    EXPECT_THROW(run_scenario(spec), ParameterError);
    spec = find_scenario("zero-dynamics");
    spec.flux.family = "magic";
    EXPECT_THROW(run_scenario(spec), ParameterError);
    spec = find_scenario("zero-dynamics");
    spec.dt.clear();
    EXPECT_THROW(run_scenario(spec), ParameterError);
    spec = find_scenario("plap-2d");
    spec.backend = Backend::fve;
    EXPECT_THROW(run_scenario(spec), GeometryError);
}

TEST(Scenario, TimeStepSchedule)
{
    ScenarioSpec s;
    s.dt = {0.1, 0.05, 0.02};
    EXPECT_EQ(s.dt_at(1), 0.1);
    EXPECT_EQ(s.dt_at(2), 0.05);
    EXPECT_EQ(s.dt_at(3), 0.02);
    EXPECT_EQ(s.dt_at(50), 0.02);
    s = find_scenario("zero-dynamics");
    s.dt = {0.1, 0.3};
    s.steps = 3;
    const auto r = run_scenario(s);
    EXPECT_NEAR(r.ledger.back().t, 0.7, 1e-15);
}

TEST(Scenario, InitialConditions)
{
    const auto m = build_interval_mesh(0.0, 1.0, 4);
    InitialSpec cap{"cap"};
    cap.height = 2.0;
    cap.radius = 0.5;
    const auto u = cap.sample(m, 0);
    EXPECT_DOUBLE_EQ(u[0], 2.0 * std::sqrt(1.0 - 0.0625));
    EXPECT_EQ(u[3], 0.0);
    InitialSpec step{"step", 1.0};
    step.x_end = 0.5;
    step.outside = 0.25;
    EXPECT_EQ(step.sample(m, 0), (std::vector<double>{1.0, 1.0, 0.25, 0.25}));
    InitialSpec rnd{"random", 0.1};
    rnd.height = 1.0;
    EXPECT_EQ(rnd.sample(m, 5), rnd.sample(m, 5));
    EXPECT_NE(rnd.sample(m, 5), rnd.sample(m, 6));
    InitialSpec neg{"constant", -1.0};
    for (double v : neg.sample(m, 0)) EXPECT_EQ(v, 0.0);
    EXPECT_THROW((InitialSpec{"sawtooth"}.sample(m, 0)), ParameterError);
}

TEST(Study, AblationMarginTrends)
{
    const auto st = refinement_study(find_scenario("ablation-margin"), 3);
    ASSERT_EQ(st.rows.size(), 6u);
    EXPECT_EQ(st.rows[1].h, st.rows[0].h / 2);
    EXPECT_EQ(st.rows[4].dt, st.rows[3].dt / 2);
    EXPECT_EQ(st.rows[4].steps, 2 * st.rows[3].steps);
    EXPECT_TRUE(st.B_nonincreasing);
    EXPECT_TRUE(st.R_decreasing);
    EXPECT_TRUE(st.R_ratio_in_range);
    EXPECT_TRUE(st.passed());
    EXPECT_THROW(refinement_study(find_scenario("ablation-margin"), 2), ParameterError);
}
