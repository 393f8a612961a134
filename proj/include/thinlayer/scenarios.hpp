/**
 * @file scenarios.hpp
 * @brief Declarative experiment specs, the built-in catalog, the step loop, and refinement studies.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlayer/conservation.hpp"
#include "thinlayer/timestepping.hpp"

namespace thinlayer {

struct MeshSpec {
    std::string type = "interval";  ///< interval | rect
    double a = 0.0, b = 1.0;
    int n = 100;
    std::array<double, 2> x{0.0, 1.0}, y{0.0, 1.0};
    int nx = 10, ny = 10;

    std::shared_ptr<const Mesh> build() const
    {
        if (type == "interval") return std::make_shared<const Mesh>(build_interval_mesh(a, b, n));
        if (type == "rect") return std::make_shared<const Mesh>(build_rect_mesh(x, y, nx, ny));
        throw ParameterError("unknown mesh type '" + type + "'");
    }
    /// Same mesh with every cell split `factor` times per direction.
    MeshSpec refined(int factor) const
    {
        MeshSpec m = *this;
        m.n *= factor;
        m.nx *= factor;
        m.ny *= factor;
        return m;
    }
    double h() const { return type == "interval" ? (b - a) / n : (x[1] - x[0]) / nx; }
};

struct VelocitySpec {
    std::string type = "zero";  ///< zero | uniform | converging | rotation
    double c = 1.0;
    Point vector{1.0, 0.0};
    Point center{0.5, 0.5};

    VelocityField build(int dim) const
    {
        if (type == "zero") return {};
        if (type == "uniform") return VelocityField::uniform(vector);
        if (type == "converging") return VelocityField::converging(c, dim, center);
        if (type == "rotation") return VelocityField::rotation(c, center);
        throw ParameterError("unknown velocity field '" + type + "'");
    }
};

struct KernelSpec {
    std::string type = "gaussian";  ///< gaussian | matrix
    double g = 0.0;       ///< drift strength in G(x,y) = g exp(-|x-y|^2/w^2) e_1
    double local = 1.0;   ///< weight of the one-cell spike in K
    double beta = 0.0;    ///< weight of the smooth part of K
    double width = 0.2;
    std::string g_file, k_file;  ///< dense matrices (row i = x_i, column j = y_j), "matrix" type
};

struct FluxSpec {
    std::string family = "none";  ///< none | p-laplacian | doubly-nonlinear | porous-medium | advective | nonlocal
    double k = 1.0, p = 2.0, r = 0.0, gamma = 2.0, eps = 0.0, delta = 1.0;
    VelocitySpec velocity;
    KernelSpec kernel;

    FluxModel build(const Mesh& mesh) const
    {
        if (family == "none") return FluxModel::none();
        if (family == "p-laplacian") return FluxModel::plaplacian(k, p);
        if (family == "doubly-nonlinear") return FluxModel::doubly_nonlinear(k, r, p);
        if (family == "porous-medium") return FluxModel::porous_medium(k, gamma);
        if (family == "advective") return FluxModel::advective(velocity.build(mesh.dimension()), eps, p);
        if (family == "nonlocal") {
            KernelFunctions fns;
            fns.name = kernel.type;
            const double g = kernel.g, beta = kernel.beta, w = kernel.width;
            fns.G = [g, w](const Point& x, const Point& y) {
                return Point{g * std::exp(-dot(x - y, x - y) / (w * w)), 0.0};
            };
            fns.K = [beta, w](const Point& x, const Point& y) { return beta * std::exp(-dot(x - y, x - y) / (w * w)); };
            auto s = std::make_shared<SampledKernels>(sample_kernels(fns, mesh));
            if (kernel.type == "matrix") {
                s->G[0] = read_dense_matrix(kernel.g_file, mesh.size());
                s->G[1].assign(mesh.size() * mesh.size(), 0.0);
                s->K = read_dense_matrix(kernel.k_file, mesh.size());
            } else if (kernel.type != "gaussian") {
                throw ParameterError("unknown kernel type '" + kernel.type + "'");
            }
            for (std::size_t i = 0; i < s->n; ++i) s->K[i * s->n + i] += kernel.local / mesh.cells()[i].area;
            return FluxModel::nonlocal(std::move(fns), delta, std::move(s));
        }
        throw ParameterError("unknown flux family '" + family + "'");
    }
};

struct SourceSpec {
    std::string type = "zero";  ///< zero | constant | linear | step | radial
    double value = 0.0, a = 0.0, b = 0.0, x_end = 0.5;
    Point center{0.5, 0.5};

    SourceModel build() const
    {
        if (type == "zero") return SourceModel::zero();
        if (type == "constant") return SourceModel::constant(value);
        if (type == "linear") return SourceModel::linear(a, b);
        if (type == "step") return SourceModel::step(value, x_end);
        if (type == "radial") return SourceModel::radial(a, b, center);
        throw ParameterError("unknown source type '" + type + "'");
    }
};

struct InitialSpec {
    std::string type = "constant";  ///< constant | cap | step | cosine | random
    double value = 0.0;             ///< constant level; for step: value left of x_end
    double height = 1.0;
    double radius = 0.5;
    double x_end = 0.5;
    double outside = 0.0;           ///< step: value right of x_end
    Point center{0.0, 0.0};

    /// Nonnegative samples at the control points; `seed` drives the random type.
    std::vector<double> sample(const Mesh& cv, std::uint64_t seed) const
    {
        std::vector<double> u(cv.size());
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const Point x = cv.cells()[i].centroid;
            double v;
            if (type == "constant") v = value;
            else if (type == "cap") {
                const double s = norm(x - center) / radius;
                v = s < 1.0 ? height * std::sqrt(1.0 - s * s) : 0.0;
            } else if (type == "step") v = x[0] < x_end ? value : outside;
            else if (type == "cosine") v = value + height * std::cos(std::numbers::pi * x[0]);
            else if (type == "random") v = value + height * U(rng);
            else throw ParameterError("unknown initial condition '" + type + "'");
            u[i] = std::max(0.0, v);
        }
        return u;
    }
};

struct ScenarioSpec {
    std::string name = "custom";
    std::string description;
    MeshSpec mesh;
    Backend backend = Backend::fv;
    FluxSpec flux;
    SourceSpec source;
    InitialSpec initial;
    SchemeSpec scheme = SchemeSpec::backward_euler();
    std::vector<double> dt{0.01};  ///< schedule; the last entry repeats
    int steps = 10;
    double t0 = 0.0;
    SolverOptions solver;
    std::uint64_t seed = 0;
    int snapshot_every = 10;
    std::vector<std::string> expect;

    double dt_at(int n) const
    {
        if (dt.empty()) throw ParameterError("empty time-step schedule");
        const auto i = static_cast<std::size_t>(std::max(0, n - 1));
        return dt[std::min(i, dt.size() - 1)];
    }
};

/// Tags a scenario may assert after its run.
inline const std::set<std::string>& expectation_registry()
{
    static const std::set<std::string> r{"balance-closes", "R=0", "R>0", "R<=bound", "B=0", "B!=0", "S=0",
                                         "S>=0", "S>0", "mass-constant", "nonnegative", "complementarity"};
    return r;
}

inline void validate_expectations(const ScenarioSpec& s)
{
    for (const auto& t : s.expect)
        if (!expectation_registry().count(t)) throw ParameterError("unknown expected-property tag '" + t + "'");
}

inline std::vector<ScenarioSpec> scenario_catalog()
{
    std::vector<ScenarioSpec> c;
    {
        ScenarioSpec s;
        s.name = "zero-dynamics";
        s.description = "no flux, no source: every series is zero and mass is constant";
        s.mesh.n = 10;
        s.initial = {"constant", 0.5};
        s.dt = {0.1};
        s.steps = 10;
        s.expect = {"balance-closes", "mass-constant", "R=0", "B=0", "S=0", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s;
        s.name = "advance-only";
        s.description = "porous medium with accumulation only near x = 0; the margin advances";
        s.mesh.n = 100;
        s.flux.family = "porous-medium";
        s.flux.gamma = 2.0;
        s.source = {"step", 0.5, 0.0, 0.0, 0.3};
        s.initial.type = "cap";
        s.initial.height = 0.3;
        s.initial.radius = 0.3;
        s.dt = {0.01};
        s.steps = 100;
        s.expect = {"balance-closes", "R=0", "R<=bound", "B!=0", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    ScenarioSpec abl;
    {
        auto& s = abl;
        s.name = "ablation-margin";
        s.description = "porous medium with f = 0.6 - 1.2x; a thin layer melts back, then the margin re-advances";
        s.mesh.n = 100;
        s.flux.family = "porous-medium";
        s.flux.gamma = 2.0;
        s.source = {"linear", 0.0, 0.6, 1.2};
        s.initial = {"constant", 0.05};
        s.dt = {0.01};
        s.steps = 200;
        s.expect = {"balance-closes", "R>0", "R<=bound", "B!=0", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s = abl;
        s.name = "ablation-margin-fve";
        s.description = "ablation-margin on the node-centered dual mesh; cell slop appears";
        s.backend = Backend::fve;
        s.expect = {"balance-closes", "R>0", "S>=0", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s;
        s.name = "advective-transport";
        s.description = "converging advection with weak diffusion and ablation at the far end";
        s.mesh.n = 100;
        s.flux.family = "advective";
        s.flux.eps = 0.01;
        s.flux.velocity.type = "converging";
        s.flux.velocity.c = 0.5;
        s.flux.velocity.center = {0.3, 0.0};
        s.source = {"linear", 0.0, 0.1, 0.4};
        s.initial.type = "cap";
        s.initial.center = {0.5, 0.0};
        s.initial.radius = 0.4;
        s.initial.height = 0.2;
        s.dt = {0.02};
        s.steps = 100;
        s.expect = {"balance-closes", "R<=bound", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s;
        s.name = "plap-2d";
        s.description = "p = 3 flux on a 24 x 24 grid with a radial climate";
        s.mesh.type = "rect";
        s.mesh.nx = s.mesh.ny = 24;
        s.flux.family = "p-laplacian";
        s.flux.k = 1.0;
        s.flux.p = 3.0;
        s.source = {"radial", 0.0, 0.2, 1.0, 0.5, {0.5, 0.5}};
        s.initial.type = "cap";
        s.initial.center = {0.5, 0.5};
        s.initial.radius = 0.35;
        s.initial.height = 0.3;
        s.dt = {0.01};
        s.steps = 40;
        s.expect = {"balance-closes", "R<=bound", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s = abl;
        s.name = "crank-nicolson";
        s.description = "ablation-margin stepped with theta = 1/2";
        s.scheme = SchemeSpec::crank_nicolson();
        s.steps = 100;
        s.expect = {"balance-closes", "R<=bound", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s = abl;
        s.name = "sstable2";
        s.description = "ablation-margin with the strongly S-stable two-stage DIRK";
        s.scheme = SchemeSpec::sstable2();
        s.steps = 100;
        s.expect = {"balance-closes", "R<=bound", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s = abl;
        s.name = "midpoint";
        s.description = "ablation-margin with the implicit midpoint DIRK (explicit second stage)";
        s.scheme = SchemeSpec::midpoint();
        s.dt = {0.002};
        s.steps = 500;
        s.expect = {"balance-closes", "R<=bound", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    {
        ScenarioSpec s;
        s.name = "nonlocal-coupling";
        s.description = "nonlocal kernel flux on a layer that stays wet";
        s.mesh.n = 40;
        s.flux.family = "nonlocal";
        s.flux.kernel.g = 0.2;
        s.flux.kernel.local = 0.05;
        s.flux.kernel.beta = 0.1;
        s.flux.kernel.width = 0.2;
        s.flux.delta = 0.05;
        s.initial = {"cosine", 1.0, 0.5};
        s.dt = {0.01};
        s.steps = 50;
        s.expect = {"balance-closes", "R=0", "B=0", "mass-constant", "nonnegative", "complementarity"};
        c.push_back(s);
    }
    return c;
}

inline ScenarioSpec find_scenario(const std::string& name)
{
    for (auto& s : scenario_catalog())
        if (s.name == name) return s;
    throw ParameterError("unknown scenario '" + name + "'");
}

struct TagResult {
    std::string tag;
    bool passed = false;
    std::string detail;
};

struct StepReport {
    int n = 0;
    std::vector<SolveReport> solves;
    std::vector<ComplementarityCertificate> certificates;
};

struct RunResult {
    std::vector<LedgerEntry> ledger;  ///< one entry per step, n = 1..steps
    double initial_mass = 0.0;
    ThicknessField final_field;
    std::vector<StepReport> steps;
    std::vector<TagResult> tags;
    bool certificates_passed = true;
    bool nonnegative = true;
    std::string failure;  ///< solver error message, empty on success

    bool balance_closed() const
    {
        return std::none_of(ledger.begin(), ledger.end(), [](const LedgerEntry& e) { return e.flagged; });
    }
    bool tags_passed() const
    {
        return std::all_of(tags.begin(), tags.end(), [](const TagResult& t) { return t.passed; });
    }
    bool ok() const { return failure.empty() && balance_closed() && tags_passed(); }

    double sum_C() const { return sum(&LedgerEntry::C); }
    double sum_R() const { return sum(&LedgerEntry::R); }
    double sum_B() const { return sum(&LedgerEntry::B); }
    double sum_abs_B() const
    {
        double s = 0.0;
        for (const auto& e : ledger) s += std::abs(e.B);
        return s;
    }
    double sum_S() const { return sum(&LedgerEntry::S); }
    double max_abs_balance() const
    {
        double m = 0.0;
        for (const auto& e : ledger) m = std::max(m, std::abs(e.balance_residual));
        return m;
    }

private:
    double sum(double LedgerEntry::*f) const
    {
        double s = 0.0;
        for (const auto& e : ledger) s += e.*f;
        return s;
    }
};

using StepObserver = std::function<void(const LedgerEntry&, const ThicknessField&, const StepReport&)>;

inline ThicknessField initial_field(const ScenarioSpec& s, const std::shared_ptr<const Mesh>& mesh)
{
    const auto cv = control_mesh(mesh, s.backend);
    return {cv, s.backend, s.initial.sample(*cv, s.seed), s.t0};
}

inline std::vector<TagResult> evaluate_tags(const ScenarioSpec& spec, const RunResult& r)
{
    std::vector<TagResult> out;
    const auto& L = r.ledger;
    auto all = [&](auto pred) { return std::all_of(L.begin(), L.end(), pred); };
    auto any = [&](auto pred) { return std::any_of(L.begin(), L.end(), pred); };
    for (const auto& t : spec.expect) {
        TagResult tr{t, false, ""};
        if (t == "balance-closes") tr.passed = r.balance_closed();
        else if (t == "R=0") tr.passed = all([](const LedgerEntry& e) { return e.R == 0.0; });
        else if (t == "R>0") tr.passed = any([](const LedgerEntry& e) { return e.R > 0.0; });
        else if (t == "R<=bound") tr.passed = all([](const LedgerEntry& e) { return e.retreat_within_bound(); });
        else if (t == "B=0") tr.passed = all([](const LedgerEntry& e) { return e.B == 0.0; });
        else if (t == "B!=0") tr.passed = any([](const LedgerEntry& e) { return e.B != 0.0; });
        else if (t == "S=0") tr.passed = all([](const LedgerEntry& e) { return e.S == 0.0; });
        else if (t == "S>=0") tr.passed = all([](const LedgerEntry& e) { return e.S >= 0.0; });
        else if (t == "S>0") tr.passed = any([](const LedgerEntry& e) { return e.S > 0.0; });
        else if (t == "mass-constant")
            tr.passed = all([&](const LedgerEntry& e) {
                return std::abs(e.M - r.initial_mass) <= 1e-12 * (1.0 + std::abs(r.initial_mass)) * e.n;
            });
        else if (t == "nonnegative") tr.passed = r.nonnegative;
        else if (t == "complementarity") tr.passed = r.certificates_passed;
        else tr.detail = "unknown tag";
        if (!r.failure.empty()) {
            tr.passed = false;
            tr.detail = "run failed: " + r.failure;
        }
        out.push_back(tr);
    }
    return out;
}

/// Step loop: stages -> NCP solves -> decomposition -> ledger entry.
/// Solver failures are caught and reported in RunResult::failure.
inline RunResult run_scenario(const ScenarioSpec& spec, const StepObserver& observe = {})
{
    validate_expectations(spec);
    spec.scheme.validate();
    if (spec.steps < 0) throw ParameterError("steps must be nonnegative");
    const auto mesh = spec.mesh.build();
    const auto cv = control_mesh(mesh, spec.backend);
    const FluxModel q = spec.flux.build(*cv);
    const SourceModel f = spec.source.build();
    RunResult res;
    ThicknessField u = initial_field(spec, mesh);
    LedgerEntry prev = initial_entry(u);
    res.initial_mass = prev.M;
    const auto solve = default_stage_solver(spec.solver);
    double t = spec.t0;
    for (int n = 1; n <= spec.steps; ++n) {
        const double dt = spec.dt_at(n);
        StepReport sr;
        sr.n = n;
        std::vector<StageRecord> stages;
        try {
            stages = advance(spec.scheme, q, f, u, t, dt, solve);
        } catch (const SolveError& e) {
            res.failure = "step " + std::to_string(n) + ": " + e.what();
            sr.solves.push_back(e.report());
            if (observe) observe(prev, e.last_iterate(), sr);
            break;
        }
        for (const auto& st : stages) {
            sr.solves.push_back(st.result.report);
            sr.certificates.push_back(verify_complementarity(st.result.u.values(), st.result.residual, spec.solver.tol));
            if (!sr.certificates.back().passed()) res.certificates_passed = false;
        }
        const auto& last = stages.back();
        ThicknessField un = last.result.u;
        if (un.min_value() < 0.0) res.nonnegative = false;
        LedgerEntry e = ledger_step(prev, last.problem, un);
        e.n = n;
        res.ledger.push_back(e);
        if (observe) observe(e, un, sr);
        res.steps.push_back(std::move(sr));
        prev = e;
        u = std::move(un);
        t += dt;
    }
    res.final_field = u;
    res.tags = evaluate_tags(spec, res);
    return res;
}

// --- refinement studies ----------------------------------------------------

struct StudyRow {
    std::string kind;  ///< space | time
    int level = 0;
    double h = 0.0;
    double dt = 0.0;
    int steps = 0;
    double sum_abs_B = 0.0;
    double sum_R = 0.0;
    double sum_S = 0.0;
    double max_balance = 0.0;
    double final_mass = 0.0;
    bool ok = true;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    bool B_nonincreasing = true;     ///< space levels
    bool R_decreasing = true;        ///< time levels
    bool R_ratio_in_range = true;    ///< successive time-level ratios in [1, 4]
    bool runs_ok = true;
    bool passed() const { return B_nonincreasing && R_decreasing && R_ratio_in_range && runs_ok; }
};

/// Totals over the scenario's horizon at h, h/2, ... (fixed dt) and at dt, dt/2, ... (fixed h).
inline StudyResult refinement_study(const ScenarioSpec& base, int levels)
{
    if (levels < 3) throw ParameterError("refinement study needs at least 3 levels");
    if (base.dt.size() != 1) throw ParameterError("refinement study needs a fixed time step");
    StudyResult out;
    std::vector<double> B, R;
    for (int l = 0; l < levels; ++l) {
        ScenarioSpec s = base;
        s.expect.clear();
        s.mesh = base.mesh.refined(1 << l);
        const auto r = run_scenario(s);
        StudyRow row{"space", l, s.mesh.h(), s.dt[0], s.steps, r.sum_abs_B(), r.sum_R(), r.sum_S(), r.max_abs_balance(),
                     r.ledger.empty() ? r.initial_mass : r.ledger.back().M, r.ok()};
        out.runs_ok = out.runs_ok && row.ok;
        B.push_back(row.sum_abs_B);
        out.rows.push_back(row);
    }
    for (int l = 0; l < levels; ++l) {
        ScenarioSpec s = base;
        s.expect.clear();
        s.dt = {base.dt[0] / (1 << l)};
        s.steps = base.steps * (1 << l);
        const auto r = run_scenario(s);
        StudyRow row{"time", l, s.mesh.h(), s.dt[0], s.steps, r.sum_abs_B(), r.sum_R(), r.sum_S(), r.max_abs_balance(),
                     r.ledger.empty() ? r.initial_mass : r.ledger.back().M, r.ok()};
        out.runs_ok = out.runs_ok && row.ok;
        R.push_back(row.sum_R);
        out.rows.push_back(row);
    }
    for (std::size_t i = 1; i < B.size(); ++i) out.B_nonincreasing = out.B_nonincreasing && B[i] <= B[i - 1];
    for (std::size_t i = 1; i < R.size(); ++i) {
        out.R_decreasing = out.R_decreasing && R[i] < R[i - 1];
        const double ratio = R[i] > 0.0 ? R[i - 1] / R[i] : std::numeric_limits<double>::infinity();
        out.R_ratio_in_range = out.R_ratio_in_range && ratio >= 1.0 && ratio <= 4.0;
    }
    return out;
}

}  // namespace thinlayer
