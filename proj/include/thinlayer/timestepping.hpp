/**
 * @file timestepping.hpp
 * @brief Stage problems for the theta method and two second-order DIRK schemes.
 *
 * Every stage is an NCP with u_prev = u_{n-1}; earlier-stage and old-level
 * terms enter through StageProblem::explicit_source, with the flux divergence
 * taken from the same edge-flux operator used implicitly.
 */
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinlayer/solver.hpp"

namespace thinlayer {

enum class SchemeKind { theta, dirk_midpoint, dirk_sstable2 };

inline constexpr double kSStableAlpha = 1.0 - 0.70710678118654752440;  // 1 - sqrt(2)/2

struct SchemeSpec {
    SchemeKind kind = SchemeKind::theta;
    double theta = 1.0;

    static SchemeSpec backward_euler() { return {SchemeKind::theta, 1.0}; }
    static SchemeSpec crank_nicolson() { return {SchemeKind::theta, 0.5}; }
    static SchemeSpec forward_euler() { return {SchemeKind::theta, 0.0}; }
    static SchemeSpec midpoint() { return {SchemeKind::dirk_midpoint, 1.0}; }
    static SchemeSpec sstable2() { return {SchemeKind::dirk_sstable2, 1.0}; }

    int stages() const { return kind == SchemeKind::theta ? 1 : 2; }
    void validate() const
    {
        if (kind == SchemeKind::theta && !(theta >= 0.0 && theta <= 1.0))
            throw ParameterError("theta must lie in [0,1]");
    }
    std::string name() const
    {
        switch (kind) {
            case SchemeKind::dirk_midpoint: return "dirk_midpoint";
            case SchemeKind::dirk_sstable2: return "dirk_sstable2";
            case SchemeKind::theta: break;
        }
        if (theta == 1.0) return "backward_euler";
        if (theta == 0.0) return "forward_euler";
        if (theta == 0.5) return "crank_nicolson";
        return "theta(" + std::to_string(theta) + ")";
    }
};

inline SchemeSpec scheme_from_string(const std::string& s, double theta = 1.0)
{
    if (s == "backward_euler" || s == "be") return SchemeSpec::backward_euler();
    if (s == "forward_euler" || s == "fe") return SchemeSpec::forward_euler();
    if (s == "crank_nicolson" || s == "cn") return SchemeSpec::crank_nicolson();
    if (s == "theta") return {SchemeKind::theta, theta};
    if (s == "dirk_midpoint" || s == "midpoint") return SchemeSpec::midpoint();
    if (s == "dirk_sstable2" || s == "sstable2") return SchemeSpec::sstable2();
    throw ParameterError("unknown scheme '" + s + "'");
}

/// w * (f(u, x, t) - div q(u)) per control volume, f at the cell quadrature point.
inline std::vector<double> explicit_rate(const FluxModel& q, const SourceModel& f, const ThicknessField& u, double t,
                                         double w_source, double w_flux)
{
    const Mesh& mesh = u.mesh();
    std::vector<double> out(u.size(), 0.0);
    if (w_source != 0.0) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const int ii = static_cast<int>(i);
            const double v = f.thickness_independent ? 0.0 : quadrature_thickness(mesh, u.backend(), u.values(), ii);
            out[i] += w_source * f(v, mesh.cell(ii).center, t);
        }
    }
    if (w_flux != 0.0 && !q.is_zero()) {
        const auto div = flux_divergence(q, u);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] -= w_flux * div[i];
    }
    return out;
}

/// Q_n = theta q, F_n = theta f(., t_n) + (1-theta)[f(u_prev, t_prev) - div q(u_prev)].
inline StageProblem theta_stage(double theta, const FluxModel& q, const SourceModel& f, const ThicknessField& u_prev,
                                double t_prev, double dt)
{
    if (!(theta >= 0.0 && theta <= 1.0)) throw ParameterError("theta must lie in [0,1]");
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    StageProblem s;
    s.dt = dt;
    s.t_n = t_prev + dt;
    s.flux = q.bound_to(u_prev.mesh());
    s.source = f;
    s.flux_coeff = theta;
    s.flux_time = s.t_n;
    s.source_coeff = theta;
    s.source_time = s.t_n;
    s.u_prev = u_prev;
    s.label = theta == 1.0 ? "backward_euler" : (theta == 0.0 ? "forward_euler" : "theta");
    if (theta < 1.0) s.explicit_source = explicit_rate(s.flux, f, u_prev, t_prev, 1.0 - theta, 1.0 - theta);
    return s;
}

using StageSolver = std::function<SolveResult(const StageProblem&)>;

inline StageSolver default_stage_solver(SolverOptions opt = {})
{
    return [opt](const StageProblem& s) { return solve_ncp(s, opt); };
}

struct StageRecord {
    StageProblem problem;
    SolveResult result;
};

/// Runs both stages of a DIRK scheme, solving each with `solve`.
inline std::vector<StageRecord> dirk_stages(SchemeKind kind, const FluxModel& q, const SourceModel& f,
                                            const ThicknessField& u_prev, double t_prev, double dt,
                                            const StageSolver& solve)
{
    if (kind == SchemeKind::theta) throw ParameterError("dirk_stages needs a DIRK scheme");
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    const FluxModel qb = q.bound_to(u_prev.mesh());
    std::vector<StageRecord> out;
    StageProblem s1;
    s1.dt = dt;
    s1.flux = qb;
    s1.source = f;
    s1.u_prev = u_prev;
    if (kind == SchemeKind::dirk_midpoint) {
        const double th = t_prev + 0.5 * dt;
        s1.flux_coeff = 0.5;
        s1.source_coeff = 0.5;
        s1.flux_time = s1.source_time = s1.t_n = th;
        s1.label = "midpoint.1";
        auto r1 = solve(s1);
        StageProblem s2;
        s2.dt = dt;
        s2.flux = qb;
        s2.source = f;
        s2.u_prev = u_prev;
        s2.flux_coeff = 0.0;
        s2.source_coeff = 0.0;
        s2.flux_time = s2.source_time = th;
        s2.t_n = t_prev + dt;
        s2.label = "midpoint.2";
        s2.explicit_source = explicit_rate(qb, f, r1.u, th, 1.0, 1.0);
        out.push_back({std::move(s1), std::move(r1)});
        auto r2 = solve(s2);
        out.push_back({std::move(s2), std::move(r2)});
        return out;
    }
    const double a = kSStableAlpha;
    const double tt = t_prev + a * dt;
    s1.flux_coeff = a;
    s1.source_coeff = a;
    s1.flux_time = s1.source_time = s1.t_n = tt;
    s1.label = "sstable2.1";
    auto r1 = solve(s1);
    StageProblem s2;
    s2.dt = dt;
    s2.flux = qb;
    s2.source = f;
    s2.u_prev = u_prev;
    s2.flux_coeff = a;
    s2.source_coeff = a;
    s2.t_n = t_prev + dt;
    s2.flux_time = s2.source_time = s2.t_n;
    s2.label = "sstable2.2";
    s2.explicit_source = explicit_rate(qb, f, r1.u, tt, 1.0 - a, 1.0 - a);
    out.push_back({std::move(s1), std::move(r1)});
    auto r2 = solve(s2);
    out.push_back({std::move(s2), std::move(r2)});
    return out;
}

/// u_n = max(0, u_prev + dt F_n) for a stage with Q_n = 0 (FV); F_n evaluated at u_prev.
inline ThicknessField explicit_truncation_step(const ThicknessField& u_prev, std::span<const double> F, double dt)
{
    if (F.size() != u_prev.size()) throw std::invalid_argument("source size does not match the field");
    std::vector<double> u(u_prev.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::max(0.0, u_prev[i] + dt * F[i]);
    return u_prev.with_values(std::move(u), u_prev.time() + dt);
}

/// All stages of one step; the last stage defines the step's ledger.
inline std::vector<StageRecord> advance(const SchemeSpec& scheme, const FluxModel& q, const SourceModel& f,
                                        const ThicknessField& u_prev, double t_prev, double dt,
                                        const StageSolver& solve)
{
    scheme.validate();
    if (scheme.kind == SchemeKind::theta) {
        auto s = theta_stage(scheme.theta, q, f, u_prev, t_prev, dt);
        auto r = solve(s);
        std::vector<StageRecord> out;
        out.push_back({std::move(s), std::move(r)});
        return out;
    }
    return dirk_stages(scheme.kind, q, f, u_prev, t_prev, dt, solve);
}

}  // namespace thinlayer
