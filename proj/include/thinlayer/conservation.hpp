/**
 * @file conservation.hpp
 * @brief Per-step mass ledger: mass, climate input, retreat loss, boundary leak, cell slop.
 *
 *   M_n = M_{n-1} + C_n - R_n - B_n + S_n
 *
 * Wet/dry classification is the exact zero test; the solver returns exact
 * zeros on its active set.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlayer/discretization.hpp"

namespace thinlayer {

enum class Region : unsigned char { wet, retreat, dry_dry };

struct DomainDecomposition {
    std::vector<Region> region;
    std::size_t wet = 0, retreat = 0, dry_dry = 0;

    bool is_wet(std::size_t i) const { return region[i] == Region::wet; }
    bool partitions() const { return wet + retreat + dry_dry == region.size(); }
};

inline DomainDecomposition decompose(std::span<const double> u_prev, std::span<const double> u_new)
{
    if (u_prev.size() != u_new.size()) throw std::invalid_argument("decompose: fields of different size");
    DomainDecomposition d;
    d.region.resize(u_new.size());
    for (std::size_t i = 0; i < u_new.size(); ++i) {
        Region r;
        if (u_new[i] > 0.0) r = Region::wet;
        else if (u_prev[i] > 0.0) r = Region::retreat;
        else r = Region::dry_dry;
        d.region[i] = r;
        (r == Region::wet ? d.wet : r == Region::retreat ? d.retreat : d.dry_dry)++;
    }
    return d;
}

inline DomainDecomposition decompose(const ThicknessField& u_prev, const ThicknessField& u_new)
{
    if (!u_prev.same_layout(u_new)) throw std::invalid_argument("decompose: fields on different meshes");
    return decompose(u_prev.values(), u_new.values());
}

/// FV: sum u_j |w_j|. FVE: exact integral of the P1 interpolant.
inline double total_mass(const ThicknessField& u)
{
    double m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) m += control_mass(u.mesh(), u.backend(), u.values(), static_cast<int>(i));
    return m;
}

/// dt * sum over wet control volumes of F_n |w_i|.
inline double climate_input(const StageProblem& s, const ThicknessField& u_new, const DomainDecomposition& d)
{
    double c = 0.0;
    for (std::size_t i = 0; i < u_new.size(); ++i)
        if (d.is_wet(i)) c += stage_source(s, u_new.values(), static_cast<int>(i)) * s.mesh().cells()[i].area;
    return s.dt * c;
}

/// Mass at t_{n-1} in control volumes that are dry at t_n.
inline double retreat_loss(const ThicknessField& u_prev, const DomainDecomposition& d)
{
    double r = 0.0;
    for (std::size_t i = 0; i < u_prev.size(); ++i)
        if (!d.is_wet(i)) r += control_mass(u_prev.mesh(), u_prev.backend(), u_prev.values(), static_cast<int>(i));
    return r;
}

/// dt * sum over wet -> dry edges of Q^{(j,k)} l_(j,k).
inline double boundary_leak(const Mesh& mesh, std::span<const double> edge_flux, const DomainDecomposition& d, double dt)
{
    double b = 0.0;
    const auto edges = mesh.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (d.is_wet(static_cast<std::size_t>(e.j)) && !d.is_wet(static_cast<std::size_t>(e.k)))
            b += edge_flux[i] * e.length;
    }
    return dt * b;
}

/// Mass of u_n^h inside dual cells whose node is dry; zero for FV.
inline double cell_slop(const ThicknessField& u_new, const DomainDecomposition& d)
{
    if (u_new.backend() == Backend::fv) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < u_new.size(); ++i)
        if (!d.is_wet(i)) s += control_mass(u_new.mesh(), Backend::fve, u_new.values(), static_cast<int>(i));
    return s;
}

/// dt * sum max(0, -F_n(0, x_i)) |w_i|.
inline double retreat_bound(const StageProblem& s)
{
    double b = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        b += std::max(0.0, -stage_source_at(s, static_cast<int>(i), 0.0)) * s.mesh().cells()[i].area;
    return s.dt * b;
}

struct LedgerEntry {
    int n = 0;
    double t = 0.0;
    double dt = 0.0;
    double M = 0.0, C = 0.0, R = 0.0, B = 0.0, S = 0.0;
    double balance_residual = 0.0;
    double retreat_bound = 0.0;
    std::size_t active_set_size = 0;
    double M_prev = 0.0;
    bool flagged = false;           ///< balance residual above the rounding tolerance
    bool source_caveat = false;     ///< C uses a thickness-dependent source

    double tolerance() const
    {
        return 1e-10 * (std::abs(M) + std::abs(M_prev) + std::abs(C) + std::abs(R) + std::abs(B) + std::abs(S) + 1.0);
    }
    bool retreat_within_bound() const { return R <= retreat_bound; }
};

/// Entry for step n from the previous entry's mass and this step's series.
inline LedgerEntry close_balance(const LedgerEntry& prev, double M, double C, double R, double B, double S)
{
    LedgerEntry e;
    e.n = prev.n + 1;
    e.M_prev = prev.M;
    e.M = M;
    e.C = C;
    e.R = R;
    e.B = B;
    e.S = S;
    e.balance_residual = M - (prev.M + C - R - B + S);
    e.flagged = !(std::abs(e.balance_residual) <= e.tolerance());
    return e;
}

/// Step-0 entry carrying the initial mass.
inline LedgerEntry initial_entry(const ThicknessField& u0)
{
    LedgerEntry e;
    e.n = 0;
    e.t = u0.time();
    e.M = total_mass(u0);
    e.M_prev = e.M;
    return e;
}

/// Full ledger entry for the final stage of a step.
inline LedgerEntry ledger_step(const LedgerEntry& prev, const StageProblem& s, const ThicknessField& u_new)
{
    const auto d = decompose(s.u_prev, u_new);
    const auto q = assemble_edge_fluxes(s, u_new.values());
    auto e = close_balance(prev, total_mass(u_new), climate_input(s, u_new, d), retreat_loss(s.u_prev, d),
                           boundary_leak(s.mesh(), q, d, s.dt), cell_slop(u_new, d));
    e.t = s.t_n;
    e.dt = s.dt;
    e.retreat_bound = retreat_bound(s);
    e.active_set_size = d.retreat + d.dry_dry;
    e.source_caveat = !s.source.thickness_independent && s.source_coeff != 0.0;
    return e;
}

inline const char* ledger_csv_header() { return "n,t,dt,M,C,R,B,S,balance_residual,retreat_bound,active_set_size"; }

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string ledger_csv_row(const LedgerEntry& e)
{
    std::string s = std::to_string(e.n);
    for (double v : {e.t, e.dt, e.M, e.C, e.R, e.B, e.S, e.balance_residual, e.retreat_bound}) {
        s += ',';
        s += format_double(v);
    }
    s += ',';
    s += std::to_string(e.active_set_size);
    return s;
}

inline void write_ledger_csv(std::ostream& os, std::span<const LedgerEntry> ledger)
{
    os << ledger_csv_header() << '\n';
    for (const auto& e : ledger) os << ledger_csv_row(e) << '\n';
}

}  // namespace thinlayer
