/**
 * @file stage.hpp
 * @brief The single implicit time-step problem: effective flux Q_n, effective source F_n, step size.
 */
#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlayer/field.hpp"
#include "thinlayer/flux.hpp"

namespace thinlayer {

/// One NCP solve. Q_n = flux_coeff * q(., flux_time) and
/// F_n(v, x) = source_coeff * f(v, x, source_time) + explicit_source(x),
/// where explicit_source holds per-control-volume rates (already-evaluated
/// source and flux-divergence terms from earlier time levels or stages).
struct StageProblem {
    double dt = 1.0;
    double flux_coeff = 1.0;
    double flux_time = 0.0;
    double source_coeff = 1.0;
    double source_time = 0.0;
    std::vector<double> explicit_source;  ///< empty means zero
    ThicknessField u_prev;
    double t_n = 0.0;
    std::string label = "step";
    FluxModel flux;
    SourceModel source;

    const Mesh& mesh() const { return u_prev.mesh(); }
    Backend backend() const { return u_prev.backend(); }
    std::size_t size() const { return u_prev.size(); }
    bool has_flux() const { return flux_coeff != 0.0 && !flux.is_zero(); }

    void validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("stage needs dt > 0");
        if (!explicit_source.empty() && explicit_source.size() != u_prev.size())
            throw std::invalid_argument("explicit source size does not match the field");
        if (u_prev.min_value() < 0.0) throw ConstraintViolation("previous thickness has negative entries");
    }
};

namespace detail {

/// P1 interpolation inside dual cell i (1D dual meshes only): neighbour k and
/// weight s with value (1-s) u_i + s u_k at x; k = -1 when x is the node.
struct P1Weights {
    int k = -1;
    double s = 0.0;
};

inline P1Weights p1_weights(const Mesh& cv, int i, double x)
{
    const double xi = cv.cell(i).centroid[0];
    if (x == xi) return {};
    for (const auto& e : cv.edges_of(i)) {
        const double xk = cv.cell(e.k).centroid[0];
        if ((x - xi) * (xk - xi) > 0.0) return {e.k, (x - xi) / (xk - xi)};
    }
    return {};
}

inline double p1_value(const Mesh& cv, std::span<const double> u, int i, double x)
{
    const auto w = p1_weights(cv, i, x);
    const double ui = u[static_cast<std::size_t>(i)];
    if (w.k < 0) return ui;
    return (1.0 - w.s) * ui + w.s * u[static_cast<std::size_t>(w.k)];
}

}  // namespace detail

/// Thickness seen by the source quadrature in control volume i.
inline double quadrature_thickness(const Mesh& cv, Backend b, std::span<const double> u, int i)
{
    if (b == Backend::fv) return u[static_cast<std::size_t>(i)];
    return detail::p1_value(cv, u, i, cv.cell(i).center[0]);
}

/// F_n for control volume i, one-point quadrature at the cell center, thickness v there.
inline double stage_source_at(const StageProblem& s, int i, double v)
{
    double F = s.explicit_source.empty() ? 0.0 : s.explicit_source[static_cast<std::size_t>(i)];
    if (s.source_coeff != 0.0) F += s.source_coeff * s.source(v, s.mesh().cell(i).center, s.source_time);
    return F;
}

inline double stage_source(const StageProblem& s, std::span<const double> u, int i)
{
    const bool dep = !s.source.thickness_independent && s.source_coeff != 0.0;
    return stage_source_at(s, i, dep ? quadrature_thickness(s.mesh(), s.backend(), u, i) : 0.0);
}

}  // namespace thinlayer
