/**
 * @file discretization.hpp
 * @brief Two-point edge fluxes, discrete divergence, and the cell-wise residual with its Jacobian.
 *
 * Edge fluxes are computed once per undirected edge, in the orientation j < k,
 * and stored negated for the twin, so interior cancellation is exact.
 */
#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "thinlayer/stage.hpp"

namespace thinlayer {

/// Regularization floor for |g| and for the edge thickness, used in Jacobians only.
inline constexpr double kJacobianFloor = 1e-12;

struct EdgeFlux {
    double q = 0.0;      ///< Q^{(j,k)}, normal flux per unit edge length
    double dq_dj = 0.0;
    double dq_dk = 0.0;
};

namespace detail {

inline double signed_power(double g, double p)
{
    if (g == 0.0) return 0.0;
    return std::pow(std::abs(g), p - 2.0) * g;
}

inline double signed_power_slope(double g, double p)
{
    return (p - 1.0) * std::pow(std::max(std::abs(g), kJacobianFloor), p - 2.0);
}

}  // namespace detail

/// Normal flux across edge e (outward from e.j) for a local family, scaled by `coeff`.
/// Gradient (u_k - u_j)/d along the normal, edge thickness the mean, advection upwinded.
inline EdgeFlux two_point_flux(const FluxModel& model, double coeff, const Edge& e, double uj, double uk,
                               bool derivs = true)
{
    EdgeFlux f;
    const double d = e.distance;
    const double g = (uk - uj) / d;
    const double vb = 0.5 * (uj + uk);
    switch (model.family()) {
        case FluxFamily::none: return f;
        case FluxFamily::plaplacian: {
            const auto& m = model.as<FluxModel::PLaplacian>();
            f.q = -m.k * detail::signed_power(g, m.p);
            if (derivs) {
                const double s = -m.k * detail::signed_power_slope(g, m.p) / d;
                f.dq_dj = -s;
                f.dq_dk = s;
            }
            break;
        }
        case FluxFamily::doubly_nonlinear: {
            const auto& m = model.as<FluxModel::DoublyNonlinear>();
            const double vr = vb > 0.0 ? std::pow(vb, m.r) : (m.r == 0.0 ? 1.0 : 0.0);
            const double pg = detail::signed_power(g, m.p);
            f.q = -m.k * vr * pg;
            if (derivs) {
                // v^{r-1} is singular at 0 only for r < 1
                const double vb0 = std::max(vb, 0.0);
                const double vreg = m.r < 1.0 ? std::max(vb0, kJacobianFloor) : vb0;
                const double dv = m.r == 0.0 ? 0.0 : -m.k * m.r * std::pow(vreg, m.r - 1.0) * pg;
                const double dg = -m.k * vr * detail::signed_power_slope(g, m.p) / d;
                f.dq_dj = 0.5 * dv - dg;
                f.dq_dk = 0.5 * dv + dg;
            }
            break;
        }
        case FluxFamily::advective: {
            const auto& m = model.as<FluxModel::Advective>();
            const double a = dot(m.velocity.value(e.midpoint), e.normal);
            if (a > 0.0) {
                f.q = a * uj;
                f.dq_dj = a;
            } else if (a < 0.0) {
                f.q = a * uk;
                f.dq_dk = a;
            }
            if (m.eps > 0.0) {
                f.q -= m.eps * detail::signed_power(g, m.p);
                if (derivs) {
                    const double s = m.eps * detail::signed_power_slope(g, m.p) / d;
                    f.dq_dj += s;
                    f.dq_dk -= s;
                }
            }
            if (!derivs) f.dq_dj = f.dq_dk = 0.0;
            break;
        }
        case FluxFamily::custom: {
            auto eval = [&](double a, double b) {
                const double gg = (b - a) / d;
                return dot(model.evaluate(gg * e.normal, 0.5 * (a + b), e.midpoint), e.normal);
            };
            f.q = eval(uj, uk);
            if (derivs) {
                const double hj = 1e-7 * std::max(1.0, std::abs(uj));
                const double hk = 1e-7 * std::max(1.0, std::abs(uk));
                f.dq_dj = (eval(uj + hj, uk) - f.q) / hj;
                f.dq_dk = (eval(uj, uk + hk) - f.q) / hk;
            }
            break;
        }
        case FluxFamily::nonlocal: throw std::logic_error("two-point flux of a nonlocal model");
    }
    f.q *= coeff;
    f.dq_dj *= coeff;
    f.dq_dk *= coeff;
    return f;
}

/// Q^{(j,k)} for every directed edge of the control mesh, for flux `coeff * model`.
inline std::vector<double> edge_fluxes(const FluxModel& model, double coeff, const Mesh& mesh,
                                       std::span<const double> u)
{
    if (u.size() != mesh.size()) throw std::invalid_argument("field does not match the mesh");
    const auto edges = mesh.edges();
    std::vector<double> q(edges.size(), 0.0);
    if (coeff == 0.0 || model.is_zero()) return q;
    if (model.family() == FluxFamily::nonlocal) {
        const auto kern = model.kernels_on(mesh);
        const auto cq = nonlocal_cell_fluxes(*kern, mesh, u);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto& e = edges[i];
            if (e.j > e.k) continue;
            const auto j = static_cast<std::size_t>(e.j), k = static_cast<std::size_t>(e.k);
            const double v = coeff * dot(0.5 * (cq[j] + cq[k]), e.normal);
            q[i] = v;
            q[e.twin] = -v;
        }
        return q;
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.j > e.k) continue;
        const double v = two_point_flux(model, coeff, e, u[static_cast<std::size_t>(e.j)],
                                        u[static_cast<std::size_t>(e.k)], false).q;
        q[i] = v;
        q[e.twin] = -v;
    }
    return q;
}

inline std::vector<double> assemble_edge_fluxes(const StageProblem& s, std::span<const double> u)
{
    return edge_fluxes(s.flux, s.flux_coeff, s.mesh(), u);
}

/// (1/|omega_i|) sum_k Q^{(i,k)} l_(i,k).
inline std::vector<double> discrete_divergence(const Mesh& mesh, std::span<const double> q)
{
    std::vector<double> div(mesh.size(), 0.0);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const auto es = mesh.edges_of(static_cast<int>(i));
        const std::size_t b = mesh.edge_begin(static_cast<int>(i));
        double s = 0.0;
        for (std::size_t t = 0; t < es.size(); ++t) s += q[b + t] * es[t].length;
        div[i] = s / mesh.cells()[i].area;
    }
    return div;
}

/// Divergence of q(u) (unit coefficient) on the field's control mesh.
inline std::vector<double> flux_divergence(const FluxModel& model, const ThicknessField& u)
{
    return discrete_divergence(u.mesh(), edge_fluxes(model, 1.0, u.mesh(), u.values()));
}

/// Cell-wise residual of the step problem:
///   FV : |w_i|(u_i - u_prev_i - dt F_i) + dt sum_k Q^{(i,k)} l
///   FVE: int_{w_i}(u^h - u_prev^h) - dt |w_i| F_i + dt sum_k Q^{(i,k)} l   (P1 integrals exact)
inline std::vector<double> assemble_residual(const StageProblem& s, std::span<const double> u)
{
    const Mesh& mesh = s.mesh();
    if (u.size() != mesh.size()) throw std::invalid_argument("field does not match the stage mesh");
    const auto q = assemble_edge_fluxes(s, u);
    const auto up = s.u_prev.values();
    std::vector<double> r(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const int ii = static_cast<int>(i);
        const double area = mesh.cells()[i].area;
        const double F = stage_source(s, u, ii);
        double flux = 0.0;
        const std::size_t b = mesh.edge_begin(ii);
        const auto es = mesh.edges_of(ii);
        for (std::size_t t = 0; t < es.size(); ++t) flux += q[b + t] * es[t].length;
        if (s.backend() == Backend::fv)
            r[i] = area * (u[i] - up[i] - s.dt * F) + s.dt * flux;
        else
            r[i] = control_mass(mesh, Backend::fve, u, ii) - control_mass(mesh, Backend::fve, up, ii) -
                   s.dt * area * F + s.dt * flux;
    }
    return r;
}

inline std::vector<double> assemble_residual(const StageProblem& s, const ThicknessField& u)
{
    return assemble_residual(s, u.values());
}

using SparseMatrix = Eigen::SparseMatrix<double>;

/// d residual / d u. Analytic for local families; finite differences for
/// nonlocal fluxes and thickness-dependent sources.
inline SparseMatrix assemble_jacobian(const StageProblem& s, std::span<const double> u)
{
    const Mesh& mesh = s.mesh();
    const std::size_t n = mesh.size();
    std::vector<Eigen::Triplet<double>> tr;
    tr.reserve(n + mesh.edges().size() * 2);
    const auto cells = mesh.cells();
    for (std::size_t i = 0; i < n; ++i) {
        const int ii = static_cast<int>(i);
        if (s.backend() == Backend::fv) {
            tr.emplace_back(ii, ii, cells[i].area);
        } else {
            for (const auto& e : mesh.edges_of(ii)) {
                tr.emplace_back(ii, ii, 3.0 * e.distance / 8.0);
                tr.emplace_back(ii, e.k, e.distance / 8.0);
            }
        }
        if (!s.source.thickness_independent && s.source_coeff != 0.0) {
            const double v = quadrature_thickness(mesh, s.backend(), u, ii);
            const double h = 1e-7 * std::max(1.0, std::abs(v));
            const double x0 = std::max(0.0, v - h), x1 = v + h;
            const double df = (stage_source_at(s, ii, x1) - stage_source_at(s, ii, x0)) / (x1 - x0);
            const double c = -s.dt * cells[i].area * df;
            const auto w = s.backend() == Backend::fve ? detail::p1_weights(mesh, ii, cells[i].center[0])
                                                       : detail::P1Weights{};
            tr.emplace_back(ii, ii, (1.0 - w.s) * c);
            if (w.k >= 0) tr.emplace_back(ii, w.k, w.s * c);
        }
    }
    if (s.has_flux()) {
        if (s.flux.family() == FluxFamily::nonlocal) {
            // flux part is linear in u: unit-vector columns are exact
            std::vector<double> base(n, 0.0), col(n);
            auto flux_part = [&](std::span<const double> v, std::vector<double>& out) {
                const auto q = assemble_edge_fluxes(s, v);
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    const auto es = mesh.edges_of(static_cast<int>(i));
                    const std::size_t b = mesh.edge_begin(static_cast<int>(i));
                    for (std::size_t t = 0; t < es.size(); ++t) acc += q[b + t] * es[t].length;
                    out[i] = s.dt * acc;
                }
            };
            std::vector<double> zero(n, 0.0), e(n, 0.0);
            flux_part(zero, base);
            for (std::size_t j = 0; j < n; ++j) {
                e[j] = 1.0;
                flux_part(e, col);
                e[j] = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = col[i] - base[i];
                    if (v != 0.0) tr.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
                }
            }
        } else {
            for (const auto& e : mesh.edges()) {
                if (e.j > e.k) continue;
                const auto f = two_point_flux(s.flux, s.flux_coeff, e, u[static_cast<std::size_t>(e.j)],
                                              u[static_cast<std::size_t>(e.k)], true);
                const double w = s.dt * e.length;
                tr.emplace_back(e.j, e.j, w * f.dq_dj);
                tr.emplace_back(e.j, e.k, w * f.dq_dk);
                tr.emplace_back(e.k, e.j, -w * f.dq_dj);
                tr.emplace_back(e.k, e.k, -w * f.dq_dk);
            }
        }
    }
    SparseMatrix J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    J.setFromTriplets(tr.begin(), tr.end());
    return J;
}

}  // namespace thinlayer
