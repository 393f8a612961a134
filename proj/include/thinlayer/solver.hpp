/**
 * @file solver.hpp
 * @brief Reduced-space active-set Newton for the step NCP, plus post-solve certificates.
 *
 *   u_i >= 0,   r_i(u) >= 0,   u_i r_i(u) = 0
 *
 * Each iteration freezes the active set {u_i = 0, r_i > 0}, solves the Newton
 * system on the remaining indices, projects onto u >= 0 and backtracks on
 * ||min(u, r)||_2.  Active entries stay exactly zero.
 */
#pragma once

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlayer/discretization.hpp"

namespace thinlayer {

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 200;
    int max_polish = 3;  ///< extra Newton steps after convergence, kept only while they improve the solution
};

struct SolveReport {
    std::string label;
    int iterations = 0;
    int polish_steps = 0;
    double measure = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    std::vector<int> active;
    bool converged = false;

    std::size_t active_set_size() const { return active.size(); }
    std::string log_line() const
    {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s iterations=%d measure=%.3e active=%zu converged=%s", label.c_str(),
                      iterations, measure, active.size(), converged ? "yes" : "no");
        return buf;
    }
};

class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, ThicknessField last, SolveReport report)
        : std::runtime_error(what), last_(std::move(last)), report_(std::move(report))
    {
    }
    const ThicknessField& last_iterate() const { return last_; }
    const SolveReport& report() const { return report_; }

private:
    ThicknessField last_;
    SolveReport report_;
};

struct SolveResult {
    ThicknessField u;
    SolveReport report;
    std::vector<double> residual;
};

namespace detail {

inline double inf_norm(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// max_i e_i / max(1, ||r||_inf), e_i bounding both the residual sign and the product.
inline double complementarity_measure(std::span<const double> u, std::span<const double> r, double* scale_out = nullptr)
{
    const double scale = std::max(1.0, inf_norm(r));
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double e;
        if (u[i] > 0.0) e = std::abs(r[i]) * std::max(1.0, u[i]);
        else e = std::max(0.0, -r[i]) + std::max(0.0, -u[i]);
        worst = std::max(worst, e);
    }
    if (scale_out) *scale_out = scale;
    return worst / scale;
}

inline double merit(std::span<const double> u, std::span<const double> r)
{
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double m = std::min(u[i], r[i]);
        s += m * m;
    }
    return std::sqrt(s);
}

inline std::size_t dry_sign_violations(std::span<const double> u, std::span<const double> r)
{
    std::size_t c = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u[i] == 0.0 && r[i] < 0.0) ++c;
    return c;
}

// Newton direction on the inactive set; zero on active entries.
inline std::optional<std::vector<double>> newton_direction(const StageProblem& s, std::span<const double> u,
                                                           std::span<const double> r,
                                                           const std::vector<char>& active)
{
    const std::size_t n = u.size();
    std::vector<int> map(n, -1);
    int m = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!active[i]) map[i] = m++;
    std::vector<double> dir(n, 0.0);
    if (m == 0) return dir;
    const SparseMatrix J = assemble_jacobian(s, u);
    std::vector<Eigen::Triplet<double>> tr;
    double diag_max = 0.0;
    for (int c = 0; c < J.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(J, c); it; ++it) {
            const int a = map[static_cast<std::size_t>(it.row())], b = map[static_cast<std::size_t>(it.col())];
            if (a >= 0 && b >= 0) tr.emplace_back(a, b, it.value());
            if (it.row() == it.col()) diag_max = std::max(diag_max, std::abs(it.value()));
        }
    Eigen::VectorXd rhs(m);
    for (std::size_t i = 0; i < n; ++i)
        if (map[i] >= 0) rhs[map[i]] = -r[i];
    for (int attempt = 0; attempt < 2; ++attempt) {
        SparseMatrix A(m, m);
        A.setFromTriplets(tr.begin(), tr.end());
        if (attempt == 1)
            for (int i = 0; i < m; ++i) A.coeffRef(i, i) += 1e-12 * std::max(1.0, diag_max);
        A.makeCompressed();
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) continue;
        const Eigen::VectorXd x = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !x.allFinite()) continue;
        for (std::size_t i = 0; i < n; ++i)
            if (map[i] >= 0) dir[i] = x[map[i]];
        return dir;
    }
    return std::nullopt;
}

inline std::vector<double> project_step(std::span<const double> u, std::span<const double> d, double lambda)
{
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::max(0.0, u[i] + lambda * d[i]);
    return out;
}

}  // namespace detail

/// Solves the step NCP. Initial guess defaults to u_prev. Throws SolveError
/// (carrying the last iterate) when the measure does not reach tol within max_iter.
inline SolveResult solve_ncp(const StageProblem& s, const SolverOptions& opt = {},
                             std::optional<std::vector<double>> guess = std::nullopt)
{
    s.validate();
    if (!(opt.tol > 0.0) || opt.max_iter < 0) throw ParameterError("solver needs tol > 0 and max_iter >= 0");
    const std::size_t n = s.size();
    std::vector<double> u = guess ? std::move(*guess) : std::vector<double>(s.u_prev.values().begin(), s.u_prev.values().end());
    if (u.size() != n) throw std::invalid_argument("initial guess size does not match the field");
    for (double& x : u) x = std::max(0.0, x);

    SolveReport rep;
    rep.label = s.label;
    std::vector<double> r = assemble_residual(s, u);
    std::vector<char> active(n, 0);
    for (int it = 0;; ++it) {
        for (double x : r)
            if (!std::isfinite(x)) throw SolveError(s.label + ": non-finite residual", s.u_prev.with_values(u, s.t_n), rep);
        rep.measure = detail::complementarity_measure(u, r, &rep.scale);
        rep.iterations = it;
        if (rep.measure <= opt.tol) {
            rep.converged = true;
            break;
        }
        if (it >= opt.max_iter) break;
        for (std::size_t i = 0; i < n; ++i) active[i] = (u[i] == 0.0 && r[i] > 0.0) ? 1 : 0;
        auto dir = detail::newton_direction(s, u, r, active);
        if (!dir) throw SolveError(s.label + ": singular Newton system", s.u_prev.with_values(u, s.t_n), rep);
        const double phi0 = detail::merit(u, r);
        double lambda = 1.0, best_phi = std::numeric_limits<double>::infinity();
        std::vector<double> best_u, best_r;
        for (int cut = 0; cut < 30; ++cut, lambda *= 0.5) {
            auto ut = detail::project_step(u, *dir, lambda);
            auto rt = assemble_residual(s, ut);
            const double phi = detail::merit(ut, rt);
            if (std::isfinite(phi) && phi < best_phi) {
                best_phi = phi;
                best_u = std::move(ut);
                best_r = std::move(rt);
            }
            if (phi <= (1.0 - 1e-4 * lambda) * phi0) break;
        }
        if (best_u.empty()) {
            best_u = detail::project_step(u, *dir, 1.0);
            best_r = assemble_residual(s, best_u);
        }
        u = std::move(best_u);
        r = std::move(best_r);
    }
    if (rep.converged) {
        // Extra Newton steps on the converged active set: they drive wet
        // residuals to rounding level and re-wet dry entries whose residual is
        // negative (u_i = 0 there only up to the tolerance).
        for (int k = 0; k < opt.max_polish; ++k) {
            const double before = detail::merit(u, r);
            const auto neg_before = detail::dry_sign_violations(u, r);
            if (before == 0.0 && neg_before == 0) break;
            for (std::size_t i = 0; i < n; ++i) active[i] = (u[i] == 0.0 && r[i] > 0.0) ? 1 : 0;
            auto dir = detail::newton_direction(s, u, r, active);
            if (!dir) break;
            auto ut = detail::project_step(u, *dir, 1.0);
            auto rt = assemble_residual(s, ut);
            double sc = 1.0;
            const double meas = detail::complementarity_measure(ut, rt, &sc);
            const auto neg_after = detail::dry_sign_violations(ut, rt);
            const double after = detail::merit(ut, rt);
            const bool better = neg_after < neg_before || (neg_after == neg_before && after < before);
            if (!(meas <= opt.tol) || !better) break;
            u = std::move(ut);
            r = std::move(rt);
            rep.measure = meas;
            rep.scale = sc;
            ++rep.polish_steps;
        }
    }
    rep.active.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (u[i] == 0.0) rep.active.push_back(static_cast<int>(i));
    auto field = s.u_prev.with_values(u, s.t_n);
    if (!rep.converged) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: no convergence in %d iterations (measure %.3e > tol %.1e)", s.label.c_str(),
                      opt.max_iter, rep.measure, opt.tol);
        throw SolveError(buf, std::move(field), rep);
    }
    return {std::move(field), std::move(rep), std::move(r)};
}

// --- certificates ----------------------------------------------------------

struct ComplementarityCertificate {
    double min_u = 0.0;
    double min_residual = 0.0;
    double max_product = 0.0;
    double scale = 1.0;
    bool nonnegative = true;
    bool residual_sign = true;
    bool product = true;
    bool passed() const { return nonnegative && residual_sign && product; }
};

/// u >= -1e-12, r >= -tol*scale, |u r| <= tol*scale, scale = max(1, ||r||_inf).
inline ComplementarityCertificate verify_complementarity(std::span<const double> u, std::span<const double> r,
                                                         double tol = 1e-10)
{
    ComplementarityCertificate c;
    c.scale = std::max(1.0, detail::inf_norm(r));
    c.min_u = u.empty() ? 0.0 : *std::min_element(u.begin(), u.end());
    c.min_residual = r.empty() ? 0.0 : *std::min_element(r.begin(), r.end());
    for (std::size_t i = 0; i < u.size(); ++i) c.max_product = std::max(c.max_product, std::abs(u[i] * r[i]));
    c.nonnegative = c.min_u >= -1e-12;
    c.residual_sign = c.min_residual >= -tol * c.scale;
    c.product = c.max_product <= tol * c.scale;
    return c;
}

struct InteriorCellReport {
    int index = 0;
    bool wet = false;
    double value = 0.0;  ///< wet: |residual|; dry: u_prev + dt F - dt div Q (must be <= 0)
    bool flagged = false;
};

struct InteriorReport {
    std::vector<InteriorCellReport> cells;
    std::size_t flagged = 0;
    bool passed() const { return flagged == 0; }
};

/// Strong-form checks after a solve: the cell balance holds on wet cells, and
/// dry cells satisfy the sign condition u_prev + dt F_n - dt div Q_n <= tol.
inline InteriorReport check_interior_pde_residual(const ThicknessField& u, const StageProblem& s, double tol = 1e-10)
{
    InteriorReport rep;
    const auto r = assemble_residual(s, u.values());
    const double scale = std::max(1.0, detail::inf_norm(r));
    const auto q = assemble_edge_fluxes(s, u.values());
    const auto div = discrete_divergence(s.mesh(), q);
    const auto up = s.u_prev.values();
    for (std::size_t i = 0; i < u.size(); ++i) {
        InteriorCellReport c;
        c.index = static_cast<int>(i);
        c.wet = u[i] > 0.0;
        if (c.wet) {
            c.value = std::abs(r[i]) / s.mesh().cells()[i].area;
            c.flagged = std::abs(r[i]) > tol * scale;
        } else {
            c.value = up[i] + s.dt * stage_source(s, u.values(), static_cast<int>(i)) - s.dt * div[i];
            c.flagged = c.value > tol * scale;
        }
        rep.flagged += c.flagged ? 1 : 0;
        rep.cells.push_back(c);
    }
    return rep;
}

struct MonotonicityReport {
    std::size_t samples = 0;
    std::size_t degenerate = 0;  ///< pairs with A(u) = A(v) or u = v, skipped
    double min_inner = std::numeric_limits<double>::infinity();
    double min_relative = std::numeric_limits<double>::infinity();  ///< min of inner / scale
    bool transformed = false;  ///< checked in the power-transformed variable
    bool source_dependent = false;
    std::vector<double> witness_u, witness_v;  ///< pair attaining min_relative
    bool passed() const { return min_relative >= -1e-10; }
};

namespace detail {

inline std::vector<double> random_admissible(std::mt19937_64& rng, const Mesh& mesh, double amp)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> v(mesh.size());
    if (U(rng) < 0.5) {
        for (double& x : v) x = U(rng) < 0.2 ? 0.0 : amp * U(rng);
    } else {
        const double a = U(rng), b = 6.0 * U(rng), c = 6.0 * U(rng), off = U(rng) - 0.3;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point x = mesh.cells()[i].centroid;
            v[i] = std::max(0.0, amp * (off + a * std::cos(b * x[0] + c * x[1])));
        }
    }
    return v;
}

}  // namespace detail

/// Samples <A(u) - A(v), u - v> over random admissible pairs, using the
/// assembled residual as A. Doubly nonlinear operators with r > 0 on FV are
/// checked through the substitution u = w^m, where the operator is a
/// p-Laplacian plus the increasing zeroth-order term w^m.
inline MonotonicityReport check_monotonicity(const StageProblem& stage, std::size_t n_samples, std::uint64_t seed,
                                             double amplitude = 2.0)
{
    MonotonicityReport rep;
    rep.source_dependent = !stage.source.thickness_independent;
    StageProblem s = stage;
    std::optional<PowerTransform> pt;
    if (const auto* d = stage.flux.get_if<FluxModel::DoublyNonlinear>();
        d && d->r > 0.0 && stage.backend() == Backend::fv) {
        pt = power_transform_params(d->k, d->r, d->p);
        s.flux = FluxModel::plaplacian(pt->K, d->p);
        rep.transformed = true;
    }
    auto A = [&](const std::vector<double>& w) {
        auto r = assemble_residual(s, w);
        if (pt) {
            for (std::size_t i = 0; i < w.size(); ++i)
                r[i] += s.mesh().cells()[i].area * (pt->to_thickness(w[i]) - w[i]);
        }
        return r;
    };
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const auto u = detail::random_admissible(rng, s.mesh(), amplitude);
        const auto v = detail::random_admissible(rng, s.mesh(), amplitude);
        const auto ru = A(u), rv = A(v);
        double inner = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            inner += (ru[i] - rv[i]) * (u[i] - v[i]);
            scale += std::abs(ru[i] - rv[i]) * std::abs(u[i] - v[i]);
        }
        ++rep.samples;
        if (!(scale > 0.0)) {
            ++rep.degenerate;
            continue;
        }
        const double rel = inner / scale;
        rep.min_inner = std::min(rep.min_inner, inner);
        if (rel < rep.min_relative) {
            rep.min_relative = rel;
            rep.witness_u = u;
            rep.witness_v = v;
        }
    }
    return rep;
}

}  // namespace thinlayer
