/**
 * @file flux.hpp
 * @brief Flux families, climate sources, and a-priori time-step bounds.
 *
 * Local families (evaluated from grad u, u and x):
 *   p-Laplacian        q = -k |grad u|^{p-2} grad u
 *   doubly nonlinear   q = -k u^r |grad u|^{p-2} grad u
 *   advective          q = -eps |grad u|^{p-2} grad u + X(x) u
 * Nonlocal family (evaluated from the whole field):
 *   q(x) = int G(x,y) u(y) dy - int K(x,y) grad u(y) dy
 *
 * All families are time independent; time enters only through the source and
 * through the stage coefficients built by the time-stepping schemes.
 */
#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "thinlayer/field.hpp"
#include "thinlayer/inequalities.hpp"
#include "thinlayer/mesh.hpp"

namespace thinlayer {

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConstraintViolation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_finite(const Point& g, const char* what)
{
    if (!std::isfinite(g[0]) || !std::isfinite(g[1])) throw NumericError(std::string(what) + ": non-finite gradient");
}

// |g|^{p-2} g with the zero-flux convention at g = 0.
inline Point power_gradient(double p, const Point& grad)
{
    const double n = norm(grad);
    if (n == 0.0) return {0.0, 0.0};
    return std::pow(n, p - 2.0) * grad;
}

}  // namespace detail

// --- pointwise formulas ---------------------------------------------------

inline Point eval_plaplacian(double k, double p, const Point& grad)
{
    if (!(k > 0.0) || !(p > 1.0) || !std::isfinite(p)) throw ParameterError("p-Laplacian needs k > 0 and 1 < p < inf");
    detail::require_finite(grad, "eval_plaplacian");
    return -k * detail::power_gradient(p, grad);
}

inline Point eval_doubly_nonlinear(double k, double r, double p, double v, const Point& grad)
{
    if (!(k > 0.0) || !(r >= 0.0) || !(p > 1.0) || !std::isfinite(p))
        throw ParameterError("doubly nonlinear flux needs k > 0, r >= 0, 1 < p < inf");
    if (v < 0.0) throw ConstraintViolation("doubly nonlinear flux evaluated at negative thickness");
    detail::require_finite(grad, "eval_doubly_nonlinear");
    if (v == 0.0) return {0.0, 0.0};
    return -(k * std::pow(v, r)) * detail::power_gradient(p, grad);
}

/// `velocity` is X(x) at the evaluation point.
inline Point eval_advective(const Point& velocity, double eps, double p, double v, const Point& grad)
{
    if (!(eps >= 0.0) || !(p > 1.0)) throw ParameterError("advective flux needs eps >= 0 and p > 1");
    if (v < 0.0) throw ConstraintViolation("advective flux evaluated at negative thickness");
    detail::require_finite(grad, "eval_advective");
    Point q = v * velocity;
    if (eps > 0.0) q = q + (-eps) * detail::power_gradient(p, grad);
    return q;
}

/// Change of variables u = w^m that turns the doubly nonlinear flux into a p-Laplacian in w.
struct PowerTransform {
    double m = 1.0;  ///< (p-1)/(r+p-1)
    double K = 1.0;  ///< k m^{p-1}
    double p = 2.0;

    double to_thickness(double w) const { return std::pow(w, m); }
    double from_thickness(double u) const { return std::pow(u, 1.0 / m); }
    /// Zeroth-order term w^m - dt F - u_prev of the transformed problem.
    double zeroth_order(double w, double dt, double source, double u_prev) const
    {
        return std::pow(w, m) - dt * source - u_prev;
    }
};

inline PowerTransform power_transform_params(double k, double r, double p)
{
    if (!(k > 0.0) || !(r >= 0.0) || !(p > 1.0) || !std::isfinite(p))
        throw ParameterError("power transform needs k > 0, r >= 0, 1 < p < inf");
    const double m = (p - 1.0) / (r + p - 1.0);
    return {m, k * std::pow(m, p - 1.0), p};
}

// --- velocity fields and kernels -----------------------------------------

struct VelocityField {
    std::string name = "zero";
    std::function<Point(const Point&)> value = [](const Point&) { return Point{0.0, 0.0}; };
    std::function<double(const Point&)> divergence = [](const Point&) { return 0.0; };

    static VelocityField uniform(Point c)
    {
        return {"uniform", [c](const Point&) { return c; }, [](const Point&) { return 0.0; }};
    }
    /// X(x) = -c (x - center); divergence -c d.
    static VelocityField converging(double c, int dim, Point center = {0.0, 0.0})
    {
        return {"converging", [c, center](const Point& x) { return (-c) * (x - center); },
                [c, dim](const Point&) { return -c * dim; }};
    }
    /// Solid-body rotation about `center`; divergence free.
    static VelocityField rotation(double c, Point center)
    {
        return {"rotation", [c, center](const Point& x) { return Point{-c * (x[1] - center[1]), c * (x[0] - center[0])}; },
                [](const Point&) { return 0.0; }};
    }
    VelocityField plus(const VelocityField& o) const
    {
        auto a = value, b = o.value;
        auto da = divergence, db = o.divergence;
        return {name + "+" + o.name, [a, b](const Point& x) { return a(x) + b(x); },
                [da, db](const Point& x) { return da(x) + db(x); }};
    }
};

/// Row-major n-by-n samples at cell centroids: G has one matrix per component.
struct SampledKernels {
    std::size_t n = 0;
    int dim = 1;
    std::array<std::vector<double>, 2> G;
    std::vector<double> K;
    const Mesh* mesh = nullptr;  ///< mesh the samples belong to (identity only)

    double g(int comp, std::size_t i, std::size_t j) const { return G[static_cast<std::size_t>(comp)][i * n + j]; }
    double k(std::size_t i, std::size_t j) const { return K[i * n + j]; }
};

struct KernelFunctions {
    std::string name = "zero";
    std::function<Point(const Point&, const Point&)> G = [](const Point&, const Point&) { return Point{0.0, 0.0}; };
    std::function<double(const Point&, const Point&)> K = [](const Point&, const Point&) { return 0.0; };
};

inline SampledKernels sample_kernels(const KernelFunctions& fns, const Mesh& mesh)
{
    SampledKernels s;
    s.n = mesh.size();
    s.dim = mesh.dimension();
    s.mesh = &mesh;
    for (auto& g : s.G) g.assign(s.n * s.n, 0.0);
    s.K.assign(s.n * s.n, 0.0);
    const auto cells = mesh.cells();
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < s.n; ++j) {
            const Point g = fns.G(cells[i].centroid, cells[j].centroid);
            s.G[0][i * s.n + j] = g[0];
            s.G[1][i * s.n + j] = g[1];
            s.K[i * s.n + j] = fns.K(cells[i].centroid, cells[j].centroid);
        }
    }
    return s;
}

/// Whitespace-separated dense matrix with `n` rows of `n` entries.
inline std::vector<double> read_dense_matrix(const std::string& path, std::size_t n)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kernel matrix file '" + path + "'");
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw std::runtime_error("kernel matrix file '" + path + "': non-numeric entry");
    if (out.size() != n * n)
        throw std::runtime_error("kernel matrix file '" + path + "' has " + std::to_string(out.size()) +
                                 " entries, mesh needs " + std::to_string(n * n));
    return out;
}

// --- flux model -----------------------------------------------------------

enum class FluxFamily { none, plaplacian, doubly_nonlinear, advective, nonlocal, custom };

inline const char* to_string(FluxFamily f)
{
    switch (f) {
        case FluxFamily::none: return "none";
        case FluxFamily::plaplacian: return "p-laplacian";
        case FluxFamily::doubly_nonlinear: return "doubly-nonlinear";
        case FluxFamily::advective: return "advective";
        case FluxFamily::nonlocal: return "nonlocal";
        case FluxFamily::custom: return "custom";
    }
    return "?";
}

class FluxModel {
public:
    struct None {};
    struct PLaplacian { double k, p; };
    struct DoublyNonlinear { double k, r, p; };
    struct Advective { double eps, p; VelocityField velocity; };
    struct Nonlocal {
        KernelFunctions kernels;
        double delta;
        std::shared_ptr<const SampledKernels> sampled;  ///< optional precomputed samples
    };
    struct Custom { std::string name; std::function<Point(const Point&, double, const Point&)> q; };

    FluxModel() = default;

    static FluxModel none() { return FluxModel(None{}); }
    static FluxModel plaplacian(double k, double p)
    {
        if (!(k > 0.0) || !(p > 1.0) || !std::isfinite(p)) throw ParameterError("p-Laplacian needs k > 0 and 1 < p < inf");
        return FluxModel(PLaplacian{k, p});
    }
    static FluxModel doubly_nonlinear(double k, double r, double p)
    {
        if (!(k > 0.0) || !(r >= 0.0) || !(p > 1.0) || !std::isfinite(p))
            throw ParameterError("doubly nonlinear flux needs k > 0, r >= 0, 1 < p < inf");
        return FluxModel(DoublyNonlinear{k, r, p});
    }
    /// Porous medium: r = gamma - 1, p = 2.
    static FluxModel porous_medium(double k, double gamma) { return doubly_nonlinear(k, gamma - 1.0, 2.0); }
    static FluxModel advective(VelocityField X, double eps, double p = 2.0)
    {
        if (!(eps >= 0.0) || !(p > 1.0) || !std::isfinite(p)) throw ParameterError("advective flux needs eps >= 0, 1 < p < inf");
        return FluxModel(Advective{eps, p, std::move(X)});
    }
    static FluxModel nonlocal(KernelFunctions kernels, double delta,
                              std::shared_ptr<const SampledKernels> sampled = nullptr)
    {
        if (!(delta > 0.0)) throw ParameterError("nonlocal flux needs a coercivity constant delta > 0");
        return FluxModel(Nonlocal{std::move(kernels), delta, std::move(sampled)});
    }
    static FluxModel custom(std::string name, std::function<Point(const Point&, double, const Point&)> q)
    {
        return FluxModel(Custom{std::move(name), std::move(q)});
    }

    FluxFamily family() const
    {
        return static_cast<FluxFamily>(std::array<int, 6>{0, 1, 2, 3, 4, 5}[impl_.index()]);
    }
    bool is_local() const { return family() != FluxFamily::nonlocal; }
    bool is_zero() const { return family() == FluxFamily::none; }
    std::string name() const
    {
        switch (family()) {
            case FluxFamily::none: return "none";
            case FluxFamily::plaplacian: return "p-laplacian";
            case FluxFamily::doubly_nonlinear: return "doubly-nonlinear";
            case FluxFamily::advective: return "advective";
            case FluxFamily::nonlocal: return "nonlocal";
            case FluxFamily::custom: return as<Custom>().name;
        }
        return "?";
    }
    /// Exponent p of the diffusive part (2 when there is none).
    double p() const
    {
        if (auto* a = std::get_if<PLaplacian>(&impl_)) return a->p;
        if (auto* b = std::get_if<DoublyNonlinear>(&impl_)) return b->p;
        if (auto* c = std::get_if<Advective>(&impl_)) return c->p;
        return 2.0;
    }

    template <class T> const T& as() const { return std::get<T>(impl_); }
    template <class T> const T* get_if() const { return std::get_if<T>(&impl_); }

    /// q(grad, v, x) for local families.
    Point evaluate(const Point& grad, double v, const Point& x) const
    {
        switch (family()) {
            case FluxFamily::none: return {0.0, 0.0};
            case FluxFamily::plaplacian: {
                const auto& m = as<PLaplacian>();
                return eval_plaplacian(m.k, m.p, grad);
            }
            case FluxFamily::doubly_nonlinear: {
                const auto& m = as<DoublyNonlinear>();
                return eval_doubly_nonlinear(m.k, m.r, m.p, v, grad);
            }
            case FluxFamily::advective: {
                const auto& m = as<Advective>();
                return eval_advective(m.velocity.value(x), m.eps, m.p, v, grad);
            }
            case FluxFamily::custom: return as<Custom>().q(grad, v, x);
            case FluxFamily::nonlocal: break;
        }
        throw std::logic_error("pointwise evaluation of a nonlocal flux");
    }

    /// Kernel samples for `mesh`, reusing the stored ones when they match.
    std::shared_ptr<const SampledKernels> kernels_on(const Mesh& mesh) const
    {
        const auto& m = as<Nonlocal>();
        if (m.sampled && m.sampled->mesh == &mesh) return m.sampled;
        if (m.sampled && m.sampled->n == mesh.size() && m.sampled->mesh == nullptr) {
            auto copy = std::make_shared<SampledKernels>(*m.sampled);
            copy->mesh = &mesh;
            return copy;
        }
        return std::make_shared<const SampledKernels>(sample_kernels(m.kernels, mesh));
    }

    /// Copy with kernel samples attached for `mesh` (no-op for local families).
    FluxModel bound_to(const Mesh& mesh) const
    {
        if (family() != FluxFamily::nonlocal) return *this;
        auto m = as<Nonlocal>();
        m.sampled = kernels_on(mesh);
        return FluxModel(std::move(m));
    }

private:
    using Impl = std::variant<None, PLaplacian, DoublyNonlinear, Advective, Nonlocal, Custom>;
    explicit FluxModel(Impl impl) : impl_(std::move(impl)) {}
    Impl impl_ = None{};
};

// --- source ---------------------------------------------------------------

struct SourceModel {
    std::string name = "zero";
    std::function<double(double v, const Point& x, double t)> f = [](double, const Point&, double) { return 0.0; };
    bool thickness_independent = true;

    double operator()(double v, const Point& x, double t) const { return f(v, x, t); }

    static SourceModel zero() { return {}; }
    static SourceModel constant(double value)
    {
        return {"constant", [value](double, const Point&, double) { return value; }, true};
    }
    /// f = a - b x_1
    static SourceModel linear(double a, double b)
    {
        return {"linear", [a, b](double, const Point& x, double) { return a - b * x[0]; }, true};
    }
    /// f = a - b |x - center|
    static SourceModel radial(double a, double b, Point center)
    {
        return {"radial", [a, b, center](double, const Point& x, double) { return a - b * norm(x - center); }, true};
    }
    /// f = value for x_1 < x_end, 0 otherwise
    static SourceModel step(double value, double x_end)
    {
        return {"step", [value, x_end](double, const Point& x, double) { return x[0] < x_end ? value : 0.0; }, true};
    }
};

// --- cell gradients and the nonlocal flux ----------------------------------

/// Axis-wise difference quotient at cell j using the neighbours across each
/// axis-aligned edge: central when both exist, one-sided otherwise.
inline Point cell_gradient(const Mesh& mesh, std::span<const double> u, int j)
{
    Point g{0.0, 0.0};
    const double uj = u[static_cast<std::size_t>(j)];
    for (int axis = 0; axis < mesh.dimension(); ++axis) {
        double up = 0.0, um = 0.0, dp = 0.0, dm = 0.0;
        bool hp = false, hm = false;
        for (const auto& e : mesh.edges_of(j)) {
            const double nc = e.normal[static_cast<std::size_t>(axis)];
            if (nc > 0.5) {
                hp = true;
                up = u[static_cast<std::size_t>(e.k)];
                dp = e.distance;
            } else if (nc < -0.5) {
                hm = true;
                um = u[static_cast<std::size_t>(e.k)];
                dm = e.distance;
            }
        }
        double gx = 0.0;
        if (hp && hm) gx = (up - um) / (dp + dm);
        else if (hp) gx = (up - uj) / dp;
        else if (hm) gx = (uj - um) / dm;
        g[static_cast<std::size_t>(axis)] = gx;
    }
    return g;
}

/// Cell-centered nonlocal flux vectors, midpoint quadrature over cells:
/// Q_i = sum_j [G(x_i,y_j) u_j - K(x_i,y_j) grad u_j] |omega_j|.
inline std::vector<Point> nonlocal_cell_fluxes(const SampledKernels& s, const Mesh& mesh, std::span<const double> u)
{
    if (s.n != mesh.size() || u.size() != mesh.size())
        throw std::invalid_argument("nonlocal kernel samples do not match the mesh");
    std::vector<Point> grad(s.n);
    for (std::size_t j = 0; j < s.n; ++j) grad[j] = cell_gradient(mesh, u, static_cast<int>(j));
    std::vector<Point> q(s.n, Point{0.0, 0.0});
    const auto cells = mesh.cells();
    for (std::size_t i = 0; i < s.n; ++i) {
        Point acc{0.0, 0.0};
        for (std::size_t j = 0; j < s.n; ++j) {
            const double w = cells[j].area;
            const double kij = s.k(i, j);
            for (int c = 0; c < mesh.dimension(); ++c) {
                const auto cc = static_cast<std::size_t>(c);
                acc[cc] += (s.g(c, i, j) * u[j] - kij * grad[j][cc]) * w;
            }
        }
        q[i] = acc;
    }
    return q;
}

/// Nonlocal flux at the centroid of the cell containing x.
inline Point eval_nonlocal(const KernelFunctions& kernels, const ThicknessField& field, const Point& x)
{
    const Mesh& mesh = field.mesh();
    if (field.backend() != Backend::fv) throw std::invalid_argument("nonlocal flux is evaluated on FV fields");
    const auto b = mesh.bounds();
    if (x[0] < b[0] || x[0] > b[1] || (mesh.dimension() == 2 && (x[1] < b[2] || x[1] > b[3])))
        throw std::invalid_argument("eval_nonlocal: point outside the mesh");
    // nearest centroid
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const double d = norm(mesh.cells()[i].centroid - x);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    const auto cells = mesh.cells();
    Point acc{0.0, 0.0};
    for (std::size_t j = 0; j < mesh.size(); ++j) {
        const Point g = kernels.G(cells[best].centroid, cells[j].centroid);
        const double k = kernels.K(cells[best].centroid, cells[j].centroid);
        const Point gu = cell_gradient(mesh, field.values(), static_cast<int>(j));
        acc = acc + cells[j].area * (field[j] * g + (-k) * gu);
    }
    return acc;
}

/// ||G||_{L^2(Omega x Omega)} by midpoint quadrature on cell pairs.
inline double kernel_l2_norm(const SampledKernels& s, const Mesh& mesh)
{
    double acc = 0.0;
    const auto cells = mesh.cells();
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j) {
            const double g0 = s.g(0, i, j), g1 = s.g(1, i, j);
            acc += (g0 * g0 + g1 * g1) * cells[i].area * cells[j].area;
        }
    return std::sqrt(acc);
}

// --- a-priori time-step bounds --------------------------------------------

/// 2 / ||(div X)_-||_inf with div X sampled at cell centroids; +inf if div X >= 0 there.
inline double advective_timestep_bound(const VelocityField& X, const Mesh& mesh)
{
    double worst = 0.0;
    for (const auto& c : mesh.cells()) worst = std::max(worst, std::max(0.0, -X.divergence(c.centroid)));
    if (worst == 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 / worst;
}

/// delta / (C(Omega,p) ||G||); +inf when G vanishes.
inline double nonlocal_timestep_bound(double delta, double g_norm, double volume, int dim, double p)
{
    if (!(delta > 0.0)) throw ParameterError("nonlocal time-step bound needs delta > 0");
    if (g_norm == 0.0) return std::numeric_limits<double>::infinity();
    return delta / (poincare_constant(volume, dim, p) * g_norm);
}

inline double nonlocal_timestep_bound(double delta, const KernelFunctions& kernels, const Mesh& mesh, double p)
{
    if (!(delta > 0.0)) throw ParameterError("nonlocal time-step bound needs delta > 0");
    const auto s = sample_kernels(kernels, mesh);
    return nonlocal_timestep_bound(delta, kernel_l2_norm(s, mesh), mesh.domain_volume(), mesh.dimension(), p);
}

// --- standard flux assumptions --------------------------------------------

struct FluxAssumptionReport {
    bool applicable = true;         ///< false for nonlocal fluxes (no pointwise form)
    std::size_t samples = 0;
    std::size_t zero_thickness_samples = 0;
    bool zero_flux_pass = true;     ///< flux vanishes where thickness vanishes
    double max_zero_flux = 0.0;
    bool continuity_pass = true;    ///< (X,z) -> Q continuous under perturbation
    double worst_continuity_ratio = 0.0;
    bool finite_pass = true;        ///< finite flux for finite input
    bool passed() const { return !applicable || (zero_flux_pass && continuity_pass && finite_pass); }
};

inline constexpr double kZeroFluxTolerance = 1e-14;

/// Samples each field at its cells: v = u_j, grad = cell gradient where u_j > 0
/// and 0 where u_j = 0 (the gradient vanishes a.e. on the zero set).
inline FluxAssumptionReport check_standard_flux_assumptions(const FluxModel& model,
                                                            std::span<const ThicknessField> fields)
{
    FluxAssumptionReport rep;
    if (!model.is_local()) {
        rep.applicable = false;
        return rep;
    }
    for (const auto& f : fields) {
        const Mesh& mesh = f.mesh();
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double v = f[j];
            const Point x = mesh.cells()[j].centroid;
            const Point g = v > 0.0 ? cell_gradient(mesh, f.values(), static_cast<int>(j)) : Point{0.0, 0.0};
            ++rep.samples;
            const Point q = model.evaluate(g, v, x);
            if (!std::isfinite(q[0]) || !std::isfinite(q[1])) rep.finite_pass = false;
            if (v == 0.0) {
                ++rep.zero_thickness_samples;
                rep.max_zero_flux = std::max(rep.max_zero_flux, norm(q));
            }
            // continuity: perturb (X,z) along a fixed direction with shrinking size
            const Point dir{0.6, mesh.dimension() == 2 ? 0.8 : 0.0};
            double coarse = 0.0, fine = 0.0;
            for (double eps : {1e-2, 1e-10}) {
                const Point qe = model.evaluate(g + eps * dir, v + eps, x);
                const double d = norm(qe - q);
                (eps > 1e-5 ? coarse : fine) = d;
            }
            if (!std::isfinite(coarse) || !std::isfinite(fine)) {
                rep.finite_pass = false;
                continue;
            }
            const bool tiny = fine <= 1e-8 * (1.0 + norm(q));
            const double ratio = coarse > 0.0 ? fine / coarse : (fine > 0.0 ? 1.0 : 0.0);
            rep.worst_continuity_ratio = std::max(rep.worst_continuity_ratio, tiny ? 0.0 : ratio);
            if (!tiny && ratio > 0.5) rep.continuity_pass = false;
        }
    }
    rep.zero_flux_pass = rep.max_zero_flux <= kZeroFluxTolerance;
    return rep;
}

}  // namespace thinlayer
