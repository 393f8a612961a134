/**
 * @file field.hpp
 * @brief Nonnegative thickness values on the control volumes of a mesh.
 */
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlayer/mesh.hpp"

namespace thinlayer {

/// FV: cell averages on the primal mesh. FVE: P1 nodal values, conserved on the dual mesh.
enum class Backend { fv, fve };

inline const char* to_string(Backend b) { return b == Backend::fv ? "fv" : "fve"; }

inline Backend backend_from_string(const std::string& s)
{
    if (s == "fv") return Backend::fv;
    if (s == "fve") return Backend::fve;
    throw std::invalid_argument("unknown backend '" + s + "' (expected fv or fve)");
}

/// Mesh whose cells carry the unknowns for the given backend.
inline std::shared_ptr<const Mesh> control_mesh(const std::shared_ptr<const Mesh>& primal, Backend b)
{
    if (b == Backend::fv) return primal;
    if (primal->is_dual()) return primal;
    return primal->dual_ptr() ? primal->dual_ptr()
                              : throw GeometryError("FVE backend needs a 1D interval mesh");
}

class ThicknessField {
public:
    ThicknessField() = default;

    /// `mesh` is the control-volume mesh (see control_mesh()).
    ThicknessField(std::shared_ptr<const Mesh> mesh, Backend backend, std::vector<double> values, double time = 0.0)
        : backend_(backend), mesh_(std::move(mesh)), values_(std::move(values)), time_(time)
    {
        if (!mesh_) throw std::invalid_argument("thickness field without mesh");
        if (values_.size() != mesh_->size())
            throw std::invalid_argument("thickness field size " + std::to_string(values_.size()) +
                                        " does not match mesh size " + std::to_string(mesh_->size()));
        if (backend_ == Backend::fve && !mesh_->is_dual())
            throw std::invalid_argument("FVE field must live on a dual mesh");
    }

    static ThicknessField zeros(const std::shared_ptr<const Mesh>& primal, Backend b, double time = 0.0)
    {
        auto cv = control_mesh(primal, b);
        return {cv, b, std::vector<double>(cv->size(), 0.0), time};
    }

    static ThicknessField sample(const std::shared_ptr<const Mesh>& primal, Backend b,
                                 const std::function<double(const Point&)>& fn, double time = 0.0)
    {
        auto cv = control_mesh(primal, b);
        std::vector<double> v(cv->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(cv->cells()[i].centroid);
        return {cv, b, std::move(v), time};
    }

    ThicknessField with_values(std::vector<double> values, double time) const
    {
        return {mesh_, backend_, std::move(values), time};
    }

    Backend backend() const { return backend_; }
    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    bool same_layout(const ThicknessField& o) const { return backend_ == o.backend_ && mesh_ == o.mesh_; }

    /// Smallest entry; the admissible set requires this to be >= 0.
    double min_value() const
    {
        double m = 0.0;
        bool first = true;
        for (double v : values_) {
            if (first || v < m) m = v;
            first = false;
        }
        return m;
    }

    bool all_finite() const
    {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Backend backend_ = Backend::fv;
    std::shared_ptr<const Mesh> mesh_;
    std::vector<double> values_;
    double time_ = 0.0;
};

/// Mass of u inside control volume i.
///
/// FV: |omega_i| u_i. FVE: exact integral of the P1 interpolant over the dual
/// cell, which for a half dual cell of width d/2 next to node k is d (3 u_i + u_k) / 8.
inline double control_mass(const Mesh& cv, Backend b, std::span<const double> u, int i)
{
    if (b == Backend::fv) return cv.cell(i).area * u[static_cast<std::size_t>(i)];
    double m = 0.0;
    const double ui = u[static_cast<std::size_t>(i)];
    for (const auto& e : cv.edges_of(i)) m += e.distance * (3.0 * ui + u[static_cast<std::size_t>(e.k)]) / 8.0;
    return m;
}

inline std::vector<double> control_masses(const Mesh& cv, Backend b, std::span<const double> u)
{
    std::vector<double> m(cv.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = control_mass(cv, b, u, static_cast<int>(i));
    return m;
}

}  // namespace thinlayer
