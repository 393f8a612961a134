#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "thinlayer/thinlayer.hpp"

namespace thinlayer::testing {

// Linear diffusion on (0,1), 20 FV cells, no-flow ends. cos(pi x_j) is an
// eigenvector of the discrete operator with eigenvalue lam_h, so
// u_j(t) = 2 + cos(pi x_j) sin(t + 1) solves the semi-discrete system exactly
// and only the time error remains.
inline double mms_error(const SchemeSpec& scheme, int steps, int cells = 20)
{
    constexpr double pi = std::numbers::pi;
    const double h = 1.0 / cells;
    const double lam = (2.0 - 2.0 * std::cos(pi * h)) / (h * h);
    const auto mesh = std::make_shared<const Mesh>(build_interval_mesh(0.0, 1.0, cells));
    const SourceModel f{"manufactured",
                        [lam](double, const Point& x, double t) {
                            return std::cos(pi * x[0]) * (std::cos(t + 1.0) + lam * std::sin(t + 1.0));
                        },
                        true};
    const auto q = FluxModel::plaplacian(1.0, 2.0);
    auto exact = [&](double t) {
        return ThicknessField::sample(
            mesh, Backend::fv, [t](const Point& x) { return 2.0 + std::cos(pi * x[0]) * std::sin(t + 1.0); }, t);
    };
    auto u = exact(0.0);
    const double dt = 1.0 / steps;
    const auto solve = default_stage_solver();
    for (int n = 0; n < steps; ++n) u = advance(scheme, q, f, u, n * dt, dt, solve).back().result.u;
    const auto e = exact(1.0);
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(u[i] - e[i]));
    return err;
}

// Least-squares slope of log(error) against log(dt) for dt = 1/10 ... 1/160.
inline double observed_order(const SchemeSpec& scheme)
{
    std::vector<double> x, y;
    for (int steps : {10, 20, 40, 80, 160}) {
        x.push_back(std::log(1.0 / steps));
        y.push_back(std::log(mms_error(scheme, steps)));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace thinlayer::testing
