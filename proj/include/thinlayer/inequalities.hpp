/**
 * @file inequalities.hpp
 * @brief Pointwise and integrated p-norm inequalities, and an explicit Poincare constant.
 *
 * The checkers evaluate both sides of an inequality and report the slack, so
 * they can be fuzzed. They are also the source of C(Omega,p) used by the
 * nonlocal time-step bound.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace thinlayer {

struct PNormSample {
    double lhs = 0.0;
    double rhs = 0.0;
    double p = 2.0;
    double slack = 0.0;   ///< allowed shortfall, relative to |lhs| + |rhs|
    bool vacuous = false; ///< the inequality does not apply to this input

    /// lhs - rhs + slack; negative means a violation.
    double margin() const { return lhs - rhs + slack; }
    bool holds() const { return vacuous || margin() >= 0.0; }
};

namespace detail {

inline double vnorm(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// (|x|^{p-2} x - |y|^{p-2} y) . (x - y), with |0|^{p-2} 0 := 0.
inline double monotone_pairing(std::span<const double> x, std::span<const double> y, double p)
{
    if (x.size() != y.size()) throw std::invalid_argument("vectors of different dimension");
    const double nx = vnorm(x);
    const double ny = vnorm(y);
    const double sx = nx > 0.0 ? std::pow(nx, p - 2.0) : 0.0;
    const double sy = ny > 0.0 ? std::pow(ny, p - 2.0) : 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (sx * x[i] - sy * y[i]) * (x[i] - y[i]);
    return s;
}

inline double diff_norm(std::span<const double> x, std::span<const double> y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

}  // namespace detail

inline constexpr double kInequalitySlack = 1e-12;

/// (|x|^{p-2}x - |y|^{p-2}y).(x-y) >= 2^{2-p} |x-y|^p for p >= 2.
inline PNormSample check_pbig_inequality(std::span<const double> x, std::span<const double> y, double p)
{
    if (!(p >= 2.0) || !std::isfinite(p)) throw std::domain_error("check_pbig_inequality needs p >= 2");
    PNormSample s;
    s.p = p;
    s.lhs = detail::monotone_pairing(x, y, p);
    s.rhs = std::pow(2.0, 2.0 - p) * std::pow(detail::diff_norm(x, y), p);
    s.slack = kInequalitySlack * (std::abs(s.lhs) + std::abs(s.rhs));
    return s;
}

/// (|x|^{p-2}x - |y|^{p-2}y).(x-y) >= (p-1) |x-y|^2 (|x|+|y|)^{p-2} for 1 < p <= 2.
inline PNormSample check_psmall_inequality(std::span<const double> x, std::span<const double> y, double p)
{
    if (!(p > 1.0 && p <= 2.0)) throw std::domain_error("check_psmall_inequality needs 1 < p <= 2");
    PNormSample s;
    s.p = p;
    const double nsum = detail::vnorm(x) + detail::vnorm(y);
    if (nsum == 0.0) {
        s.vacuous = true;
        return s;
    }
    const double d = detail::diff_norm(x, y);
    s.lhs = detail::monotone_pairing(x, y, p);
    s.rhs = (p - 1.0) * d * d * std::pow(nsum, p - 2.0);
    s.slack = kInequalitySlack * (std::abs(s.lhs) + std::abs(s.rhs));
    return s;
}

/// Quadrature form of the Holder step for 1 < p <= 2:
///   sum w |u-v|^2 / (|u|+|v|)^{2-p}  >=  (sum w |u-v|^p)^{2/p} / (sum w (|u|+|v|)^p)^{(2-p)/p}.
/// `u` and `v` hold `weights.size()` points of dimension `dim`, stored contiguously.
/// Points with |u|+|v| = 0 are dropped (there |u-v| = 0 as well).
inline PNormSample check_holder_integrated(std::span<const double> u, std::span<const double> v,
                                           std::span<const double> weights, double p, std::size_t dim = 1)
{
    if (!(p > 1.0 && p <= 2.0)) throw std::domain_error("check_holder_integrated needs 1 < p <= 2");
    if (dim == 0 || u.size() != v.size() || u.size() != weights.size() * dim)
        throw std::invalid_argument("check_holder_integrated: inconsistent sample sizes");
    double left = 0.0, num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < weights.size(); ++q) {
        if (!(weights[q] > 0.0)) throw std::invalid_argument("quadrature weights must be positive");
        const auto uq = u.subspan(q * dim, dim);
        const auto vq = v.subspan(q * dim, dim);
        const double s = detail::vnorm(uq) + detail::vnorm(vq);
        if (s == 0.0) continue;
        const double d = detail::diff_norm(uq, vq);
        left += weights[q] * d * d / std::pow(s, 2.0 - p);
        num += weights[q] * std::pow(d, p);
        den += weights[q] * std::pow(s, p);
    }
    PNormSample out;
    out.p = p;
    if (den == 0.0) {
        out.vacuous = true;
        return out;
    }
    out.lhs = left;
    out.rhs = std::pow(num, 2.0 / p) / std::pow(den, (2.0 - p) / p);
    out.slack = kInequalitySlack * (std::abs(out.lhs) + std::abs(out.rhs));
    return out;
}

/// Volume of the unit ball in R^d, d in {1,2,3}.
inline double unit_ball_volume(int d)
{
    constexpr double pi = std::numbers::pi;
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(3/2) = sqrt(pi)/2
    switch (d) {
        case 1: return 2.0 * std::sqrt(pi) / (1.0 * std::sqrt(pi));
        case 2: return 2.0 * pi / (2.0 * 1.0);
        case 3: return 2.0 * std::pow(pi, 1.5) / (3.0 * std::sqrt(pi) / 2.0);
        default: throw std::domain_error("unit ball volume implemented for d = 1, 2, 3");
    }
}

/// C(Omega,p) = 1 + (|Omega| / omega_d)^{p/d}; explicit, not optimal.
inline double poincare_constant(double volume, int d, double p)
{
    if (!(volume > 0.0)) throw std::domain_error("poincare_constant needs |Omega| > 0");
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::domain_error("poincare_constant needs 1 <= p < inf");
    return 1.0 + std::pow(volume / unit_ball_volume(d), p / d);
}

// --- fuzz campaigns -------------------------------------------------------

struct FuzzSummary {
    std::uint64_t samples = 0;
    std::uint64_t violations = 0;
    std::uint64_t vacuous = 0;
    /// min over samples of (lhs - rhs) / (|lhs| + |rhs|); 1e-12 below zero is tolerated
    double worst_relative_margin = 1.0;
    bool passed() const { return violations == 0; }
};

namespace detail {

// Standard normal cubed: symmetric, heavy tailed, concentrates near zero.
inline double heavy_tailed(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    const double z = n(rng);
    return z * z * z;
}

inline void record(FuzzSummary& s, const PNormSample& r)
{
    ++s.samples;
    if (r.vacuous) {
        ++s.vacuous;
        return;
    }
    const double scale = std::abs(r.lhs) + std::abs(r.rhs);
    if (scale > 0.0) s.worst_relative_margin = std::min(s.worst_relative_margin, (r.lhs - r.rhs) / scale);
    if (!r.holds()) ++s.violations;
}

}  // namespace detail

enum class Lemma { pbig, psmall, holder };

/// Seeded campaign over d in {1,2,3}. p is drawn from [2,6] (pbig) or (1,2] (psmall, holder).
/// Holder trials use `points_per_trial` quadrature points with random positive weights.
inline FuzzSummary fuzz_inequality(Lemma lemma, std::uint64_t samples, std::uint64_t seed,
                                   std::size_t points_per_trial = 8)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dim_dist(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FuzzSummary sum;
    std::vector<double> x(3), y(3), u, v, w;
    for (std::uint64_t s = 0; s < samples; ++s) {
        const int d = dim_dist(rng);
        if (lemma == Lemma::pbig) {
            const double p = 2.0 + 4.0 * unit(rng);
            for (int i = 0; i < d; ++i) {
                x[static_cast<std::size_t>(i)] = detail::heavy_tailed(rng);
                y[static_cast<std::size_t>(i)] = detail::heavy_tailed(rng);
            }
            detail::record(sum, check_pbig_inequality(std::span(x).first(static_cast<std::size_t>(d)),
                                                      std::span(y).first(static_cast<std::size_t>(d)), p));
        } else {
            const double p = 2.0 - unit(rng);  // (1,2]
            if (lemma == Lemma::psmall) {
                for (int i = 0; i < d; ++i) {
                    x[static_cast<std::size_t>(i)] = detail::heavy_tailed(rng);
                    y[static_cast<std::size_t>(i)] = detail::heavy_tailed(rng);
                }
                detail::record(sum, check_psmall_inequality(std::span(x).first(static_cast<std::size_t>(d)),
                                                            std::span(y).first(static_cast<std::size_t>(d)), p));
            } else {
                const std::size_t n = points_per_trial;
                const auto dd = static_cast<std::size_t>(d);
                u.resize(n * dd);
                v.resize(n * dd);
                w.resize(n);
                for (std::size_t q = 0; q < n; ++q) {
                    w[q] = 0.05 + unit(rng);
                    for (std::size_t i = 0; i < dd; ++i) {
                        u[q * dd + i] = detail::heavy_tailed(rng);
                        v[q * dd + i] = detail::heavy_tailed(rng);
                    }
                }
                detail::record(sum, check_holder_integrated(u, v, w, p, dd));
            }
        }
    }
    return sum;
}

}  // namespace thinlayer
