#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "thinlayer/discretization.hpp"
#include "thinlayer/timestepping.hpp"

using namespace thinlayer;

namespace {

std::shared_ptr<const Mesh> interval(int n, double a = 0.0, double b = 1.0)
{
    return std::make_shared<const Mesh>(build_interval_mesh(a, b, n));
}

std::vector<double> random_positive(std::mt19937_64& rng, std::size_t n, double lo = 0.2, double hi = 2.0)
{
    std::uniform_real_distribution<double> U(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = U(rng);
    return v;
}

// max |J - J_fd| / (1 + |J|) with central differences of the residual
double jacobian_fd_error(const StageProblem& s, const std::vector<double>& u)
{
    const auto J = Eigen::MatrixXd(assemble_jacobian(s, u));
    double worst = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        auto up = u, um = u;
        const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
        up[j] += h;
        um[j] -= h;
        const auto rp = assemble_residual(s, up), rm = assemble_residual(s, um);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double fd = (rp[i] - rm[i]) / (2.0 * h);
            const double a = J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            worst = std::max(worst, std::abs(a - fd) / (1.0 + std::abs(a)));
        }
    }
    return worst;
}

}  // namespace

TEST(PointwiseFlux, PLaplacian)
{
    const Point q = eval_plaplacian(2.0, 3.0, {3.0, 4.0});
    EXPECT_DOUBLE_EQ(q[0], -30.0);
    EXPECT_DOUBLE_EQ(q[1], -40.0);
    const Point z = eval_plaplacian(1.0, 1.5, {0.0, 0.0});
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 0.0);
    EXPECT_THROW(eval_plaplacian(1.0, 1.0, {1.0, 0.0}), ParameterError);
    EXPECT_THROW(eval_plaplacian(0.0, 2.0, {1.0, 0.0}), ParameterError);
    EXPECT_THROW(eval_plaplacian(1.0, 2.0, {std::nan(""), 0.0}), NumericError);
}

TEST(PointwiseFlux, DoublyNonlinear)
{
    const Point q = eval_doubly_nonlinear(1.5, 2.0, 2.0, 2.0, {1.0, -1.0});
    EXPECT_DOUBLE_EQ(q[0], -6.0);
    EXPECT_DOUBLE_EQ(q[1], 6.0);
    const Point z = eval_doubly_nonlinear(1.0, 0.0, 2.0, 0.0, {5.0, 0.0});
    EXPECT_EQ(z[0], 0.0);
    EXPECT_THROW(eval_doubly_nonlinear(1.0, 1.0, 2.0, -1e-3, {1.0, 0.0}), ConstraintViolation);
}

TEST(PointwiseFlux, Advective)
{
    const Point q = eval_advective({2.0, -1.0}, 0.5, 2.0, 3.0, {1.0, 2.0});
    EXPECT_DOUBLE_EQ(q[0], 6.0 - 0.5);
    EXPECT_DOUBLE_EQ(q[1], -3.0 - 1.0);
    EXPECT_THROW(eval_advective({1.0, 0.0}, 0.0, 2.0, -1.0, {0.0, 0.0}), ConstraintViolation);
}

TEST(FluxModel, PorousMediumIsDoublyNonlinear)
{
    const auto m = FluxModel::porous_medium(0.7, 3.0);
    ASSERT_EQ(m.family(), FluxFamily::doubly_nonlinear);
    const auto& d = m.as<FluxModel::DoublyNonlinear>();
    EXPECT_DOUBLE_EQ(d.k, 0.7);
    EXPECT_DOUBLE_EQ(d.r, 2.0);
    EXPECT_DOUBLE_EQ(d.p, 2.0);
    EXPECT_EQ(m.name(), "doubly-nonlinear");
    EXPECT_TRUE(m.is_local());
    EXPECT_FALSE(m.is_zero());
    EXPECT_TRUE(FluxModel::none().is_zero());
    EXPECT_THROW(FluxModel::plaplacian(1.0, 0.5), ParameterError);
    EXPECT_THROW(FluxModel::doubly_nonlinear(1.0, -1.0, 2.0), ParameterError);
    EXPECT_THROW(FluxModel::nonlocal({}, 0.0), ParameterError);
}

TEST(PowerTransform, Parameters)
{
    const auto t = power_transform_params(1.0, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(t.m, 0.5);
    EXPECT_DOUBLE_EQ(t.K, 0.5);
    EXPECT_DOUBLE_EQ(t.from_thickness(t.to_thickness(0.3)), 0.3);
    EXPECT_DOUBLE_EQ(t.zeroth_order(4.0, 0.1, 2.0, 1.0), 2.0 - 0.2 - 1.0);
}

TEST(PowerTransform, MapsDoublyNonlinearToPLaplacian)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double k = 0.1 + U(rng), r = 3.0 * U(rng), p = 1.2 + 3.0 * U(rng);
        const double w = 0.05 + 2.0 * U(rng);
        const Point gw{U(rng) - 0.5, U(rng) - 0.5};
        const auto t = power_transform_params(k, r, p);
        const double u = t.to_thickness(w);
        const Point gu = (t.m * std::pow(w, t.m - 1.0)) * gw;
        const Point a = eval_doubly_nonlinear(k, r, p, u, gu);
        const Point b = eval_plaplacian(t.K, p, gw);
        EXPECT_NEAR(a[0], b[0], 1e-12 * (1.0 + std::abs(b[0])));
        EXPECT_NEAR(a[1], b[1], 1e-12 * (1.0 + std::abs(b[1])));
    }
}

TEST(TwoPointFlux, HandValues)
{
    Edge e;
    e.j = 0;
    e.k = 1;
    e.distance = 0.5;
    e.normal = {1.0, 0.0};
    e.midpoint = {0.25, 0.0};
    // g = 4, mean thickness 2
    EXPECT_DOUBLE_EQ(two_point_flux(FluxModel::porous_medium(1.0, 2.0), 1.0, e, 1.0, 3.0).q, -8.0);
    EXPECT_DOUBLE_EQ(two_point_flux(FluxModel::plaplacian(1.0, 3.0), 1.0, e, 1.0, 3.0).q, -16.0);
    EXPECT_DOUBLE_EQ(two_point_flux(FluxModel::plaplacian(1.0, 3.0), 0.25, e, 1.0, 3.0).q, -4.0);
    // upwind: velocity along the normal takes the j value, against it the k value
    const auto right = FluxModel::advective(VelocityField::uniform({2.0, 0.0}), 0.0);
    const auto left = FluxModel::advective(VelocityField::uniform({-2.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(two_point_flux(right, 1.0, e, 1.0, 3.0).q, 2.0);
    EXPECT_DOUBLE_EQ(two_point_flux(left, 1.0, e, 1.0, 3.0).q, -6.0);
    EXPECT_EQ(two_point_flux(FluxModel::porous_medium(1.0, 2.0), 1.0, e, 0.0, 0.0).q, 0.0);
}

TEST(TwoPointFlux, EdgeFluxesAreExactlyAntisymmetric)
{
    std::mt19937_64 rng(5);
    const auto m1 = interval(30);
    const auto m2 = std::make_shared<const Mesh>(build_rect_mesh({0.0, 1.0}, {0.0, 1.0}, 6, 5));
    const FluxModel models[] = {FluxModel::plaplacian(1.0, 1.5), FluxModel::porous_medium(2.0, 2.5),
                                FluxModel::advective(VelocityField::rotation(1.0, {0.5, 0.5}), 0.1, 3.0)};
    for (const auto* m : {m1.get(), m2.get()}) {
        for (const auto& model : models) {
            const auto u = random_positive(rng, m->size(), 0.0, 1.0);
            const auto q = edge_fluxes(model, 0.7, *m, u);
            const auto es = m->edges();
            for (std::size_t i = 0; i < es.size(); ++i) EXPECT_EQ(q[es[i].twin], -q[i]);
            // interior fluxes telescope out of the total
            const auto div = discrete_divergence(*m, q);
            double total = 0.0;
            for (std::size_t i = 0; i < div.size(); ++i) total += div[i] * m->cells()[i].area;
            EXPECT_NEAR(total, 0.0, 1e-13);
        }
    }
}

TEST(Discretization, ConstantFieldHasZeroDiffusiveDivergence)
{
    const auto mesh = interval(12);
    const auto u = ThicknessField::sample(mesh, Backend::fv, [](const Point&) { return 0.4; });
    for (const auto& model : {FluxModel::plaplacian(1.0, 2.5), FluxModel::porous_medium(1.0, 2.0)})
        for (double d : flux_divergence(model, u)) EXPECT_EQ(d, 0.0);
}

TEST(Discretization, LinearDiffusionMatchesSecondDifference)
{
    const auto mesh = interval(5);
    std::vector<double> u{0.0, 1.0, 4.0, 9.0, 16.0};
    const auto q = edge_fluxes(FluxModel::plaplacian(1.0, 2.0), 1.0, *mesh, u);
    const auto div = discrete_divergence(*mesh, q);
    // interior: -(u_{i+1} - 2u_i + u_{i-1}) / h^2 with h = 0.2
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(div[static_cast<std::size_t>(i)], -2.0 / 0.04, 1e-10);
    // no-flow ends: -(u_1 - u_0)/h^2 and (u_4 - u_3)/h^2
    EXPECT_NEAR(div[0], -1.0 / 0.04, 1e-10);
    EXPECT_NEAR(div[4], 7.0 / 0.04, 1e-10);
}

TEST(Discretization, JacobianMatchesFiniteDifferences)
{
    std::mt19937_64 rng(17);
    const auto mesh = interval(15);
    const auto rect = std::make_shared<const Mesh>(build_rect_mesh({0.0, 1.0}, {0.0, 1.0}, 4, 4));
    const SourceModel sources[] = {
        SourceModel::linear(0.6, 1.2),
        SourceModel{"melt", [](double v, const Point& x, double) { return 0.3 - x[0] * v * v; }, false}};
    const FluxModel models[] = {FluxModel::plaplacian(1.0, 2.0), FluxModel::plaplacian(0.5, 3.0),
                                FluxModel::plaplacian(1.0, 1.5), FluxModel::porous_medium(1.0, 2.0),
                                FluxModel::doubly_nonlinear(1.0, 0.5, 2.5),
                                FluxModel::advective(VelocityField::converging(1.0, 1, {0.5, 0.0}), 0.05)};
    for (auto backend : {Backend::fv, Backend::fve}) {
        for (const auto& model : models) {
            for (const auto& src : sources) {
                const auto up = ThicknessField(control_mesh(mesh, backend), backend,
                                               random_positive(rng, control_mesh(mesh, backend)->size()));
                const auto s = theta_stage(1.0, model, src, up, 0.0, 0.05);
                const auto u = random_positive(rng, up.size());
                EXPECT_LT(jacobian_fd_error(s, u), 1e-6) << model.name() << " " << to_string(backend);
            }
        }
    }
    const auto up2 = ThicknessField(rect, Backend::fv, random_positive(rng, rect->size()));
    const auto s2 = theta_stage(0.5, FluxModel::plaplacian(1.0, 3.0), SourceModel::zero(), up2, 0.0, 0.01);
    EXPECT_LT(jacobian_fd_error(s2, random_positive(rng, rect->size())), 1e-6);
}

TEST(Discretization, CustomFluxUsesFiniteDifferenceDerivatives)
{
    std::mt19937_64 rng(23);
    const auto mesh = interval(10);
    const auto custom = FluxModel::custom("linear", [](const Point& g, double, const Point&) { return -2.0 * g; });
    const auto up = ThicknessField(mesh, Backend::fv, random_positive(rng, 10));
    const auto s = theta_stage(1.0, custom, SourceModel::zero(), up, 0.0, 0.1);
    const auto s_ref = theta_stage(1.0, FluxModel::plaplacian(2.0, 2.0), SourceModel::zero(), up, 0.0, 0.1);
    const auto u = random_positive(rng, 10);
    const auto r = assemble_residual(s, u), rr = assemble_residual(s_ref, u);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], rr[i], 1e-14);
    EXPECT_LT(jacobian_fd_error(s, u), 1e-6);
}

TEST(Nonlocal, SpikeKernelReducesToCentralDifferences)
{
    // K = spike / |w| on the diagonal, G = 0: cell flux = -grad u_i
    const auto mesh = interval(8);
    SampledKernels s = sample_kernels({}, *mesh);
    for (std::size_t i = 0; i < s.n; ++i) s.K[i * s.n + i] = 1.0 / mesh->cells()[i].area;
    std::vector<double> u(8);
    for (std::size_t i = 0; i < 8; ++i) u[i] = std::pow(mesh->cells()[i].centroid[0], 2);
    const auto q = nonlocal_cell_fluxes(s, *mesh, u);
    for (int i = 1; i < 7; ++i) {
        const double x = mesh->cell(i).centroid[0];
        EXPECT_NEAR(q[static_cast<std::size_t>(i)][0], -2.0 * x, 1e-12);
    }
}

TEST(Nonlocal, ResidualIsLinearAndJacobianExact)
{
    std::mt19937_64 rng(31);
    const auto mesh = interval(12);
    KernelFunctions k;
    k.G = [](const Point& x, const Point& y) { return Point{0.3 * std::exp(-(x[0] - y[0]) * (x[0] - y[0])), 0.0}; };
    k.K = [](const Point& x, const Point& y) { return 0.2 + 0.1 * x[0] * y[0]; };
    const auto model = FluxModel::nonlocal(k, 0.5);
    const auto up = ThicknessField(mesh, Backend::fv, random_positive(rng, 12));
    const auto s = theta_stage(1.0, model, SourceModel::zero(), up, 0.0, 0.1);
    const auto u = random_positive(rng, 12), v = random_positive(rng, 12);
    const auto J = Eigen::MatrixXd(assemble_jacobian(s, u));
    const auto ru = assemble_residual(s, u), rv = assemble_residual(s, v);
    for (std::size_t i = 0; i < 12; ++i) {
        double jd = 0.0;
        for (std::size_t j = 0; j < 12; ++j)
            jd += J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (v[j] - u[j]);
        EXPECT_NEAR(rv[i] - ru[i], jd, 1e-12);
    }
    const auto q = edge_fluxes(s.flux, 1.0, *mesh, u);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(q[mesh->edges()[i].twin], -q[i]);
}

TEST(Nonlocal, PointEvaluation)
{
    const auto mesh = interval(4);
    KernelFunctions k;
    k.G = [](const Point&, const Point&) { return Point{1.0, 0.0}; };
    const auto f = ThicknessField::sample(mesh, Backend::fv, [](const Point&) { return 2.0; });
    // int G u dy = 1 * 2 * 1
    EXPECT_DOUBLE_EQ(eval_nonlocal(k, f, {0.3, 0.0})[0], 2.0);
    EXPECT_THROW(eval_nonlocal(k, f, {1.5, 0.0}), std::invalid_argument);
    const auto fve = ThicknessField::zeros(mesh, Backend::fve);
    EXPECT_THROW(eval_nonlocal(k, fve, {0.5, 0.0}), std::invalid_argument);
}

TEST(Nonlocal, KernelNormAndMismatch)
{
    const auto mesh = interval(10);
    KernelFunctions k;
    k.G = [](const Point&, const Point&) { return Point{3.0, 0.0}; };
    const auto s = sample_kernels(k, *mesh);
    EXPECT_NEAR(kernel_l2_norm(s, *mesh), 3.0, 1e-14);
    const auto other = interval(11);
    const std::vector<double> u(11, 1.0);
    EXPECT_THROW(nonlocal_cell_fluxes(s, *other, u), std::invalid_argument);
}

TEST(Nonlocal, DenseMatrixFiles)
{
    const auto path = std::filesystem::temp_directory_path() / "thinlayer_kernel_test.txt";
    {
        std::ofstream os(path);
        os << "1 2\n3 4\n";
    }
    const auto v = read_dense_matrix(path.string(), 2);
    EXPECT_EQ(v, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
    EXPECT_THROW(read_dense_matrix(path.string(), 3), std::runtime_error);
    {
        std::ofstream os(path);
        os << "1 x\n3 4\n";
    }
    EXPECT_THROW(read_dense_matrix(path.string(), 2), std::runtime_error);
    std::filesystem::remove(path);
    EXPECT_THROW(read_dense_matrix(path.string(), 2), std::runtime_error);
}

TEST(TimestepBounds, AdvectiveConvergingFlow)
{
    const auto mesh = build_interval_mesh(0.0, 1.0, 50);
    EXPECT_EQ(advective_timestep_bound(VelocityField::converging(1.0, 1), mesh), 2.0);
    EXPECT_EQ(advective_timestep_bound(VelocityField::converging(4.0, 1), mesh), 0.5);
    EXPECT_TRUE(std::isinf(advective_timestep_bound(VelocityField::uniform({1.0, 0.0}), mesh)));
    const auto rect = build_rect_mesh({0.0, 1.0}, {0.0, 1.0}, 4, 4);
    EXPECT_EQ(advective_timestep_bound(VelocityField::converging(1.0, 2), rect), 1.0);
}

TEST(TimestepBounds, Nonlocal)
{
    EXPECT_DOUBLE_EQ(nonlocal_timestep_bound(1.0, 1.0, 1.0, 1, 2.0), 0.8);
    EXPECT_TRUE(std::isinf(nonlocal_timestep_bound(1.0, 0.0, 1.0, 1, 2.0)));
    EXPECT_THROW(nonlocal_timestep_bound(0.0, 1.0, 1.0, 1, 2.0), ParameterError);
    const auto mesh = build_interval_mesh(0.0, 1.0, 20);
    KernelFunctions k;
    k.G = [](const Point&, const Point&) { return Point{1.0, 0.0}; };
    EXPECT_NEAR(nonlocal_timestep_bound(1.0, k, mesh, 2.0), 0.8, 1e-14);
}

TEST(Sources, BuiltIns)
{
    const auto lin = SourceModel::linear(0.6, 1.2);
    EXPECT_DOUBLE_EQ(lin(0.0, {0.5, 0.0}, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(lin(7.0, {1.0, 0.0}, 3.0), -0.6);
    const auto st = SourceModel::step(0.5, 0.3);
    EXPECT_EQ(st(0.0, {0.29, 0.0}, 0.0), 0.5);
    EXPECT_EQ(st(0.0, {0.3, 0.0}, 0.0), 0.0);
    const auto rad = SourceModel::radial(0.2, 1.0, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(rad(0.0, {0.8, 0.9}, 0.0), 0.2 - 0.5);
    EXPECT_TRUE(SourceModel::constant(1.0).thickness_independent);
    EXPECT_EQ(SourceModel::zero()(1.0, {0.0, 0.0}, 0.0), 0.0);
}

TEST(FluxAssumptions, StandardFamiliesPass)
{
    const auto mesh = interval(40);
    std::mt19937_64 rng(3);
    std::vector<ThicknessField> fields;
    for (int i = 0; i < 20; ++i) fields.emplace_back(mesh, Backend::fv, detail::random_admissible(rng, *mesh, 2.0));
    for (const auto& m : {FluxModel::plaplacian(1.0, 1.5), FluxModel::plaplacian(1.0, 4.0),
                          FluxModel::doubly_nonlinear(1.0, 2.0, 2.0), FluxModel::porous_medium(1.0, 2.0),
                          FluxModel::advective(VelocityField::converging(1.0, 1), 0.1)}) {
        const auto rep = check_standard_flux_assumptions(m, fields);
        EXPECT_TRUE(rep.passed()) << m.name();
        EXPECT_GT(rep.zero_thickness_samples, 0u);
        EXPECT_EQ(rep.max_zero_flux, 0.0);
    }
    const auto nl = check_standard_flux_assumptions(FluxModel::nonlocal({}, 1.0), fields);
    EXPECT_FALSE(nl.applicable);
    EXPECT_TRUE(nl.passed());
}

TEST(FluxAssumptions, Counterexamples)
{
    const auto mesh = interval(40);
    std::mt19937_64 rng(4);
    std::vector<ThicknessField> fields;
    for (int i = 0; i < 10; ++i) fields.emplace_back(mesh, Backend::fv, detail::random_admissible(rng, *mesh, 2.0));
    const auto leaky = FluxModel::custom("leaky", [](const Point& g, double, const Point&) {
        return Point{1.0 - g[0], -g[1]};
    });
    const auto r1 = check_standard_flux_assumptions(leaky, fields);
    EXPECT_FALSE(r1.zero_flux_pass);
    EXPECT_FALSE(r1.passed());
    const auto jump = FluxModel::custom("jump", [](const Point&, double v, const Point&) {
        return Point{v > 0.0 ? 1.0 : 0.0, 0.0};
    });
    const auto r2 = check_standard_flux_assumptions(jump, fields);
    EXPECT_TRUE(r2.zero_flux_pass);
    EXPECT_FALSE(r2.continuity_pass);
}
