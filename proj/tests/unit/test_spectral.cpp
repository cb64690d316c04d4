#include "bq/errors.hpp"
#include "bq/spectral.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bq;
using namespace testing_helpers;

namespace {

SpectralField cos_x(const TorusGrid& g) {
    SpectralField f(g);
    f.set_mode(1, 0, 0.5);
    return f;
}
SpectralField sin_x(const TorusGrid& g) {
    SpectralField f(g);
    f.set_mode(1, 0, Complex(0.0, -0.5));
    return f;
}
SpectralField cos_y(const TorusGrid& g) {
    SpectralField f(g);
    f.set_mode(0, 1, 0.5);
    return f;
}
SpectralField sin_y(const TorusGrid& g) {
    SpectralField f(g);
    f.set_mode(0, 1, Complex(0.0, -0.5));
    return f;
}

/// Direct evaluation of sum_k c(k) exp(i k.x) over the full (Hermitian-completed) spectrum.
double brute_force_sample(const SpectralField& f, double x, double y) {
    const int n = f.grid().n();
    double sum = 0.0;
    for (int kx = -n / 2 + 1; kx < n / 2; ++kx) {
        for (int ky = -n / 2 + 1; ky < n / 2; ++ky) {
            const Complex c = f.coeff(kx, ky);
            sum += (c * std::exp(Complex(0.0, kx * x + ky * y))).real();
        }
    }
    return sum;
}

}  // namespace

TEST_CASE("grid invariants") {
    CHECK_THROWS_AS(TorusGrid(3), DimensionError);
    CHECK_THROWS_AS(TorusGrid(2), DimensionError);
    CHECK_THROWS_AS(TorusGrid(7), DimensionError);
    CHECK(TorusGrid(32).dealias_cut() == 10);
    CHECK(TorusGrid(4).dealias_cut() == 1);
    const TorusGrid g(8);
    for (int row = 0; row < 8; ++row) CHECK(g.row_of(g.kx(row)) == row);
}

TEST_CASE("mean and Nyquist modes are rejected") {
    const TorusGrid g(8);
    SpectralField f(g);
    CHECK_THROWS_AS(f.set_mode(0, 0, 1.0), DomainError);
    CHECK_THROWS_AS(f.set_mode(4, 1, 1.0), DimensionError);
    CHECK_THROWS_AS(f.set_mode(1, 4, 1.0), DimensionError);
    f.at(0, 0) = 3.0;
    f.at(4, 2) = 1.0;
    f.project();
    CHECK(f.at(0, 0) == Complex(0.0));
    CHECK(f.at(4, 2) == Complex(0.0));
}

TEST_CASE("single-mode synthesis gives cos x at grid points") {
    const TorusGrid g(16);
    const PhysicalField p = to_physical(cos_x(g));
    for (int ix = 0; ix < g.n(); ++ix) {
        for (int iy = 0; iy < g.n(); ++iy) CHECK(p(ix, iy) == doctest::Approx(std::cos(p.x(ix))).epsilon(1e-14));
    }
}

TEST_CASE("zero field synthesizes to zeros") {
    const TorusGrid g(8);
    const PhysicalField p = to_physical(SpectralField(g));
    for (double v : p.values()) CHECK(v == 0.0);
}

TEST_CASE("synthesis matches a brute-force Fourier sum") {
    const TorusGrid g(8);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const SpectralField f = random_field(g, rng);
        const PhysicalField p = to_physical(f);
        for (int ix = 0; ix < g.n(); ++ix) {
            for (int iy = 0; iy < g.n(); ++iy) {
                CHECK(p(ix, iy) == doctest::Approx(brute_force_sample(f, p.x(ix), p.y(iy))).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("roundtrip is the identity on 100 random fields") {
    const TorusGrid g(32);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const SpectralField f = random_field(g, rng);
        const SpectralField back = to_spectral(to_physical(f));
        worst = std::max(worst, max_coeff_diff(f, back) / max_coeff(f));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("to_spectral removes the mean and checks sizes") {
    const TorusGrid g(16);
    const SpectralField f = from_function(g, [](double x, double) { return 3.0 + std::cos(x); });
    CHECK(std::abs(f.at(0, 0)) == 0.0);
    CHECK(max_coeff_diff(f, cos_x(g)) <= 1e-15);
    std::vector<double> wrong(10, 0.0);
    CHECK_THROWS_AS(to_spectral(g, wrong), DimensionError);
}

TEST_CASE("derivatives of single modes") {
    const TorusGrid g(16);
    CHECK(max_coeff_diff(laplacian(cos_x(g)), cos_x(g) * -1.0) <= 1e-15);
    CHECK(max_coeff_diff(partial_x(cos_x(g)), sin_x(g) * -1.0) <= 1e-15);
    SpectralField cos2y(g);
    cos2y.set_mode(0, 2, 0.5);
    CHECK(max_coeff_diff(laplacian(cos2y), cos2y * -4.0) <= 1e-15);
    const auto [gx, gy] = gradient(cos_y(g));
    CHECK(max_coeff(gx) == 0.0);
    CHECK(max_coeff_diff(gy, sin_y(g) * -1.0) <= 1e-15);
    CHECK(gradient_norm_sq(cos_x(g)) == doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
}

TEST_CASE("heat factor multiplies each mode by exp(-|k|^2 tau)") {
    const TorusGrid g(16);
    SpectralField f(g);
    f.set_mode(2, 1, Complex(1.0, 2.0));
    apply_heat_factor(f, 0.3);
    CHECK(std::abs(f.coeff(2, 1) - Complex(1.0, 2.0) * std::exp(-5.0 * 0.3)) <= 1e-15);
}

TEST_CASE("Biot-Savart single modes") {
    const TorusGrid g(16);
    {
        const VelocityField u = biot_savart(cos_x(g));
        CHECK(max_coeff(u.u1) == 0.0);
        CHECK(max_coeff_diff(u.u2, sin_x(g)) <= 1e-15);
    }
    {
        const VelocityField u = biot_savart(cos_y(g));
        CHECK(max_coeff_diff(u.u1, sin_y(g) * -1.0) <= 1e-15);
        CHECK(max_coeff(u.u2) == 0.0);
    }
    {
        const VelocityField u = biot_savart(SpectralField(g));
        CHECK(max_coeff(u.u1) == 0.0);
        CHECK(max_coeff(u.u2) == 0.0);
    }
}

TEST_CASE("Biot-Savart consistency on random vorticity") {
    const TorusGrid g(32);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const SpectralField j = random_field(g, rng);
        const VelocityField u = biot_savart(j);
        CHECK(max_coeff_diff(curl(u), j) <= 1e-13 * max_coeff(j));
        for (int row = 0; row < g.n(); ++row) {
            for (int col = 0; col < g.half(); ++col) {
                const Complex div =
                    Complex(0.0, g.kx(row)) * u.u1.at(row, col) + Complex(0.0, g.ky(col)) * u.u2.at(row, col);
                const double mag = std::hypot(std::abs(u.u1.at(row, col)), std::abs(u.u2.at(row, col)));
                CHECK(std::abs(div) <= 1e-12 * mag + 1e-300);
            }
        }
        CHECK(max_coeff(divergence(u)) <= 1e-13 * max_coeff(j));
    }
}

TEST_CASE("advection of single modes") {
    const TorusGrid g(16);
    SUBCASE("u = (0, sin x), f = cos x gives 0") {
        VelocityField u{SpectralField(g), sin_x(g)};
        CHECK(max_coeff(advect(u, cos_x(g))) <= 1e-16);
    }
    SUBCASE("u = (-sin y, 0), f = cos x gives sin x sin y") {
        VelocityField u{sin_y(g) * -1.0, SpectralField(g)};
        const SpectralField expected = from_function(g, [](double x, double y) { return std::sin(x) * std::sin(y); });
        CHECK(max_coeff_diff(advect(u, cos_x(g)), expected) <= 1e-15);
    }
}

TEST_CASE("advection is skew-symmetric") {
    const TorusGrid g(32);
    std::mt19937_64 rng(3);
    double worst_energy = 0.0, worst_skew = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const VelocityField u = biot_savart(random_field(g, rng));
        const SpectralField v = random_field(g, rng);
        const SpectralField w = random_field(g, rng);
        const SpectralField av = advect(u, v);
        const SpectralField aw = advect(u, w);
        worst_energy = std::max(worst_energy, std::abs(inner(av, v)) / (norm_h(av) * norm_h(v)));
        worst_skew = std::max(worst_skew, std::abs(inner(av, w) + inner(aw, v)) / (norm_h(av) * norm_h(w)));
    }
    CHECK(worst_energy <= 1e-10);
    CHECK(worst_skew <= 1e-9);
}

TEST_CASE("inner product") {
    const TorusGrid g(16);
    CHECK(inner(cos_x(g), cos_x(g)) == doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
    CHECK(std::abs(inner(cos_x(g), sin_x(g))) <= 1e-15);
    CHECK(std::abs(inner(cos_x(g), cos_y(g))) <= 1e-15);
    CHECK(norm_h(cos_x(g)) == doctest::Approx(std::sqrt(2.0) * kPi).epsilon(1e-14));
    CHECK_THROWS_AS(inner(cos_x(g), cos_x(TorusGrid(8))), DimensionError);
}

TEST_CASE("Parseval against physical quadrature") {
    const TorusGrid g(32);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const SpectralField f = random_field(g, rng);
        PhysicalField sq = to_physical(f);
        for (double& v : sq.values()) v *= v;
        const double n2 = norm_h(f) * norm_h(f);
        CHECK(std::abs(n2 - quadrature(sq)) <= 1e-10 * n2);
    }
}

TEST_CASE("arithmetic and finiteness") {
    const TorusGrid g(8);
    SpectralField a = cos_x(g);
    a.axpy(2.0, cos_y(g));
    CHECK(a.coeff(0, 1) == Complex(1.0));
    CHECK(a.coeff(-1, 0) == Complex(0.5));
    CHECK(a.all_finite());
    a.at(1, 1) = Complex(std::nan(""), 0.0);
    CHECK_FALSE(a.all_finite());
    CHECK_THROWS_AS(cos_x(g) + cos_x(TorusGrid(16)), DimensionError);
}
