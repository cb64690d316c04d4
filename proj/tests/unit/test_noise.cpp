#include "bq/errors.hpp"
#include "bq/noise.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

using namespace bq;

namespace {

double oracle_integral(const LevyRadialMeasure& m, const std::function<double(double)>& shape) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate([&](double r) { return shape(r) * m.c_nu * std::pow(r, -1.0 - m.beta); }, m.r_min,
                                1.0, 1e-14);
}

struct CountStats {
    double mean = 0.0;
    double variance = 0.0;
};

CountStats count_stats(NoiseStream& s, double dt, int draws) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double c = double(s.sample_count(dt));
        sum += c;
        sq += c * c;
    }
    const double mean = sum / draws;
    return {mean, (sq - draws * mean * mean) / (draws - 1)};
}

}  // namespace

TEST_CASE("total rate closed form") {
    CHECK(total_rate({0.5, 1.0, 0.25}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(total_rate({0.5, 1.0, 1.0 - 1e-9}) < 1e-8);
    const LevyRadialMeasure m{0.8, 1.0, 1e-3};
    const double oracle = oracle_integral(m, [](double) { return 1.0; });
    CHECK(std::abs(total_rate(m) - oracle) <= 1e-8 * oracle);
}

TEST_CASE("measure validation") {
    CHECK_THROWS_AS((LevyRadialMeasure{0.0, 1.0, 1e-3}.validate()), DomainError);
    CHECK_THROWS_AS((LevyRadialMeasure{1.0, 1.0, 1e-3}.validate()), DomainError);
    CHECK_THROWS_AS((LevyRadialMeasure{0.5, -1.0, 1e-3}.validate()), DomainError);
    CHECK_THROWS_AS((LevyRadialMeasure{0.5, 1.0, 0.0}.validate()), DomainError);
    CHECK_THROWS_AS((LevyRadialMeasure{0.5, 1.0, 1.0}.validate()), DomainError);
    CHECK_NOTHROW((LevyRadialMeasure{0.5, 0.0, 1e-3}.validate()));
    CHECK_THROWS_AS(NoiseStream(LevyRadialMeasure{}, 1, 0.5), DomainError);
}

TEST_CASE("zero intensity gives no jumps") {
    NoiseStream s({0.5, 0.0, 1e-3}, 7);
    for (int i = 0; i < 1000; ++i) CHECK(s.sample_count(0.1) == 0);
    CHECK_THROWS_AS(s.sample_count(0.0), DomainError);
    CHECK_THROWS_AS(s.sample_count(-1.0), DomainError);
}

TEST_CASE("Poisson count mean and variance") {
    // Lambda = 2 for (0.5, 1, 0.25), so dt = 1 gives mean 2.
    NoiseStream s({0.5, 1.0, 0.25}, 42);
    const int draws = 100000;
    const CountStats st = count_stats(s, 1.0, draws);
    CHECK(std::abs(st.mean - 2.0) <= 3.0 * std::sqrt(2.0 / draws));
    CHECK(std::abs(st.variance - 2.0) <= 0.05 * 2.0);
}

TEST_CASE("rescaled streams") {
    const LevyRadialMeasure m{0.5, 1.0, 0.25};
    NoiseStream base(m, 5);
    CHECK(base.rescale(1.0).time_scale() == 1.0);
    CHECK_THROWS_AS(base.rescale(0.0), DomainError);
    CHECK_THROWS_AS(base.rescale(-0.5), DomainError);
    CHECK_THROWS_AS(base.rescale(1.5), DomainError);
    const int draws = 100000;
    SUBCASE("eps = 0.25 multiplies the mean count by 4") {
        NoiseStream s = base.rescale(0.25);
        CHECK(s.mean_count(0.5) == doctest::Approx(4.0 * base.mean_count(0.5)));
        const CountStats st = count_stats(s, 0.5, draws);  // mean 4
        CHECK(std::abs(st.mean - 4.0) <= 3.0 * std::sqrt(4.0 / draws));
    }
    SUBCASE("eps = 0.1 with Lambda dt = 0.5 gives mean 5") {
        NoiseStream s = base.rescale(0.1);
        const CountStats st = count_stats(s, 0.25, draws);
        CHECK(std::abs(st.mean - 5.0) <= 3.0 * std::sqrt(5.0 / draws));
    }
}

TEST_CASE("inverse CDF endpoints") {
    const LevyRadialMeasure m{0.8, 1.0, 1e-3};
    CHECK(radius_from_uniform(m, 0.0) == std::nextafter(1.0, 0.0));
    const double top = radius_from_uniform(m, std::nextafter(1.0, 0.0));
    CHECK(top >= m.r_min);
    CHECK(top == doctest::Approx(m.r_min).epsilon(1e-10));
    // monotone decreasing in U
    double prev = 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = radius_from_uniform(m, i / 100.0 * (1.0 - 1e-16));
        CHECK(r <= prev);
        prev = r;
    }
}

TEST_CASE("radius law: mean and Kolmogorov-Smirnov distance") {
    const LevyRadialMeasure m{0.8, 1.0, 1e-3};
    NoiseStream s(m, 2024);
    const int draws = 1000000;
    std::vector<double> r(draws);
    double sum = 0.0;
    for (double& v : r) {
        v = s.sample_radius();
        sum += v;
        REQUIRE(v >= m.r_min);
        REQUIRE(v < 1.0);
    }
    const double expected_mean = oracle_integral(m, [](double x) { return x; }) / total_rate(m);
    CHECK(std::abs(sum / draws - expected_mean) <= 0.01 * expected_mean);

    std::sort(r.begin(), r.end());
    double ks = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double f = m.cdf(r[i]);
        ks = std::max({ks, std::abs(f - double(i) / draws), std::abs(f - double(i + 1) / draws)});
    }
    CHECK(ks < 0.005);
}

TEST_CASE("compensator weight") {
    const LevyRadialMeasure m{0.6, 1.0, 1e-3};
    CHECK(std::abs(compensator_weight(m, [](double) { return 1.0; }) - total_rate(m)) <= 1e-10);
    CHECK(compensator_weight(m, [](double) { return 0.0; }) == 0.0);
    const auto shape = [](double r) { return std::exp(-2.0 * r * r) / 4.0; };
    CHECK(std::abs(compensator_weight(m, shape) - oracle_integral(m, shape)) <= 1e-8);
    CHECK_THROWS_AS(compensator_weight(m, [](double) { return std::numeric_limits<double>::infinity(); }),
                    NumericError);
    CHECK_THROWS_AS(compensator_weight(m, [](double) { return std::nan(""); }), NumericError);
}

TEST_CASE("compensated increments have mean zero") {
    const LevyRadialMeasure m{0.6, 1.0, 1e-3};
    const auto shape = [](double r) { return -0.5 * std::exp(-r * r); };
    const double w = compensator_weight(m, shape);
    NoiseStream s = NoiseStream(m, 99).rescale(0.5);
    const double dt = 1e-3;
    const int steps = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < steps; ++i) {
        double x = -w * s.time_scale() * dt;
        for (const auto& e : s.sample_step(dt)) x += shape(e.radius);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / steps;
    const double se = std::sqrt((sq / steps - mean * mean) / (steps - 1));
    CHECK(std::abs(mean) <= 4.0 * se);
}

TEST_CASE("events respect their invariants") {
    NoiseStream s(LevyRadialMeasure{0.8, 1.0, 1e-3}, 3);
    for (int i = 0; i < 200; ++i) {
        for (const auto& e : s.sample_step(0.01)) {
            CHECK(e.time >= 0.0);
            CHECK(e.time < 0.01);
            CHECK(e.radius >= 1e-3);
            CHECK(e.radius < 1.0);
        }
    }
}

TEST_CASE("determinism and stream separation") {
    const LevyRadialMeasure m{0.8, 1.0, 1e-3};
    NoiseStream a(m, derive_seed(17, {0, 3, 1}));
    NoiseStream b(m, derive_seed(17, {0, 3, 1}));
    NoiseStream c(m, derive_seed(17, {0, 3, 2}));
    bool any_difference = false;
    for (int i = 0; i < 500; ++i) {
        const auto ea = a.sample_step(0.01);
        const auto eb = b.sample_step(0.01);
        const auto ec = c.sample_step(0.01);
        CHECK(ea == eb);
        if (ea != ec) any_difference = true;
    }
    CHECK(any_difference);
    CHECK(derive_seed(1, {1, 2}) != derive_seed(1, {2, 1}));
    CHECK(derive_seed(1, {1, 2}) != derive_seed(2, {1, 2}));
}
