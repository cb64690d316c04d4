#include "bq/model.hpp"

#include "bq/errors.hpp"

#include <algorithm>
#include <cmath>

namespace bq {

double signed_power(double x, double a) {
    if (x == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(x), a), x);
}

double example_f_pointwise(double j, double theta) {
    return -0.5 * signed_power(j, 2.0 / 3.0) - 0.3 * signed_power(theta, 1.0 / 3.0);
}

double example_amp1_pointwise(double j) { return std::cbrt(1.0 + j * j); }

double example_shape1(double r) { return 1.0 / std::sqrt(1.0 + r * r); }

double example_shape2(double r) { return -0.5 * std::exp(-r * r); }

SpectralField example_f(const SpectralField& j, const SpectralField& theta) {
    if (!(j.grid() == theta.grid())) throw DimensionError("drift arguments on different grids");
    PhysicalField pj = to_physical(j);
    const PhysicalField pt = to_physical(theta);
    auto v = pj.values();
    auto t = pt.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = example_f_pointwise(v[i], t[i]);
    return to_spectral(pj);
}

SpectralField example_sigma1(const SpectralField& j, double r) {
    SpectralField amp = map_pointwise(j, example_amp1_pointwise);
    amp *= example_shape1(r);
    return amp;
}

SpectralField example_sigma2(const SpectralField& theta, double r) { return theta * example_shape2(r); }

SpectralField averaged_f(const SpectralField& j) {
    return map_pointwise(j, [](double x) { return -0.5 * signed_power(x, 2.0 / 3.0); });
}

SpectralField averaged_g(const TorusGrid& grid) { return SpectralField::zero(grid); }

CoefficientSet example_coefficients() {
    CoefficientSet c;
    c.drift = [](const SpectralField& j, const SpectralField& theta) { return example_f(j, theta); };
    c.amp1 = [](const SpectralField& j) { return map_pointwise(j, example_amp1_pointwise); };
    c.shape1 = example_shape1;
    c.amp2 = [](const SpectralField& theta) { return theta; };
    c.shape2 = example_shape2;
    return c;
}

AveragedSet example_averaged() {
    AveragedSet a;
    a.f_bar = [](const SpectralField& j, const VelocityField&) { return averaged_f(j); };
    a.g = [](const VelocityField& u) { return averaged_g(u.u1.grid()); };
    a.amp1 = [](const SpectralField& j) { return map_pointwise(j, example_amp1_pointwise); };
    a.shape1 = example_shape1;
    return a;
}

CoefficientSet CoefficientSet::without_drift() const {
    CoefficientSet c = *this;
    c.drift = [](const SpectralField& j, const SpectralField&) { return SpectralField::zero(j.grid()); };
    return c;
}

AveragedSet AveragedSet::without_drift() const {
    AveragedSet a = *this;
    a.f_bar = [](const SpectralField& j, const VelocityField&) { return SpectralField::zero(j.grid()); };
    return a;
}

double KappaModulus::operator()(double u) const {
    if (u <= 0.0) return 0.0;
    return c * std::pow(u, exponent);
}

std::pair<double, double> KappaModulus::linear_growth() const {
    // u^a <= a u + (1 - a) for u >= 0, 0 < a <= 1
    return {c * exponent, c * (1.0 - exponent)};
}

KappaCheck check_kappa(const KappaModulus& kappa, double u_max, int points) {
    KappaCheck out;
    out.zero_at_origin = kappa(0.0) == 0.0;
    out.non_decreasing = true;
    out.midpoint_concave = true;
    out.linear_growth = true;
    const auto [c1, c2] = kappa.linear_growth();
    const double h = u_max / points;
    for (int i = 0; i <= points; ++i) {
        const double a = i * h;
        if (i > 0 && kappa(a) < kappa(a - h)) out.non_decreasing = false;
        if (kappa(a) > c1 * a + c2 + 1e-12 * (1.0 + a)) out.linear_growth = false;
        for (int k = i; k <= points; k += 7) {
            const double b = k * h;
            const double lhs = kappa(0.5 * (a + b));
            const double rhs = 0.5 * (kappa(a) + kappa(b));
            if (lhs < rhs - 1e-12 * (1.0 + rhs)) out.midpoint_concave = false;
        }
    }
    return out;
}

double fit_kappa_constant(std::span<const PointPair> pairs,
                          const std::function<double(double, double)>& f, double exponent) {
    double c = 0.0;
    for (const auto& p : pairs) {
        const double d = f(p.u1, p.v1) - f(p.u2, p.v2);
        const double sep = (p.u1 - p.u2) * (p.u1 - p.u2) + (p.v1 - p.v2) * (p.v1 - p.v2);
        if (sep == 0.0) continue;
        c = std::max(c, d * d / std::pow(sep, exponent));
    }
    return c;
}

std::vector<PointPair> random_pairs(std::size_t count, double range, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-range, range);
    std::vector<PointPair> out(count);
    for (auto& p : out) p = {dist(rng), dist(rng), dist(rng), dist(rng)};
    return out;
}

double moment_constant(double p) {
    return 2.0 * p * (2.0 * p - 1.0) * std::pow(2.0, 2.0 * p - 3.0);
}

DissipativityRates compute_rates(double p, double gamma, const LevyRadialMeasure& measure2,
                                 const ShapeFn& sigma2_shape) {
    if (!(p >= 1.0)) throw DomainError("moment order p must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    DissipativityRates r;
    r.lambda = 1.0;  // smallest nonzero |k|^2 on the 2 pi torus
    r.p = p;
    r.gamma = gamma;
    r.m_p = moment_constant(p);
    r.l_sigma2 = compensator_weight(measure2, [&](double x) {
        return std::pow(std::abs(sigma2_shape(x)), 2.0 * p);
    });
    const double penalty = r.m_p * ((p - 1.0) / p + r.l_sigma2 / p + r.l_sigma2);
    r.lambda_p = 2.0 * p * r.lambda - penalty;
    r.lambda_p_gamma = 2.0 * p * (1.0 - gamma) * r.lambda - penalty;
    r.feasible = r.lambda_p > 0.0;
    return r;
}

}  // namespace bq
