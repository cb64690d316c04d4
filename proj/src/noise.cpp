#include "bq/noise.hpp"

#include "bq/errors.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace bq {

namespace {

// 10-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 5> kGlNodes = {
    0.1488743389816312108848260, 0.4333953941292471907992659, 0.6794095682990244062343274,
    0.8650633666889845107320967, 0.9739065285171717200779640};
constexpr std::array<double, 5> kGlWeights = {
    0.2955242247147528701738930, 0.2692667193099963550912269, 0.2190863625159820439955349,
    0.1494513491505805931457763, 0.0666713443086881375935688};

double gauss_legendre(const std::function<double(double)>& g, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
        const double dx = half * kGlNodes[i];
        const double fl = g(mid - dx);
        const double fr = g(mid + dx);
        if (!std::isfinite(fl) || !std::isfinite(fr)) {
            throw NumericError("non-finite integrand in compensator quadrature");
        }
        sum += kGlWeights[i] * (fl + fr);
    }
    return half * sum;
}

double adaptive(const std::function<double(double)>& g, double a, double b, double whole, double tol,
                int depth) {
    const double mid = 0.5 * (a + b);
    const double left = gauss_legendre(g, a, mid);
    const double right = gauss_legendre(g, mid, b);
    const double refined = left + right;
    if (std::abs(refined - whole) <= tol || depth >= 60) return refined;
    return adaptive(g, a, mid, left, 0.5 * tol, depth + 1) +
           adaptive(g, mid, b, right, 0.5 * tol, depth + 1);
}

}  // namespace

void LevyRadialMeasure::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
    if (!(c_nu >= 0.0) || !std::isfinite(c_nu)) throw DomainError("c_nu must be finite and >= 0");
    if (!(r_min > 0.0 && r_min < 1.0)) throw DomainError("r_min must lie in (0,1)");
}

double LevyRadialMeasure::density(double r) const {
    if (r < r_min || r >= 1.0) return 0.0;
    return c_nu * std::pow(r, -1.0 - beta);
}

double LevyRadialMeasure::cdf(double r) const {
    if (r <= r_min) return 0.0;
    if (r >= 1.0) return 1.0;
    const double top = std::pow(r_min, -beta);
    return (top - std::pow(r, -beta)) / (top - 1.0);
}

double total_rate(const LevyRadialMeasure& m) {
    return m.c_nu * (std::pow(m.r_min, -m.beta) - 1.0) / m.beta;
}

double compensator_weight(const LevyRadialMeasure& m, const std::function<double(double)>& shape) {
    m.validate();
    if (m.c_nu == 0.0) return 0.0;
    // Integrate in s = log r, where the power-law weight is smooth: rho(r) dr = c r^{-beta} ds.
    const std::function<double(double)> g = [&](double s) {
        const double r = std::exp(s);
        return shape(r) * m.c_nu * std::exp(-m.beta * s);
    };
    const double a = std::log(m.r_min);
    const double b = 0.0;
    constexpr double tol = 1e-10;
    return adaptive(g, a, b, gauss_legendre(g, a, b), tol, 0);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::span<const std::uint64_t> ids) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

double radius_from_uniform(const LevyRadialMeasure& m, double u) {
    const double r = std::pow(1.0 + u * (std::pow(m.r_min, -m.beta) - 1.0), -1.0 / m.beta);
    if (r >= 1.0) return std::nextafter(1.0, 0.0);
    return r < m.r_min ? m.r_min : r;
}

NoiseStream::NoiseStream(LevyRadialMeasure measure, std::uint64_t seed, double time_scale)
    : measure_(measure), seed_(seed), time_scale_(time_scale), rng_(seed) {
    measure_.validate();
    if (!(time_scale >= 1.0) || !std::isfinite(time_scale)) {
        throw DomainError("noise time scale must be >= 1");
    }
    rate_ = total_rate(measure_);
}

double NoiseStream::mean_count(double dt) const { return rate_ * time_scale_ * dt; }

double NoiseStream::uniform() {
    return double(rng_() >> 11) * 0x1.0p-53;
}

long NoiseStream::sample_count(double dt) {
    if (!(dt > 0.0)) throw DomainError("step length must be positive");
    const double mean = mean_count(dt);
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long> dist(mean);
    return dist(rng_);
}

double NoiseStream::sample_radius() { return radius_from_uniform(measure_, uniform()); }

std::vector<JumpEvent> NoiseStream::sample_step(double dt) {
    const long count = sample_count(dt);
    std::vector<JumpEvent> events;
    events.reserve(std::size_t(count));
    for (long i = 0; i < count; ++i) {
        JumpEvent e;
        e.time = uniform() * dt;
        e.radius = sample_radius();
        events.push_back(e);
    }
    return events;
}

NoiseStream NoiseStream::rescale(double eps) const {
    if (!(eps > 0.0 && eps <= 1.0)) {
        throw DomainError("time-scale parameter eps must lie in (0,1], got " + std::to_string(eps));
    }
    NoiseStream out = *this;
    out.time_scale_ = time_scale_ / eps;
    return out;
}

}  // namespace bq
