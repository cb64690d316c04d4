#pragma once

// Compound-Poisson sampling of truncated power-law jump measures.
//
// The intensity nu(dz) = c_nu |z|^{-1-beta} dz is reduced to its radial marginal
// rho(r) = c_nu r^{-1-beta} on [r_min, 1). Jumps below r_min are dropped, which
// makes the measure finite with total mass
//   Lambda = c_nu (r_min^{-beta} - 1) / beta.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace bq {

struct LevyRadialMeasure {
    double beta = 0.5;
    double c_nu = 1.0;
    double r_min = 1e-3;

    /// Throws DomainError for beta outside (0,1), c_nu < 0 or r_min outside (0,1).
    void validate() const;
    double density(double r) const;
    /// P(R <= r) for the normalized radial law.
    double cdf(double r) const;
};

double total_rate(const LevyRadialMeasure& m);

/// int_{r_min}^1 shape(r) rho(r) dr by adaptive Gauss-Legendre quadrature (absolute tolerance 1e-10).
/// Throws NumericError if shape produces non-finite values.
double compensator_weight(const LevyRadialMeasure& m, const std::function<double(double)>& shape);

struct JumpEvent {
    double time = 0.0;    // offset inside the current step
    double radius = 0.0;  // in [r_min, 1)

    friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// splitmix64 finalizer
std::uint64_t splitmix64(std::uint64_t x);
/// Mixes a base seed with an ordered list of identifiers (eps index, sample, stream id, ...).
std::uint64_t derive_seed(std::uint64_t base, std::span<const std::uint64_t> ids);
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
    return derive_seed(base, std::span<const std::uint64_t>(ids.begin(), ids.size()));
}

class NoiseStream {
public:
    NoiseStream(LevyRadialMeasure measure, std::uint64_t seed, double time_scale = 1.0);

    const LevyRadialMeasure& measure() const noexcept { return measure_; }
    double time_scale() const noexcept { return time_scale_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Expected number of jumps in a step of length dt.
    double mean_count(double dt) const;
    /// Poisson count with mean Lambda * time_scale * dt.
    long sample_count(double dt);
    /// Inverse-CDF radius; U = 0 maps to the largest double below 1.
    double sample_radius();
    /// Draws all jumps of one step of length dt: count, then (time, radius) per jump.
    std::vector<JumpEvent> sample_step(double dt);

    /// Same generator state, time scale multiplied by 1/eps. Throws DomainError unless 0 < eps <= 1.
    NoiseStream rescale(double eps) const;

    /// Uniform draw in [0,1) from the top 53 bits of the generator.
    double uniform();

private:
    LevyRadialMeasure measure_;
    std::uint64_t seed_;
    double time_scale_;
    double rate_;
    std::mt19937_64 rng_;
};

/// The inverse CDF used by NoiseStream::sample_radius, exposed for endpoint checks.
double radius_from_uniform(const LevyRadialMeasure& m, double u);

}  // namespace bq
