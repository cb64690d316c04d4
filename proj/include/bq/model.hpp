#pragma once

// Coefficients of the slow-fast Boussinesq system and of its averaged equation.
//
// Jump amplitudes are stored in factored form, sigma(field, z) = amp(field) * shape(|z|),
// which is what the example system uses and what lets the compensator be applied
// as amp(field) times a scalar quadrature weight.

#include "bq/noise.hpp"
#include "bq/spectral.hpp"

#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace bq {

using FieldMap = std::function<SpectralField(const SpectralField&)>;
using FieldMap2 = std::function<SpectralField(const SpectralField&, const SpectralField&)>;
using ShapeFn = std::function<double(double)>;

struct CoefficientSet {
    FieldMap2 drift;  // f(j, theta)
    FieldMap amp1;    // sigma_1(j, z) = amp1(j) * shape1(|z|)
    ShapeFn shape1;
    FieldMap amp2;    // sigma_2(theta, z) = amp2(theta) * shape2(|z|)
    ShapeFn shape2;

    /// Copy with f replaced by zero.
    CoefficientSet without_drift() const;
};

struct AveragedSet {
    std::function<SpectralField(const SpectralField&, const VelocityField&)> f_bar;  // f_bar(j, u)
    std::function<SpectralField(const VelocityField&)> g;
    FieldMap amp1;
    ShapeFn shape1;

    AveragedSet without_drift() const;
};

// Pointwise scalar maps of the example system.
double signed_power(double x, double a);  // sgn(x)|x|^a, 0 at x = 0
double example_f_pointwise(double j, double theta);
double example_amp1_pointwise(double j);
double example_shape1(double r);
double example_shape2(double r);

SpectralField example_f(const SpectralField& j, const SpectralField& theta);
SpectralField example_sigma1(const SpectralField& j, double r);
SpectralField example_sigma2(const SpectralField& theta, double r);
SpectralField averaged_f(const SpectralField& j);
SpectralField averaged_g(const TorusGrid& grid);
inline SpectralField averaged_sigma1(const SpectralField& j, double r) { return example_sigma1(j, r); }

CoefficientSet example_coefficients();
AveragedSet example_averaged();

/// kappa(u) = c * u^exponent, concave and non-decreasing for exponent in (0,1].
struct KappaModulus {
    double c = 1.0;
    double exponent = 2.0 / 3.0;

    double operator()(double u) const;
    /// Constants (c1, c2) with kappa(u) <= c1 u + c2 for all u >= 0 (Young's inequality).
    std::pair<double, double> linear_growth() const;
};

struct KappaCheck {
    bool zero_at_origin = false;
    bool non_decreasing = false;
    bool midpoint_concave = false;
    bool linear_growth = false;
    bool ok() const { return zero_at_origin && non_decreasing && midpoint_concave && linear_growth; }
};

/// Checks kappa on a uniform grid of [0, u_max].
KappaCheck check_kappa(const KappaModulus& kappa, double u_max, int points = 200);

struct PointPair {
    double u1, v1, u2, v2;
};

/// Smallest c such that |f(u1,v1) - f(u2,v2)|^2 <= c (|u1-u2|^2 + |v1-v2|^2)^exponent on the pairs.
double fit_kappa_constant(std::span<const PointPair> pairs,
                          const std::function<double(double, double)>& f, double exponent);
/// Random pointwise pairs with coordinates uniform on [-range, range].
std::vector<PointPair> random_pairs(std::size_t count, double range, std::uint64_t seed);

struct DissipativityRates {
    double lambda = 1.0;
    double p = 1.0;
    double gamma = 0.1;
    double m_p = 0.0;
    double l_sigma2 = 0.0;
    double lambda_p = 0.0;
    double lambda_p_gamma = 0.0;
    bool feasible = false;
};

/// M_p = 2p (2p-1) 2^{2p-3}
double moment_constant(double p);

/// Rate constants of the dissipativity condition. L_sigma2 integrates |shape|^{2p} against nu_2.
/// Throws DomainError for p < 1 or gamma outside (0,1); infeasibility is reported, not thrown.
DissipativityRates compute_rates(double p, double gamma, const LevyRadialMeasure& measure2,
                                 const ShapeFn& sigma2_shape);

}  // namespace bq
