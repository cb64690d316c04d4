#pragma once

// Monte-Carlo estimators that confront simulated paths with the quantitative
// structure of the averaging theory: moments, increments, contraction of the
// frozen equation, invariant-measure averages, Khasminskii gaps and error(eps).

#include "bq/integrator.hpp"
#include "bq/model.hpp"
#include "bq/spectral.hpp"

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace bq {

// ---------------------------------------------------------------- regression

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x. Needs at least two distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct PowerLawFit {
    double coefficient = 0.0;
    double exponent = 0.0;
    double r_squared = 0.0;
};

/// Least squares on (log eps, log mse). Throws DomainError for fewer than 3 pairs or non-positive values.
PowerLawFit power_law_fit(std::span<const double> eps, std::span<const double> mse);

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
};
MeanStderr mean_stderr(std::span<const double> samples);

// ---------------------------------------------------------------- error(eps)

/// max over record times of |j_a - j_b|_H. Both paths need recorded j fields on identical times.
double sup_error(const RecordedPath& a, const RecordedPath& b);

struct ErrorStats {
    double eps = 1.0;
    std::vector<double> samples;
    double mean = 0.0;
    double mse = 0.0;  // mean of squared errors

    static ErrorStats from_samples(double eps, std::vector<double> samples);
};

// ---------------------------------------------------------------- moments

struct MomentReport {
    double p = 1.0;
    std::size_t paths = 0;
    double sup_moment = 0.0;  // E sup_t |j|^{2p}
    double sup_moment_stderr = 0.0;
    double dissipation = 0.0;  // E int |j|^{2(p-1)} |grad j|^2 dt
    double dissipation_stderr = 0.0;
    double theta_sup_by_t = 0.0;  // max_t E |theta_t|^{2p}
    double theta_sup_moment = 0.0;  // E sup_t |theta|^{2p}
    double theta_sup_stderr = 0.0;
};

/// Throws DomainError when fewer than `min_paths` paths are given.
MomentReport estimate_moments(std::span<const RecordedPath> paths, double p, std::size_t min_paths = 30);

struct UniformityCheck {
    double max_pair_z = 0.0;  // max |m_a - m_b| / sqrt(se_a^2 + se_b^2) over pairs
    double slope = 0.0;       // weighted slope of the estimate against eps
    double slope_z = 0.0;
    bool pairwise_pass = false;  // max_pair_z < band
    bool slope_pass = false;     // |slope_z| < 2
};

UniformityCheck moment_uniformity(std::span<const double> eps, std::span<const MomentReport> reports,
                                  double band = 3.0);

// ---------------------------------------------------------------- increments

/// Accumulates |j_t - j_{t-L dt}|_H^2 for a set of lags L (in steps) while a path is integrated.
class IncrementAccumulator {
public:
    explicit IncrementAccumulator(std::vector<long> lags);

    void observe(const SpectralField& j);
    /// Merges another accumulator with the same lags.
    void merge(const IncrementAccumulator& other);
    /// Resets the history (start of a new path) but keeps the sums.
    void new_path();

    const std::vector<long>& lags() const noexcept { return lags_; }
    std::vector<double> mean_sq() const;

private:
    std::vector<long> lags_;
    std::deque<SpectralField> history_;
    std::vector<double> sums_;
    std::vector<long> counts_;
};

struct IncrementReport {
    std::vector<double> delta_grid;
    std::vector<double> mean_sq_increments;
    double fitted_slope = 0.0;
    LinearFit fit;
};

/// Fits log E|j_t - j_{t-delta}|^2 against log delta. Throws DomainError for fewer than 3 lags,
/// non-increasing lags, or non-positive increments (a constant path).
IncrementReport increment_law(std::span<const double> delta_grid, std::span<const double> mean_sq);

// ---------------------------------------------------------------- contraction

struct ContractionOptions {
    double dt = 1e-2;
    double horizon = 2.0;
    int record_count = 41;
    int samples = 16;
    std::uint64_t seed = 1;
    double rate_factor = 3.0;
};

struct ContractionReport {
    std::vector<double> times;
    std::vector<double> gaps;  // E |theta_1(t) - theta_2(t)|_H^2
    double fitted_rate = 0.0;
    double theoretical_rate = 0.0;  // lambda_p / p
    bool feasible = false;
    bool degenerate = false;  // identical inputs
    bool pass = false;
};

/// Two frozen runs from theta1, theta2 driven by the same eta_2 path, with u = biot_savart(j_frozen).
ContractionReport contraction_test(const Model& model, const SpectralField& j_frozen, const SpectralField& theta1,
                                   const SpectralField& theta2, const ContractionOptions& options,
                                   const DissipativityRates& rates);

// ---------------------------------------------------------------- invariant measure

struct ErgodicOptions {
    double dt = 1e-2;
    double burn_in = 20.0;
    double spacing = 1.0;
    int snapshots = 100;
    int replicas = 32;
    /// Replica initial conditions are random fields with Gaussian coefficients on |k_i| <= 4.
    double init_amplitude = 1.0;
    std::uint64_t seed = 7;
};

struct ErgodicAverage {
    SpectralField estimate;
    PhysicalField stderr_field;  // pointwise standard error across replicas
    double stderr_norm = 0.0;    // sqrt(E |estimate - truth|_H^2) estimated from replica spread
    double second_moment = 0.0;  // mean |theta|_H^2 over all snapshots
    int snapshots = 0;
    int replicas = 0;
};

/// Time average of observable(theta_tilde) over snapshots after burn-in, averaged over replicas
/// with symmetric random initial data. The frozen velocity is biot_savart(j_frozen).
ErgodicAverage ergodic_average(const Model& model, const SpectralField& j_frozen, const FieldMap& observable,
                               const ErgodicOptions& options);

/// Ergodic estimate of f_bar(j) = int f(j, theta) pi^u(d theta) with u = biot_savart(j).
ErgodicAverage estimate_averaged_f(const Model& model, const SpectralField& j, const ErgodicOptions& options);

/// random mean-zero field with N(0, amplitude^2) real/imag parts on modes with |k_i| <= kmax
SpectralField random_field(const TorusGrid& grid, double amplitude, int kmax, std::uint64_t seed);

struct InvariantEstimate {
    SpectralField g_hat;
    double norm_g_hat = 0.0;
    double std_error = 0.0;
    double second_moment = 0.0;
    bool burn_in_ok = true;  // burn_in >= 20 / lambda_p
    bool pass = false;       // |g_hat|_H <= band * stderr
};

InvariantEstimate invariant_g_estimate(const Model& model, const SpectralField& j_frozen,
                                       const ErgodicOptions& options, const DissipativityRates& rates,
                                       double band = 3.0);

// ---------------------------------------------------------------- Khasminskii

/// E int_0^T |theta_hat - theta|_H^2 dt (trapezoid over record times) across auxiliary paths.
double khasminskii_gap(std::span<const RecordedPath> paths);

struct TrendTest {
    double tau = 0.0;       // Kendall tau between delta and gap
    double p_value = 1.0;   // one-sided, for gap increasing with delta
    bool monotone = false;  // gap non-increasing as delta decreases
    bool pass = false;      // monotone and p_value < alpha
};

TrendTest kendall_trend(std::span<const double> delta, std::span<const double> gap, double alpha = 0.05);

}  // namespace bq
