#pragma once

// Configuration, seeding and Monte-Carlo campaigns for the averaging study and its
// diagnostics, plus CSV and manifest persistence.
//
// Seeds: every (eps index, sample index, stream id) triple maps to
// derive_seed(base_seed, {eps index, sample index, stream id}) with stream 1 = eta_1
// and stream 2 = eta_2. Samples never share state, so results do not depend on the
// number of workers or on completion order.

#include "bq/diagnostics.hpp"
#include "bq/integrator.hpp"
#include "bq/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bq {

/// Malformed or invalid configuration. `line` is 0 for validation errors; `field` names the key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line, std::string field)
        : std::runtime_error(message), line_(line), field_(std::move(field)) {}
    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    int line_;
    std::string field_;
};

struct Thresholds {
    double exponent_min = 0.30;
    double exponent_max = 1.00;
    double r_squared_min = 0.9;
    double increment_slope_min = 0.35;
    double rate_factor = 3.0;
    double sigma_band = 3.0;
    double trend_alpha = 0.05;
    double max_failure_fraction = 0.05;
};

struct ExperimentConfig {
    int n = 32;
    double dt = 1e-3;
    double T = 1.0;
    std::vector<double> eps_list{1.0, 0.5, 0.25, 0.1};
    int n_samples = 100;
    std::uint64_t base_seed = 20240601;
    double beta1 = 0.8;
    double beta2 = 0.6;
    // Intensity constants; empty means unit total mass on [r_min, 1), c = beta / (r_min^{-beta} - 1).
    std::optional<double> c_nu1;
    std::optional<double> c_nu2;
    double r_min = 1e-3;
    double p = 1.0;
    double gamma = 0.1;
    std::vector<double> delta_list{1e-3, 2e-3, 4e-3, 8e-3};
    int record_count = 101;
    double blowup_threshold = 0.0;

    // Initial data j0 = j0_amplitude (cos x + cos y), theta0 = theta0_amplitude cos y.
    double j0_amplitude = 1.0;
    double theta0_amplitude = 1.0;

    // Frozen-equation runs (ergodicity).
    double frozen_dt = 1e-2;
    double contraction_horizon = 2.0;
    int contraction_samples = 16;
    double burn_in = 0.0;  // 0 selects 20 / lambda_p
    double spacing = 1.0;
    int snapshots = 100;
    int replicas = 32;

    // Diagnostics on the slow-fast system.
    double diag_eps = 0.25;
    int increment_paths = 50;
    std::vector<int> increment_lags{2, 4, 8, 16};
    int moment_samples = 100;
    int khasminskii_samples = 20;

    Thresholds thresholds;
    std::string out_dir = "out";

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
    double resolved_c_nu1() const;
    double resolved_c_nu2() const;
    Model model() const;
    SlowFastState initial_state() const;
    DissipativityRates rates() const;
    /// Record instants: record_count uniform points on [0, T].
    std::vector<double> record_times() const;
};

/// Parses the line-based key=value format: '#' starts a comment, lists are comma separated,
/// unknown keys are rejected. Absent keys keep their defaults. The result is validated.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical key=value rendering; parse_config(render_config(c)) reproduces c.
std::string render_config(const ExperimentConfig& config);

/// c_nu for which the truncated measure has total mass one.
double unit_mass_constant(double beta, double r_min);

/// Seed of one stream of one sample.
std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t eps_index, std::size_t sample, int stream);

/// 17-significant-digit rendering used for every CSV float.
std::string format_double(double v);

struct SampleFailure {
    std::size_t eps_index = 0;
    std::size_t sample = 0;
    std::uint64_t seed1 = 0;
    std::uint64_t seed2 = 0;
    double time = 0.0;
    std::string message;
};

struct SampleError {
    std::size_t eps_index = 0;
    std::size_t sample = 0;
    double error = 0.0;
};

struct ConvergenceResult {
    std::vector<double> eps;
    std::vector<ErrorStats> stats;     // one per eps, successful samples only
    std::vector<SampleError> errors;   // ordered by (eps, sample)
    std::vector<SampleFailure> failures;
    std::optional<PowerLawFit> fit;
    std::size_t attempted = 0;
    bool mean_decreasing = false;
    bool mse_decreasing = false;
    bool exponent_in_band = false;

    bool thresholds_pass() const { return mean_decreasing && mse_decreasing && exponent_in_band; }
    double failure_fraction() const { return attempted ? double(failures.size()) / double(attempted) : 0.0; }
};

/// error(eps) for one sample: slow-fast and averaged runs sharing eta_1.
double convergence_sample(const ExperimentConfig& config, const Model& model, std::size_t eps_index,
                          std::size_t sample);

/// workers == 1 runs the serial reference loop; otherwise samples are spread over OpenMP threads
/// (workers == 0 uses the OpenMP default). Both paths produce identical results.
ConvergenceResult run_convergence(const ExperimentConfig& config, int workers);

/// Parses "mse=C*eps^a" (also "mse=Cε^a") into (C, a). Throws ConfigError on malformed input.
std::pair<double, double> parse_synthetic(std::string_view spec);
/// Exact power-law MSE, one sample per eps with error = sqrt(mse).
ConvergenceResult synthetic_convergence(const ExperimentConfig& config, double coefficient, double exponent);

struct ErgodicityResult {
    DissipativityRates rates;
    ContractionReport contraction;
    InvariantEstimate invariant;
    ErgodicOptions ergodic_options;

    // Contraction claims are refused when the dissipativity condition fails.
    bool thresholds_pass() const { return rates.feasible && contraction.pass && invariant.pass; }
};

ErgodicityResult run_ergodicity(const ExperimentConfig& config);

struct IncrementsResult {
    IncrementReport report;
    std::size_t attempted = 0;
    std::vector<SampleFailure> failures;
    bool slope_pass = false;
};

IncrementsResult run_increments(const ExperimentConfig& config, int workers);

struct MomentsResult {
    std::vector<double> eps;
    std::vector<MomentReport> reports;
    UniformityCheck uniformity;
    std::size_t attempted = 0;
    std::vector<SampleFailure> failures;
};

MomentsResult run_moments(const ExperimentConfig& config, int workers);

struct KhasminskiiResult {
    std::vector<double> delta;
    std::vector<double> gap;
    TrendTest trend;
    std::size_t attempted = 0;
    std::vector<SampleFailure> failures;
};

KhasminskiiResult run_khasminskii_study(const ExperimentConfig& config, int workers);

// ---------------------------------------------------------------- persistence

struct ManifestInfo {
    std::string command;
    int workers = 1;
    std::string started_at;
    std::string finished_at;  // empty while the run is in progress
    std::string status = "running";
    std::size_t attempted = 0;
    std::vector<SampleFailure> failures;
    std::string synthetic;  // synthetic spec, empty for simulated runs
};

/// Current UTC time in ISO 8601.
std::string utc_timestamp();

/// Writes manifest.json (config, seed table, timestamps, interpretation notes). Called before any
/// simulation output and again on completion.
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, const ManifestInfo& info);

void write_convergence_csv(const std::filesystem::path& dir, const ConvergenceResult& result);
void write_ergodicity_csv(const std::filesystem::path& dir, const ErgodicityResult& result);
void write_increments_csv(const std::filesystem::path& dir, const IncrementsResult& result);
void write_moments_csv(const std::filesystem::path& dir, const MomentsResult& result);
void write_khasminskii_csv(const std::filesystem::path& dir, const KhasminskiiResult& result);

}  // namespace bq
