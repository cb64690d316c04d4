// Command-line driver for the averaging study and its diagnostics.
//
// Exit codes: 0 success, 2 configuration error, 3 acceptance-threshold failure,
// 4 more than the allowed fraction of samples blew up.

#include "bq/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kThresholdFailure = 3;
constexpr int kExcessBlowUps = 4;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int workers = 0;
    std::string synthetic;
};

void add_common(CLI::App* cmd, Common& c, bool synthetic) {
    cmd->add_option("--config", c.config_path, "key=value config file (defaults when omitted)");
    cmd->add_option("--seed", c.seed, "base seed, overrides the config");
    cmd->add_option("--out-dir", c.out_dir, "output directory, overrides the config");
    cmd->add_option("--workers", c.workers, "worker threads; 1 runs the serial reference path, 0 uses all cores")
        ->check(CLI::NonNegativeNumber);
    if (synthetic) cmd->add_option("--synthetic", c.synthetic, "fit-path self-test, e.g. mse=2*eps^0.645");
}

bq::ExperimentConfig resolve(const Common& c) {
    bq::ExperimentConfig cfg = c.config_path.empty() ? bq::parse_config("") : bq::load_config(c.config_path);
    if (c.seed) cfg.base_seed = *c.seed;
    if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
    cfg.validate();
    return cfg;
}

int finish(const bq::ExperimentConfig& cfg, bq::ManifestInfo& info, std::size_t attempted,
           const std::vector<bq::SampleFailure>& failures, bool thresholds_pass) {
    info.attempted = attempted;
    info.failures = failures;
    info.finished_at = bq::utc_timestamp();
    const double fraction = attempted ? double(failures.size()) / double(attempted) : 0.0;
    int code = kOk;
    if (fraction > cfg.thresholds.max_failure_fraction) {
        code = kExcessBlowUps;
    } else if (!thresholds_pass) {
        code = kThresholdFailure;
    }
    info.status = code == kOk ? "ok" : code == kExcessBlowUps ? "excess_blow_ups" : "threshold_failure";
    bq::write_manifest(cfg.out_dir, cfg, info);
    if (!failures.empty()) {
        std::printf("failed samples: %zu of %zu\n", failures.size(), attempted);
    }
    std::printf("status: %s\n", info.status.c_str());
    return code;
}

int run(const std::string& command, const Common& common) {
    const bq::ExperimentConfig cfg = resolve(common);
    bq::ManifestInfo info;
    info.command = command;
    info.workers = common.workers;
    info.started_at = bq::utc_timestamp();
    info.synthetic = common.synthetic;
    std::optional<std::pair<double, double>> synthetic;
    if (!common.synthetic.empty()) synthetic = bq::parse_synthetic(common.synthetic);
    bq::write_manifest(cfg.out_dir, cfg, info);

    if (command == "convergence") {
        const bq::ConvergenceResult r = synthetic ? bq::synthetic_convergence(cfg, synthetic->first, synthetic->second)
                                                  : bq::run_convergence(cfg, common.workers);
        bq::write_convergence_csv(cfg.out_dir, r);
        for (const auto& s : r.stats) {
            std::printf("eps=%-6g mean_error=%.6g mse=%.6g n=%zu\n", s.eps, s.mean, s.mse, s.samples.size());
        }
        if (r.fit) {
            std::printf("fit: mse ~ %.6g * eps^%.6g (r^2 = %.4f)\n", r.fit->coefficient, r.fit->exponent,
                        r.fit->r_squared);
        }
        std::printf("mean decreasing: %s, mse decreasing: %s, exponent in band: %s\n",
                    r.mean_decreasing ? "yes" : "no", r.mse_decreasing ? "yes" : "no",
                    r.exponent_in_band ? "yes" : "no");
        return finish(cfg, info, r.attempted, r.failures, r.thresholds_pass());
    }
    if (command == "ergodicity") {
        const bq::ErgodicityResult r = bq::run_ergodicity(cfg);
        bq::write_ergodicity_csv(cfg.out_dir, r);
        std::printf("L_sigma2=%.6g lambda_p=%.6g feasible=%s\n", r.rates.l_sigma2, r.rates.lambda_p,
                    r.rates.feasible ? "true" : "false");
        if (!r.rates.feasible) std::printf("warning: lambda_p <= 0, contraction claims are not asserted\n");
        std::printf("contraction: fitted=%.6g theoretical=%.6g pass=%s\n", r.contraction.fitted_rate,
                    r.contraction.theoretical_rate, r.contraction.pass ? "true" : "false");
        std::printf("invariant: |g_hat|=%.6g stderr=%.6g pass=%s%s\n", r.invariant.norm_g_hat, r.invariant.std_error,
                    r.invariant.pass ? "true" : "false", r.invariant.burn_in_ok ? "" : " (burn-in below 20/lambda_p)");
        return finish(cfg, info, 0, {}, r.thresholds_pass());
    }
    if (command == "increments") {
        const bq::IncrementsResult r = bq::run_increments(cfg, common.workers);
        bq::write_increments_csv(cfg.out_dir, r);
        for (std::size_t i = 0; i < r.report.delta_grid.size(); ++i) {
            std::printf("delta=%-8g E|dj|^2=%.6g\n", r.report.delta_grid[i], r.report.mean_sq_increments[i]);
        }
        std::printf("slope=%.6g pass=%s\n", r.report.fitted_slope, r.slope_pass ? "true" : "false");
        return finish(cfg, info, r.attempted, r.failures, r.slope_pass);
    }
    if (command == "moments") {
        const bq::MomentsResult r = bq::run_moments(cfg, common.workers);
        bq::write_moments_csv(cfg.out_dir, r);
        for (std::size_t i = 0; i < r.reports.size(); ++i) {
            std::printf("eps=%-6g E sup|j|^2p=%.6g (se %.3g)  E sup|theta|^2p=%.6g (se %.3g)\n", r.eps[i],
                        r.reports[i].sup_moment, r.reports[i].sup_moment_stderr, r.reports[i].theta_sup_moment,
                        r.reports[i].theta_sup_stderr);
        }
        std::printf("max pairwise z=%.3f pass=%s; slope vs eps z=%.3f\n", r.uniformity.max_pair_z,
                    r.uniformity.pairwise_pass ? "true" : "false", r.uniformity.slope_z);
        return finish(cfg, info, r.attempted, r.failures, r.uniformity.pairwise_pass);
    }
    const bq::KhasminskiiResult r = bq::run_khasminskii_study(cfg, common.workers);
    bq::write_khasminskii_csv(cfg.out_dir, r);
    for (std::size_t i = 0; i < r.delta.size(); ++i) std::printf("delta=%-8g gap=%.6g\n", r.delta[i], r.gap[i]);
    std::printf("kendall tau=%.3f p=%.4f monotone=%s pass=%s\n", r.trend.tau, r.trend.p_value,
                r.trend.monotone ? "true" : "false", r.trend.pass ? "true" : "false");
    return finish(cfg, info, r.attempted, r.failures, r.trend.pass);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slow-fast stochastic Boussinesq averaging experiments"};
    app.require_subcommand(1);
    const char* commands[] = {"convergence", "ergodicity", "increments", "moments", "khasminskii"};
    const char* help[] = {"error(eps) campaign and power-law fit", "frozen-equation contraction and invariant mean",
                          "increment scaling of the slow vorticity", "moment bounds across the eps grid",
                          "Khasminskii auxiliary-process gaps over the delta grid"};
    Common common;
    for (int i = 0; i < 5; ++i) {
        add_common(app.add_subcommand(commands[i], help[i]), common, i == 0);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    try {
        return run(app.get_subcommands().front()->get_name(), common);
    } catch (const bq::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
