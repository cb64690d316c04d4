#include "bq/experiments.hpp"

#include "bq/errors.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <regex>
#include <sstream>

#ifndef BQ_VERSION
#define BQ_VERSION "unknown"
#endif

namespace bq {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& text, const std::string& key, int line) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError("line " + std::to_string(line) + ": " + key + ": expected a number, got '" + t + "'", line,
                          key);
    }
    return v;
}

long long parse_integer(const std::string& text, const std::string& key, int line) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError("line " + std::to_string(line) + ": " + key + ": expected an integer, got '" + t + "'",
                          line, key);
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& key, int line) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
        throw ConfigError("line " + std::to_string(line) + ": " + key + ": expected a non-negative integer, got '" +
                              t + "'",
                          line, key);
    }
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!text.empty() && text.back() == ',') out.emplace_back();
    return out;
}

template <class T>
std::string render_list(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        if constexpr (std::is_floating_point_v<T>) {
            s += format_double(v[i]);
        } else {
            s += std::to_string(v[i]);
        }
    }
    return s;
}

struct FieldSpec {
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&, int)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class M>
FieldSpec real_field(const char* key, M member) {
    return {key, [=](ExperimentConfig& c, const std::string& v, int line) { c.*member = parse_double(v, key, line); },
            [=](const ExperimentConfig& c) { return format_double(c.*member); }};
}

template <class M>
FieldSpec int_field(const char* key, M member) {
    return {key,
            [=](ExperimentConfig& c, const std::string& v, int line) {
                const long long x = parse_integer(v, key, line);
                if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
                    throw ConfigError("line " + std::to_string(line) + ": " + key + ": integer out of range", line,
                                      key);
                }
                c.*member = int(x);
            },
            [=](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

template <class M>
FieldSpec threshold_field(const char* key, M member) {
    return {key,
            [=](ExperimentConfig& c, const std::string& v, int line) {
                c.thresholds.*member = parse_double(v, key, line);
            },
            [=](const ExperimentConfig& c) { return format_double(c.thresholds.*member); }};
}

FieldSpec real_list_field(const char* key, std::vector<double> ExperimentConfig::*member) {
    return {key,
            [=](ExperimentConfig& c, const std::string& v, int line) {
                std::vector<double> out;
                for (const auto& item : split_list(v)) out.push_back(parse_double(item, key, line));
                c.*member = std::move(out);
            },
            [=](const ExperimentConfig& c) { return render_list(c.*member); }};
}

/// A number, or "unit_mass" for the constant that gives the truncated measure total mass one.
FieldSpec intensity_field(const char* key, std::optional<double> ExperimentConfig::*member) {
    return {key,
            [=](ExperimentConfig& c, const std::string& v, int line) {
                if (trim(v) == "unit_mass") {
                    c.*member = std::nullopt;
                } else {
                    c.*member = parse_double(v, key, line);
                }
            },
            [=](const ExperimentConfig& c) { return c.*member ? format_double(*(c.*member)) : "unit_mass"; }};
}

const std::vector<FieldSpec>& field_table() {
    static const std::vector<FieldSpec> table = {
        int_field("n", &ExperimentConfig::n),
        real_field("dt", &ExperimentConfig::dt),
        real_field("T", &ExperimentConfig::T),
        real_list_field("eps_list", &ExperimentConfig::eps_list),
        int_field("n_samples", &ExperimentConfig::n_samples),
        {"base_seed",
         [](ExperimentConfig& c, const std::string& v, int line) { c.base_seed = parse_unsigned(v, "base_seed", line); },
         [](const ExperimentConfig& c) { return std::to_string(c.base_seed); }},
        real_field("beta1", &ExperimentConfig::beta1),
        real_field("beta2", &ExperimentConfig::beta2),
        intensity_field("c_nu1", &ExperimentConfig::c_nu1),
        intensity_field("c_nu2", &ExperimentConfig::c_nu2),
        real_field("r_min", &ExperimentConfig::r_min),
        real_field("p", &ExperimentConfig::p),
        real_field("gamma", &ExperimentConfig::gamma),
        real_list_field("delta_list", &ExperimentConfig::delta_list),
        int_field("record_count", &ExperimentConfig::record_count),
        real_field("blowup_threshold", &ExperimentConfig::blowup_threshold),
        real_field("j0_amplitude", &ExperimentConfig::j0_amplitude),
        real_field("theta0_amplitude", &ExperimentConfig::theta0_amplitude),
        real_field("frozen_dt", &ExperimentConfig::frozen_dt),
        real_field("contraction_horizon", &ExperimentConfig::contraction_horizon),
        int_field("contraction_samples", &ExperimentConfig::contraction_samples),
        real_field("burn_in", &ExperimentConfig::burn_in),
        real_field("spacing", &ExperimentConfig::spacing),
        int_field("snapshots", &ExperimentConfig::snapshots),
        int_field("replicas", &ExperimentConfig::replicas),
        real_field("diag_eps", &ExperimentConfig::diag_eps),
        int_field("increment_paths", &ExperimentConfig::increment_paths),
        {"increment_lags",
         [](ExperimentConfig& c, const std::string& v, int line) {
             std::vector<int> out;
             for (const auto& item : split_list(v)) out.push_back(int(parse_integer(item, "increment_lags", line)));
             c.increment_lags = std::move(out);
         },
         [](const ExperimentConfig& c) { return render_list(c.increment_lags); }},
        int_field("moment_samples", &ExperimentConfig::moment_samples),
        int_field("khasminskii_samples", &ExperimentConfig::khasminskii_samples),
        threshold_field("exponent_min", &Thresholds::exponent_min),
        threshold_field("exponent_max", &Thresholds::exponent_max),
        threshold_field("r_squared_min", &Thresholds::r_squared_min),
        threshold_field("increment_slope_min", &Thresholds::increment_slope_min),
        threshold_field("rate_factor", &Thresholds::rate_factor),
        threshold_field("sigma_band", &Thresholds::sigma_band),
        threshold_field("trend_alpha", &Thresholds::trend_alpha),
        threshold_field("max_failure_fraction", &Thresholds::max_failure_fraction),
        {"out_dir", [](ExperimentConfig& c, const std::string& v, int) { c.out_dir = trim(v); },
         [](const ExperimentConfig& c) { return c.out_dir; }},
    };
    return table;
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    throw ConfigError("invalid " + field + ": " + why, 0, field);
}

void require_positive(const std::string& field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) invalid(field, "must be positive and finite");
}

bool is_step_multiple(double value, double dt) {
    const double ratio = value / dt;
    return std::round(ratio) >= 1.0 && std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n < 4 || n % 2 != 0) invalid("n", "must be an even integer >= 4");
    require_positive("dt", dt);
    require_positive("T", T);
    if (dt > T) invalid("dt", "must not exceed T");
    if (eps_list.empty()) invalid("eps_list", "must not be empty");
    for (double e : eps_list) {
        if (!(e > 0.0 && e <= 1.0)) invalid("eps_list", "values must lie in (0,1]");
    }
    if (n_samples < 1) invalid("n_samples", "must be >= 1");
    if (!(beta1 > 0.0 && beta1 < 1.0)) invalid("beta1", "must lie in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) invalid("beta2", "must lie in (0,1)");
    if (c_nu1 && (!(*c_nu1 >= 0.0) || !std::isfinite(*c_nu1))) invalid("c_nu1", "must be finite and >= 0");
    if (c_nu2 && (!(*c_nu2 >= 0.0) || !std::isfinite(*c_nu2))) invalid("c_nu2", "must be finite and >= 0");
    if (!(r_min > 0.0 && r_min < 1.0)) invalid("r_min", "must lie in (0,1)");
    if (!(p >= 1.0) || !std::isfinite(p)) invalid("p", "must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) invalid("gamma", "must lie in (0,1)");
    for (double d : delta_list) {
        if (!(d > 0.0) || !is_step_multiple(d, dt)) invalid("delta_list", "values must be positive multiples of dt");
        if (d > T) invalid("delta_list", "values must not exceed T");
    }
    if (record_count < 2) invalid("record_count", "must be >= 2");
    if (!(blowup_threshold >= 0.0)) invalid("blowup_threshold", "must be >= 0");
    if (!std::isfinite(j0_amplitude)) invalid("j0_amplitude", "must be finite");
    if (!std::isfinite(theta0_amplitude)) invalid("theta0_amplitude", "must be finite");
    require_positive("frozen_dt", frozen_dt);
    require_positive("contraction_horizon", contraction_horizon);
    if (contraction_samples < 1) invalid("contraction_samples", "must be >= 1");
    if (!(burn_in >= 0.0) || !std::isfinite(burn_in)) invalid("burn_in", "must be >= 0");
    require_positive("spacing", spacing);
    if (snapshots < 1) invalid("snapshots", "must be >= 1");
    if (replicas < 2) invalid("replicas", "must be >= 2");
    if (!(diag_eps > 0.0 && diag_eps <= 1.0)) invalid("diag_eps", "must lie in (0,1]");
    if (increment_paths < 1) invalid("increment_paths", "must be >= 1");
    for (std::size_t i = 0; i < increment_lags.size(); ++i) {
        if (increment_lags[i] < 1 || (i > 0 && increment_lags[i] <= increment_lags[i - 1])) {
            invalid("increment_lags", "must be positive and increasing");
        }
    }
    if (moment_samples < 1) invalid("moment_samples", "must be >= 1");
    if (khasminskii_samples < 1) invalid("khasminskii_samples", "must be >= 1");
    if (!(thresholds.exponent_min <= thresholds.exponent_max)) invalid("exponent_min", "must not exceed exponent_max");
    if (!(thresholds.r_squared_min <= 1.0)) invalid("r_squared_min", "must be <= 1");
    require_positive("rate_factor", thresholds.rate_factor);
    require_positive("sigma_band", thresholds.sigma_band);
    if (!(thresholds.trend_alpha > 0.0 && thresholds.trend_alpha < 1.0)) invalid("trend_alpha", "must lie in (0,1)");
    if (!(thresholds.max_failure_fraction >= 0.0 && thresholds.max_failure_fraction <= 1.0)) {
        invalid("max_failure_fraction", "must lie in [0,1]");
    }
    if (out_dir.empty()) invalid("out_dir", "must not be empty");
}

double unit_mass_constant(double beta, double r_min) { return beta / (std::pow(r_min, -beta) - 1.0); }

double ExperimentConfig::resolved_c_nu1() const { return c_nu1 ? *c_nu1 : unit_mass_constant(beta1, r_min); }
double ExperimentConfig::resolved_c_nu2() const { return c_nu2 ? *c_nu2 : unit_mass_constant(beta2, r_min); }

Model ExperimentConfig::model() const {
    return example_model(n, beta1, beta2, resolved_c_nu1(), resolved_c_nu2(), r_min);
}

SlowFastState ExperimentConfig::initial_state() const {
    const TorusGrid grid(n);
    SlowFastState s{SpectralField(grid), SpectralField(grid), 0.0, 1.0};
    s.j.set_mode(1, 0, Complex(0.5 * j0_amplitude, 0.0));
    s.j.set_mode(0, 1, Complex(0.5 * j0_amplitude, 0.0));
    s.theta.set_mode(0, 1, Complex(0.5 * theta0_amplitude, 0.0));
    return s;
}

DissipativityRates ExperimentConfig::rates() const {
    return compute_rates(p, gamma, LevyRadialMeasure{beta2, resolved_c_nu2(), r_min}, example_shape2);
}

std::vector<double> ExperimentConfig::record_times() const { return uniform_times(T, record_count); }

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    std::vector<std::string> seen;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string body = trim(raw);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected key=value, got '" + body + "'", line, "");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto& table = field_table();
        const auto it = std::find_if(table.begin(), table.end(), [&](const FieldSpec& f) { return key == f.key; });
        if (it == table.end()) {
            throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'", line, key);
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'", line, key);
        }
        seen.push_back(key);
        it->set(c, value, line);
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string(), 0, "");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& config) {
    std::string out;
    for (const auto& f : field_table()) out += std::string(f.key) + "=" + f.get(config) + "\n";
    return out;
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t eps_index, std::size_t sample, int stream) {
    return derive_seed(base_seed, {std::uint64_t(eps_index), std::uint64_t(sample), std::uint64_t(stream)});
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- sample scheduling

namespace {

struct SampleOutcome {
    bool ok = false;
    double time = -1.0;
    std::string message;
};

/// Runs task(i) for i in [0, count). Numeric failures are recorded per sample; any other
/// exception is rethrown after the loop. workers == 1 is the serial reference path.
std::vector<SampleOutcome> run_samples(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
    std::vector<SampleOutcome> outcomes(count);
    std::vector<std::exception_ptr> fatal(count);
    auto guarded = [&](std::size_t i) {
        try {
            task(i);
            outcomes[i].ok = true;
        } catch (const BlowUpError& e) {
            outcomes[i].time = e.time();
            outcomes[i].message = e.what();
        } catch (const NumericError& e) {
            outcomes[i].message = e.what();
        } catch (...) {
            fatal[i] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) guarded(i);
    } else {
        const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long i = 0; i < long(count); ++i) guarded(std::size_t(i));
    }
    for (const auto& e : fatal) {
        if (e) std::rethrow_exception(e);
    }
    return outcomes;
}

SampleFailure failure_of(const ExperimentConfig& c, std::size_t eps_index, std::size_t sample,
                         const SampleOutcome& o) {
    return {eps_index,
            sample,
            sample_seed(c.base_seed, eps_index, sample, 1),
            sample_seed(c.base_seed, eps_index, sample, 2),
            o.time,
            o.message};
}

bool strictly_decreasing_as_eps_shrinks(const std::vector<double>& eps, const std::vector<double>& values) {
    std::vector<std::size_t> order(eps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (!(values[order[i]] < values[order[i - 1]])) return false;
    }
    return true;
}

RunOptions slow_fast_options(const ExperimentConfig& c, double eps, bool record_fields) {
    RunOptions o;
    o.step.dt = c.dt;
    o.step.eps = eps;
    o.step.blowup_threshold = c.blowup_threshold;
    o.horizon = c.T;
    o.record_times = c.record_times();
    o.record_fields = record_fields;
    return o;
}

void finish_convergence(ConvergenceResult& r, const Thresholds& th) {
    std::vector<double> means, mses;
    bool all_positive = r.stats.size() >= 3;
    for (const auto& s : r.stats) {
        means.push_back(s.mean);
        mses.push_back(s.mse);
        if (s.samples.empty() || !(s.mse > 0.0)) all_positive = false;
    }
    r.mean_decreasing = strictly_decreasing_as_eps_shrinks(r.eps, means);
    r.mse_decreasing = strictly_decreasing_as_eps_shrinks(r.eps, mses);
    if (all_positive) r.fit = power_law_fit(r.eps, mses);
    r.exponent_in_band = r.fit && r.fit->exponent >= th.exponent_min && r.fit->exponent <= th.exponent_max &&
                         r.fit->r_squared >= th.r_squared_min;
}

}  // namespace

// ---------------------------------------------------------------- campaigns

double convergence_sample(const ExperimentConfig& config, const Model& model, std::size_t eps_index,
                          std::size_t sample) {
    const double eps = config.eps_list.at(eps_index);
    const RunOptions options = slow_fast_options(config, eps, true);
    const SlowFastState initial = config.initial_state();
    const std::initializer_list<std::uint64_t> ids = {std::uint64_t(eps_index), std::uint64_t(sample)};
    CoupledNoise noise = CoupledNoise::make(model, eps, config.base_seed, ids);
    const RecordedPath slow = integrate(ProcessKind::slow_fast, model, initial, options, noise);
    // Same seeds, so the averaged run consumes the identical eta_1 events.
    CoupledNoise shared = CoupledNoise::make(model, eps, config.base_seed, ids);
    const RecordedPath averaged = integrate(ProcessKind::averaged, model, initial, options, shared);
    return sup_error(slow, averaged);
}

ConvergenceResult run_convergence(const ExperimentConfig& config, int workers) {
    config.validate();
    const Model model = config.model();
    const std::size_t n_eps = config.eps_list.size();
    const std::size_t n = std::size_t(config.n_samples);
    std::vector<double> values(n_eps * n, 0.0);
    const auto outcomes = run_samples(n_eps * n, workers, [&](std::size_t i) {
        values[i] = convergence_sample(config, model, i / n, i % n);
    });

    ConvergenceResult r;
    r.eps = config.eps_list;
    r.attempted = values.size();
    for (std::size_t e = 0; e < n_eps; ++e) {
        std::vector<double> ok;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t i = e * n + s;
            if (outcomes[i].ok) {
                ok.push_back(values[i]);
                r.errors.push_back({e, s, values[i]});
            } else {
                r.failures.push_back(failure_of(config, e, s, outcomes[i]));
            }
        }
        r.stats.push_back(ErrorStats::from_samples(config.eps_list[e], std::move(ok)));
    }
    finish_convergence(r, config.thresholds);
    return r;
}

std::pair<double, double> parse_synthetic(std::string_view spec) {
    static const std::regex pattern(
        R"(^\s*mse\s*=\s*([0-9.eE+\-]+)\s*\*?\s*(?:eps|ε)\s*\^\s*([0-9.eE+\-]+)\s*$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(spec.begin(), spec.end(), m, pattern)) {
        throw ConfigError("malformed synthetic spec '" + std::string(spec) + "', expected mse=C*eps^a", 0,
                          "synthetic");
    }
    const double c = parse_double(m[1].str(), "synthetic", 0);
    const double a = parse_double(m[2].str(), "synthetic", 0);
    if (!(c > 0.0)) throw ConfigError("synthetic coefficient must be positive", 0, "synthetic");
    return {c, a};
}

ConvergenceResult synthetic_convergence(const ExperimentConfig& config, double coefficient, double exponent) {
    ConvergenceResult r;
    r.eps = config.eps_list;
    for (std::size_t e = 0; e < r.eps.size(); ++e) {
        const double error = std::sqrt(coefficient * std::pow(r.eps[e], exponent));
        r.errors.push_back({e, 0, error});
        r.stats.push_back(ErrorStats::from_samples(r.eps[e], {error}));
    }
    r.attempted = r.eps.size();
    finish_convergence(r, config.thresholds);
    return r;
}

ErgodicityResult run_ergodicity(const ExperimentConfig& config) {
    config.validate();
    const Model model = config.model();
    const SpectralField j_frozen = config.initial_state().j;
    const DissipativityRates rates = config.rates();

    ContractionOptions co;
    co.dt = config.frozen_dt;
    co.horizon = config.contraction_horizon;
    co.samples = config.contraction_samples;
    co.seed = derive_seed(config.base_seed, {0xC0, 3});
    co.rate_factor = config.thresholds.rate_factor;
    const SpectralField theta1 = random_field(model.grid, 1.0, 4, derive_seed(config.base_seed, {0xC0, 1}));
    const SpectralField theta2 = random_field(model.grid, 1.0, 4, derive_seed(config.base_seed, {0xC0, 2}));
    ContractionReport contraction = contraction_test(model, j_frozen, theta1, theta2, co, rates);

    ErgodicOptions eo;
    eo.dt = config.frozen_dt;
    eo.burn_in = config.burn_in > 0.0 ? config.burn_in : (rates.lambda_p > 0.0 ? 20.0 / rates.lambda_p : 20.0);
    eo.spacing = config.spacing;
    eo.snapshots = config.snapshots;
    eo.replicas = config.replicas;
    eo.seed = derive_seed(config.base_seed, {0xE0});
    InvariantEstimate invariant = invariant_g_estimate(model, j_frozen, eo, rates, config.thresholds.sigma_band);
    return ErgodicityResult{rates, std::move(contraction), std::move(invariant), eo};
}

IncrementsResult run_increments(const ExperimentConfig& config, int workers) {
    config.validate();
    const Model model = config.model();
    const std::vector<long> lags(config.increment_lags.begin(), config.increment_lags.end());
    const std::size_t n = std::size_t(config.increment_paths);
    std::vector<IncrementAccumulator> accs(n, IncrementAccumulator(lags));
    RunOptions options = slow_fast_options(config, config.diag_eps, false);
    options.record_times = {0.0, config.T};
    const SlowFastState initial = config.initial_state();
    const auto outcomes = run_samples(n, workers, [&](std::size_t s) {
        CoupledNoise noise = CoupledNoise::make(model, config.diag_eps, config.base_seed, {0, std::uint64_t(s)});
        integrate(ProcessKind::slow_fast, model, initial, options, noise,
                  [&](long, const SlowFastState& st) { accs[s].observe(st.j); });
    });
    IncrementsResult r;
    r.attempted = n;
    IncrementAccumulator total(lags);
    for (std::size_t s = 0; s < n; ++s) {
        if (outcomes[s].ok) {
            total.merge(accs[s]);
        } else {
            r.failures.push_back(failure_of(config, 0, s, outcomes[s]));
        }
    }
    std::vector<double> delta;
    for (long l : lags) delta.push_back(double(l) * config.dt);
    r.report = increment_law(delta, total.mean_sq());
    r.slope_pass = r.report.fitted_slope >= config.thresholds.increment_slope_min;
    return r;
}

MomentsResult run_moments(const ExperimentConfig& config, int workers) {
    config.validate();
    const Model model = config.model();
    const std::size_t n_eps = config.eps_list.size();
    const std::size_t n = std::size_t(config.moment_samples);
    std::vector<RecordedPath> paths(n_eps * n);
    const SlowFastState initial = config.initial_state();
    const auto outcomes = run_samples(n_eps * n, workers, [&](std::size_t i) {
        const std::size_t e = i / n;
        const double eps = config.eps_list[e];
        CoupledNoise noise =
            CoupledNoise::make(model, eps, config.base_seed, {std::uint64_t(e), std::uint64_t(i % n)});
        paths[i] = integrate(ProcessKind::slow_fast, model, initial, slow_fast_options(config, eps, false), noise);
    });
    MomentsResult r;
    r.eps = config.eps_list;
    r.attempted = paths.size();
    for (std::size_t e = 0; e < n_eps; ++e) {
        std::vector<RecordedPath> ok;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t i = e * n + s;
            if (outcomes[i].ok) {
                ok.push_back(std::move(paths[i]));
            } else {
                r.failures.push_back(failure_of(config, e, s, outcomes[i]));
            }
        }
        r.reports.push_back(estimate_moments(ok, config.p, std::min<std::size_t>(30, n)));
    }
    r.uniformity = moment_uniformity(r.eps, r.reports, config.thresholds.sigma_band);
    return r;
}

KhasminskiiResult run_khasminskii_study(const ExperimentConfig& config, int workers) {
    config.validate();
    const Model model = config.model();
    const std::size_t n_delta = config.delta_list.size();
    const std::size_t n = std::size_t(config.khasminskii_samples);
    std::vector<double> gaps(n_delta * n, 0.0);
    const SlowFastState initial = config.initial_state();
    // Every delta reuses the same sample seeds, so the refinement trend is not masked by sampling noise.
    const auto outcomes = run_samples(n_delta * n, workers, [&](std::size_t i) {
        RunOptions options = slow_fast_options(config, config.diag_eps, true);
        options.step.delta = config.delta_list[i / n];
        CoupledNoise noise =
            CoupledNoise::make(model, config.diag_eps, config.base_seed, {0, std::uint64_t(i % n)});
        const RecordedPath path = run_khasminskii(model, initial, options, noise);
        gaps[i] = khasminskii_gap(std::span<const RecordedPath>(&path, 1));
    });
    KhasminskiiResult r;
    r.delta = config.delta_list;
    r.attempted = gaps.size();
    for (std::size_t d = 0; d < n_delta; ++d) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t i = d * n + s;
            if (outcomes[i].ok) {
                sum += gaps[i];
                ++count;
            } else {
                r.failures.push_back(failure_of(config, 0, s, outcomes[i]));
            }
        }
        r.gap.push_back(count ? sum / double(count) : std::numeric_limits<double>::quiet_NaN());
    }
    if (n_delta >= 3) r.trend = kendall_trend(r.delta, r.gap, config.thresholds.trend_alpha);
    return r;
}

// ---------------------------------------------------------------- persistence

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

struct SeedLayout {
    std::vector<std::size_t> eps_indices;
    std::vector<double> eps;
    std::size_t samples = 0;
};

SeedLayout seed_layout(const ExperimentConfig& c, const std::string& command) {
    SeedLayout l;
    if (command == "convergence" || command == "moments") {
        for (std::size_t e = 0; e < c.eps_list.size(); ++e) {
            l.eps_indices.push_back(e);
            l.eps.push_back(c.eps_list[e]);
        }
        l.samples = std::size_t(command == "convergence" ? c.n_samples : c.moment_samples);
    } else if (command == "increments" || command == "khasminskii") {
        l.eps_indices.push_back(0);
        l.eps.push_back(c.diag_eps);
        l.samples = std::size_t(command == "increments" ? c.increment_paths : c.khasminskii_samples);
    }
    return l;
}

void write_text(const fs::path& file, const std::string& body) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << body;
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace

void write_manifest(const fs::path& dir, const ExperimentConfig& config, const ManifestInfo& info) {
    fs::create_directories(dir);
    nlohmann::ordered_json m;
    m["command"] = info.command;
    m["code_version"] = BQ_VERSION;
    m["status"] = info.status;
    m["started_at"] = info.started_at;
    if (!info.finished_at.empty()) m["finished_at"] = info.finished_at;
    m["workers"] = info.workers;
    nlohmann::ordered_json cfg;
    for (const auto& f : field_table()) cfg[f.key] = f.get(config);
    m["config"] = cfg;
    m["config_text"] = render_config(config);
    m["resolved_c_nu1"] = config.resolved_c_nu1();
    m["resolved_c_nu2"] = config.resolved_c_nu2();
    m["coupling"] = "shared_eta1";
    m["notes"] = {
        {"mse", "mse is the mean over samples of error(eps)^2, with error(eps) = max over record times of "
                "|j^eps - j_bar|_H"},
        {"sup", "sup over t is the max over record_count uniform record times on [0, T]"},
        {"noise", "jump intensities reduced to radial power-law marginals on [r_min, 1); jumps below r_min dropped"},
        {"initial_data", "j0 = j0_amplitude (cos x + cos y), theta0 = theta0_amplitude cos y"},
        {"blow_up", "failed samples are recorded and skipped; failures usually indicate dt too large"},
    };
    if (!info.synthetic.empty()) m["synthetic"] = info.synthetic;

    const SeedLayout layout = seed_layout(config, info.command);
    nlohmann::ordered_json seeds;
    seeds["formula"] = "derive_seed(base_seed, [eps_index, sample, stream]); stream 1 = eta_1, stream 2 = eta_2";
    seeds["base_seed"] = std::to_string(config.base_seed);
    seeds["table"] = nlohmann::ordered_json::array();
    if (info.synthetic.empty()) {
        for (std::size_t k = 0; k < layout.eps_indices.size(); ++k) {
            nlohmann::ordered_json row;
            row["eps_index"] = layout.eps_indices[k];
            row["eps"] = layout.eps[k];
            auto s1 = nlohmann::ordered_json::array();
            auto s2 = nlohmann::ordered_json::array();
            for (std::size_t s = 0; s < layout.samples; ++s) {
                s1.push_back(std::to_string(sample_seed(config.base_seed, layout.eps_indices[k], s, 1)));
                s2.push_back(std::to_string(sample_seed(config.base_seed, layout.eps_indices[k], s, 2)));
            }
            row["stream1"] = s1;
            row["stream2"] = s2;
            seeds["table"].push_back(row);
        }
    }
    m["seeds"] = seeds;

    m["attempted_samples"] = info.attempted;
    m["failed_samples"] = info.failures.size();
    auto failures = nlohmann::ordered_json::array();
    for (const auto& f : info.failures) {
        failures.push_back({{"eps_index", f.eps_index},
                            {"sample", f.sample},
                            {"seed_stream1", std::to_string(f.seed1)},
                            {"seed_stream2", std::to_string(f.seed2)},
                            {"time", f.time},
                            {"message", f.message}});
    }
    m["failures"] = failures;
    if (!info.failures.empty()) m["dt_flag"] = "samples failed; consider a smaller dt";
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void write_convergence_csv(const fs::path& dir, const ConvergenceResult& r) {
    fs::create_directories(dir);
    std::string errors = "eps,sample,error\n";
    for (const auto& e : r.errors) {
        errors += format_double(r.eps[e.eps_index]) + "," + std::to_string(e.sample) + "," + format_double(e.error) +
                  "\n";
    }
    write_text(dir / "errors.csv", errors);
    std::string mse = "eps,mean_error,mse,n\n";
    for (const auto& s : r.stats) {
        mse += format_double(s.eps) + "," + format_double(s.mean) + "," + format_double(s.mse) + "," +
               std::to_string(s.samples.size()) + "\n";
    }
    write_text(dir / "mse.csv", mse);
    std::string fit = "coefficient,exponent,r_squared\n";
    if (r.fit) {
        fit += format_double(r.fit->coefficient) + "," + format_double(r.fit->exponent) + "," +
               format_double(r.fit->r_squared) + "\n";
    }
    write_text(dir / "fit.csv", fit);
}

void write_ergodicity_csv(const fs::path& dir, const ErgodicityResult& r) {
    fs::create_directories(dir);
    const std::string feasible = r.rates.feasible ? "true" : "false";
    std::string c = "time,gap,fitted_rate,theoretical_rate,feasible\n";
    for (std::size_t i = 0; i < r.contraction.times.size(); ++i) {
        c += format_double(r.contraction.times[i]) + "," + format_double(r.contraction.gaps[i]) + "," +
             format_double(r.contraction.fitted_rate) + "," + format_double(r.contraction.theoretical_rate) + "," +
             feasible + "\n";
    }
    write_text(dir / "contraction.csv", c);
    write_text(dir / "invariant.csv", "norm_g_hat,stderr,pass\n" + format_double(r.invariant.norm_g_hat) + "," +
                                          format_double(r.invariant.std_error) + "," +
                                          (r.invariant.pass ? "true" : "false") + "\n");
}

void write_increments_csv(const fs::path& dir, const IncrementsResult& r) {
    fs::create_directories(dir);
    std::string s = "delta,mean_sq_increment,slope\n";
    for (std::size_t i = 0; i < r.report.delta_grid.size(); ++i) {
        s += format_double(r.report.delta_grid[i]) + "," + format_double(r.report.mean_sq_increments[i]) + "," +
             format_double(r.report.fitted_slope) + "\n";
    }
    write_text(dir / "increments.csv", s);
}

void write_moments_csv(const fs::path& dir, const MomentsResult& r) {
    fs::create_directories(dir);
    std::string s = "eps,p,sup_moment_j,stderr_j,sup_moment_theta,stderr_theta\n";
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        const auto& m = r.reports[i];
        s += format_double(r.eps[i]) + "," + format_double(m.p) + "," + format_double(m.sup_moment) + "," +
             format_double(m.sup_moment_stderr) + "," + format_double(m.theta_sup_moment) + "," +
             format_double(m.theta_sup_stderr) + "\n";
    }
    write_text(dir / "moments.csv", s);
}

void write_khasminskii_csv(const fs::path& dir, const KhasminskiiResult& r) {
    fs::create_directories(dir);
    std::string s = "delta,gap,trend_pass\n";
    for (std::size_t i = 0; i < r.delta.size(); ++i) {
        s += format_double(r.delta[i]) + "," + format_double(r.gap[i]) + "," + (r.trend.pass ? "true" : "false") +
             "\n";
    }
    write_text(dir / "khasminskii.csv", s);
}

}  // namespace bq
