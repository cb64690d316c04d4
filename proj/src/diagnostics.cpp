#include "bq/diagnostics.hpp"

#include "bq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace bq {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("regression inputs differ in length");
    const std::size_t n = x.size();
    if (n < 2) throw DomainError("regression needs at least two points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("regression needs distinct abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
    fit.slope_stderr = n > 2 ? std::sqrt(sse / double(n - 2) / sxx) : 0.0;
    return fit;
}

PowerLawFit power_law_fit(std::span<const double> eps, std::span<const double> mse) {
    if (eps.size() != mse.size()) throw DimensionError("eps and mse lists differ in length");
    if (eps.size() < 3) throw DomainError("power-law fit needs at least 3 (eps, mse) pairs");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0) || !(mse[i] > 0.0)) throw DomainError("power-law fit needs positive eps and mse");
        lx.push_back(std::log(eps[i]));
        ly.push_back(std::log(mse[i]));
    }
    const LinearFit f = linear_fit(lx, ly);
    return {std::exp(f.intercept), f.slope, f.r_squared};
}

MeanStderr mean_stderr(std::span<const double> samples) {
    MeanStderr out;
    const std::size_t n = samples.size();
    if (n == 0) return out;
    out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : samples) ss += (v - out.mean) * (v - out.mean);
        out.std_error = std::sqrt(ss / double(n - 1) / double(n));
    }
    return out;
}

double sup_error(const RecordedPath& a, const RecordedPath& b) {
    if (a.times != b.times) throw DimensionError("paths recorded on different time grids");
    if (a.j.size() != a.times.size() || b.j.size() != b.times.size()) {
        throw DimensionError("sup_error needs recorded j fields at every record time");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.j.size(); ++i) worst = std::max(worst, norm_h(a.j[i] - b.j[i]));
    return worst;
}

ErrorStats ErrorStats::from_samples(double eps, std::vector<double> samples) {
    ErrorStats s;
    s.eps = eps;
    s.samples = std::move(samples);
    if (!s.samples.empty()) {
        double sum = 0.0, sq = 0.0;
        for (double v : s.samples) {
            sum += v;
            sq += v * v;
        }
        s.mean = sum / double(s.samples.size());
        s.mse = sq / double(s.samples.size());
    }
    return s;
}

namespace {

double trapezoid(std::span<const double> t, std::span<const double> y) {
    double sum = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) sum += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    return sum;
}

}  // namespace

MomentReport estimate_moments(std::span<const RecordedPath> paths, double p, std::size_t min_paths) {
    if (paths.size() < min_paths) {
        throw DomainError("moment estimation needs at least " + std::to_string(min_paths) + " paths, got " +
                          std::to_string(paths.size()));
    }
    if (!(p >= 1.0)) throw DomainError("moment order p must be >= 1");
    MomentReport r;
    r.p = p;
    r.paths = paths.size();
    std::vector<double> sup_j, diss, sup_theta;
    std::vector<double> theta_by_t;
    for (const auto& path : paths) {
        double sj = 0.0;
        for (double v : path.j_norm) sj = std::max(sj, std::pow(v, 2.0 * p));
        sup_j.push_back(sj);
        if (path.j_grad_sq.size() == path.times.size() && !path.times.empty()) {
            std::vector<double> integrand(path.times.size());
            for (std::size_t i = 0; i < integrand.size(); ++i) {
                integrand[i] = std::pow(path.j_norm[i], 2.0 * (p - 1.0)) * path.j_grad_sq[i];
            }
            diss.push_back(trapezoid(path.times, integrand));
        }
        double st = 0.0;
        if (theta_by_t.size() < path.theta_norm.size()) theta_by_t.resize(path.theta_norm.size(), 0.0);
        for (std::size_t i = 0; i < path.theta_norm.size(); ++i) {
            const double m = std::pow(path.theta_norm[i], 2.0 * p);
            st = std::max(st, m);
            theta_by_t[i] += m / double(paths.size());
        }
        sup_theta.push_back(st);
    }
    const auto a = mean_stderr(sup_j);
    r.sup_moment = a.mean;
    r.sup_moment_stderr = a.std_error;
    const auto d = mean_stderr(diss);
    r.dissipation = d.mean;
    r.dissipation_stderr = d.std_error;
    const auto th = mean_stderr(sup_theta);
    r.theta_sup_moment = th.mean;
    r.theta_sup_stderr = th.std_error;
    for (double v : theta_by_t) r.theta_sup_by_t = std::max(r.theta_sup_by_t, v);
    return r;
}

UniformityCheck moment_uniformity(std::span<const double> eps, std::span<const MomentReport> reports,
                                  double band) {
    if (eps.size() != reports.size()) throw DimensionError("one moment report per eps expected");
    UniformityCheck out;
    auto z = [](double diff, double se) {
        if (diff == 0.0) return 0.0;
        return se > 0.0 ? std::abs(diff) / se : std::numeric_limits<double>::infinity();
    };
    for (std::size_t a = 0; a < reports.size(); ++a) {
        for (std::size_t b = a + 1; b < reports.size(); ++b) {
            const double se = std::hypot(reports[a].sup_moment_stderr, reports[b].sup_moment_stderr);
            out.max_pair_z = std::max(out.max_pair_z, z(reports[a].sup_moment - reports[b].sup_moment, se));
        }
    }
    out.pairwise_pass = out.max_pair_z < band;

    // Weighted least squares slope of the estimate against eps.
    if (reports.size() >= 2) {
        double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const double se = reports[i].sup_moment_stderr;
            const double w = se > 0.0 ? 1.0 / (se * se) : 1.0;
            sw += w;
            swx += w * eps[i];
            swy += w * reports[i].sup_moment;
            swxx += w * eps[i] * eps[i];
            swxy += w * eps[i] * reports[i].sup_moment;
        }
        const double den = sw * swxx - swx * swx;
        if (den > 0.0) {
            out.slope = (sw * swxy - swx * swy) / den;
            out.slope_z = z(out.slope, std::sqrt(sw / den));
        }
    }
    out.slope_pass = out.slope_z < 2.0;
    return out;
}

IncrementAccumulator::IncrementAccumulator(std::vector<long> lags)
    : lags_(std::move(lags)), sums_(lags_.size(), 0.0), counts_(lags_.size(), 0) {
    for (long l : lags_) {
        if (l < 1) throw DomainError("increment lags must be >= 1 step");
    }
}

void IncrementAccumulator::observe(const SpectralField& j) {
    const long max_lag = lags_.empty() ? 0 : *std::max_element(lags_.begin(), lags_.end());
    history_.push_back(j);
    if (long(history_.size()) > max_lag + 1) history_.pop_front();
    const long last = long(history_.size()) - 1;
    for (std::size_t i = 0; i < lags_.size(); ++i) {
        if (last >= lags_[i]) {
            const double d = norm_h(j - history_[std::size_t(last - lags_[i])]);
            sums_[i] += d * d;
            counts_[i] += 1;
        }
    }
}

void IncrementAccumulator::merge(const IncrementAccumulator& other) {
    if (other.lags_ != lags_) throw DimensionError("cannot merge accumulators with different lags");
    for (std::size_t i = 0; i < lags_.size(); ++i) {
        sums_[i] += other.sums_[i];
        counts_[i] += other.counts_[i];
    }
}

void IncrementAccumulator::new_path() { history_.clear(); }

std::vector<double> IncrementAccumulator::mean_sq() const {
    std::vector<double> out(lags_.size(), 0.0);
    for (std::size_t i = 0; i < lags_.size(); ++i) out[i] = counts_[i] ? sums_[i] / double(counts_[i]) : 0.0;
    return out;
}

IncrementReport increment_law(std::span<const double> delta_grid, std::span<const double> mean_sq) {
    if (delta_grid.size() != mean_sq.size()) throw DimensionError("one increment per lag expected");
    if (delta_grid.size() < 3) throw DomainError("increment regression needs at least 3 lags");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
        if (!(delta_grid[i] > 0.0) || (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))) {
            throw DomainError("lags must be positive and increasing");
        }
        if (!(mean_sq[i] > 0.0) || !std::isfinite(mean_sq[i])) {
            throw DomainError("degenerate increments (constant path): regression rejected");
        }
        lx.push_back(std::log(delta_grid[i]));
        ly.push_back(std::log(mean_sq[i]));
    }
    IncrementReport r;
    r.delta_grid.assign(delta_grid.begin(), delta_grid.end());
    r.mean_sq_increments.assign(mean_sq.begin(), mean_sq.end());
    r.fit = linear_fit(lx, ly);
    r.fitted_slope = r.fit.slope;
    return r;
}

ContractionReport contraction_test(const Model& model, const SpectralField& j_frozen, const SpectralField& theta1,
                                   const SpectralField& theta2, const ContractionOptions& options,
                                   const DissipativityRates& rates) {
    ContractionReport r;
    r.theoretical_rate = rates.lambda_p / rates.p;
    r.feasible = rates.feasible;
    r.times = uniform_times(options.horizon, options.record_count);
    r.gaps.assign(r.times.size(), 0.0);

    const FrozenStepper stepper(model, options.dt, j_frozen);
    std::vector<long> record_steps;
    for (double t : r.times) record_steps.push_back(std::lround(t / options.dt));
    const long total = record_steps.back();

    for (int s = 0; s < options.samples; ++s) {
        NoiseStream stream(model.nu2, derive_seed(options.seed, {std::uint64_t(s)}));
        SpectralField a = theta1;
        SpectralField b = theta2;
        std::size_t next = 0;
        for (long k = 0; k <= total; ++k) {
            if (k > 0) {
                const auto events = stream.sample_step(options.dt);
                stepper.step(a, events);
                stepper.step(b, events);
            }
            while (next < record_steps.size() && record_steps[next] == k) {
                const double g = norm_h(a - b);
                r.gaps[next] += g * g / double(options.samples);
                ++next;
            }
        }
        if (!a.all_finite() || !b.all_finite()) throw BlowUpError(options.horizon, "theta_tilde");
    }

    if (std::all_of(r.gaps.begin(), r.gaps.end(), [](double g) { return g == 0.0; })) {
        r.degenerate = true;
        r.pass = true;
        return r;
    }
    std::vector<double> t, lg;
    for (std::size_t i = 0; i < r.gaps.size(); ++i) {
        if (r.gaps[i] > 0.0 && std::isfinite(r.gaps[i])) {
            t.push_back(r.times[i]);
            lg.push_back(std::log(r.gaps[i]));
        }
    }
    r.fitted_rate = -linear_fit(t, lg).slope;
    r.pass = r.fitted_rate > 0.0 &&
             (r.theoretical_rate <= 0.0 || r.fitted_rate >= r.theoretical_rate / options.rate_factor);
    return r;
}

SpectralField random_field(const TorusGrid& grid, double amplitude, int kmax, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, amplitude);
    SpectralField f(grid);
    const int top = std::min(kmax, grid.n() / 2 - 1);
    for (int kx = -top; kx <= top; ++kx) {
        for (int ky = 0; ky <= top; ++ky) {
            if (ky == 0 && kx <= 0) continue;
            const double re = normal(rng);
            const double im = normal(rng);
            f.set_mode(kx, ky, Complex(re, im));
        }
    }
    return f;
}

ErgodicAverage ergodic_average(const Model& model, const SpectralField& j_frozen, const FieldMap& observable,
                               const ErgodicOptions& options) {
    if (options.replicas < 2) throw DomainError("ergodic averages need at least two replicas");
    if (options.snapshots < 1) throw DomainError("ergodic averages need at least one snapshot");
    const FrozenStepper stepper(model, options.dt, j_frozen);
    const long burn = std::lround(options.burn_in / options.dt);
    const long gap = std::max(1L, std::lround(options.spacing / options.dt));
    const TorusGrid& grid = model.grid;

    std::vector<SpectralField> replica_means;
    double second = 0.0;
    for (int r = 0; r < options.replicas; ++r) {
        SpectralField theta =
            random_field(grid, options.init_amplitude, 4, derive_seed(options.seed, {std::uint64_t(r), 1}));
        NoiseStream stream(model.nu2, derive_seed(options.seed, {std::uint64_t(r), 2}));
        for (long k = 0; k < burn; ++k) stepper.step(theta, stream);
        SpectralField acc(grid);
        for (int s = 0; s < options.snapshots; ++s) {
            for (long k = 0; k < gap; ++k) stepper.step(theta, stream);
            if (!theta.all_finite()) throw BlowUpError(options.burn_in + (s + 1) * options.spacing, "theta_tilde");
            acc += observable(theta);
            const double n = norm_h(theta);
            second += n * n;
        }
        acc *= 1.0 / options.snapshots;
        replica_means.push_back(std::move(acc));
    }

    const double R = options.replicas;
    ErgodicAverage out{SpectralField(grid), PhysicalField(grid), 0.0, 0.0, options.snapshots, options.replicas};
    for (const auto& m : replica_means) out.estimate.axpy(1.0 / R, m);
    double spread = 0.0;
    std::vector<double> pointwise(grid.physical_size(), 0.0);
    const PhysicalField mean_phys = to_physical(out.estimate);
    for (const auto& m : replica_means) {
        const double d = norm_h(m - out.estimate);
        spread += d * d;
        const PhysicalField mp = to_physical(m);
        for (std::size_t i = 0; i < pointwise.size(); ++i) {
            const double v = mp.values()[i] - mean_phys.values()[i];
            pointwise[i] += v * v;
        }
    }
    out.stderr_norm = std::sqrt(spread / (R * (R - 1.0)));
    for (std::size_t i = 0; i < pointwise.size(); ++i) {
        out.stderr_field.values()[i] = std::sqrt(pointwise[i] / (R * (R - 1.0)));
    }
    out.second_moment = second / (R * options.snapshots);
    return out;
}

ErgodicAverage estimate_averaged_f(const Model& model, const SpectralField& j, const ErgodicOptions& options) {
    return ergodic_average(
        model, j, [&](const SpectralField& theta) { return model.coeffs.drift(j, theta); }, options);
}

InvariantEstimate invariant_g_estimate(const Model& model, const SpectralField& j_frozen,
                                       const ErgodicOptions& options, const DissipativityRates& rates,
                                       double band) {
    const ErgodicAverage avg = ergodic_average(
        model, j_frozen, [](const SpectralField& theta) { return theta; }, options);
    InvariantEstimate out{avg.estimate};
    out.norm_g_hat = norm_h(avg.estimate);
    out.std_error = avg.stderr_norm;
    out.second_moment = avg.second_moment;
    out.burn_in_ok = rates.lambda_p > 0.0 && options.burn_in >= 20.0 / rates.lambda_p * (1.0 - 1e-12);
    out.pass = out.norm_g_hat <= band * out.std_error;
    return out;
}

double khasminskii_gap(std::span<const RecordedPath> paths) {
    if (paths.empty()) throw DomainError("no auxiliary paths");
    double total = 0.0;
    for (const auto& p : paths) {
        if (p.theta.size() != p.times.size() || p.theta_hat.size() != p.times.size()) {
            throw DimensionError("auxiliary paths must carry synchronized theta and theta_hat fields");
        }
        std::vector<double> sq(p.times.size());
        for (std::size_t i = 0; i < sq.size(); ++i) {
            const double d = norm_h(p.theta_hat[i] - p.theta[i]);
            sq[i] = d * d;
        }
        total += trapezoid(p.times, sq);
    }
    return total / double(paths.size());
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

long kendall_s(std::span<const double> x, std::span<const double> y) {
    long s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t k = i + 1; k < x.size(); ++k) s += sign(x[k] - x[i]) * sign(y[k] - y[i]);
    }
    return s;
}

}  // namespace

TrendTest kendall_trend(std::span<const double> delta, std::span<const double> gap, double alpha) {
    if (delta.size() != gap.size()) throw DimensionError("one gap per delta expected");
    const std::size_t n = delta.size();
    if (n < 3) throw DomainError("trend test needs at least 3 points");
    TrendTest out;
    const long s = kendall_s(delta, gap);
    const double pairs = double(n * (n - 1) / 2);
    out.tau = double(s) / pairs;

    if (n <= 8) {
        std::vector<double> perm(gap.begin(), gap.end());
        std::sort(perm.begin(), perm.end());
        long total = 0, extreme = 0;
        do {
            ++total;
            if (kendall_s(delta, perm) >= s) ++extreme;
        } while (std::next_permutation(perm.begin(), perm.end()));
        // Distinct arrangements of tied values all carry the same multiplicity, so counting them is exact.
        out.p_value = double(extreme) / double(total);
    } else {
        const double var = double(n) * (n - 1) * (2.0 * n + 5) / 18.0;
        const double zs = (double(s) - 1.0) / std::sqrt(var);
        out.p_value = 0.5 * std::erfc(zs / std::sqrt(2.0));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return delta[a] < delta[b]; });
    out.monotone = true;
    for (std::size_t i = 1; i < n; ++i) {
        if (gap[order[i]] < gap[order[i - 1]]) out.monotone = false;
    }
    out.pass = out.monotone && out.p_value < alpha;
    return out;
}

}  // namespace bq
