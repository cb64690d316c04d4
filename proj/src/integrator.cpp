#include "bq/integrator.hpp"

#include "bq/errors.hpp"

#include <cmath>
#include <string>

namespace bq {

Model example_model(int n, double beta1, double beta2, double c_nu1, double c_nu2, double r_min) {
    Model m;
    m.grid = TorusGrid(n);
    m.coeffs = example_coefficients();
    m.averaged = example_averaged();
    m.nu1 = {beta1, c_nu1, r_min};
    m.nu2 = {beta2, c_nu2, r_min};
    m.nu1.validate();
    m.nu2.validate();
    return m;
}

void StepConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must lie in (0,1]");
    if (fast_substeps < 0) throw DomainError("fast_substeps must be >= 0");
    if (blowup_threshold < 0.0) throw DomainError("blowup_threshold must be >= 0");
    if (delta != 0.0) {
        const double ratio = delta / dt;
        if (!(delta > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0) {
            throw DomainError("delta must be a positive integer multiple of dt");
        }
    }
}

int StepConfig::resolved_substeps() const {
    if (fast_substeps > 0) return fast_substeps;
    return int(std::ceil(1.0 / std::sqrt(eps) - 1e-12));
}

long StepConfig::block_steps() const {
    if (delta <= 0.0) throw DomainError("Khasminskii block width delta not configured");
    return std::lround(delta / dt);
}

CoupledNoise CoupledNoise::make(const Model& model, double eps, std::uint64_t base_seed,
                                std::initializer_list<std::uint64_t> ids) {
    std::vector<std::uint64_t> key(ids);
    key.push_back(1);
    const std::uint64_t s1 = derive_seed(base_seed, key);
    key.back() = 2;
    const std::uint64_t s2 = derive_seed(base_seed, key);
    return CoupledNoise{NoiseStream(model.nu1, s1), NoiseStream(model.nu2, s2).rescale(eps), base_seed};
}

HeatFactor::HeatFactor(const TorusGrid& grid, double tau) : factors_(grid.spectral_size()) {
    std::size_t i = 0;
    for (int row = 0; row < grid.n(); ++row) {
        const int kx = grid.kx(row);
        for (int col = 0; col < grid.half(); ++col, ++i) {
            const int ky = grid.ky(col);
            factors_[i] = std::expm1(-double(kx * kx + ky * ky) * tau);
        }
    }
}

void HeatFactor::apply(SpectralField& f) const {
    auto d = f.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += d[i] * factors_[i];
}

JumpIntegral::JumpIntegral(FieldMap amp, ShapeFn shape, const LevyRadialMeasure& measure)
    : amp_(std::move(amp)), shape_(std::move(shape)), weight_(compensator_weight(measure, shape_)) {}

void JumpIntegral::apply(SpectralField& field, const SpectralField& pre, double dt, double time_scale,
                         std::span<const JumpEvent> events) const {
    if (weight_ != 0.0) field.axpy(-dt * time_scale * weight_, amp_(pre));
    for (const auto& e : events) field.axpy(shape_(e.radius), amp_(field));
}

namespace {

void check_finite(const SpectralField& f, double t, const char* name) {
    if (!f.all_finite()) throw BlowUpError(t, name);
}

}  // namespace

SlowFastStepper::SlowFastStepper(const Model& model, const StepConfig& cfg)
    : model_(&model),
      cfg_(cfg),
      substeps_((cfg.validate(), cfg.resolved_substeps())),
      slow_heat_(model.grid, cfg.dt),
      fast_heat_(model.grid, cfg.dt / (cfg.eps * substeps_)),
      jumps1_(model.coeffs.amp1, model.coeffs.shape1, model.nu1),
      jumps2_(model.coeffs.amp2, model.coeffs.shape2, model.nu2) {}

SpectralField SlowFastStepper::slow_deterministic(const SpectralField& j, const PhysicalVelocity& u,
                                                  const SpectralField& f_value,
                                                  const SpectralField& theta) const {
    SpectralField rhs = f_value;
    rhs -= advect(u, j);
    rhs += partial_x(theta);
    SpectralField out = j;
    out.axpy(cfg_.dt, rhs);
    slow_heat_.apply(out);
    out.project();
    return out;
}

SpectralField SlowFastStepper::fast_deterministic(const SpectralField& theta, const PhysicalVelocity& u) const {
    SpectralField out = theta;
    const double h = cfg_.dt / (cfg_.eps * substeps_);
    for (int m = 0; m < substeps_; ++m) {
        out.axpy(-h, advect(u, out));
        fast_heat_.apply(out);
    }
    out.project();
    return out;
}

void SlowFastStepper::step(SlowFastState& s, std::span<const JumpEvent> events1,
                           std::span<const JumpEvent> events2, SpectralField* jump_increment) const {
    const PhysicalVelocity u = dealiased_physical(biot_savart(s.j));
    SpectralField j = slow_deterministic(s.j, u, model_->coeffs.drift(s.j, s.theta), s.theta);
    SpectralField theta = fast_deterministic(s.theta, u);
    if (jump_increment) *jump_increment = j;
    jumps1_.apply(j, s.j, cfg_.dt, 1.0, events1);
    if (jump_increment) {
        *jump_increment -= j;
        *jump_increment *= -1.0;
    }
    jumps2_.apply(theta, s.theta, cfg_.dt, 1.0 / cfg_.eps, events2);
    j.project();
    theta.project();
    s.t += cfg_.dt;
    check_finite(j, s.t, "j");
    check_finite(theta, s.t, "theta");
    s.j = std::move(j);
    s.theta = std::move(theta);
}

void SlowFastStepper::step(SlowFastState& s, CoupledNoise& noise) const {
    if (std::abs(noise.stream2.time_scale() * cfg_.eps - 1.0) > 1e-12) {
        throw DomainError("stream2 time scale does not match 1/eps");
    }
    const auto e1 = noise.stream1.sample_step(cfg_.dt);
    const auto e2 = noise.stream2.sample_step(cfg_.dt);
    step(s, e1, e2);
}

FrozenStepper::FrozenStepper(const Model& model, double dt, const SpectralField& j_frozen)
    : dt_(dt),
      u_(dealiased_physical(biot_savart(j_frozen))),
      heat_(model.grid, dt),
      jumps_(model.coeffs.amp2, model.coeffs.shape2, model.nu2) {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
}

void FrozenStepper::step(SpectralField& theta, std::span<const JumpEvent> events) const {
    SpectralField next = theta;
    next.axpy(-dt_, advect(u_, theta));
    heat_.apply(next);
    jumps_.apply(next, theta, dt_, 1.0, events);
    next.project();
    theta = std::move(next);
}

void FrozenStepper::step(SpectralField& theta, NoiseStream& stream) const {
    if (stream.time_scale() != 1.0) throw DomainError("the frozen equation runs on unit time scale");
    const auto events = stream.sample_step(dt_);
    step(theta, events);
}

AveragedStepper::AveragedStepper(const Model& model, const StepConfig& cfg)
    : model_(&model),
      cfg_((cfg.validate(), cfg)),
      heat_(model.grid, cfg.dt),
      jumps_(model.averaged.amp1, model.averaged.shape1, model.nu1) {}

void AveragedStepper::step(SpectralField& j_bar, double t, std::span<const JumpEvent> events1) const {
    const VelocityField u = biot_savart(j_bar);
    SpectralField rhs = model_->averaged.f_bar(j_bar, u);
    rhs -= advect(u, j_bar);
    if (model_->averaged.g) rhs += partial_x(model_->averaged.g(u));
    SpectralField next = j_bar;
    next.axpy(cfg_.dt, rhs);
    heat_.apply(next);
    jumps_.apply(next, j_bar, cfg_.dt, 1.0, events1);
    next.project();
    check_finite(next, t + cfg_.dt, "j_bar");
    j_bar = std::move(next);
}

void AveragedStepper::step(SpectralField& j_bar, double t, NoiseStream& stream1) const {
    const auto events = stream1.sample_step(cfg_.dt);
    step(j_bar, t, events);
}

std::vector<double> uniform_times(double horizon, int count) {
    if (count < 1) throw DomainError("record count must be >= 1");
    std::vector<double> out(std::size_t(count), 0.0);
    for (int i = 0; i < count; ++i) out[std::size_t(i)] = count == 1 ? 0.0 : horizon * i / (count - 1);
    return out;
}

namespace {

struct RecordPlan {
    long total_steps = 0;
    std::vector<long> step_of;  // per record time
};

RecordPlan plan_records(const RunOptions& o) {
    o.step.validate();
    if (!(o.horizon >= 0.0)) throw DomainError("horizon must be >= 0");
    RecordPlan plan;
    plan.total_steps = std::lround(o.horizon / o.step.dt);
    long prev = -1;
    for (double t : o.record_times) {
        if (t < -1e-12 || t > o.horizon * (1 + 1e-12) + 1e-12) {
            throw DomainError("record time " + std::to_string(t) + " outside [0, horizon]");
        }
        const long k = std::lround(t / o.step.dt);
        if (k < prev) throw DomainError("record times must be non-decreasing");
        prev = k;
        plan.step_of.push_back(k);
    }
    return plan;
}

// Calls `record` for every record time that falls on step k.
template <class Fn>
void record_at(const RecordPlan& plan, std::size_t& next, long k, Fn&& record) {
    while (next < plan.step_of.size() && plan.step_of[next] == k) {
        record(next);
        ++next;
    }
}

void monitor(RecordedPath& path, const StepConfig& cfg, double t, const SpectralField& j) {
    if (cfg.blowup_threshold > 0.0 && !path.tau_m && norm_h(j) > cfg.blowup_threshold) path.tau_m = t;
}

}  // namespace

RecordedPath integrate(ProcessKind kind, const Model& model, const SlowFastState& initial,
                       const RunOptions& options, CoupledNoise& noise, const StepObserver& observer) {
    if (kind == ProcessKind::auxiliary) return run_khasminskii(model, initial, options, noise);
    const RecordPlan plan = plan_records(options);
    const StepConfig& cfg = options.step;
    RecordedPath path;
    path.times = options.record_times;
    SlowFastState s = initial;
    s.eps = cfg.eps;
    std::size_t next = 0;

    auto record = [&](std::size_t) {
        if (kind != ProcessKind::frozen) {
            path.j_norm.push_back(norm_h(s.j));
            path.j_grad_sq.push_back(gradient_norm_sq(s.j));
            if (options.record_fields) path.j.push_back(s.j);
        }
        if (kind != ProcessKind::averaged) {
            path.theta_norm.push_back(norm_h(s.theta));
            if (options.record_fields) path.theta.push_back(s.theta);
        }
    };
    record_at(plan, next, 0, record);
    if (observer) observer(0, s);

    switch (kind) {
        case ProcessKind::slow_fast: {
            const SlowFastStepper stepper(model, cfg);
            for (long k = 1; k <= plan.total_steps; ++k) {
                auto e1 = noise.stream1.sample_step(cfg.dt);
                auto e2 = noise.stream2.sample_step(cfg.dt);
                stepper.step(s, e1, e2);
                if (options.log_events) path.events1.push_back(std::move(e1));
                monitor(path, cfg, s.t, s.j);
                record_at(plan, next, k, record);
                if (observer) observer(k, s);
            }
            break;
        }
        case ProcessKind::frozen: {
            const FrozenStepper stepper(model, cfg.dt, initial.j);
            for (long k = 1; k <= plan.total_steps; ++k) {
                stepper.step(s.theta, noise.stream2);
                s.t += cfg.dt;
                check_finite(s.theta, s.t, "theta_tilde");
                record_at(plan, next, k, record);
                if (observer) observer(k, s);
            }
            break;
        }
        case ProcessKind::averaged: {
            const AveragedStepper stepper(model, cfg);
            for (long k = 1; k <= plan.total_steps; ++k) {
                auto e1 = noise.stream1.sample_step(cfg.dt);
                stepper.step(s.j, s.t, e1);
                s.t += cfg.dt;
                if (options.log_events) path.events1.push_back(std::move(e1));
                monitor(path, cfg, s.t, s.j);
                record_at(plan, next, k, record);
                if (observer) observer(k, s);
            }
            break;
        }
        case ProcessKind::auxiliary:
            break;
    }
    return path;
}

RecordedPath run_khasminskii(const Model& model, const SlowFastState& initial, const RunOptions& options,
                             CoupledNoise& noise) {
    const RecordPlan plan = plan_records(options);
    const StepConfig& cfg = options.step;
    const long block = cfg.block_steps();
    const SlowFastStepper stepper(model, cfg);

    RecordedPath path;
    path.times = options.record_times;
    SlowFastState s = initial;
    s.eps = cfg.eps;
    SpectralField j_hat = initial.j;
    SpectralField theta_hat = initial.theta;
    SpectralField j_block = initial.j;
    PhysicalVelocity u_block = dealiased_physical(biot_savart(initial.j));
    std::size_t next = 0;

    auto record = [&](std::size_t) {
        path.j_norm.push_back(norm_h(s.j));
        path.j_grad_sq.push_back(gradient_norm_sq(s.j));
        path.theta_norm.push_back(norm_h(s.theta));
        if (options.record_fields) {
            path.j.push_back(s.j);
            path.theta.push_back(s.theta);
            path.j_hat.push_back(j_hat);
            path.theta_hat.push_back(theta_hat);
        }
    };
    record_at(plan, next, 0, record);

    for (long k = 1; k <= plan.total_steps; ++k) {
        const long k0 = k - 1;  // step start index
        if (k0 % block == 0 && k0 > 0) {
            j_block = s.j;
            u_block = dealiased_physical(biot_savart(s.j));
        }
        const auto e1 = noise.stream1.sample_step(cfg.dt);
        const auto e2 = noise.stream2.sample_step(cfg.dt);

        // Auxiliary slow variable: live velocity, drift frozen in j, jump increments of j^eps.
        const PhysicalVelocity u_live = dealiased_physical(biot_savart(s.j));
        SpectralField j_hat_next =
            stepper.slow_deterministic(j_hat, u_live, model.coeffs.drift(j_block, theta_hat), theta_hat);
        SpectralField theta_hat_next = stepper.fast_deterministic(theta_hat, u_block);
        stepper.jumps2().apply(theta_hat_next, theta_hat, cfg.dt, 1.0 / cfg.eps, e2);

        SpectralField increment(model.grid);
        stepper.step(s, e1, e2, &increment);
        j_hat_next += increment;
        j_hat_next.project();
        theta_hat_next.project();
        check_finite(j_hat_next, s.t, "j_hat");
        check_finite(theta_hat_next, s.t, "theta_hat");
        j_hat = std::move(j_hat_next);
        theta_hat = std::move(theta_hat_next);
        monitor(path, cfg, s.t, s.j);
        record_at(plan, next, k, record);
    }
    return path;
}

}  // namespace bq
