#pragma once

// Time stepping for the slow-fast system, the frozen fast equation, the averaged
// equation and the Khasminskii auxiliary processes.
//
// Scheme: exact diffusion factors exp(-|k|^2 dt) (exp(-|k|^2 dt/eps) for the fast
// variable), explicit Euler for advection and drift, then compensated jumps: the
// compensator -dt * s * W * amp(pre-step field) as a drift, followed by every jump
// of the step applied in sequence, each with the amplitude at its left limit.
// Steppers take jump events drawn by the caller, so coupled runs share noise by
// passing the same events.

#include "bq/model.hpp"
#include "bq/noise.hpp"
#include "bq/spectral.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bq {

struct Model {
    TorusGrid grid{32};
    CoefficientSet coeffs;
    AveragedSet averaged;
    LevyRadialMeasure nu1;
    LevyRadialMeasure nu2;
};

/// The example system with power-law intensities nu_i = c_i |z|^{-1-beta_i} on [r_min, 1).
Model example_model(int n, double beta1, double beta2, double c_nu1, double c_nu2, double r_min);

struct StepConfig {
    double dt = 1e-3;
    double eps = 1.0;
    /// Khasminskii block width; must be a positive multiple of dt when used.
    double delta = 0.0;
    /// Substeps for the fast advection term; 0 selects ceil(1/sqrt(eps)).
    int fast_substeps = 0;
    /// tau_M monitor on |j|_H; 0 disables it.
    double blowup_threshold = 0.0;

    void validate() const;
    int resolved_substeps() const;
    /// Number of dt steps per Khasminskii block.
    long block_steps() const;
};

struct SlowFastState {
    SpectralField j;
    SpectralField theta;
    double t = 0.0;
    double eps = 1.0;
};

struct CoupledNoise {
    NoiseStream stream1;  // eta_1, unit time scale
    NoiseStream stream2;  // eta_2, time scale 1/eps
    std::uint64_t base_seed = 0;

    /// Streams seeded from derive_seed(base_seed, {ids..., 1}) and {ids..., 2}.
    static CoupledNoise make(const Model& model, double eps, std::uint64_t base_seed,
                             std::initializer_list<std::uint64_t> ids);
};

/// Multiplies coefficients by a precomputed exp(-|k|^2 tau).
class HeatFactor {
public:
    HeatFactor(const TorusGrid& grid, double tau);
    void apply(SpectralField& f) const;

private:
    std::vector<double> factors_;  // expm1(-|k|^2 tau), applied as f += f * m to avoid compounding the rounding of exp
};

/// Compensated jumps of a factored amplitude amp(field) * shape(r).
class JumpIntegral {
public:
    JumpIntegral(FieldMap amp, ShapeFn shape, const LevyRadialMeasure& measure);

    /// Applies compensator drift and jumps in place; `pre` is the field at the start of the step.
    void apply(SpectralField& field, const SpectralField& pre, double dt, double time_scale,
               std::span<const JumpEvent> events) const;
    double weight() const noexcept { return weight_; }

private:
    FieldMap amp_;
    ShapeFn shape_;
    double weight_;
};

class SlowFastStepper {
public:
    SlowFastStepper(const Model& model, const StepConfig& cfg);

    /// When `jump_increment` is given it receives the compensated eta_1 contribution to j.
    void step(SlowFastState& s, std::span<const JumpEvent> events1, std::span<const JumpEvent> events2,
              SpectralField* jump_increment = nullptr) const;
    /// Draws the step's events from the noise pair.
    void step(SlowFastState& s, CoupledNoise& noise) const;

    /// Deterministic part of the slow update (advection, drift, d_x theta, diffusion).
    SpectralField slow_deterministic(const SpectralField& j, const PhysicalVelocity& u,
                                     const SpectralField& f_value, const SpectralField& theta) const;
    /// Fast update with a given advecting velocity; no jumps.
    SpectralField fast_deterministic(const SpectralField& theta, const PhysicalVelocity& u) const;

    const JumpIntegral& jumps1() const noexcept { return jumps1_; }
    const JumpIntegral& jumps2() const noexcept { return jumps2_; }
    const StepConfig& config() const noexcept { return cfg_; }

private:
    const Model* model_;
    StepConfig cfg_;
    int substeps_;
    HeatFactor slow_heat_;
    HeatFactor fast_heat_;  // one substep
    JumpIntegral jumps1_;
    JumpIntegral jumps2_;
};

class FrozenStepper {
public:
    /// The frozen velocity is biot_savart(j_frozen).
    FrozenStepper(const Model& model, double dt, const SpectralField& j_frozen);

    void step(SpectralField& theta, std::span<const JumpEvent> events) const;
    void step(SpectralField& theta, NoiseStream& stream) const;
    double dt() const noexcept { return dt_; }

private:
    double dt_;
    PhysicalVelocity u_;
    HeatFactor heat_;
    JumpIntegral jumps_;
};

class AveragedStepper {
public:
    AveragedStepper(const Model& model, const StepConfig& cfg);

    void step(SpectralField& j_bar, double t, std::span<const JumpEvent> events1) const;
    void step(SpectralField& j_bar, double t, NoiseStream& stream1) const;

private:
    const Model* model_;
    StepConfig cfg_;
    HeatFactor heat_;
    JumpIntegral jumps_;
};

enum class ProcessKind { slow_fast, frozen, averaged, auxiliary };

struct RunOptions {
    StepConfig step;
    double horizon = 1.0;
    /// Must lie in [0, horizon]; each time is snapped to the nearest step.
    std::vector<double> record_times;
    bool record_fields = false;
    bool log_events = false;
};

/// `count` uniformly spaced instants from 0 to horizon inclusive.
std::vector<double> uniform_times(double horizon, int count);

struct RecordedPath {
    std::vector<double> times;
    std::vector<double> j_norm;      // |j|_H (slow-fast, averaged, auxiliary)
    std::vector<double> j_grad_sq;   // |grad j|_H^2
    std::vector<double> theta_norm;  // |theta|_H (slow-fast, frozen, auxiliary)
    std::vector<SpectralField> j;
    std::vector<SpectralField> theta;
    std::vector<SpectralField> j_hat;      // auxiliary only
    std::vector<SpectralField> theta_hat;  // auxiliary only
    /// eta_1 events per step when log_events is set.
    std::vector<std::vector<JumpEvent>> events1;
    /// First time |j|_H exceeded the blow-up threshold.
    std::optional<double> tau_m;
};

/// Observer called with the state after every step (and once for the initial state).
using StepObserver = std::function<void(long step, const SlowFastState&)>;

/// Integrates one process family to the horizon. For `frozen`, the velocity is frozen at
/// biot_savart(initial.j) and stream2 must have unit time scale. For `averaged`, only stream1
/// is consumed. Throws BlowUpError carrying the failing time.
RecordedPath integrate(ProcessKind kind, const Model& model, const SlowFastState& initial,
                       const RunOptions& options, CoupledNoise& noise, const StepObserver& observer = {});

/// Auxiliary processes with the slow inputs frozen on blocks of width options.step.delta.
RecordedPath run_khasminskii(const Model& model, const SlowFastState& initial, const RunOptions& options,
                             CoupledNoise& noise);

}  // namespace bq
