// sensor_sim.hpp
// Ground-truth synthetic sensor: generates wavelength streams for the cyclic
// load/unload rig and the heated water-bath scenario, including hysteresis,
// thermal drift and interrogator noise. Deterministic for a given seed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "fbgforce/errors.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

struct SyntheticSensorConfig {
    QuadCalib true_calib;
    TempCharacterization true_temp;
    Baseline baseline;
    double ref_temp_c = 25.0;        // temperature at which the baseline holds
    double play_half_width_n = 0.0;  // hysteresis half-band in force units
    double noise_sigma_pm = 3.0;     // per-channel Gaussian, interrogator-grade
    double sample_rate_hz = 1000.0;
    std::uint64_t rng_seed = 0;
};

inline void validate(const SyntheticSensorConfig& c) {
    validate(c.baseline);
    detail::require(c.play_half_width_n >= 0.0, "play_half_width must be >= 0");
    detail::require(c.play_half_width_n <= c.true_calib.force_max() / 4.0,
                    "play_half_width exceeds the hysteresis memory width");
    detail::require(c.noise_sigma_pm >= 0.0, "noise_sigma must be >= 0");
    detail::require(c.sample_rate_hz > 0.0, "sample_rate must be positive");
}

struct RigProfile {
    int cycle_count = 4;
    double peak_force_n = 4.69;
    double ramp_rate_n_per_s = 0.5;
    double dwell_s = 2.0;
};

struct BathProfile {
    double start_temp_c = 34.0;
    double end_temp_c = 45.0;
    double heat_rate_c_per_s = 0.1;
    double clamp_force_n = 0.1;
    double clamp_settle_time_s = 32.0;  // heating starts once the clamp force has settled
};

struct GroundTruthPoint {
    double t = 0.0;
    double true_force_n = 0.0;
    double true_temp_c = 0.0;
    WavelengthSample sample;
    double load_cell_n = 0.0;  // ideal reference channel, equals true_force
};

using GroundTruthTrace = std::vector<GroundTruthPoint>;

// Classical rate-independent play (backlash) operator:
//   y(t) = clamp(y(t-1), x(t) - w, x(t) + w),  y(0) = max(0, x(0) - w)
class PlayOperator {
public:
    explicit PlayOperator(double half_width) : w_(half_width) {
        detail::require(w_ >= 0.0, "play half-width must be >= 0");
    }

    double step(double x) {
        if (!primed_) {
            y_ = std::max(0.0, x - w_);
            primed_ = true;
        } else {
            y_ = std::clamp(y_, x - w_, x + w_);
        }
        return y_;
    }

    void reset() { primed_ = false; }

private:
    double w_;
    double y_ = 0.0;
    bool primed_ = false;
};

// Play operator applied to a whole series.
inline std::vector<double> play_hysteresis(std::span<const double> input, double half_width) {
    PlayOperator op(half_width);
    std::vector<double> out;
    out.reserve(input.size());
    for (double x : input) out.push_back(op.step(x));
    return out;
}

// Hysteresis applied to force before the calibration polynomial.
// A two-element Prandtl-Ishlinskii superposition: identity plus one wide play
// of memory half-width force_max/4, mixed so the force-domain branch
// separation at mid-range equals 2*half_band. The loop therefore closes at
// both ends of the range and peaks near force_max/2. half_band = 0 is exact
// passthrough.
class ForceHysteresis {
public:
    ForceHysteresis(double half_band_n, double force_max_n)
        : memory_width_(force_max_n / 4.0),
          weight_(memory_width_ > 0.0 ? half_band_n / memory_width_ : 0.0),
          play_(memory_width_) {
        detail::require(half_band_n >= 0.0, "hysteresis half-band must be >= 0");
        detail::require(weight_ <= 1.0, "hysteresis half-band exceeds force_max/4");
    }

    double step(double force_n) {
        if (weight_ == 0.0) return force_n;
        return force_n - weight_ * (force_n - play_.step(force_n));
    }

    void reset() { play_.reset(); }

private:
    double memory_width_;
    double weight_;
    PlayOperator play_;
};

// Forward sensor model. Holds the hysteresis memory and the seeded noise
// stream, so one instance generates one trace:
//   lambda1 = base1 + quad(hyst(force)) + kt1*(T - ref) + noise
//   lambda2 = base2 +                     kt2*(T - ref) + noise
class ForwardSensor {
public:
    explicit ForwardSensor(const SyntheticSensorConfig& cfg)
        : cfg_(cfg),
          hysteresis_(cfg.play_half_width_n, cfg.true_calib.force_max()),
          rng_(cfg.rng_seed) {
        validate(cfg);
    }

    WavelengthSample sample(double t, double true_force_n, double temp_c) {
        const double f_eff = hysteresis_.step(true_force_n);
        const double thermal1 = cfg_.true_temp.kt1() * (temp_c - cfg_.ref_temp_c);
        const double thermal2 = cfg_.true_temp.kt2() * (temp_c - cfg_.ref_temp_c);
        WavelengthSample s;
        s.t = t;
        s.lambda1_pm = cfg_.baseline.lambda1_pm + cfg_.true_calib.shift_at(f_eff) +
                       thermal1 + noise();
        s.lambda2_pm = cfg_.baseline.lambda2_pm + thermal2 + noise();
        return s;
    }

private:
    double noise() {
        if (cfg_.noise_sigma_pm <= 0.0) return 0.0;
        return gauss_(rng_) * cfg_.noise_sigma_pm;
    }

    SyntheticSensorConfig cfg_;
    ForceHysteresis hysteresis_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

namespace detail {

template <class ForceFn, class TempFn>
GroundTruthTrace run_forward(const SyntheticSensorConfig& cfg, double duration_s,
                             ForceFn&& force_at, TempFn&& temp_at) {
    ForwardSensor sensor(cfg);
    const auto count = static_cast<std::size_t>(std::ceil(duration_s * cfg.sample_rate_hz)) + 1;
    GroundTruthTrace trace;
    trace.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) / cfg.sample_rate_hz;
        GroundTruthPoint p;
        p.t = t;
        p.true_force_n = force_at(t);
        p.true_temp_c = temp_at(t);
        p.sample = sensor.sample(t, p.true_force_n, p.true_temp_c);
        p.load_cell_n = p.true_force_n;  // ideal reference
        trace.push_back(p);
    }
    return trace;
}

} // namespace detail

// Triangular load/unload cycles with dwell at peaks and valleys, isothermal at
// the reference temperature.
inline GroundTruthTrace simulate_rig(const SyntheticSensorConfig& cfg, const RigProfile& profile) {
    detail::require(profile.cycle_count > 0, "rig profile needs >= 1 cycle");
    detail::require(profile.ramp_rate_n_per_s > 0.0, "ramp rate must be positive");
    detail::require(profile.dwell_s >= 0.0, "dwell must be >= 0");
    detail::require(profile.peak_force_n > 0.0 &&
                        profile.peak_force_n <= cfg.true_calib.force_max(),
                    "rig peak force must lie within the calibrated range");

    const double ramp = profile.peak_force_n / profile.ramp_rate_n_per_s;
    const double cycle = 2.0 * (ramp + profile.dwell_s);
    const double duration = cycle * profile.cycle_count;

    auto force_at = [&](double t) {
        const double u = std::fmod(t, cycle);
        if (u < ramp) return profile.ramp_rate_n_per_s * u;
        if (u < ramp + profile.dwell_s) return profile.peak_force_n;
        if (u < 2.0 * ramp + profile.dwell_s)
            return profile.peak_force_n - profile.ramp_rate_n_per_s * (u - ramp - profile.dwell_s);
        return 0.0;
    };
    auto temp_at = [&](double) { return cfg.ref_temp_c; };
    return detail::run_forward(cfg, duration, force_at, temp_at);
}

// Heated-bath scenario. With a positive clamp force the trace starts with a
// finger-press transient (half-sine to 1 N at the 10th second, exponential
// decay to the clamp force), then the temperature ramps from start to end.
// With clamp_force = 0 the sensor floats free, which is the temperature
// calibration setup.
inline GroundTruthTrace simulate_bath(const SyntheticSensorConfig& cfg, const BathProfile& profile) {
    detail::require(profile.end_temp_c >= profile.start_temp_c, "bath must heat, not cool");
    detail::require(profile.heat_rate_c_per_s > 0.0, "heat rate must be positive");
    detail::require(profile.clamp_force_n >= 0.0, "clamp force must be >= 0");
    detail::require(profile.clamp_settle_time_s >= 0.0, "settle time must be >= 0");

    constexpr double press_start_s = 10.0;
    constexpr double press_rise_s = 1.0;
    constexpr double press_peak_n = 1.0;
    constexpr double press_decay_tau_s = 4.0;

    const double heat_s = (profile.end_temp_c - profile.start_temp_c) / profile.heat_rate_c_per_s;
    const double duration = profile.clamp_settle_time_s + heat_s;

    auto force_at = [&](double t) {
        if (profile.clamp_force_n <= 0.0) return 0.0;
        if (t < press_start_s) return 0.0;
        if (t < press_start_s + press_rise_s)
            return press_peak_n *
                   std::sin(0.5 * std::numbers::pi * (t - press_start_s) / press_rise_s);
        const double dt = t - press_start_s - press_rise_s;
        return profile.clamp_force_n +
               (press_peak_n - profile.clamp_force_n) * std::exp(-dt / press_decay_tau_s);
    };
    auto temp_at = [&](double t) {
        if (t <= profile.clamp_settle_time_s) return profile.start_temp_c;
        return std::min(profile.end_temp_c,
                        profile.start_temp_c +
                            profile.heat_rate_c_per_s * (t - profile.clamp_settle_time_s));
    };
    return detail::run_forward(cfg, duration, force_at, temp_at);
}

inline std::vector<WavelengthSample> samples_of(const GroundTruthTrace& trace) {
    std::vector<WavelengthSample> out;
    out.reserve(trace.size());
    for (const auto& p : trace) out.push_back(p.sample);
    return out;
}

} // namespace fbg
