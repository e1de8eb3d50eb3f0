// grip_sim.hpp
// Deterministic fixed-step simulator of the closed-loop grasping system:
// PID force controller, rate-limited first-order gripper plant, friction
// slip model, arm-motion disturbance schedule, and the pick-and-place task
// state machine. Runs with feedback on or off.
//
// Simulation step is dt (default 1 ms, sensor rate); the controller acts
// every control_divisor-th step (default 100 Hz).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fbgforce/conversion.hpp"
#include "fbgforce/errors.hpp"
#include "fbgforce/io_util.hpp"
#include "fbgforce/sensor_sim.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

inline constexpr double kGravity = 9.81;  // m/s^2

// ---------------------------------------------------------------------------
// PID controller

// out_min is much tighter than out_max: the gripper loosens cautiously so a
// disturbance-driven recovery is not unwound faster than the plant can react.
struct PidGains {
    double kp = 20.0;
    double ki = 0.05;
    double kd = 0.0;
    double out_min = -0.05;
    double out_max = 5.0;
};

inline void validate(const PidGains& g) {
    detail::require(std::isfinite(g.kp) && std::isfinite(g.ki) && std::isfinite(g.kd),
                    "pid gains must be finite");
    detail::require(g.out_min < g.out_max, "pid output limits must be ordered");
}

// Positional PID with conditional integration (integral frozen while the
// output is saturated) and derivative on the measurement.
class PidController {
public:
    explicit PidController(const PidGains& gains) : gains_(gains) { validate(gains); }

    double step(double setpoint, double measurement, double dt) {
        detail::require(dt > 0.0, "pid step needs dt > 0");
        const double error = setpoint - measurement;
        double derivative = 0.0;
        if (has_prev_) derivative = -(measurement - prev_measurement_) / dt;
        prev_measurement_ = measurement;
        has_prev_ = true;

        const double raw = gains_.kp * error + integral_ + gains_.kd * derivative;
        const double out = std::clamp(raw, gains_.out_min, gains_.out_max);
        if (raw == out) integral_ += gains_.ki * error * dt;
        return out;
    }

    void reset() {
        integral_ = 0.0;
        has_prev_ = false;
    }

    double integral() const { return integral_; }

private:
    PidGains gains_;
    double integral_ = 0.0;
    double prev_measurement_ = 0.0;
    bool has_prev_ = false;
};

// ---------------------------------------------------------------------------
// Gripper plant

struct GripperPlantParams {
    double rate_limit_n_per_s = 0.5;  // max engagement slew
    double tau_s = 0.4;               // contact-force lag
};

struct GripperPlantState {
    double engagement_n = 0.0;
    double contact_force_n = 0.0;
};

// command is an engagement-rate demand (N/s); the plant clamps it to its
// slew limit, integrates, and runs the contact force through an exact
// zero-order-hold first-order lag.
inline GripperPlantState plant_step(GripperPlantState state, double command,
                                    const GripperPlantParams& params, double dt) {
    detail::require(dt > 0.0, "plant step needs dt > 0");
    detail::require(params.rate_limit_n_per_s > 0.0, "plant rate limit must be positive");
    detail::require(params.tau_s > 0.0, "plant lag must be positive");

    const double rate = std::clamp(command, -params.rate_limit_n_per_s, params.rate_limit_n_per_s);
    state.engagement_n = std::max(0.0, state.engagement_n + rate * dt);
    const double decay = std::exp(-dt / params.tau_s);
    state.contact_force_n =
        std::max(0.0, state.engagement_n + (state.contact_force_n - state.engagement_n) * decay);
    return state;
}

// ---------------------------------------------------------------------------
// Objects and slip

enum class MotionKind { lift, transfer, place };

inline const char* to_string(MotionKind k) {
    switch (k) {
        case MotionKind::lift: return "lift";
        case MotionKind::transfer: return "transfer";
        case MotionKind::place: return "place";
    }
    return "?";
}

// mu_eff folds the friction coefficient and the contact-point count into one
// factor: the grasp holds while mu_eff * contact_force >= m * (g + a).
// The per-phase couplings model how much of the end-effector acceleration the
// grasp geometry actually transmits into the contact for this object.
struct ObjectSpec {
    std::string name;
    double mass_kg = 0.0;
    double mu_eff = 0.0;
    double setpoint_n = 0.0;
    double lift_coupling = 1.0;
    double transfer_coupling = 1.0;
    double place_coupling = 1.0;

    double coupling(MotionKind kind) const {
        switch (kind) {
            case MotionKind::lift: return lift_coupling;
            case MotionKind::transfer: return transfer_coupling;
            case MotionKind::place: return place_coupling;
        }
        return 1.0;
    }
};

inline void validate(const ObjectSpec& o) {
    detail::require(!o.name.empty(), "object needs a name");
    detail::require(o.mass_kg > 0.0, "object mass must be positive");
    detail::require(o.mu_eff > 0.0, "object mu_eff must be positive");
    detail::require(o.setpoint_n > 0.0, "object setpoint must be positive");
    detail::require(o.lift_coupling >= 0.0 && o.transfer_coupling >= 0.0 &&
                        o.place_coupling >= 0.0,
                    "couplings must be >= 0");
}

// mu_eff such that the setpoint holds the hanging object with the given margin.
inline double mu_eff_for(double mass_kg, double setpoint_n, double margin = 1.2) {
    return margin * mass_kg * kGravity / setpoint_n;
}

enum class SlipPhase { holding, slipping, dropped };

inline const char* to_string(SlipPhase p) {
    switch (p) {
        case SlipPhase::holding: return "holding";
        case SlipPhase::slipping: return "slipping";
        case SlipPhase::dropped: return "dropped";
    }
    return "?";
}

struct SlipParams {
    double tau_slip_s = 1.2;      // measured-force decay while sliding
    double drop_fraction = 0.05;  // of setpoint: below this the object is gone
    double regrip_fraction = 0.35;  // of setpoint: below this the contact cannot re-stick
    double recover_margin = 1.005;  // hysteresis on the restore condition
};

struct SlipState {
    SlipPhase phase = SlipPhase::holding;
    double measured_force_n = 0.0;
};

// One slip-physics step. plant_force is the grip the gripper currently
// exerts; measured_force_n is what the contact actually transmits (and what
// the sensor sees). While holding they coincide; while slipping the measured
// force decays and the object drops once it falls below the drop threshold.
// Restoring needs both enough grip for the current disturbance and a contact
// that has not degraded past the re-grip floor.
inline SlipState slip_step(const ObjectSpec& obj, double plant_force_n,
                           double effective_accel_mss, SlipState state, const SlipParams& params,
                           double dt) {
    detail::require(dt > 0.0, "slip step needs dt > 0");
    const double demand_n = obj.mass_kg * (kGravity + effective_accel_mss);

    switch (state.phase) {
        case SlipPhase::dropped:
            state.measured_force_n = 0.0;
            return state;

        case SlipPhase::holding:
            if (obj.mu_eff * plant_force_n < demand_n) {
                state.phase = SlipPhase::slipping;
                // decay starts from the force transmitted at onset
            } else {
                state.measured_force_n = plant_force_n;
            }
            return state;

        case SlipPhase::slipping: {
            state.measured_force_n *= std::exp(-dt / params.tau_slip_s);
            if (state.measured_force_n < params.drop_fraction * obj.setpoint_n) {
                state.phase = SlipPhase::dropped;
                state.measured_force_n = 0.0;
            } else if (obj.mu_eff * plant_force_n >= params.recover_margin * demand_n &&
                       state.measured_force_n >= params.regrip_fraction * obj.setpoint_n) {
                state.phase = SlipPhase::holding;
                state.measured_force_n = plant_force_n;
            }
            return state;
        }
    }
    return state;
}

// ---------------------------------------------------------------------------
// Arm motion plan

// One motion phase with a trapezoidal acceleration pulse inside it.
struct ArmPhase {
    MotionKind kind = MotionKind::lift;
    double duration_s = 0.0;
    double pulse_delay_s = 0.0;  // quiet dwell before the pulse
    double ramp_s = 0.7;
    double plateau_s = 2.2;
    double peak_accel_mss = 0.0;
};

struct ArmPlan {
    std::vector<ArmPhase> phases;
    double vibration_amp_mss = 0.05;
    std::uint64_t vibration_seed = 1;

    double total_duration_s() const {
        double total = 0.0;
        for (const auto& p : phases) total += p.duration_s;
        return total;
    }
};

inline void validate(const ArmPlan& plan) {
    detail::require(!plan.phases.empty(), "arm plan needs at least one phase");
    for (const auto& p : plan.phases) {
        detail::require(p.duration_s > 0.0, "arm phase duration must be positive");
        detail::require(p.ramp_s > 0.0 && p.plateau_s >= 0.0, "bad pulse shape");
        detail::require(p.pulse_delay_s >= 0.0, "pulse delay must be >= 0");
        detail::require(p.pulse_delay_s + 2.0 * p.ramp_s + p.plateau_s <= p.duration_s,
                        "pulse does not fit inside its phase");
        detail::require(p.peak_accel_mss >= 0.0, "peak acceleration must be >= 0");
    }
    detail::require(plan.vibration_amp_mss >= 0.0, "vibration amplitude must be >= 0");
}

namespace detail {

inline std::pair<double, double> vibration_phases(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    const double a = ph(rng);
    const double b = ph(rng);
    return {a, b};
}

} // namespace detail

// Phase index for a motion-relative time; throws OutOfPlan outside the plan.
inline std::size_t plan_phase_index(const ArmPlan& plan, double t) {
    if (t < 0.0) throw OutOfPlanError("time before motion start");
    double start = 0.0;
    for (std::size_t i = 0; i < plan.phases.size(); ++i) {
        if (t < start + plan.phases[i].duration_s) return i;
        start += plan.phases[i].duration_s;
    }
    if (t <= plan.total_duration_s() + 1e-12) return plan.phases.size() - 1;
    throw OutOfPlanError("time beyond plan duration");
}

// End-effector acceleration magnitude at motion-relative time t:
// trapezoidal pulse of the active phase plus a small deterministic seeded
// vibration term.
inline double arm_profile(const ArmPlan& plan, double t) {
    const std::size_t idx = plan_phase_index(plan, t);
    double phase_start = 0.0;
    for (std::size_t i = 0; i < idx; ++i) phase_start += plan.phases[i].duration_s;
    const ArmPhase& p = plan.phases[idx];

    double accel = 0.0;
    const double u = t - phase_start - p.pulse_delay_s;
    if (u >= 0.0 && u < p.ramp_s) {
        accel = p.peak_accel_mss * (u / p.ramp_s);
    } else if (u >= p.ramp_s && u < p.ramp_s + p.plateau_s) {
        accel = p.peak_accel_mss;
    } else if (u >= p.ramp_s + p.plateau_s && u < 2.0 * p.ramp_s + p.plateau_s) {
        accel = p.peak_accel_mss * (1.0 - (u - p.ramp_s - p.plateau_s) / p.ramp_s);
    }

    const auto [ph1, ph2] = detail::vibration_phases(plan.vibration_seed);
    const double vib = plan.vibration_amp_mss *
                       (0.6 * std::sin(2.0 * std::numbers::pi * 6.1 * t + ph1) +
                        0.4 * std::sin(2.0 * std::numbers::pi * 11.7 * t + ph2));
    return accel + vib;
}

// Default plan: pulses land about 10 s (lift), 14.6 s (transfer) and 19.2 s
// (place approach) after motion start; the peaks are swept so that each
// feedback-off run loses its object in the reported phase.
inline ArmPlan default_arm_plan() {
    ArmPlan plan;
    plan.phases = {
        {MotionKind::lift, 14.5, 10.0, 0.7, 2.2, 2.1},
        {MotionKind::transfer, 4.6, 0.1, 0.7, 2.2, 3.4},
        {MotionKind::place, 5.2, 0.2, 0.7, 2.2, 4.8},
    };
    return plan;
}

inline std::vector<ObjectSpec> default_objects() {
    std::vector<ObjectSpec> objects = {
        {"crimper", 0.351, mu_eff_for(0.351, 0.6), 0.6, 1.00, 0.30, 0.25},
        {"bottle", 0.222, mu_eff_for(0.222, 0.8), 0.8, 0.50, 0.62, 0.30},
        {"hammer", 0.419, mu_eff_for(0.419, 1.6), 1.6, 0.40, 0.45, 0.42},
    };
    return objects;
}

// ---------------------------------------------------------------------------
// Task state machine

enum class TaskPhase { Home, Approach, Grasp, Lift, Transfer, Place, Release, Done };

inline const char* to_string(TaskPhase p) {
    switch (p) {
        case TaskPhase::Home: return "Home";
        case TaskPhase::Approach: return "Approach";
        case TaskPhase::Grasp: return "Grasp";
        case TaskPhase::Lift: return "Lift";
        case TaskPhase::Transfer: return "Transfer";
        case TaskPhase::Place: return "Place";
        case TaskPhase::Release: return "Release";
        case TaskPhase::Done: return "Done";
    }
    return "?";
}

inline TaskPhase task_phase_of(MotionKind k) {
    switch (k) {
        case MotionKind::lift: return TaskPhase::Lift;
        case MotionKind::transfer: return TaskPhase::Transfer;
        case MotionKind::place: return TaskPhase::Place;
    }
    return TaskPhase::Lift;
}

struct TaskTiming {
    double home_s = 1.0;
    double approach_s = 2.0;
    double grasp_s = 15.0;  // fixed stabilization timer
    double release_s = 2.0;
};

struct TaskStep {
    double t = 0.0;
    TaskPhase phase = TaskPhase::Home;
    double setpoint_n = 0.0;
    double measured_n = 0.0;  // sensor-path force reading
    double output = 0.0;      // controller command
    SlipPhase slip = SlipPhase::holding;
    double arm_accel_mss = 0.0;
    double effective_accel_mss = 0.0;
    double engagement_n = 0.0;
    double plant_force_n = 0.0;
};

struct TaskEvent {
    double t = 0.0;
    std::string name;
};

struct TaskLog {
    std::string object;
    bool feedback = true;
    std::vector<TaskStep> steps;
    std::vector<TaskEvent> events;

    bool dropped() const {
        for (const auto& e : events)
            if (e.name == "drop") return true;
        return false;
    }

    std::optional<TaskPhase> drop_phase() const {
        for (std::size_t i = 0; i < steps.size(); ++i)
            if (steps[i].slip == SlipPhase::dropped)
                return steps[i > 0 ? i - 1 : 0].phase;
        return std::nullopt;
    }

    std::optional<double> event_time(const std::string& name) const {
        for (const auto& e : events)
            if (e.name == name) return e.t;
        return std::nullopt;
    }
};

struct PickPlaceConfig {
    SyntheticSensorConfig sensor;
    PidGains gains;
    GripperPlantParams plant;
    SlipParams slip;
    ArmPlan plan = default_arm_plan();
    TaskTiming timing;
    double dt_s = 0.001;
    int control_divisor = 10;
    bool feedback = true;
};

inline void validate_for_run(const PickPlaceConfig& cfg, std::span<const ObjectSpec> objects) {
    validate(cfg.sensor);
    validate(cfg.gains);
    validate(cfg.plan);
    if (!(cfg.dt_s > 0.0 && cfg.dt_s <= 0.05))
        throw ConfigError("dt must lie in (0, 0.05] s");
    if (cfg.control_divisor < 1) throw ConfigError("control divisor must be >= 1");
    if (objects.empty()) throw ConfigError("no objects configured");
    if (cfg.plan.phases.size() != 3 || cfg.plan.phases[0].kind != MotionKind::lift ||
        cfg.plan.phases[1].kind != MotionKind::transfer ||
        cfg.plan.phases[2].kind != MotionKind::place)
        throw ConfigError("pick-and-place plan must be lift, transfer, place in order");
    for (const auto& o : objects) {
        validate(o);
        if (o.setpoint_n > cfg.sensor.true_calib.force_max())
            throw ConfigError("setpoint for '" + o.name + "' exceeds the calibrated range");
    }
}

// One object through the full task. The sensor measurement path runs through
// the forward model and the wavelength-to-force conversion, noise and all.
inline TaskLog run_pick_and_place_one(const PickPlaceConfig& cfg, const ObjectSpec& object) {
    validate_for_run(cfg, std::span(&object, 1));

    const double motion_start =
        cfg.timing.home_s + cfg.timing.approach_s + cfg.timing.grasp_s;
    const double motion_end = motion_start + cfg.plan.total_duration_s();
    const double task_end = motion_end + cfg.timing.release_s;

    ForwardSensor sensor(cfg.sensor);
    PidController pid(cfg.gains);
    GripperPlantState plant;
    SlipState slip;
    slip.measured_force_n = 0.0;

    TaskLog log;
    log.object = object.name;
    log.feedback = cfg.feedback;
    const auto total_steps = static_cast<std::size_t>(std::ceil(task_end / cfg.dt_s));
    log.steps.reserve(total_steps + 1);

    double last_sensed = 0.0;
    double command = 0.0;
    bool grasp_done_logged = false, place_done_logged = false, release_logged = false;

    for (std::size_t k = 0; k <= total_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt_s;

        TaskPhase phase;
        if (t < cfg.timing.home_s) phase = TaskPhase::Home;
        else if (t < cfg.timing.home_s + cfg.timing.approach_s) phase = TaskPhase::Approach;
        else if (t < motion_start) phase = TaskPhase::Grasp;
        else if (t < motion_end) {
            const std::size_t idx = plan_phase_index(cfg.plan, t - motion_start);
            phase = task_phase_of(cfg.plan.phases[idx].kind);
        } else if (t < task_end) phase = TaskPhase::Release;
        else phase = TaskPhase::Done;

        if (phase == TaskPhase::Grasp && !grasp_done_logged && t + cfg.dt_s >= motion_start) {
            log.events.push_back({t, "grasp_complete"});
            grasp_done_logged = true;
        }
        if (phase == TaskPhase::Release && !release_logged) {
            if (slip.phase != SlipPhase::dropped) log.events.push_back({t, "place_complete"});
            log.events.push_back({t, "release"});
            place_done_logged = true;
            release_logged = true;
        }
        (void)place_done_logged;

        // arm disturbance
        double arm_accel = 0.0, effective_accel = 0.0;
        const bool in_motion = phase == TaskPhase::Lift || phase == TaskPhase::Transfer ||
                               phase == TaskPhase::Place;
        if (in_motion) {
            const double mt = t - motion_start;
            arm_accel = arm_profile(cfg.plan, mt);
            const std::size_t idx = plan_phase_index(cfg.plan, mt);
            effective_accel = object.coupling(cfg.plan.phases[idx].kind) * arm_accel;
        }

        // controller (zero-order hold between ticks)
        if (k % static_cast<std::size_t>(cfg.control_divisor) == 0) {
            const double control_dt = cfg.dt_s * cfg.control_divisor;
            if (phase == TaskPhase::Grasp || in_motion) {
                const bool active = cfg.feedback || t < motion_start;
                command = active ? pid.step(object.setpoint_n, last_sensed, control_dt) : 0.0;
            } else if (phase == TaskPhase::Release || phase == TaskPhase::Done) {
                command = -cfg.plant.rate_limit_n_per_s;  // open the gripper
            } else {
                command = 0.0;
            }
        }

        plant = plant_step(plant, command, cfg.plant, cfg.dt_s);

        // slip physics only while the object hangs from the gripper
        const SlipPhase before = slip.phase;
        if (in_motion) {
            slip = slip_step(object, plant.contact_force_n, effective_accel, slip, cfg.slip,
                             cfg.dt_s);
            if (before == SlipPhase::holding && slip.phase == SlipPhase::slipping)
                log.events.push_back({t, "slip_onset"});
            if (before != SlipPhase::dropped && slip.phase == SlipPhase::dropped)
                log.events.push_back({t, "drop"});
        } else if (slip.phase != SlipPhase::dropped) {
            slip.measured_force_n = plant.contact_force_n;
        } else {
            slip.measured_force_n = 0.0;
        }

        // sensor path: true contact force -> wavelengths -> compensated force
        const WavelengthSample sample =
            sensor.sample(t, slip.measured_force_n, cfg.sensor.ref_temp_c);
        last_sensed = compensated_force(sample, cfg.sensor.baseline, cfg.sensor.true_calib,
                                        cfg.sensor.true_temp, /*clamp_negative=*/true)
                          .force_n;

        log.steps.push_back({t, phase, object.setpoint_n, last_sensed, command, slip.phase,
                             arm_accel, effective_accel, plant.engagement_n,
                             plant.contact_force_n});
    }
    return log;
}

inline std::vector<TaskLog> run_pick_and_place(const PickPlaceConfig& cfg,
                                               std::span<const ObjectSpec> objects) {
    validate_for_run(cfg, objects);
    std::vector<TaskLog> logs;
    logs.reserve(objects.size());
    for (const auto& o : objects) logs.push_back(run_pick_and_place_one(cfg, o));
    return logs;
}

// ---------------------------------------------------------------------------
// Slip-event detection on a recorded force series

// Flags windows whose regression slope drops below -slope_threshold while the
// task holds or moves an object. One event per excursion; re-arms once the
// slope recovers above half the threshold.
inline std::vector<TaskEvent> detect_slip_events(std::span<const TaskStep> steps,
                                                 double window_s, double slope_threshold) {
    detail::require(window_s > 0.0, "detector window must be positive");
    detail::require(slope_threshold > 0.0, "slope threshold must be positive");
    std::vector<TaskEvent> events;
    if (steps.size() < 2) return events;

    const double dt = steps[1].t - steps[0].t;
    const auto window = std::max<std::size_t>(2, static_cast<std::size_t>(window_s / dt));
    if (steps.size() < window) return events;

    bool armed = true;
    for (std::size_t i = window; i < steps.size(); ++i) {
        const auto& step = steps[i];
        const bool in_hold_phase = step.phase == TaskPhase::Lift ||
                                   step.phase == TaskPhase::Transfer ||
                                   step.phase == TaskPhase::Place;
        // regression slope over the trailing window
        double sum_t = 0.0, sum_y = 0.0, sum_tt = 0.0, sum_ty = 0.0;
        for (std::size_t j = i - window + 1; j <= i; ++j) {
            const double x = steps[j].t - step.t;
            sum_t += x;
            sum_y += steps[j].measured_n;
            sum_tt += x * x;
            sum_ty += x * steps[j].measured_n;
        }
        const double n = static_cast<double>(window);
        const double denom = n * sum_tt - sum_t * sum_t;
        if (denom <= 0.0) continue;
        const double slope = (n * sum_ty - sum_t * sum_y) / denom;

        if (armed && in_hold_phase && slope < -slope_threshold) {
            events.push_back({step.t, "slip_detected"});
            armed = false;
        } else if (!armed && slope > -0.5 * slope_threshold) {
            armed = true;
        }
    }
    return events;
}

// ---------------------------------------------------------------------------
// Task log serialization (steps as CSV, events inline in a trailing column)

inline std::string serialize_task_log(const TaskLog& log) {
    std::string out =
        "t_s,phase,setpoint_n,measured_n,output,slip_state,arm_accel_mss,"
        "effective_accel_mss,engagement_n,plant_force_n,event\n";
    std::size_t next_event = 0;
    for (const auto& s : log.steps) {
        out += ioutil::format_double(s.t);
        out += ',';
        out += to_string(s.phase);
        out += ',';
        out += ioutil::format_double(s.setpoint_n);
        out += ',';
        out += ioutil::format_double(s.measured_n);
        out += ',';
        out += ioutil::format_double(s.output);
        out += ',';
        out += to_string(s.slip);
        out += ',';
        out += ioutil::format_double(s.arm_accel_mss);
        out += ',';
        out += ioutil::format_double(s.effective_accel_mss);
        out += ',';
        out += ioutil::format_double(s.engagement_n);
        out += ',';
        out += ioutil::format_double(s.plant_force_n);
        out += ',';
        while (next_event < log.events.size() && log.events[next_event].t <= s.t) {
            if (!out.empty() && out.back() != ',') out += ';';
            out += log.events[next_event].name;
            ++next_event;
        }
        out += '\n';
    }
    return out;
}

inline void write_task_log(const std::filesystem::path& path, const TaskLog& log) {
    ioutil::atomic_write(path, serialize_task_log(log));
}

} // namespace fbg
