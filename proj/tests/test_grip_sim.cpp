#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "fbgforce/grip_sim.hpp"

using namespace fbg;

namespace {

SyntheticSensorConfig pnp_sensor(std::uint64_t seed) {
    return SyntheticSensorConfig{
        QuadCalib(144.99, 527.62, -91.42, 4.69),
        TempCharacterization::from_sensitivities(24.29, 10.31),
        Baseline{1540000.0, 1550000.0},
        25.0, 0.0, 3.0, 1000.0, seed,
    };
}

PickPlaceConfig pnp_config(std::uint64_t seed, bool feedback) {
    PickPlaceConfig cfg{pnp_sensor(seed), PidGains{}, GripperPlantParams{}, SlipParams{},
                        default_arm_plan(), TaskTiming{}, 0.001, 10, feedback};
    return cfg;
}

double grasp_start(const PickPlaceConfig& cfg) {
    return cfg.timing.home_s + cfg.timing.approach_s;
}

double motion_start(const PickPlaceConfig& cfg) {
    return grasp_start(cfg) + cfg.timing.grasp_s;
}

} // namespace

TEST_CASE("pid arithmetic and anti-windup") {
    PidGains gains{20.0, 0.0, 0.0, -5.0, 5.0};
    PidController pid(gains);
    CHECK(pid.step(1.0, 1.0, 0.01) == 0.0);          // zero error, zero integral
    CHECK_THAT(pid.step(1.1, 1.0, 0.01),
               Catch::Matchers::WithinAbs(2.0, 1e-12));  // kp * 0.1

    PidGains saturating{20.0, 10.0, 0.0, -1.0, 1.0};
    PidController windup(saturating);
    for (int i = 0; i < 100; ++i) windup.step(10.0, 0.0, 0.01);
    CHECK(windup.integral() == 0.0);                  // frozen while saturated

    PidController integ(PidGains{1.0, 1.0, 0.0, -100.0, 100.0});
    integ.step(1.0, 0.0, 0.5);
    CHECK_THAT(integ.integral(), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("plant follows the analytic first-order response") {
    GripperPlantParams params{0.5, 0.4};

    SECTION("no command, no force") {
        GripperPlantState s;
        for (int i = 0; i < 1000; ++i) s = plant_step(s, 0.0, params, 0.001);
        CHECK(s.engagement_n == 0.0);
        CHECK(s.contact_force_n == 0.0);
    }

    SECTION("constant engagement gives E(1 - exp(-t/tau))") {
        GripperPlantState s;
        s.engagement_n = 2.0;
        const double dt = 0.001;
        for (int i = 1; i <= 3000; ++i) {
            s = plant_step(s, 0.0, params, dt);
            const double t = i * dt;
            const double expected = 2.0 * (1.0 - std::exp(-t / params.tau_s));
            REQUIRE_THAT(s.contact_force_n, Catch::Matchers::WithinAbs(expected, 1e-6));
        }
    }

    SECTION("rate limit caps the slew") {
        GripperPlantState s;
        for (int i = 0; i < 1000; ++i) s = plant_step(s, 100.0, params, 0.001);
        CHECK_THAT(s.engagement_n, Catch::Matchers::WithinAbs(0.5, 1e-9));
    }
}

TEST_CASE("slip_step force balance") {
    ObjectSpec crimper{"crimper", 0.351, mu_eff_for(0.351, 0.6), 0.6, 1.0, 0.3, 0.25};
    SlipParams params;

    SECTION("mu_eff sizing holds the object at rest with margin 1.2") {
        CHECK_THAT(crimper.mu_eff, Catch::Matchers::WithinAbs(1.2 * 0.351 * 9.81 / 0.6, 1e-12));
        SlipState s{SlipPhase::holding, 0.6};
        for (int i = 0; i < 10000; ++i) {
            s = slip_step(crimper, 0.6, 0.0, s, params, 0.001);
            REQUIRE(s.phase == SlipPhase::holding);
        }
        CHECK(s.measured_force_n == 0.6);
    }

    SECTION("acceleration beyond the margin starts a slip, decay reaches drop") {
        SlipState s{SlipPhase::holding, 0.6};
        s = slip_step(crimper, 0.6, 0.25 * kGravity, s, params, 0.001);
        CHECK(s.phase == SlipPhase::slipping);
        // plant force frozen (feedback off): no recovery, exponential decay to drop
        double t = 0.0;
        while (s.phase == SlipPhase::slipping && t < 10.0) {
            s = slip_step(crimper, 0.6, 0.25 * kGravity, s, params, 0.001);
            t += 0.001;
        }
        CHECK(s.phase == SlipPhase::dropped);
        CHECK(s.measured_force_n == 0.0);
        CHECK_THAT(t, Catch::Matchers::WithinAbs(params.tau_slip_s * std::log(1.0 / params.drop_fraction), 0.1));
    }

    SECTION("raising the grip restores the hold while the contact survives") {
        SlipState s{SlipPhase::holding, 0.6};
        const double accel = 0.22 * kGravity;
        s = slip_step(crimper, 0.6, accel, s, params, 0.001);
        REQUIRE(s.phase == SlipPhase::slipping);
        const double needed =
            params.recover_margin * crimper.mass_kg * (kGravity + accel) / crimper.mu_eff;
        s = slip_step(crimper, needed + 1e-6, accel, s, params, 0.001);
        CHECK(s.phase == SlipPhase::holding);
        CHECK_THAT(s.measured_force_n, Catch::Matchers::WithinAbs(needed + 1e-6, 1e-12));
    }

    SECTION("dropped is absorbing") {
        SlipState s{SlipPhase::dropped, 0.0};
        s = slip_step(crimper, 10.0, 0.0, s, params, 0.001);
        CHECK(s.phase == SlipPhase::dropped);
    }
}

TEST_CASE("arm profile shape") {
    const auto plan = default_arm_plan();

    SECTION("dwell between pulses is vibration only") {
        for (double t : {1.0, 5.0, 9.0}) {
            CHECK(std::abs(arm_profile(plan, t)) <= plan.vibration_amp_mss + 1e-12);
        }
    }

    SECTION("pulse plateaus reach the configured peaks") {
        // lift pulse: delay 10, ramp 0.7 -> plateau mid around 11.8
        CHECK(arm_profile(plan, 11.8) >= 2.1 - plan.vibration_amp_mss - 1e-9);
        CHECK(arm_profile(plan, 11.8) <= 2.1 + plan.vibration_amp_mss + 1e-9);
    }

    SECTION("beyond the plan") {
        CHECK_THROWS_AS(arm_profile(plan, -0.5), OutOfPlanError);
        CHECK_THROWS_AS(arm_profile(plan, plan.total_duration_s() + 1.0), OutOfPlanError);
    }

    SECTION("deterministic for a fixed seed") {
        CHECK(arm_profile(plan, 11.3) == arm_profile(plan, 11.3));
    }
}

TEST_CASE("closed loop reaches 90% of the hammer setpoint in 3-5 s") {
    auto cfg = pnp_config(5, true);
    const auto objects = default_objects();
    const auto& hammer = objects[2];
    REQUIRE(hammer.setpoint_n == 1.6);

    const auto log = run_pick_and_place_one(cfg, hammer);
    const double t0 = grasp_start(cfg);

    double t90 = -1.0;
    for (const auto& s : log.steps) {
        if (s.t >= t0 && s.measured_n >= 0.9 * hammer.setpoint_n) {
            t90 = s.t - t0;
            break;
        }
    }
    REQUIRE(t90 > 0.0);
    CHECK(t90 >= 3.0);
    CHECK(t90 <= 5.0);

    // steady error under 2% of setpoint at the end of the 15 s grasp window
    double sum = 0.0;
    int count = 0;
    for (const auto& s : log.steps) {
        if (s.t >= motion_start(cfg) - 0.5 && s.t < motion_start(cfg)) {
            sum += s.measured_n;
            ++count;
        }
    }
    const double mean = sum / count;
    CHECK(std::abs(mean - hammer.setpoint_n) < 0.02 * hammer.setpoint_n);
}

TEST_CASE("steady-state error vanishes for any positive ki without disturbance") {
    auto cfg = pnp_config(6, true);
    cfg.gains.ki = 0.01;
    auto plan = cfg.plan;
    for (auto& p : plan.phases) p.peak_accel_mss = 0.0;  // no disturbance
    cfg.plan = plan;

    const auto log = run_pick_and_place_one(cfg, default_objects()[0]);
    double worst = 0.0;
    for (const auto& s : log.steps)
        if (s.t >= motion_start(cfg) - 0.3 && s.t < motion_start(cfg))
            worst = std::max(worst, std::abs(s.measured_n - s.setpoint_n));
    CHECK(worst < 0.01 * 0.6 + 3.0 * 0.014);  // 1% of setpoint plus sensor noise
}

TEST_CASE("feedback off drops every object in its designated phase") {
    auto cfg = pnp_config(11, false);
    const auto objects = default_objects();
    const auto logs = run_pick_and_place(cfg, objects);

    std::map<std::string, TaskPhase> expected = {
        {"crimper", TaskPhase::Lift},
        {"bottle", TaskPhase::Transfer},
        {"hammer", TaskPhase::Place},
    };
    for (const auto& log : logs) {
        INFO("object " << log.object);
        CHECK(log.dropped());
        REQUIRE(log.drop_phase().has_value());
        CHECK(*log.drop_phase() == expected[log.object]);

        // measured force collapses to the sensing noise floor after the drop
        // (the inverse map has low sensitivity near zero, so 3 pm of channel
        // noise reads as a few hundredths of a newton)
        const double t_drop = *log.event_time("drop");
        for (const auto& s : log.steps)
            if (s.t > t_drop && s.phase != TaskPhase::Done) REQUIRE(s.measured_n <= 0.08);
    }
}

TEST_CASE("feedback off freezes the commanded engagement after motion start") {
    auto cfg = pnp_config(12, false);
    const auto log = run_pick_and_place_one(cfg, default_objects()[0]);
    double frozen = -1.0;
    for (const auto& s : log.steps) {
        const bool in_motion = s.phase == TaskPhase::Lift || s.phase == TaskPhase::Transfer ||
                               s.phase == TaskPhase::Place;
        if (!in_motion) continue;
        if (frozen < 0.0) frozen = s.engagement_n;
        REQUIRE(s.engagement_n == frozen);
        REQUIRE(s.output == 0.0);
    }
}

TEST_CASE("feedback on retains all objects with bounded fluctuation") {
    const auto objects = default_objects();
    for (std::uint64_t seed : {21, 22, 23}) {
        auto cfg = pnp_config(seed, true);
        const auto logs = run_pick_and_place(cfg, objects);
        for (const auto& log : logs) {
            INFO("object " << log.object << " seed " << seed);
            CHECK_FALSE(log.dropped());

            double min_inmotion = 1e300;
            for (const auto& s : log.steps) {
                const bool in_motion = s.phase == TaskPhase::Lift ||
                                       s.phase == TaskPhase::Transfer ||
                                       s.phase == TaskPhase::Place;
                if (!in_motion) continue;
                REQUIRE(s.measured_n >= 0.7 * s.setpoint_n);
                REQUIRE(s.measured_n <= 1.3 * s.setpoint_n);
                min_inmotion = std::min(min_inmotion, s.measured_n);
            }
            if (log.object == "crimper") {
                CHECK(min_inmotion >= 0.4);
                CHECK(min_inmotion < 0.6);  // the lift disturbance leaves a visible dip
            }
        }
    }
}

TEST_CASE("task logs are deterministic and invariants hold") {
    auto cfg = pnp_config(33, true);
    const auto crimper = default_objects()[0];
    const auto a = run_pick_and_place_one(cfg, crimper);
    const auto b = run_pick_and_place_one(cfg, crimper);
    CHECK(serialize_task_log(a) == serialize_task_log(b));

    SECTION("energy-free plant: force never exceeds the engagement high-water mark") {
        double max_e = 0.0;
        for (const auto& s : a.steps) {
            max_e = std::max(max_e, s.engagement_n);
            REQUIRE(s.plant_force_n <= max_e + 1e-9);
        }
    }

    SECTION("hold certificate: holding implies the force balance") {
        for (const auto& s : a.steps) {
            const bool in_motion = s.phase == TaskPhase::Lift || s.phase == TaskPhase::Transfer ||
                                   s.phase == TaskPhase::Place;
            if (!in_motion || s.slip != SlipPhase::holding) continue;
            REQUIRE(crimper.mu_eff * s.plant_force_n >=
                    crimper.mass_kg * (kGravity + s.effective_accel_mss) - 1e-9);
        }
    }

    SECTION("timestamps strictly increase at fixed dt") {
        for (std::size_t i = 1; i < a.steps.size(); ++i) {
            REQUIRE(a.steps[i].t > a.steps[i - 1].t);
        }
    }
}

TEST_CASE("no holding after dropped before release") {
    auto cfg = pnp_config(40, false);
    const auto log = run_pick_and_place_one(cfg, default_objects()[1]);
    REQUIRE(log.dropped());
    bool seen_drop = false;
    for (const auto& s : log.steps) {
        if (s.slip == SlipPhase::dropped) seen_drop = true;
        if (seen_drop && s.phase != TaskPhase::Release && s.phase != TaskPhase::Done)
            REQUIRE(s.slip == SlipPhase::dropped);
    }
}

TEST_CASE("detect_slip_events") {
    SECTION("constant force yields no events") {
        std::vector<TaskStep> steps;
        for (int i = 0; i < 2000; ++i)
            steps.push_back({i * 0.001, TaskPhase::Lift, 0.6, 0.6, 0, SlipPhase::holding,
                             0, 0, 0.6, 0.6});
        CHECK(detect_slip_events(steps, 0.3, 0.15).empty());
    }

    SECTION("a step to zero yields exactly one event at the step") {
        std::vector<TaskStep> steps;
        for (int i = 0; i < 4000; ++i) {
            const double f = i < 2000 ? 0.6 : 0.0;
            steps.push_back({i * 0.001, TaskPhase::Transfer, 0.6, f, 0, SlipPhase::holding,
                             0, 0, 0.6, f});
        }
        const auto events = detect_slip_events(steps, 0.3, 0.15);
        REQUIRE(events.size() == 1);
        CHECK_THAT(events[0].t, Catch::Matchers::WithinAbs(2.0, 0.2));
    }

    SECTION("feedback-off crimper: detection precedes the drop") {
        auto cfg = pnp_config(50, false);
        const auto log = run_pick_and_place_one(cfg, default_objects()[0]);
        REQUIRE(log.dropped());
        const auto events = detect_slip_events(log.steps, 0.3, 0.15);
        REQUIRE_FALSE(events.empty());
        const double t_detect = events.front().t;
        const double t_drop = *log.event_time("drop");
        const double t_onset = *log.event_time("slip_onset");
        CHECK(t_detect > t_onset);
        CHECK(t_detect < t_drop);
    }
}

TEST_CASE("config validation catches inconsistent plans") {
    auto cfg = pnp_config(1, true);
    const auto objects = default_objects();

    SECTION("dt range") {
        cfg.dt_s = 0.1;
        CHECK_THROWS_AS(run_pick_and_place(cfg, objects), ConfigError);
    }

    SECTION("plan phase order") {
        std::swap(cfg.plan.phases[0], cfg.plan.phases[1]);
        CHECK_THROWS_AS(run_pick_and_place(cfg, objects), ConfigError);
    }

    SECTION("setpoint beyond calibrated range") {
        auto bad = objects;
        bad[0].setpoint_n = 10.0;
        CHECK_THROWS_AS(run_pick_and_place(cfg, bad), ConfigError);
    }

    SECTION("empty object set") {
        CHECK_THROWS_AS(run_pick_and_place(cfg, {}), ConfigError);
    }
}

TEST_CASE("task log serialization carries events in order") {
    auto cfg = pnp_config(60, false);
    const auto log = run_pick_and_place_one(cfg, default_objects()[0]);
    const auto text = serialize_task_log(log);
    CHECK(text.find("slip_onset") != std::string::npos);
    CHECK(text.find("drop") != std::string::npos);
    CHECK(text.find("grasp_complete") != std::string::npos);
    CHECK(text.find("slip_onset") < text.find("drop"));
}
