// types.hpp
// Core value types for dual-FBG force sensing.
//
// Unit conventions, used consistently across the library:
//   wavelengths and shifts  -> picometers (pm)
//   forces                  -> newtons (N)
//   temperatures            -> degrees Celsius
//   time                    -> seconds

#pragma once

#include <cmath>
#include <string>

#include "fbgforce/errors.hpp"

namespace fbg {

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvariantViolationError(what);
}

inline bool finite(double v) { return std::isfinite(v); }

} // namespace detail

// One timestamped pair of absolute peak wavelengths (FBG1, FBG2).
struct WavelengthSample {
    double t = 0.0;           // s
    double lambda1_pm = 0.0;  // FBG1 peak
    double lambda2_pm = 0.0;  // FBG2 peak
};

inline void validate(const WavelengthSample& s) {
    detail::require(detail::finite(s.t), "sample time must be finite");
    detail::require(detail::finite(s.lambda1_pm) && s.lambda1_pm > 0.0,
                    "lambda1 must be finite and positive");
    detail::require(detail::finite(s.lambda2_pm) && s.lambda2_pm > 0.0,
                    "lambda2 must be finite and positive");
}

// Unloaded reference wavelengths at reference temperature.
struct Baseline {
    double lambda1_pm = 0.0;
    double lambda2_pm = 0.0;
};

inline void validate(const Baseline& b) {
    detail::require(detail::finite(b.lambda1_pm) && b.lambda1_pm > 0.0,
                    "baseline lambda1 must be finite and positive");
    detail::require(detail::finite(b.lambda2_pm) && b.lambda2_pm > 0.0,
                    "baseline lambda2 must be finite and positive");
}

// Per-channel wavelength shifts relative to a baseline.
struct ShiftPair {
    double dl1_pm = 0.0;
    double dl2_pm = 0.0;
};

// Quadratic force calibration: shift = a2*N^2 + a1*N + a0, valid on [0, force_max].
// a2/a1/a0 correspond to the fitted constants usually written A, B, C.
class QuadCalib {
public:
    QuadCalib(double a2_pm_per_n2, double a1_pm_per_n, double a0_pm, double force_max_n)
        : a2_(a2_pm_per_n2), a1_(a1_pm_per_n), a0_(a0_pm), force_max_(force_max_n) {
        detail::require(detail::finite(a2_) && a2_ > 0.0, "quad calib requires a2 > 0");
        detail::require(detail::finite(a1_) && a1_ > 0.0, "quad calib requires a1 > 0");
        detail::require(detail::finite(a0_), "quad calib a0 must be finite");
        detail::require(detail::finite(force_max_) && force_max_ > 0.0,
                        "quad calib requires force_max > 0");
    }

    double a2() const { return a2_; }
    double a1() const { return a1_; }
    double a0() const { return a0_; }
    double force_max() const { return force_max_; }

    // Forward polynomial, no domain checks.
    double shift_at(double force_n) const {
        return (a2_ * force_n + a1_) * force_n + a0_;
    }

    // Shift below which the inverse map has no real root.
    double vertex_shift() const { return a0_ - a1_ * a1_ / (4.0 * a2_); }

private:
    double a2_, a1_, a0_, force_max_;
};

// Temperature sensitivities of the two gratings and their ratio r = kt1/kt2.
// r is carried explicitly because it is used as a standalone constant downstream.
class TempCharacterization {
public:
    TempCharacterization(double kt1_pm_per_c, double kt2_pm_per_c, double ratio)
        : kt1_(kt1_pm_per_c), kt2_(kt2_pm_per_c), r_(ratio) {
        detail::require(detail::finite(kt1_) && kt1_ > 0.0, "kt1 must be positive");
        detail::require(detail::finite(kt2_) && kt2_ > 0.0, "kt2 must be positive");
        detail::require(detail::finite(r_) && std::abs(r_ - kt1_ / kt2_) < 1e-9,
                        "ratio r must equal kt1/kt2");
    }

    static TempCharacterization from_sensitivities(double kt1_pm_per_c, double kt2_pm_per_c) {
        detail::require(std::isfinite(kt2_pm_per_c) && kt2_pm_per_c > 0.0, "kt2 must be positive");
        return TempCharacterization(kt1_pm_per_c, kt2_pm_per_c, kt1_pm_per_c / kt2_pm_per_c);
    }

    double kt1() const { return kt1_; }
    double kt2() const { return kt2_; }
    double r() const { return r_; }

private:
    double kt1_, kt2_, r_;
};

// Temperature-compensated force with its intermediate shift decomposition.
// strain_shift + thermal_shift reconstructs the raw FBG1 shift.
struct ForceReading {
    double t = 0.0;
    double force_n = 0.0;
    double strain_shift_pm = 0.0;   // dl1 - r*dl2
    double thermal_shift_pm = 0.0;  // r*dl2
    double temp_delta_c = 0.0;      // dl2 / kt2
};

} // namespace fbg
