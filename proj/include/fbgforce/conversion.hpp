// conversion.hpp
// Pure math for converting dual-FBG wavelength samples into
// temperature-compensated contact force.
//
// Pipeline: wavelength_shift -> strain_shift -> force_from_strain_shift.
// All functions are pure; all inputs are immutable values.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fbgforce/errors.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

inline ShiftPair wavelength_shift(const WavelengthSample& sample, const Baseline& base) {
    return ShiftPair{sample.lambda1_pm - base.lambda1_pm,
                     sample.lambda2_pm - base.lambda2_pm};
}

// Strain-only component of the FBG1 shift: dl1 - r*dl2.
// For a pure thermal event (dl1 = kt1*dT, dl2 = kt2*dT) this cancels to zero.
inline double strain_shift(const ShiftPair& shifts, const TempCharacterization& temp) {
    return shifts.dl1_pm - temp.r() * shifts.dl2_pm;
}

// Temperature change seen by the strain-free reference grating.
inline double temperature_delta(double dl2_pm, const TempCharacterization& temp) {
    return dl2_pm / temp.kt2();
}

// Forward evaluation of the calibration polynomial at a non-negative force.
inline double strain_shift_from_force(double force_n, const QuadCalib& calib) {
    if (!(force_n >= 0.0))
        throw InvariantViolationError("strain_shift_from_force requires force >= 0");
    return calib.shift_at(force_n);
}

// Positive root of a2*N^2 + a1*N + (a0 - dl_eps) = 0.
// Throws NegativeDiscriminantError when dl_eps lies below the model's vertex,
// i.e. the data is outside the calibrated range and the caller should know.
inline double force_from_strain_shift(double dl_eps_pm, const QuadCalib& calib,
                                      bool clamp_negative = false) {
    const double disc =
        calib.a1() * calib.a1() - 4.0 * calib.a2() * (calib.a0() - dl_eps_pm);
    if (disc < 0.0)
        throw NegativeDiscriminantError(
            "strain shift below calibrated range (discriminant < 0)");
    double n = (-calib.a1() + std::sqrt(disc)) / (2.0 * calib.a2());
    if (clamp_negative && n < 0.0) n = 0.0;
    return n;
}

// Full compensation pipeline for one sample.
inline ForceReading compensated_force(const WavelengthSample& sample, const Baseline& base,
                                      const QuadCalib& calib, const TempCharacterization& temp,
                                      bool clamp_negative = false) {
    const ShiftPair shifts = wavelength_shift(sample, base);
    const double eps = strain_shift(shifts, temp);

    ForceReading out;
    out.t = sample.t;
    out.strain_shift_pm = eps;
    out.thermal_shift_pm = shifts.dl1_pm - eps;
    out.temp_delta_c = temperature_delta(shifts.dl2_pm, temp);
    out.force_n = force_from_strain_shift(eps, calib, clamp_negative);
    return out;
}

// Batch conversion of a sample series. `compensate = false` feeds the raw FBG1
// shift into the inverse map (what the sensor would report without the
// reference channel); the thermal decomposition fields are still filled in.
inline std::vector<ForceReading> convert_series(std::span<const WavelengthSample> samples,
                                                const Baseline& base, const QuadCalib& calib,
                                                const TempCharacterization& temp,
                                                bool clamp_negative = false,
                                                bool compensate = true) {
    std::vector<ForceReading> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (compensate) {
            out.push_back(compensated_force(s, base, calib, temp, clamp_negative));
        } else {
            const ShiftPair shifts = wavelength_shift(s, base);
            ForceReading r;
            r.t = s.t;
            r.strain_shift_pm = shifts.dl1_pm;
            r.thermal_shift_pm = 0.0;
            r.temp_delta_c = temperature_delta(shifts.dl2_pm, temp);
            r.force_n = force_from_strain_shift(shifts.dl1_pm, calib, clamp_negative);
            out.push_back(r);
        }
    }
    return out;
}

} // namespace fbg
