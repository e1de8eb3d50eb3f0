// calibration.hpp
// Least-squares fitting of the force and temperature calibration curves and
// the metrology figures derived from them (sensitivity, resolution, noise
// floor, hysteresis, series comparison).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "fbgforce/errors.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

// One point of the force-calibration rig: load-cell ground truth vs FBG1 strain shift.
struct ForceCalPoint {
    double force_n = 0.0;
    double shift_pm = 0.0;
};

struct TempCalPoint {
    double temperature_c = 0.0;
    double shift_pm = 0.0;
};

// coefficients are highest order first: {a2, a1, a0} for the quadratic,
// {slope, intercept} for the linear fit.
struct FitReport {
    std::vector<double> coefficients;
    double r_squared = 0.0;
    double rmse = 0.0;  // same unit as the ordinate (pm)
};

struct HysteresisGridPoint {
    double force_n = 0.0;
    double deviation_pct = 0.0;  // % of full-scale output
};

struct HysteresisReport {
    std::vector<HysteresisGridPoint> grid;
    double max_pct = 0.0;
    double force_at_max_n = 0.0;
};

struct MetrologySummary {
    double sensitivity_pm_per_n = 0.0;
    double resolution_n = 0.0;
    double noise_equiv_force_n = 0.0;
    double rmse_force_n = 0.0;
    double pct_error = 0.0;
};

namespace detail {

// Least squares through a rank-revealing orthogonal decomposition; the normal
// equations are avoided so the near-collinear low-force region stays solvable.
inline std::pair<Eigen::VectorXd, double> solve_lsq(const Eigen::MatrixXd& design,
                                                    const Eigen::VectorXd& rhs) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols())
        throw DegenerateSystemError("rank-deficient calibration system");
    Eigen::VectorXd coeffs = qr.solve(rhs);
    const double ss_res = (design * coeffs - rhs).squaredNorm();
    return {coeffs, ss_res};
}

inline double r_squared_from(double ss_res, const Eigen::VectorXd& rhs) {
    const double mean = rhs.mean();
    const double ss_tot = (rhs.array() - mean).square().sum();
    if (ss_tot <= 0.0) return ss_res <= 1e-12 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

inline std::size_t count_distinct(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return static_cast<std::size_t>(
        std::distance(values.begin(), std::unique(values.begin(), values.end())));
}

} // namespace detail

// Ordinary least squares of shift = a2*f^2 + a1*f + a0.
// force_max of the returned calibration is the largest observed force.
inline std::pair<QuadCalib, FitReport> fit_quadratic(std::span<const ForceCalPoint> points) {
    std::vector<double> forces;
    forces.reserve(points.size());
    for (const auto& p : points) forces.push_back(p.force_n);
    if (points.size() < 3 || detail::count_distinct(forces) < 3)
        throw InsufficientDataError("quadratic fit needs >= 3 distinct force values");

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        design(i, 0) = p.force_n * p.force_n;
        design(i, 1) = p.force_n;
        design(i, 2) = 1.0;
        rhs(i) = p.shift_pm;
    }

    auto [coeffs, ss_res] = detail::solve_lsq(design, rhs);

    FitReport report;
    report.coefficients = {coeffs(0), coeffs(1), coeffs(2)};
    report.r_squared = detail::r_squared_from(ss_res, rhs);
    report.rmse = std::sqrt(ss_res / static_cast<double>(n));

    const double force_max = *std::max_element(forces.begin(), forces.end());
    return {QuadCalib(coeffs(0), coeffs(1), coeffs(2), force_max), report};
}

// Least-squares slope (pm/degC) and intercept for a temperature sweep.
inline FitReport fit_linear(std::span<const TempCalPoint> points) {
    std::vector<double> temps;
    temps.reserve(points.size());
    for (const auto& p : points) temps.push_back(p.temperature_c);
    if (points.size() < 2 || detail::count_distinct(temps) < 2)
        throw InsufficientDataError("linear fit needs >= 2 distinct temperatures");

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        design(i, 0) = p.temperature_c;
        design(i, 1) = 1.0;
        rhs(i) = p.shift_pm;
    }

    auto [coeffs, ss_res] = detail::solve_lsq(design, rhs);

    FitReport report;
    report.coefficients = {coeffs(0), coeffs(1)};
    report.r_squared = detail::r_squared_from(ss_res, rhs);
    report.rmse = std::sqrt(ss_res / static_cast<double>(n));
    return report;
}

inline double sensitivity_ratio(double kt1_pm_per_c, double kt2_pm_per_c) {
    if (kt2_pm_per_c == 0.0) throw ZeroDivisorError("kt2 must be nonzero");
    return kt1_pm_per_c / kt2_pm_per_c;
}

// Average-sensitivity metrology over the calibrated range.
// sensitivity = max_shift/max_force; resolution and noise floor are the
// interrogator figures referred through it; pct_error = 100*rmse/range.
inline MetrologySummary metrology(double max_shift_pm, double max_force_n,
                                  double interrogator_resolution_pm,
                                  double interrogator_noise_pm, double rmse_force_n) {
    if (!(max_force_n > 0.0))
        throw InvariantViolationError("metrology requires max_force > 0");
    MetrologySummary m;
    m.sensitivity_pm_per_n = max_shift_pm / max_force_n;
    m.resolution_n = interrogator_resolution_pm / m.sensitivity_pm_per_n;
    m.noise_equiv_force_n = interrogator_noise_pm / m.sensitivity_pm_per_n;
    m.rmse_force_n = rmse_force_n;
    m.pct_error = 100.0 * rmse_force_n / max_force_n;
    return m;
}

namespace detail {

// Branch samples collapsed onto force cells and linearly interpolated between
// cell centers. Cell averaging keeps interrogator noise out of the deviation
// extremum (many raw samples land in each 0.01 N cell).
class BranchInterpolant {
public:
    BranchInterpolant(std::span<const ForceCalPoint> points, double cell_n) {
        if (points.empty()) throw NoOverlapError("empty hysteresis branch");
        std::vector<ForceCalPoint> sorted(points.begin(), points.end());
        std::sort(sorted.begin(), sorted.end(),
                  [](const ForceCalPoint& a, const ForceCalPoint& b) {
                      return a.force_n < b.force_n;
                  });
        double cell_start = sorted.front().force_n;
        double sum_f = 0.0, sum_s = 0.0;
        std::size_t count = 0;
        auto flush = [&] {
            if (count > 0) {
                forces_.push_back(sum_f / static_cast<double>(count));
                shifts_.push_back(sum_s / static_cast<double>(count));
            }
            sum_f = sum_s = 0.0;
            count = 0;
        };
        for (const auto& p : sorted) {
            if (p.force_n >= cell_start + cell_n) {
                flush();
                cell_start = p.force_n;
            }
            sum_f += p.force_n;
            sum_s += p.shift_pm;
            ++count;
        }
        flush();
    }

    double min_force() const { return forces_.front(); }
    double max_force() const { return forces_.back(); }

    double operator()(double f) const {
        if (forces_.size() == 1) return shifts_.front();
        auto it = std::lower_bound(forces_.begin(), forces_.end(), f);
        std::size_t hi = static_cast<std::size_t>(it - forces_.begin());
        if (hi == 0) hi = 1;
        if (hi >= forces_.size()) hi = forces_.size() - 1;
        const std::size_t lo = hi - 1;
        const double span = forces_[hi] - forces_[lo];
        if (span <= 0.0) return shifts_[lo];
        const double w = (f - forces_[lo]) / span;
        return shifts_[lo] + w * (shifts_[hi] - shifts_[lo]);
    }

private:
    std::vector<double> forces_;
    std::vector<double> shifts_;
};

} // namespace detail

// Branch deviation as a percentage of full-scale output, evaluated on a shared
// force grid (0.01 N resolution, at least 50 nodes). Symmetric in branch order.
inline HysteresisReport hysteresis_analysis(std::span<const ForceCalPoint> loading,
                                            std::span<const ForceCalPoint> unloading,
                                            double full_scale_shift_pm,
                                            double grid_step_n = 0.01) {
    if (!(full_scale_shift_pm > 0.0))
        throw InvariantViolationError("full-scale shift must be positive");
    if (loading.empty() || unloading.empty())
        throw NoOverlapError("hysteresis branches must be non-empty");

    detail::BranchInterpolant load(loading, grid_step_n);
    detail::BranchInterpolant unload(unloading, grid_step_n);

    const double lo = std::max(load.min_force(), unload.min_force());
    const double hi = std::min(load.max_force(), unload.max_force());
    if (!(hi > lo)) throw NoOverlapError("hysteresis branches cover disjoint force ranges");

    double step = grid_step_n;
    if ((hi - lo) / step < 49.0) step = (hi - lo) / 49.0;
    const auto nodes = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;

    HysteresisReport report;
    report.grid.reserve(nodes);
    report.max_pct = -1.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        const double f = std::min(lo + static_cast<double>(i) * step, hi);
        const double dev =
            100.0 * std::abs(unload(f) - load(f)) / full_scale_shift_pm;
        report.grid.push_back({f, dev});
        if (dev > report.max_pct) {
            report.max_pct = dev;
            report.force_at_max_n = f;
        }
    }
    return report;
}

// RMSE between two aligned series plus the error as a percentage of the
// reference range. Identical series give exactly (0, 0).
inline std::pair<double, double> compare_to_reference(std::span<const double> predicted,
                                                      std::span<const double> reference) {
    if (predicted.size() != reference.size())
        throw LengthMismatchError("series lengths differ");
    if (predicted.empty()) return {0.0, 0.0};

    double ss = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - reference[i];
        ss += d * d;
        lo = std::min(lo, reference[i]);
        hi = std::max(hi, reference[i]);
    }
    const double rmse = std::sqrt(ss / static_cast<double>(predicted.size()));
    const double range = hi - lo;
    const double pct = range > 0.0 ? 100.0 * rmse / range : 0.0;
    return {rmse, pct};
}

} // namespace fbg
