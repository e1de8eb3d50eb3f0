// trace_io.hpp
// Wavelength trace files: comma-separated text with a mandatory header.
//   t_s,fbg1_pm,fbg2_pm[,true_force_n][,load_cell_n][,temp_c]
// Unknown columns are tolerated (counted and named, never silently dropped
// without a trace of it); timestamps must be strictly increasing.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fbgforce/errors.hpp"
#include "fbgforce/io_util.hpp"
#include "fbgforce/sensor_sim.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

struct TraceRecord {
    double t = 0.0;
    double lambda1_pm = 0.0;
    double lambda2_pm = 0.0;
    std::optional<double> true_force_n;
    std::optional<double> load_cell_n;
    std::optional<double> temp_c;
};

struct TraceReadResult {
    std::vector<TraceRecord> records;
    std::vector<std::string> unknown_columns;
    std::size_t warning_count = 0;  // one per unknown column
};

namespace trace_columns {
inline constexpr const char* t = "t_s";
inline constexpr const char* fbg1 = "fbg1_pm";
inline constexpr const char* fbg2 = "fbg2_pm";
inline constexpr const char* true_force = "true_force_n";
inline constexpr const char* load_cell = "load_cell_n";
inline constexpr const char* temp = "temp_c";
} // namespace trace_columns

inline TraceReadResult parse_trace(const std::string& content, const std::string& origin) {
    TraceReadResult result;
    std::istringstream in(content);
    std::string raw;
    long line_no = 0;

    if (!std::getline(in, raw)) throw ParseError(origin + ": empty trace file", 1);
    ++line_no;
    const auto header = ioutil::split(ioutil::strip_cr(raw), ',');

    int col_t = -1, col_l1 = -1, col_l2 = -1, col_tf = -1, col_lc = -1, col_tc = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name(header[i]);
        const int idx = static_cast<int>(i);
        if (name == trace_columns::t) col_t = idx;
        else if (name == trace_columns::fbg1) col_l1 = idx;
        else if (name == trace_columns::fbg2) col_l2 = idx;
        else if (name == trace_columns::true_force) col_tf = idx;
        else if (name == trace_columns::load_cell) col_lc = idx;
        else if (name == trace_columns::temp) col_tc = idx;
        else {
            result.unknown_columns.push_back(name);
            ++result.warning_count;
        }
    }
    if (col_t < 0 || col_l1 < 0 || col_l2 < 0)
        throw ParseError(origin + ": header must contain t_s, fbg1_pm and fbg2_pm", 1);

    double prev_t = 0.0;
    bool have_prev = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = ioutil::strip_cr(raw);
        if (line.empty()) continue;
        const auto fields = ioutil::split(line, ',');
        if (fields.size() != header.size())
            throw ParseError(origin + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(fields.size()),
                             line_no);

        auto field = [&](int idx, const char* what) {
            double v = 0.0;
            if (!ioutil::parse_double(fields[static_cast<std::size_t>(idx)], v))
                throw ParseError(origin + ": bad " + std::string(what) + " value '" +
                                     std::string(fields[static_cast<std::size_t>(idx)]) + "'",
                                 line_no);
            return v;
        };

        TraceRecord rec;
        rec.t = field(col_t, "t_s");
        rec.lambda1_pm = field(col_l1, "fbg1_pm");
        rec.lambda2_pm = field(col_l2, "fbg2_pm");
        if (col_tf >= 0) rec.true_force_n = field(col_tf, "true_force_n");
        if (col_lc >= 0) rec.load_cell_n = field(col_lc, "load_cell_n");
        if (col_tc >= 0) rec.temp_c = field(col_tc, "temp_c");

        if (have_prev && !(rec.t > prev_t))
            throw MonotonicityError(origin + ": timestamps not strictly increasing at line " +
                                    std::to_string(line_no));
        prev_t = rec.t;
        have_prev = true;
        result.records.push_back(rec);
    }
    return result;
}

inline TraceReadResult read_trace(const std::filesystem::path& path) {
    return parse_trace(ioutil::read_file(path), path.string());
}

inline std::string serialize_trace(std::span<const TraceRecord> records) {
    bool any_tf = false, any_lc = false, any_tc = false;
    for (const auto& r : records) {
        any_tf |= r.true_force_n.has_value();
        any_lc |= r.load_cell_n.has_value();
        any_tc |= r.temp_c.has_value();
    }

    std::string out;
    out.reserve(records.size() * 48 + 64);
    out += trace_columns::t;
    out += ',';
    out += trace_columns::fbg1;
    out += ',';
    out += trace_columns::fbg2;
    if (any_tf) { out += ','; out += trace_columns::true_force; }
    if (any_lc) { out += ','; out += trace_columns::load_cell; }
    if (any_tc) { out += ','; out += trace_columns::temp; }
    out += '\n';

    double prev_t = 0.0;
    bool have_prev = false;
    for (const auto& r : records) {
        if (have_prev && !(r.t > prev_t))
            throw MonotonicityError("refusing to write non-monotone trace");
        prev_t = r.t;
        have_prev = true;

        out += ioutil::format_double(r.t);
        out += ',';
        out += ioutil::format_double(r.lambda1_pm);
        out += ',';
        out += ioutil::format_double(r.lambda2_pm);
        if (any_tf) { out += ','; out += ioutil::format_double(r.true_force_n.value_or(0.0)); }
        if (any_lc) { out += ','; out += ioutil::format_double(r.load_cell_n.value_or(0.0)); }
        if (any_tc) { out += ','; out += ioutil::format_double(r.temp_c.value_or(0.0)); }
        out += '\n';
    }
    return out;
}

inline void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records) {
    ioutil::atomic_write(path, serialize_trace(records));
}

inline std::vector<TraceRecord> to_trace_records(const GroundTruthTrace& trace) {
    std::vector<TraceRecord> out;
    out.reserve(trace.size());
    for (const auto& p : trace) {
        TraceRecord r;
        r.t = p.t;
        r.lambda1_pm = p.sample.lambda1_pm;
        r.lambda2_pm = p.sample.lambda2_pm;
        r.true_force_n = p.true_force_n;
        r.load_cell_n = p.load_cell_n;
        r.temp_c = p.true_temp_c;
        out.push_back(r);
    }
    return out;
}

inline std::vector<WavelengthSample> to_samples(std::span<const TraceRecord> records) {
    std::vector<WavelengthSample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.t, r.lambda1_pm, r.lambda2_pm});
    return out;
}

} // namespace fbg
