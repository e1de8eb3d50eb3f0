// characterization.hpp
// Persistent sensor characterization: the quadratic force calibration, the
// temperature sensitivities and ratio, the unloaded baselines, and fit
// provenance. One schema-versioned JSON document; invariants are re-validated
// on every load.

#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <string>

#include "fbgforce/errors.hpp"
#include "fbgforce/io_util.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

struct Provenance {
    double fit_r_squared = 1.0;
    double fit_rmse_pm = 0.0;
    std::string source;  // deterministic description of the input data
};

struct CharacterizationFile {
    static constexpr int schema_version = 1;

    QuadCalib quad;
    TempCharacterization temp;
    Baseline baseline;
    Provenance provenance;
};

namespace detail {

inline const nlohmann::json& json_at(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
    return *it;
}

inline double json_number(const nlohmann::json& j, const char* key) {
    const auto& v = json_at(j, key);
    if (!v.is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

} // namespace detail

inline nlohmann::json to_json(const CharacterizationFile& c) {
    return nlohmann::json{
        {"schema_version", CharacterizationFile::schema_version},
        {"quad",
         {{"a2_pm_per_n2", c.quad.a2()},
          {"a1_pm_per_n", c.quad.a1()},
          {"a0_pm", c.quad.a0()},
          {"force_max_n", c.quad.force_max()}}},
        {"temperature",
         {{"kt1_pm_per_c", c.temp.kt1()},
          {"kt2_pm_per_c", c.temp.kt2()},
          {"ratio", c.temp.r()}}},
        {"baseline",
         {{"lambda1_pm", c.baseline.lambda1_pm}, {"lambda2_pm", c.baseline.lambda2_pm}}},
        {"provenance",
         {{"fit_r_squared", c.provenance.fit_r_squared},
          {"fit_rmse_pm", c.provenance.fit_rmse_pm},
          {"source", c.provenance.source}}},
    };
}

inline CharacterizationFile characterization_from_json(const nlohmann::json& j) {
    const auto version = detail::json_at(j, "schema_version");
    if (!version.is_number_integer() ||
        version.get<int>() != CharacterizationFile::schema_version)
        throw SchemaError("unsupported characterization schema version");

    const auto& quad = detail::json_at(j, "quad");
    const auto& temp = detail::json_at(j, "temperature");
    const auto& base = detail::json_at(j, "baseline");

    const double kt1 = detail::json_number(temp, "kt1_pm_per_c");
    const double kt2 = detail::json_number(temp, "kt2_pm_per_c");
    const double ratio = detail::json_number(temp, "ratio");
    if (!(kt2 > 0.0) || std::abs(ratio - kt1 / kt2) >= 1e-6)
        throw InvariantViolationError("temperature ratio inconsistent with kt1/kt2");

    CharacterizationFile out{
        QuadCalib(detail::json_number(quad, "a2_pm_per_n2"),
                  detail::json_number(quad, "a1_pm_per_n"),
                  detail::json_number(quad, "a0_pm"),
                  detail::json_number(quad, "force_max_n")),
        TempCharacterization(kt1, kt2, kt1 / kt2),
        Baseline{detail::json_number(base, "lambda1_pm"),
                 detail::json_number(base, "lambda2_pm")},
        Provenance{},
    };
    validate(out.baseline);

    if (auto it = j.find("provenance"); it != j.end() && it->is_object()) {
        out.provenance.fit_r_squared = it->value("fit_r_squared", 1.0);
        out.provenance.fit_rmse_pm = it->value("fit_rmse_pm", 0.0);
        out.provenance.source = it->value("source", std::string{});
    }
    return out;
}

inline CharacterizationFile load_characterization(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ioutil::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": not valid JSON: " + e.what());
    }
    try {
        return characterization_from_json(j);
    } catch (const InvariantViolationError&) {
        throw;
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

inline void store_characterization(const std::filesystem::path& path,
                                   const CharacterizationFile& c) {
    ioutil::atomic_write(path, to_json(c).dump(2) + "\n");
}

// The paper's published constants, available as a ready-made characterization.
inline CharacterizationFile reference_characterization() {
    return CharacterizationFile{
        QuadCalib(144.99, 527.62, -91.42, 4.69),
        TempCharacterization::from_sensitivities(24.29, 10.31),
        Baseline{1540000.0, 1550000.0},
        Provenance{0.99, 144.21, "published calibration constants"},
    };
}

} // namespace fbg
