#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nbres/io/csv.hpp"
#include "nbres/io/strict_json.hpp"
#include "nbres/loss_budget.hpp"
#include "nbres/regrowth.hpp"
#include "nbres/tls_model.hpp"
#include "nbres/trace_fit.hpp"

namespace nbres::io {

inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

struct TraceInput {
    std::string path;
    ReflectionTrace trace;
    std::optional<double> device_power;  // W, only with a sidecar
    std::optional<double> temperature;   // K
    std::optional<std::string> sidecar;
};

/// `foo.csv` may come with `foo.json` holding applied_power_dbm,
/// line_attenuation_db and temperature_k.
inline TraceInput load_trace(const std::string& path, double default_attenuation_db = 0.0) {
    const CsvTable t = read_csv(path);
    const auto cf = t.require("frequency_hz"), cr = t.require("s11_real"), ci = t.require("s11_imag");
    TraceInput in;
    in.path = path;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        in.trace.frequencies.push_back(t.number(r, cf));
        in.trace.s11.emplace_back(t.number(r, cr), t.number(r, ci));
        if (r > 0 && !(in.trace.frequencies[r] > in.trace.frequencies[r - 1]))
            throw ParseError(path, t.line_of_row[r], "frequencies must be strictly increasing");
    }
    std::filesystem::path side = std::filesystem::path(path).replace_extension(".json");
    if (std::filesystem::exists(side)) {
        const json j = read_json(side.string());
        StrictObject o(j, side.string());
        const double att = o.non_negative("line_attenuation_db", default_attenuation_db);
        if (o.has("applied_power_dbm")) in.device_power = dbm_to_watt(o.number("applied_power_dbm") - att);
        if (o.has("temperature_k")) in.temperature = o.positive("temperature_k");
        o.finish();
        in.sidecar = side.string();
    }
    // Nominal values only satisfy the trace invariants; photon numbers are
    // reported solely when the sidecar supplies the power.
    in.trace.applied_power = in.device_power.value_or(1.0);
    in.trace.temperature = in.temperature.value_or(1.0);
    return in;
}

inline std::string write_trace_csv(const ReflectionTrace& t, const std::vector<std::string>& comments = {}) {
    CsvWriter w({"frequency_hz", "s11_real", "s11_imag"});
    for (const auto& c : comments) w.comment(c);
    for (std::size_t i = 0; i < t.frequencies.size(); ++i)
        w.row({format_number(t.frequencies[i]), format_number(t.s11[i].real()), format_number(t.s11[i].imag())});
    return w.str();
}

struct PowerSweepInput {
    std::vector<PowerPoint> points;
    bool has_sigma = false;
};

struct TemperatureSweepInput {
    std::vector<TemperaturePoint> points;
    bool has_sigma = false;
};

inline PowerSweepInput load_power_sweep(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cn = t.require("n_photon"), cq = t.require("q_int");
    const auto cs = t.column("q_int_sigma");
    PowerSweepInput in;
    in.has_sigma = cs.has_value();
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        in.points.push_back({t.number(r, cn), t.number(r, cq), cs ? t.number(r, *cs) : 0.0});
    return in;
}

inline TemperatureSweepInput load_temperature_sweep(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto ct = t.require("temperature_k"), cq = t.require("q_intr");
    const auto cs = t.column("q_intr_sigma");
    TemperatureSweepInput in;
    in.has_sigma = cs.has_value();
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        in.points.push_back({t.number(r, ct), t.number(r, cq), cs ? t.number(r, *cs) : 0.0});
    return in;
}

/// Observations without participation; callers fill p_tilde_ma_eff.
inline std::vector<RegrowthObservation> load_observations(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cd = t.require("device_id"), fb = t.require("f0_before_hz"), fa = t.require("f0_after_hz"),
               qb = t.require("q_intr_before"), qa = t.require("q_intr_after");
    std::vector<RegrowthObservation> obs;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][cd].empty()) throw ParseError(path, t.line_of_row[r], "empty device_id");
        obs.push_back({t.rows[r][cd], t.number(r, fb), t.number(r, fa), t.number(r, qb), t.number(r, qa), 0.0});
    }
    return obs;
}

inline BudgetSystem load_budget(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cd = t.require("device_id"), cq = t.require("q_intr"), c1 = t.require("p_ma_eff"),
               c2 = t.require("p_ms_eff"), c3 = t.require("p_sa"), c4 = t.require("qp_coeff");
    BudgetSystem s;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        s.rows.push_back({t.rows[r][cd], t.number(r, cq), t.number(r, c1), t.number(r, c2), t.number(r, c3), t.number(r, c4)});
    return s;
}

/// Table II style: device_id,q_int,q_extr.
struct QualityRow {
    std::string device_id;
    double q_int = 0.0;
    double q_extr = 0.0;
};

inline std::vector<QualityRow> load_quality_table(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cd = t.require("device_id"), ci = t.require("q_int"), ce = t.require("q_extr");
    std::vector<QualityRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) rows.push_back({t.rows[r][cd], t.number(r, ci), t.number(r, ce)});
    return rows;
}

}  // namespace nbres::io
