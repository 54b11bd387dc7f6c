#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "nbres/field_solver.hpp"
#include "nbres/geometry.hpp"
#include "nbres/inductance_solver.hpp"
#include "nbres/io/strict_json.hpp"
#include "nbres/loss_budget.hpp"
#include "nbres/participation.hpp"
#include "nbres/regrowth.hpp"
#include "nbres/tls_model.hpp"

namespace nbres::io {

namespace fs = std::filesystem;

/// One device geometry file: field-solver keys plus the inductance extras.
struct DeviceGeometry {
    std::string device_id;
    CpsGeometry geom;
    double f0 = 0.0;  // Hz
    double london_depth = 39e-9;
    FilamentSpec filaments;
};

inline DeviceGeometry load_geometry(const std::string& path, std::string device_id = {},
                                    const FilamentSpec& filament_defaults = {}, double default_lambda = 39e-9) {
    const json j = read_json(path);
    StrictObject o(j, path);
    DeviceGeometry d;
    d.device_id = o.text("device_id", device_id.empty() ? fs::path(path).stem().string() : device_id);
    CpsGeometry& g = d.geom;
    g.width = o.positive("width_um") * 1e-6;
    g.gap = o.positive("gap_um") * 1e-6;
    g.length = o.positive("length_um") * 1e-6;
    g.t_nb = o.non_negative("t_nb_nm", 145.0) * 1e-9;
    g.eps_substrate = o.positive("eps_substrate", 10.0);
    if (o.has("eps_substrate_parallel")) g.eps_substrate_parallel = o.positive("eps_substrate_parallel");
    g.eps_interface = o.positive("eps_interface", 10.0);
    g.t_ma = o.non_negative("t_ma_nm", 0.0) * 1e-9;
    g.t_ms = o.non_negative("t_ms_nm", 0.0) * 1e-9;
    g.t_sa = o.non_negative("t_sa_nm", 0.0) * 1e-9;
    d.f0 = o.positive("f0_hz");
    d.london_depth = o.non_negative("lambda_nm", default_lambda * 1e9) * 1e-9;
    d.filaments.nx = o.count("filament_nx", filament_defaults.nx);
    d.filaments.ny = o.count("filament_ny", filament_defaults.ny);
    o.finish();
    g.validate();
    return d;
}

struct DeviceEntry {
    std::string geometry_path;  // absolute after load
    std::optional<double> q_extr_classical;
    std::optional<double> q_extr;  // already corrected or simulated directly
    std::optional<ParticipationSet> participation;  // ppm/nm, overrides the solver
    std::optional<double> kinetic_fraction;
};

struct ProjectConfig {
    std::string source;
    MaterialConstants material;
    double line_attenuation_db = 0.0;
    ExtrinsicModel extrinsic;
    std::map<std::string, DeviceEntry> devices;
    GridSpec grid;
    ParticipationOptions participation;
    FilamentSpec filaments;
    InversionOptions inversion;
    std::vector<double> regrowth_curve_nm{0.0, 1.0, 2.5, 5.0};
    double collinearity_threshold = 1e3;
    BudgetMethod budget_method = BudgetMethod::Direct;
    std::string bounds_device;
    std::string output_dir = "out";
    bool material_defaults = true;  // Δ and D(E_F) not overridden

    DeviceGeometry geometry(const std::string& id) const {
        auto it = devices.find(id);
        if (it == devices.end()) throw InvalidParameter("unknown device '" + id + "'");
        DeviceGeometry d = load_geometry(it->second.geometry_path, id, filaments, material.london_depth);
        d.device_id = id;
        return d;
    }
};

namespace detail {

inline ParticipationSet read_participation(StrictObject o) {
    ParticipationSet p;
    p.ma = o.non_negative("ma", 0.0);
    p.ms = o.non_negative("ms", 0.0);
    p.sa = o.non_negative("sa", 0.0);
    p.corner = o.non_negative("corner", 0.0);
    o.finish();
    return p;
}

inline std::string resolve(const fs::path& base, const std::string& p, const std::string& what) {
    fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base / p;
    if (!fs::exists(full)) throw InvalidParameter(what + ": file not found: " + full.string());
    return fs::weakly_canonical(full).string();
}

}  // namespace detail

/// Loads the project config. Paths inside are relative to the config file;
/// unknown keys anywhere are rejected.
inline ProjectConfig load_config(const std::string& path) {
    const json j = read_json(path);
    const fs::path base = fs::absolute(path).parent_path();
    ProjectConfig c;
    c.source = path;
    StrictObject root(j, "config");

    if (root.has("material")) {
        auto m = root.object("material");
        MaterialConstants& mc = c.material;
        c.material_defaults = !m.has("gap_energy_mev") && !m.has("dos_fermi_per_j_um3");
        mc.gap_energy = m.positive("gap_energy_mev", mc.gap_energy / constants::elementary_charge * 1e3) * 1e-3 *
                        constants::elementary_charge;
        mc.dos_fermi = m.positive("dos_fermi_per_j_um3", mc.dos_fermi);
        mc.london_depth = m.positive("london_depth_nm", mc.london_depth * 1e9) * 1e-9;
        mc.rho_nb = m.positive("rho_nb_kg_m3", mc.rho_nb);
        mc.rho_nb2o5 = m.positive("rho_nb2o5_kg_m3", mc.rho_nb2o5);
        mc.a_nb = m.positive("a_nb", mc.a_nb);
        mc.a_o = m.positive("a_o", mc.a_o);
        mc.eps_interface = m.positive("eps_interface", mc.eps_interface);
        m.finish();
        mc.validate();
    }
    if (root.has("calibration")) {
        auto cal = root.object("calibration");
        c.line_attenuation_db = cal.non_negative("line_attenuation_db", 0.0);
        c.extrinsic.r_meas_cavity = cal.positive("r_meas_cavity_ohm_sq", c.extrinsic.r_meas_cavity);
        c.extrinsic.omega_cavity = 2.0 * constants::pi * cal.positive("f_cavity_hz", c.extrinsic.omega_cavity / (2.0 * constants::pi));
        cal.finish();
    }
    if (root.has("devices")) {
        const json& devs = root.raw("devices");
        if (!devs.is_object()) throw InvalidParameter("config.devices: expected an object");
        for (auto it = devs.begin(); it != devs.end(); ++it) {
            StrictObject d(it.value(), "config.devices." + it.key());
            DeviceEntry e;
            e.geometry_path = detail::resolve(base, d.text("geometry"), d.where());
            if (d.has("q_extr_classical")) e.q_extr_classical = d.positive("q_extr_classical");
            if (d.has("q_extr")) e.q_extr = d.positive("q_extr");
            if (d.has("participation_ppm_per_nm")) e.participation = detail::read_participation(d.object("participation_ppm_per_nm"));
            if (d.has("kinetic_fraction")) {
                e.kinetic_fraction = d.positive("kinetic_fraction");
                if (!(*e.kinetic_fraction < 1.0)) throw InvalidParameter(d.where() + ".kinetic_fraction: must be below 1");
            }
            d.finish();
            c.devices[it.key()] = e;
        }
    }
    if (root.has("field_solver")) {
        auto f = root.object("field_solver");
        c.grid.min_cell = f.positive("min_cell_nm", c.grid.min_cell * 1e9) * 1e-9;
        c.grid.layer_cells = f.count("layer_cells", c.grid.layer_cells);
        c.grid.grading = f.positive("grading", c.grid.grading);
        c.grid.domain_factor = f.positive("domain_factor", c.grid.domain_factor);
        c.participation.linearity_tolerance = f.positive("linearity_tolerance", c.participation.linearity_tolerance);
        f.finish();
        c.grid.validate();
    }
    if (root.has("inductance_solver")) {
        auto f = root.object("inductance_solver");
        c.filaments.nx = f.count("filament_nx", c.filaments.nx);
        c.filaments.ny = f.count("filament_ny", c.filaments.ny);
        f.finish();
    }
    if (root.has("regrowth")) {
        auto r = root.object("regrowth");
        c.inversion.t_max = r.positive("t_max_nm", c.inversion.t_max * 1e9) * 1e-9;
        if (r.has("curve_nm")) {
            const json& a = r.raw("curve_nm");
            if (!a.is_array() || a.empty()) throw InvalidParameter("config.regrowth.curve_nm: expected a non-empty array");
            c.regrowth_curve_nm.clear();
            for (const auto& v : a) {
                if (!v.is_number() || !(v.get<double>() >= 0.0))
                    throw InvalidParameter("config.regrowth.curve_nm: thicknesses must be non-negative numbers");
                c.regrowth_curve_nm.push_back(v.get<double>());
            }
        }
        r.finish();
    }
    if (root.has("budget")) {
        auto b = root.object("budget");
        c.collinearity_threshold = b.positive("collinearity_threshold", c.collinearity_threshold);
        const std::string m = b.text("method", "direct");
        if (m == "direct") c.budget_method = BudgetMethod::Direct;
        else if (m == "nonnegative") c.budget_method = BudgetMethod::NonNegative;
        else throw InvalidParameter("config.budget.method: expected 'direct' or 'nonnegative'");
        b.finish();
    }
    if (root.has("report")) {
        auto r = root.object("report");
        c.bounds_device = r.text("bounds_device", "");
        r.finish();
        if (!c.bounds_device.empty() && !c.devices.count(c.bounds_device))
            throw InvalidParameter("config.report.bounds_device: unknown device '" + c.bounds_device + "'");
    }
    if (root.has("output_dir")) c.output_dir = (base / root.text("output_dir")).lexically_normal().string();
    else c.output_dir = (base / c.output_dir).lexically_normal().string();
    root.finish();
    return c;
}

}  // namespace nbres::io
