#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nbres/field_solver.hpp"
#include "nbres/inductance_solver.hpp"
#include "nbres/io/config.hpp"
#include "nbres/io/csv.hpp"
#include "nbres/io/formats.hpp"
#include "nbres/io/report.hpp"
#include "nbres/loss_budget.hpp"
#include "nbres/regrowth.hpp"
#include "nbres/tls_model.hpp"
#include "nbres/trace_fit.hpp"

namespace nbres::io {

struct CommandContext {
    ProjectConfig config;
    std::string out_dir;
    unsigned seed = 0;
    int jobs = 1;

    std::string out(const std::string& file) const { return (fs::path(out_dir) / file).string(); }
    RunReport report(const std::string& command) const {
        RunReport r(command);
        r.set_seed(seed);
        return r;
    }
};

// Stage file names, shared by producers and the report.
inline constexpr const char* kFitFile = "fit.json";
inline constexpr const char* kParticipationFile = "simulate_participation.json";
inline constexpr const char* kInductanceFile = "simulate_inductance.json";
inline constexpr const char* kRegrowthCurveFile = "simulate_regrowth_curve.json";
inline constexpr const char* kRegrowthFile = "regrowth.json";
inline constexpr const char* kBudgetFile = "budget.json";
inline constexpr const char* kReportFile = "report.json";
inline std::string sweep_file(const std::string& kind) { return "sweep_" + kind + ".json"; }

namespace detail {

inline json participation_json(const ParticipationSet& p) {
    return {{"ma", p.ma}, {"ms", p.ms}, {"sa", p.sa}, {"corner", p.corner}, {"ma_eff", p.ma_eff()}, {"ms_eff", p.ms_eff()}};
}

inline ParticipationSet participation_from_json(const json& j) {
    return {j.at("ma").get<double>(), j.at("ms").get<double>(), j.at("sa").get<double>(), j.at("corner").get<double>()};
}

struct Sourced {
    double value = 0.0;
    std::string source;
};

// Config values win; otherwise the simulate stage output must exist.
inline std::pair<ParticipationSet, std::string> participation_for(const CommandContext& ctx, const std::string& id) {
    auto it = ctx.config.devices.find(id);
    if (it != ctx.config.devices.end() && it->second.participation) return {*it->second.participation, "config"};
    const json sim = load_stage(ctx.out_dir, "simulate participation", kParticipationFile);
    const json& devs = sim.at("results").at("devices");
    if (!devs.contains(id))
        throw DependencyError("simulate participation", "no participation result for device " + id);
    return {participation_from_json(devs.at(id)), "simulate"};
}

inline Sourced alpha_for(const CommandContext& ctx, const std::string& id) {
    auto it = ctx.config.devices.find(id);
    if (it != ctx.config.devices.end() && it->second.kinetic_fraction) return {*it->second.kinetic_fraction, "config"};
    const json sim = load_stage(ctx.out_dir, "simulate inductance", kInductanceFile);
    const json& devs = sim.at("results").at("devices");
    if (!devs.contains(id)) throw DependencyError("simulate inductance", "no inductance result for device " + id);
    return {devs.at(id).at("alpha").get<double>(), "simulate"};
}

inline std::vector<std::string> device_ids(const CommandContext& ctx, const std::vector<std::string>& requested) {
    if (!requested.empty()) return requested;
    std::vector<std::string> ids;
    for (const auto& [id, e] : ctx.config.devices) ids.push_back(id);
    if (ids.empty()) throw InvalidParameter("no devices given and none configured");
    return ids;
}

// Geometry by config device id, or directly from a geometry file path.
inline DeviceGeometry resolve_device(const CommandContext& ctx, const std::string& key) {
    if (ctx.config.devices.count(key)) return ctx.config.geometry(key);
    if (fs::exists(key)) return load_geometry(key, {}, ctx.config.filaments, ctx.config.material.london_depth);
    throw InvalidParameter("'" + key + "' is neither a configured device nor a geometry file");
}

inline json error_json(const Error& e) { return {{"error", e.what()}, {"exit_code", e.exit_code()}}; }

}  // namespace detail

// ---------------------------------------------------------------- fit

inline int cmd_fit(const CommandContext& ctx, const std::vector<std::string>& traces) {
    if (traces.empty()) throw InvalidParameter("no trace files given");
    RunReport rep = ctx.report("fit");
    struct Outcome {
        json result;
        int code = 0;
        std::vector<std::string> row;
    };
    auto work = [&](const std::string& path) {
        Outcome o;
        const std::string name = fs::path(path).filename().string();
        try {
            const TraceInput in = load_trace(path, ctx.config.line_attenuation_db);
            const ResonanceFit f = fit_resonance(in.trace);
            const auto s = f.sigma();
            json r{{"f0_hz", f.f0}, {"f0_sigma_hz", s[kF0]}, {"q_int", f.q_int}, {"q_int_sigma", s[kQInt]},
                   {"q_ext", f.q_ext}, {"q_ext_sigma", s[kQExt]}, {"baseline_mag", f.baseline_mag},
                   {"baseline_mag_sigma", s[kBaseline]}, {"phase_offset_rad", f.phase_offset},
                   {"phase_offset_sigma_rad", s[kPhase]}, {"electrical_delay_s", f.electrical_delay},
                   {"electrical_delay_sigma_s", s[kDelay]}, {"residual_rms", f.residual_rms},
                   {"q_loaded", f.q_loaded()}, {"photon_number", nullptr}, {"temperature_k", nullptr}};
            std::string n_text = "";
            if (in.device_power) {
                const double n = photon_number(f, *in.device_power).n_mean;
                r["photon_number"] = n;
                r["device_power_w"] = *in.device_power;
                n_text = format_number(n);
            }
            if (in.temperature) r["temperature_k"] = *in.temperature;
            o.result = r;
            o.row = {name, format_number(f.f0), format_number(f.q_int), format_number(s[kQInt]), format_number(f.q_ext),
                     format_number(s[kQExt]), n_text, "ok"};
        } catch (const Error& e) {
            o.result = detail::error_json(e);
            o.code = e.exit_code();
            o.row = {name, "", "", "", "", "", "", "error"};
        }
        return o;
    };

    // Bounded parallelism; results are assembled in input order.
    std::vector<Outcome> outcomes(traces.size());
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, ctx.jobs));
    for (std::size_t start = 0; start < traces.size(); start += jobs) {
        std::vector<std::future<Outcome>> batch;
        for (std::size_t i = start; i < std::min(traces.size(), start + jobs); ++i)
            batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, work, traces[i]));
        for (std::size_t k = 0; k < batch.size(); ++k) outcomes[start + k] = batch[k].get();
    }

    int code = 0;
    CsvWriter summary({"file", "f0_hz", "q_int", "q_int_sigma", "q_ext", "q_ext_sigma", "photon_number", "status"});
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const std::string name = fs::path(traces[i]).filename().string();
        if (fs::exists(traces[i])) rep.add_input(traces[i]);
        rep.results()["traces"][name] = outcomes[i].result;
        summary.row(outcomes[i].row);
        if (outcomes[i].code != 0) {
            rep.warn(name + ": " + outcomes[i].result.at("error").get<std::string>());
            if (code == 0) code = outcomes[i].code;
        }
    }
    rep.write(ctx.out(kFitFile));
    RunReport::write_text(ctx.out("fit_summary.csv"), summary.str());
    return code;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
    std::string kind;  // power | temperature
    std::optional<std::string> device;
    std::optional<double> f0;
    std::optional<double> temperature;  // power sweeps only
};

inline int cmd_sweep(const CommandContext& ctx, const std::string& file, const SweepOptions& opt) {
    RunReport rep = ctx.report("sweep");
    rep.add_input(file);
    double f0 = 0.0;
    if (opt.f0) f0 = *opt.f0;
    else if (opt.device) f0 = ctx.config.geometry(*opt.device).f0;
    else throw InvalidParameter("sweep needs --f0-hz or --device");
    if (!(f0 > 0.0)) throw InvalidParameter("f0 must be positive");
    json& r = rep.results();
    r["kind"] = opt.kind;
    r["f0_hz"] = f0;
    r["device"] = opt.device ? json(*opt.device) : json(nullptr);

    CsvWriter curve({"series", "x", "q", "q_sigma"});
    if (opt.kind == "power") {
        if (!opt.temperature) throw InvalidParameter("power sweep needs --temperature-k");
        const auto in = load_power_sweep(file);
        if (!in.has_sigma) rep.warn("no q_int_sigma column; uniform weights used");
        const TlsFitParams p = fit_power_sweep(in.points, f0, *opt.temperature);
        r["temperature_k"] = *opt.temperature;
        r["f_tls_tan_delta"] = p.f_tls_tan_delta;
        r["f_tls_tan_delta_sigma"] = p.sigma(kTlsLoss);
        r["n_c"] = p.n_c;
        r["n_c_sigma"] = p.sigma(kNc);
        r["beta"] = p.beta_pow;
        r["beta_sigma"] = p.sigma(kBeta);
        r["q_r"] = p.q_r;
        r["q_r_sigma"] = p.sigma(kQr);
        r["degenerate"] = p.degenerate;
        if (p.degenerate) rep.warn("power dependence not resolved; TLS parameters are not identifiable");
        try {
            r["low_power_q_int"] = low_power_q(in.points, p.n_c);
        } catch (const EmptySelection&) {
            r["low_power_q_int"] = nullptr;
            rep.warn("no points below n_c");
        }
        double lo = in.points.front().n, hi = lo;
        for (const auto& pt : in.points) {
            curve.row({"data", format_number(pt.n), format_number(pt.q_int), format_number(pt.q_sigma)});
            lo = std::min(lo, pt.n);
            hi = std::max(hi, pt.n);
        }
        for (int k = 0; k <= 60; ++k) {
            const double n = lo * std::pow(hi / lo, k / 60.0);
            curve.row({"model", format_number(n), format_number(1.0 / tls_inverse_q(p, n, *opt.temperature, f0)), ""});
        }
    } else if (opt.kind == "temperature") {
        const auto in = load_temperature_sweep(file);
        if (!in.has_sigma) rep.warn("no q_intr_sigma column; uniform weights used");
        const TemperatureFit t = fit_temperature_sweep(in.points, f0);
        r["saturated_tls_loss"] = t.saturated_tls_loss;
        r["saturated_tls_loss_sigma"] = t.sigma_loss();
        r["inverse_tls_loss"] = 1.0 / t.saturated_tls_loss;
        r["inverse_tls_loss_sigma"] = t.sigma_loss() / (t.saturated_tls_loss * t.saturated_tls_loss);
        r["q_r"] = t.q_r;
        r["q_r_sigma"] = t.sigma_q_r();
        double lo = in.points.front().temperature, hi = lo;
        for (const auto& pt : in.points) {
            curve.row({"data", format_number(pt.temperature), format_number(pt.q_intr), format_number(pt.q_sigma)});
            lo = std::min(lo, pt.temperature);
            hi = std::max(hi, pt.temperature);
        }
        for (int k = 0; k <= 60; ++k) {
            const double temp = lo + (hi - lo) * k / 60.0;
            const double inv_q = t.saturated_tls_loss * thermal_factor(f0, temp) + 1.0 / t.q_r;
            curve.row({"model", format_number(temp), format_number(1.0 / inv_q), ""});
        }
    } else {
        throw InvalidParameter("sweep kind must be 'power' or 'temperature'");
    }
    rep.write(ctx.out(sweep_file(opt.kind)));
    RunReport::write_text(ctx.out("sweep_" + opt.kind + "_curve.csv"), curve.str());
    return 0;
}

// ---------------------------------------------------------------- simulate

inline int cmd_simulate(const CommandContext& ctx, const std::string& what, const std::vector<std::string>& requested) {
    const auto ids = detail::device_ids(ctx, requested);
    const ProjectConfig& cfg = ctx.config;
    std::vector<DeviceGeometry> devices;
    for (const auto& id : ids) devices.push_back(detail::resolve_device(ctx, id));

    if (what == "participation") {
        RunReport rep = ctx.report("simulate participation");
        json& out = rep.results();
        out["probe_thickness_nm"] = cfg.grid.probe_thickness() / constants::nm;
        out["linearity_tolerance"] = cfg.participation.linearity_tolerance;
        for (const auto& d : devices) {
            CpsGeometry bare = d.geom;
            bare.t_ma = bare.t_ms = bare.t_sa = 0.0;
            const FieldSolution sol = solve_cross_section(bare, cfg.grid);
            const ParticipationStudy st = participation_study(d.geom, cfg.grid);
            json j = detail::participation_json(st.probe);
            j["capacitance_f_per_m"] = capacitance(sol);
            j["mesh_nodes_x"] = sol.mesh.x.size();
            j["mesh_nodes_y"] = sol.mesh.y.size();
            j["laplace_residual"] = sol.laplace_residual;
            j["doubled"] = detail::participation_json(st.doubled);
            j["drift"] = {{"ma", st.drift(&ParticipationSet::ma)}, {"ms", st.drift(&ParticipationSet::ms)},
                          {"sa", st.drift(&ParticipationSet::sa)}, {"corner", st.drift(&ParticipationSet::corner)}};
            bool linear = true;
            for (const char* k : {"ma", "ms", "sa"})
                if (!(j["drift"][k].get<double>() <= cfg.participation.linearity_tolerance)) linear = false;
            j["linear"] = linear;
            if (!linear) rep.warn(d.device_id + ": interface participation drifts beyond tolerance between t and 2t");
            out["devices"][d.device_id] = j;
        }
        rep.write(ctx.out(kParticipationFile));
        return 0;
    }
    if (what == "inductance") {
        RunReport rep = ctx.report("simulate inductance");
        for (const auto& d : devices) {
            const InductanceResult sc = inductance_matrix(d.geom, ConductorModel::superconducting(d.london_depth), d.f0, d.filaments);
            const InductanceResult n = inductance_matrix(d.geom, ConductorModel::normal(), d.f0, d.filaments);
            rep.results()["devices"][d.device_id] = {
                {"l1_h", sc.l1}, {"l2_h", sc.l2}, {"m_h", sc.m}, {"l_eff_h", sc.l_eff},
                {"l_per_length_h_per_m", sc.l_per_length}, {"l_eff_normal_h", n.l_eff},
                {"alpha", (sc.l_eff - n.l_eff) / sc.l_eff}, {"lambda_nm", d.london_depth / constants::nm},
                {"filament_nx", d.filaments.nx}, {"filament_ny", d.filaments.ny}};
        }
        rep.write(ctx.out(kInductanceFile));
        return 0;
    }
    if (what == "regrowth-curve") {
        RunReport rep = ctx.report("simulate regrowth-curve");
        const StoichiometryModel stoich = StoichiometryModel::from(cfg.material);
        CsvWriter curve({"device_id", "delta_t_ma_nm", "delta_t_nb_nm", "fractional_shift"});
        for (const auto& d : devices) {
            const FrequencyShiftModel m(d.geom, d.f0, d.london_depth, stoich, cfg.grid, d.filaments);
            json rows = json::array();
            for (double t_nm : cfg.regrowth_curve_nm) {
                const double s = m(t_nm * constants::nm);
                const double nb = nb_consumption(t_nm * constants::nm, stoich) / constants::nm;
                rows.push_back({{"delta_t_ma_nm", t_nm}, {"delta_t_nb_nm", nb}, {"fractional_shift", s}});
                curve.row({d.device_id, format_number(t_nm), format_number(nb), format_number(s)});
            }
            rep.results()["devices"][d.device_id] = rows;
        }
        rep.results()["beta_stoich"] = stoich.beta_stoich();
        rep.write(ctx.out(kRegrowthCurveFile));
        RunReport::write_text(ctx.out("simulate_regrowth_curve.csv"), curve.str());
        return 0;
    }
    throw InvalidParameter("simulate target must be participation, inductance or regrowth-curve");
}

// ---------------------------------------------------------------- regrowth

inline int cmd_regrowth(const CommandContext& ctx, const std::string& file, std::optional<double> fixed_delta_t_ma_nm) {
    RunReport rep = ctx.report("regrowth");
    rep.add_input(file);
    const ProjectConfig& cfg = ctx.config;
    auto obs = load_observations(file);
    if (obs.empty()) throw EmptySelection("no observations in " + file);
    json& r = rep.results();
    for (auto& o : obs) {
        const auto [p, src] = detail::participation_for(ctx, o.device_id);
        o.p_tilde_ma_eff = p.ma_eff();
        r["participation_source"][o.device_id] = src;
    }

    double dt = 0.0;
    if (fixed_delta_t_ma_nm) {
        dt = *fixed_delta_t_ma_nm * constants::nm;
        r["delta_t_ma_source"] = "fixed";
        r["delta_t_ma_sigma_nm"] = nullptr;
    } else {
        const StoichiometryModel stoich = StoichiometryModel::from(cfg.material);
        std::map<std::string, ShiftCurve> curves;
        for (const auto& o : obs) {
            if (curves.count(o.device_id)) continue;
            const DeviceGeometry d = cfg.geometry(o.device_id);
            auto m = std::make_shared<FrequencyShiftModel>(d.geom, d.f0, d.london_depth, stoich, cfg.grid, d.filaments);
            curves[o.device_id] = [m](double t) { return (*m)(t); };
        }
        const ThicknessEstimate est = invert_thickness(obs, curves, cfg.inversion);
        dt = est.delta_t_ma;
        r["delta_t_ma_source"] = "inverted";
        r["delta_t_ma_sigma_nm"] = est.sigma ? json(*est.sigma / constants::nm) : json(nullptr);
        r["inversion_cost"] = est.cost;
        r["inversion_evaluations"] = est.evaluations;
        rep.warn_all(est.warnings);
    }
    r["delta_t_ma_nm"] = dt / constants::nm;

    const LossTangentResult lt = extract_ma_loss_tangent(obs, dt);
    for (const auto& e : lt.devices)
        r["devices"][e.device_id] = {{"tan_delta_ma", e.tan_delta}, {"q_not_degraded", e.q_not_degraded}};
    for (const auto& o : obs) {
        r["devices"][o.device_id]["fractional_shift"] = o.fractional_shift();
        r["devices"][o.device_id]["p_ma_eff_ppm_per_nm"] = o.p_tilde_ma_eff;
    }
    r["tan_delta_ma_mean"] = lt.mean;
    r["tan_delta_ma_standard_error"] = lt.standard_error ? json(*lt.standard_error) : json(nullptr);
    r["annotation"] = "literature benchmark: 1.8 nm Nb oxide regrowth after 8 days in air (not used in the fit)";
    rep.warn_all(lt.warnings);
    rep.write(ctx.out(kRegrowthFile));
    return 0;
}

// ---------------------------------------------------------------- budget

struct BudgetOptions {
    std::optional<std::string> system_file;
    std::optional<std::string> quality_file;
    bool ase = false;  // treat table q_extr as classical and correct it
};

inline int cmd_budget(const CommandContext& ctx, const BudgetOptions& opt) {
    RunReport rep = ctx.report("budget");
    const ProjectConfig& cfg = ctx.config;
    json& r = rep.results();
    std::map<std::string, double> q_intr;

    if (opt.quality_file) {
        rep.add_input(*opt.quality_file);
        r["extrinsic_law"] = opt.ase ? "anomalous skin effect correction applied" : "as supplied";
        for (const auto& row : load_quality_table(*opt.quality_file)) {
            double q_extr = row.q_extr;
            if (opt.ase) q_extr = ase_correct(q_extr, cfg.extrinsic.omega_cavity, 2.0 * constants::pi * cfg.geometry(row.device_id).f0);
            const double qi = intrinsic_q(row.q_int, q_extr);
            q_intr[row.device_id] = qi;
            r["quality"][row.device_id] = {{"q_int", row.q_int}, {"q_extr", q_extr}, {"q_intr", qi},
                                           {"relative_difference", (qi - row.q_int) / row.q_int}};
        }
    }

    BudgetSystem sys;
    if (opt.system_file) {
        rep.add_input(*opt.system_file);
        sys = load_budget(*opt.system_file);
    } else {
        if (q_intr.empty()) throw InvalidParameter("budget needs a system file or a quality table");
        for (const auto& [id, qi] : q_intr) {
            const auto [p, psrc] = detail::participation_for(ctx, id);
            const auto a = detail::alpha_for(ctx, id);
            const double f0 = cfg.geometry(id).f0;
            sys.rows.push_back({id, qi, p.ma_eff(), p.ms_eff(), p.sa, quasiparticle_coefficient(a.value, f0, cfg.material)});
            r["sources"][id] = {{"participation", psrc}, {"alpha", a.source}, {"alpha_value", a.value}};
        }
    }
    for (const auto& row : sys.rows)
        r["system"][row.device_id] = {{"q_intr", row.q_intr}, {"p_ma_eff", row.p_ma_eff}, {"p_ms_eff", row.p_ms_eff},
                                      {"p_sa", row.p_sa}, {"qp_coeff_um3", row.qp_coeff}};

    const BudgetSolution direct = solve_budget(sys, BudgetMethod::Direct, cfg.collinearity_threshold);
    const BudgetSolution nonneg = solve_budget(sys, BudgetMethod::NonNegative, cfg.collinearity_threshold);
    auto sol_json = [](const BudgetSolution& s) {
        return json{{"t_tan_delta_ma_nm", s.tt_ma}, {"t_tan_delta_ms_nm", s.tt_ms}, {"t_tan_delta_sa_nm", s.tt_sa},
                    {"n_qp_per_um3", s.n_qp}, {"residual_norm", s.residual_norm}};
    };
    r["method"] = cfg.budget_method == BudgetMethod::Direct ? "direct" : "nonnegative";
    r["solutions"]["direct"] = sol_json(direct);
    r["solutions"]["nonnegative"] = sol_json(nonneg);
    r["condition_number"] = direct.condition_number;
    r["collinearity_threshold"] = cfg.collinearity_threshold;
    r["collinear"] = direct.collinear;
    rep.warn_all(cfg.budget_method == BudgetMethod::Direct ? direct.warnings : nonneg.warnings);
    rep.write(ctx.out(kBudgetFile));
    return 0;
}

// ---------------------------------------------------------------- report

inline std::string superscript(int e) {
    static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
    std::string out = e < 0 ? "⁻" : "";
    for (char c : std::to_string(std::abs(e))) out += digits[c - '0'];
    return out;
}

/// "(10 ± 2)×10⁻³" style: engineering exponent, one significant digit of sigma.
inline std::string format_pm(double value, double sigma, const std::string& unit = "") {
    const std::string suffix = unit.empty() ? "" : " " + unit;
    if (!(value != 0.0) || !std::isfinite(value)) return format_number(value) + suffix;
    const int e = static_cast<int>(std::floor(std::log10(std::abs(value)) / 3.0)) * 3;
    const double v = value / std::pow(10.0, e);
    const double s = sigma / std::pow(10.0, e);
    const int place = s > 0.0 && std::isfinite(s) ? static_cast<int>(std::floor(std::log10(s))) : 0;
    const int decimals = std::max(0, -place);
    const double step = std::pow(10.0, place);
    const double s_round = std::max(step, std::round(s / step) * step);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, std::round(v / step) * step, decimals, s_round);
    const std::string body = e == 0 ? std::string(buf) : "(" + std::string(buf) + ")×10" + superscript(e);
    return body + suffix;
}

inline int cmd_report(const CommandContext& ctx) {
    RunReport rep = ctx.report("report");
    const ProjectConfig& cfg = ctx.config;
    const json sweep = load_stage(ctx.out_dir, "sweep temperature", sweep_file("temperature"));
    const json regrowth = load_stage(ctx.out_dir, "regrowth", kRegrowthFile);
    const json budget = load_stage(ctx.out_dir, "budget", kBudgetFile);
    for (const char* f : {"sweep_temperature.json", kRegrowthFile, kBudgetFile}) rep.add_input(ctx.out(f));

    std::string dev = cfg.bounds_device;
    if (dev.empty() && sweep.at("results").at("device").is_string()) dev = sweep["results"]["device"].get<std::string>();
    if (dev.empty()) throw InvalidParameter("no bounds device: set report.bounds_device or run sweep with --device");
    const auto [p, psrc] = detail::participation_for(ctx, dev);
    const auto alpha = detail::alpha_for(ctx, dev);
    if (psrc == "simulate") rep.add_input(ctx.out(kParticipationFile));
    if (alpha.source == "simulate") rep.add_input(ctx.out(kInductanceFile));

    const json& sw = sweep.at("results");
    const double loss = sw.at("saturated_tls_loss").get<double>();
    const double loss_sigma = sw.at("saturated_tls_loss_sigma").get<double>();
    const double q_r = sw.at("q_r").get<double>();
    const double q_r_sigma = sw.at("q_r_sigma").get<double>();
    const double f0 = sw.at("f0_hz").get<double>();

    json& r = rep.results();
    r["bounds_device"] = dev;
    r["provenance"] = {{"participation", psrc}, {"alpha", alpha.source},
                       {"gap_and_density_of_states", cfg.material_defaults ? "literature defaults (externally sourced)" : "config"}};
    std::string md = "# Loss analysis report\n\n## Upper bounds (" + dev + ")\n\n| Interface | Bound |\n|---|---|\n";
    const std::pair<const char*, double> rows[] = {{"MA", p.ma_eff()}, {"MS", p.ms_eff()}, {"SA", p.sa}};
    for (const auto& [name, pt] : rows) {
        const double b = interface_bound(loss, pt);
        const double s = b * loss_sigma / loss;
        r["bounds"][name] = {{"t_tan_delta_nm", b}, {"sigma_nm", s}, {"p_tilde_ppm_per_nm", pt}};
        md += std::string("| ") + name + " | ≤ " + format_pm(b, s, "nm") + " |\n";
    }
    const double nqp = quasiparticle_bound(q_r, alpha.value, f0, cfg.material);
    const double nqp_s = nqp * q_r_sigma / q_r;
    r["bounds"]["n_qp"] = {{"per_um3", nqp}, {"sigma_per_um3", nqp_s}, {"alpha", alpha.value}};
    md += "| n_qp | ≤ " + format_pm(nqp, nqp_s, "µm⁻³") + " |\n";

    const json& b = budget.at("results");
    if (b.contains("quality")) {
        md += "\n## Quality factors (×10⁶)\n\n| Device | Q_int | Q_extr | Q_intr |\n|---|---|---|---|\n";
        for (auto it = b["quality"].begin(); it != b["quality"].end(); ++it) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "| %s | %.2g | %.3g | %.2g |\n", it.key().c_str(), it.value()["q_int"].get<double>() / 1e6,
                          it.value()["q_extr"].get<double>() / 1e6, it.value()["q_intr"].get<double>() / 1e6);
            md += buf;
        }
        r["quality"] = b["quality"];
    }

    const json& g = regrowth.at("results");
    r["regrowth"] = {{"delta_t_ma_nm", g.at("delta_t_ma_nm")}, {"delta_t_ma_sigma_nm", g.at("delta_t_ma_sigma_nm")},
                     {"tan_delta_ma_mean", g.at("tan_delta_ma_mean")},
                     {"tan_delta_ma_standard_error", g.at("tan_delta_ma_standard_error")}};
    {
        const double tan = g.at("tan_delta_ma_mean").get<double>();
        const json& se = g.at("tan_delta_ma_standard_error");
        const double t_nm = g.at("delta_t_ma_nm").get<double>();
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.3g", t_nm);
        md += "\n## Oxide regrowth\n\nΔt_MA = " + std::string(buf) + " nm, tanδ_MA = " +
              (se.is_number() ? format_pm(tan, se.get<double>()) : format_number(tan)) + "\n";
        const double product = tan * t_nm;
        const bool consistent = product <= r["bounds"]["MA"]["t_tan_delta_nm"].get<double>();
        r["regrowth"]["consistent_with_ma_bound"] = consistent;
        if (!consistent) rep.warn("regrowth loss tangent times thickness exceeds the MA bound");
    }

    r["budget"] = {{"condition_number", b.at("condition_number")}, {"collinear", b.at("collinear")},
                   {"threshold", b.at("collinearity_threshold")}};
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g", b.at("condition_number").get<double>());
        md += "\n## Budget conditioning\n\nColumn-scaled condition number " + std::string(buf) +
              (b.at("collinear").get<bool>() ? " (collinear: separated products unreliable)\n" : "\n");
    }
    for (const json* stage : {&sweep, &regrowth, &budget})
        for (const auto& w : stage->at("warnings")) rep.warn(stage->at("command").get<std::string>() + ": " + w.get<std::string>());

    rep.write(ctx.out(kReportFile));
    RunReport::write_text(ctx.out("report.md"), md);
    return 0;
}

}  // namespace nbres::io
