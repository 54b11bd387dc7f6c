// Regenerates the shipped fixtures. Every file is synthesized from quoted
// device parameters; nothing here is measured data.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nbres/io/commands.hpp"

namespace fs = std::filesystem;
using namespace nbres;
using nbres::io::CsvWriter;
using nbres::io::format_number;
using nbres::io::json;
using nbres::io::RunReport;

namespace {

struct Device {
    const char* id;
    double gap_um, length_um, f0, q_int, q_extr;
};

// Design values and measured quality factors for the four strip resonators.
constexpr Device kDevices[] = {
    {"CPS1", 10, 7110, 4.495e9, 1.5e6, 250e6},
    {"CPS2", 22, 6410, 4.986e9, 1.7e6, 340e6},
    {"CPS3", 46, 5842, 5.470e9, 2.0e6, 97e6},
    {"CPS4", 100, 5363, 5.959e9, 2.0e6, 12e6},
};

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void cavity_trace(const fs::path& dir, unsigned seed) {
    ResonanceFit p;
    p.f0 = 7.687e9;
    p.q_int = 4700;
    p.q_ext = 7100;
    p.baseline_mag = 0.8;
    p.phase_offset = 0.4;
    p.electrical_delay = 2e-9;
    const double noise = 0.003;
    const ReflectionTrace t = synthesize_trace(p, linewidth_grid(p, 8.0, 401), noise, seed);
    RunReport::write_text((dir / "cavity_mode.csv").string(),
                          io::write_trace_csv(t, {"synthetic room-temperature cavity fundamental mode",
                                                  "source values: f0 = 7.687 GHz, Q_int = 4700, Q_ext = 7100",
                                                  "baseline 0.8, phase 0.4 rad, delay 2 ns, noise 0.003 per quadrature, seed " +
                                                      std::to_string(seed)}));
    RunReport::write_text((dir / "cavity_mode.json").string(),
                          "// sidecar for cavity_mode.csv (nominal room-temperature drive)\n"
                          "{\n  \"applied_power_dbm\": -10,\n  \"line_attenuation_db\": 0,\n  \"temperature_k\": 295\n}\n");
}

void geometries(const fs::path& dir) {
    for (const auto& d : kDevices) {
        json j{{"device_id", d.id},  {"width_um", 10},      {"gap_um", d.gap_um}, {"length_um", d.length_um},
               {"t_nb_nm", 145},     {"eps_substrate", 10}, {"f0_hz", d.f0},      {"lambda_nm", 39}};
        RunReport::write_text((dir / "geometry" / (lower(d.id) + ".json")).string(),
                              "// design geometry: 10 um strips, 145 nm Nb on sapphire, quarter-wave length\n" +
                                  j.dump(2) + "\n");
    }
}

void power_sweeps(const fs::path& dir, unsigned seed) {
    // CPS1: TLS loss and residual loss chosen so the n < n_c average sits near 1.5e6.
    TlsFitParams p;
    p.q_r = 8e6;
    p.f_tls_tan_delta = 1.0 / 1.5e6 - 1.0 / 8e6;
    p.n_c = 10.0;
    p.beta_pow = 0.5;
    const double temp = 0.020, f0 = kDevices[0].f0, noise = 0.02;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    CsvWriter w({"n_photon", "q_int", "q_int_sigma"});
    w.comment("synthetic CPS1 power sweep at 20 mK, f0 = 4.495 GHz");
    w.comment("TLS loss 5.417e-7, n_c 10, beta 0.5, Q_r 8e6; 2% multiplicative noise, seed " + std::to_string(seed));
    for (int k = 0; k < 30; ++k) {
        const double n = 0.05 * std::pow(10.0, 7.3 * k / 29.0);
        const double q = 1.0 / tls_inverse_q(p, n, temp, f0) * (1.0 + noise * n01(rng));
        w.row({format_number(n), format_number(q), format_number(noise * q)});
    }
    RunReport::write_text((dir / "power_sweep_cps1.csv").string(), w.str());

    CsvWriter flat({"n_photon", "q_int"});
    flat.comment("synthetic power-independent sweep (no TLS saturation, no sigma column)");
    for (int k = 0; k < 20; ++k) flat.row({format_number(0.1 * std::pow(10.0, 6.0 * k / 19.0)), "1000000"});
    RunReport::write_text((dir / "power_sweep_flat.csv").string(), flat.str());
}

void temperature_sweep(const fs::path& dir, unsigned seed) {
    // CPS3 low-power Q_intr versus temperature: 1/(F tan) = 3.4e6, Q_r = 8e6.
    const double loss = 1.0 / 3.4e6, q_r = 8e6, f0 = kDevices[2].f0, noise = 0.15;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    CsvWriter w({"temperature_k", "q_intr", "q_intr_sigma"});
    w.comment("synthetic CPS3 temperature sweep, f0 = 5.470 GHz");
    w.comment("source values: 1/(F tan_delta) = 3.4e6, Q_r = 8e6; 15% multiplicative noise (sized to the quoted fit uncertainty), seed " + std::to_string(seed));
    for (int k = 0; k < 16; ++k) {
        const double t = 0.02 + 0.38 * k / 15.0;
        const double q = 1.0 / (loss * thermal_factor(f0, t) + 1.0 / q_r) * (1.0 + noise * n01(rng));
        w.row({format_number(t), format_number(q), format_number(noise * q)});
    }
    RunReport::write_text((dir / "temperature_sweep_cps3.csv").string(), w.str());
}

void quality_table(const fs::path& dir) {
    CsvWriter w({"device_id", "q_int", "q_extr"});
    w.comment("low-power internal Q and simulated extrinsic Q per device");
    for (const auto& d : kDevices) w.row({d.id, format_number(d.q_int), format_number(d.q_extr)});
    RunReport::write_text((dir / "quality_table.csv").string(), w.str());
}

// Noiseless after-exposure observations: forward model at 2.5 nm, uniform 30% Q_intr loss.
void observations(const fs::path& dir) {
    const double dt = 2.5e-9;
    CsvWriter w({"device_id", "f0_before_hz", "f0_after_hz", "q_intr_before", "q_intr_after"});
    w.comment("synthetic re-exposure data: frequency shifts from the forward model at 2.5 nm oxide regrowth");
    w.comment("Q_intr after = 0.7 x before, matching the observed ~30% degradation");
    for (const auto& d : kDevices) {
        const io::DeviceGeometry g = io::load_geometry((dir / "geometry" / (lower(d.id) + ".json")).string());
        const FrequencyShiftModel m(g.geom, g.f0, g.london_depth);
        const double q_intr = intrinsic_q(d.q_int, d.q_extr);
        w.row({d.id, format_number(d.f0), format_number(d.f0 * (1.0 + m(dt))), format_number(q_intr),
               format_number(0.7 * q_intr)});
        std::cerr << d.id << ": shift at 2.5 nm " << m(dt) << "\n";
    }
    RunReport::write_text((dir / "regrowth_observations.csv").string(), w.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate the synthetic fixtures"};
    std::string out = "fixtures";
    unsigned seed = 7;
    bool skip_solver = false;
    app.add_option("out", out, "fixture directory");
    app.add_option("--seed", seed, "noise seed");
    app.add_flag("--skip-solver", skip_solver, "do not regenerate the regrowth observations");
    CLI11_PARSE(app, argc, argv);
    try {
        const fs::path dir(out);
        cavity_trace(dir, seed);
        geometries(dir);
        power_sweeps(dir, seed);
        temperature_sweep(dir, seed);
        quality_table(dir);
        if (!skip_solver) observations(dir);
    } catch (const Error& e) {
        std::cerr << "make_fixtures: " << e.what() << "\n";
        return e.exit_code();
    }
    return 0;
}
