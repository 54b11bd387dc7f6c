// nbres: command-line front end for the resonator loss toolkit.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nbres/io/commands.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Loss analysis for thin-film Nb coplanar-strip resonators"};
    app.require_subcommand(1);
    app.set_version_flag("--version", NBRES_VERSION);

    std::string config_path;
    std::string out_dir;
    unsigned seed = 0;
    int jobs = 1;
    app.add_option("--config", config_path, "project config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--seed", seed, "recorded in every report");
    app.add_option("--jobs", jobs, "parallel workers for batch commands")->check(CLI::PositiveNumber);

    std::vector<std::string> traces;
    auto* fit = app.add_subcommand("fit", "fit reflection traces");
    fit->add_option("traces", traces, "trace CSV files")->required();

    std::string sweep_path;
    nbres::io::SweepOptions sweep_opt;
    double sweep_f0 = 0.0, sweep_temp = 0.0;
    std::string sweep_device;
    auto* sweep = app.add_subcommand("sweep", "fit a power or temperature sweep");
    sweep->add_option("file", sweep_path, "sweep CSV")->required();
    sweep->add_option("--kind", sweep_opt.kind, "power or temperature")
        ->required()
        ->check(CLI::IsMember({"power", "temperature"}));
    auto* f0_opt = sweep->add_option("--f0-hz", sweep_f0, "resonance frequency");
    auto* dev_opt = sweep->add_option("--device", sweep_device, "configured device (supplies f0)");
    auto* temp_opt = sweep->add_option("--temperature-k", sweep_temp, "bath temperature of a power sweep");

    std::string what;
    std::vector<std::string> sim_devices;
    auto* simulate = app.add_subcommand("simulate", "run the field or inductance solvers");
    simulate->add_option("what", what, "participation, inductance or regrowth-curve")
        ->required()
        ->check(CLI::IsMember({"participation", "inductance", "regrowth-curve"}));
    simulate->add_option("devices", sim_devices, "device ids or geometry files (default: all configured)");

    std::string obs_path;
    double fixed_dt = 0.0;
    auto* regrowth = app.add_subcommand("regrowth", "invert oxide regrowth and extract the MA loss tangent");
    regrowth->add_option("observations", obs_path, "before/after CSV")->required();
    auto* dt_opt = regrowth->add_option("--delta-t-ma-nm", fixed_dt, "use this thickness instead of inverting");

    nbres::io::BudgetOptions budget_opt;
    std::string system_path, quality_path;
    auto* budget = app.add_subcommand("budget", "solve the loss budget");
    auto* sys_opt = budget->add_option("--system", system_path, "design-matrix CSV");
    auto* q_opt = budget->add_option("--qualities", quality_path, "device_id,q_int,q_extr CSV");
    budget->add_flag("--ase", budget_opt.ase, "apply the anomalous skin effect correction to q_extr");

    app.add_subcommand("report", "assemble the consolidated report from earlier stages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return nbres::ParseError("command line").exit_code();
    }

    nbres::io::CommandContext ctx;
    if (!config_path.empty()) ctx.config = nbres::io::load_config(config_path);
    else ctx.config.output_dir = "out";
    ctx.out_dir = out_dir.empty() ? ctx.config.output_dir : out_dir;
    ctx.seed = seed;
    ctx.jobs = jobs;

    if (fit->parsed()) return nbres::io::cmd_fit(ctx, traces);
    if (sweep->parsed()) {
        if (*f0_opt) sweep_opt.f0 = sweep_f0;
        if (*dev_opt) sweep_opt.device = sweep_device;
        if (*temp_opt) sweep_opt.temperature = sweep_temp;
        return nbres::io::cmd_sweep(ctx, sweep_path, sweep_opt);
    }
    if (simulate->parsed()) return nbres::io::cmd_simulate(ctx, what, sim_devices);
    if (regrowth->parsed())
        return nbres::io::cmd_regrowth(ctx, obs_path, *dt_opt ? std::optional<double>(fixed_dt) : std::nullopt);
    if (budget->parsed()) {
        if (*sys_opt) budget_opt.system_file = system_path;
        if (*q_opt) budget_opt.quality_file = quality_path;
        return nbres::io::cmd_budget(ctx, budget_opt);
    }
    return nbres::io::cmd_report(ctx);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const nbres::Error& e) {
        std::cerr << "nbres: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "nbres: internal error: " << e.what() << "\n";
        return 1;
    }
}
