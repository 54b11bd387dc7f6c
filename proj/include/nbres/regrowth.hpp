#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nbres/errors.hpp"
#include "nbres/field_solver.hpp"
#include "nbres/inductance_solver.hpp"
#include "nbres/tls_model.hpp"

namespace nbres {

/// Nb2O5 growth consuming Nb. beta is derived from the atomic masses and is
/// never stored independently.
struct StoichiometryModel {
    double rho_nb = 8570.0;
    double rho_nb2o5 = 4600.0;
    double a_nb = 92.906;
    double a_o = 15.999;

    static StoichiometryModel from(const MaterialConstants& mc) {
        return {mc.rho_nb, mc.rho_nb2o5, mc.a_nb, mc.a_o};
    }

    double beta_stoich() const { return 2.0 * a_nb / (2.0 * a_nb + 5.0 * a_o); }

    // Metal thickness consumed per unit oxide thickness.
    double consumption_ratio() const { return beta_stoich() * rho_nb2o5 / rho_nb; }

    void validate() const {
        for (double v : {rho_nb, rho_nb2o5, a_nb, a_o})
            if (!(std::isfinite(v) && v > 0.0)) throw InvalidParameter("stoichiometry constants must be positive");
    }
};

inline double nb_consumption(double delta_t_ma, const StoichiometryModel& model = {}) {
    if (!(delta_t_ma >= 0.0)) throw InvalidParameter("oxide thickness change must be non-negative");
    model.validate();
    return model.consumption_ratio() * delta_t_ma;
}

struct RegrowthObservation {
    std::string device_id;
    double f0_before = 0.0;
    double f0_after = 0.0;
    double q_intr_before = 0.0;
    double q_intr_after = 0.0;
    double p_tilde_ma_eff = 0.0;  // ppm/nm, corner already absorbed

    double fractional_shift() const { return (f0_after - f0_before) / f0_before; }
};

/// Device forward model: delta_t_ma (m) -> fractional frequency shift.
using ShiftCurve = std::function<double(double)>;

/// Solver-backed forward model for one device. Baselines are solved once;
/// each call costs two field solves and one inductance assembly.
class FrequencyShiftModel {
public:
    FrequencyShiftModel(const CpsGeometry& geom, double f0, double lambda_london, const StoichiometryModel& stoich = {},
                        const GridSpec& grid = {}, const FilamentSpec& spec = {})
        : stoich_(stoich), cap_(geom, grid), ind_(geom, f0, lambda_london, spec) {
        stoich_.validate();
    }

    double capacitance_part(double delta_t_ma) const { return cap_(delta_t_ma, nb_consumption(delta_t_ma, stoich_)); }
    double inductance_part(double delta_t_ma) const { return ind_(nb_consumption(delta_t_ma, stoich_)); }

    // f ~ 1/sqrt(LC), first order in both shifts.
    double operator()(double delta_t_ma) const {
        if (!(delta_t_ma >= 0.0)) throw InvalidParameter("oxide thickness change must be non-negative");
        if (delta_t_ma == 0.0) return 0.0;
        const double dt_nb = nb_consumption(delta_t_ma, stoich_);
        return -0.5 * (cap_(delta_t_ma, dt_nb) + ind_(dt_nb));
    }

private:
    StoichiometryModel stoich_;
    CapacitanceShiftModel cap_;
    InductanceShiftModel ind_;
};

inline double frequency_shift(double delta_t_ma, const CpsGeometry& geom, double f0, double lambda_london,
                              const StoichiometryModel& stoich = {}, const GridSpec& grid = {},
                              const FilamentSpec& spec = {}) {
    if (!(delta_t_ma >= 0.0)) throw InvalidParameter("oxide thickness change must be non-negative");
    if (delta_t_ma == 0.0) return 0.0;
    return FrequencyShiftModel(geom, f0, lambda_london, stoich, grid, spec)(delta_t_ma);
}

struct InversionOptions {
    double t_max = 20e-9;
    int bits = 40;  // bracketed minimiser precision
    std::uintmax_t max_iterations = 200;
};

struct ThicknessEstimate {
    double delta_t_ma = 0.0;
    std::optional<double> sigma;  // needs at least two devices
    double cost = 0.0;
    std::size_t evaluations = 0;
    std::vector<std::string> warnings;
};

/// Shared oxide thickness across devices minimising the squared shift
/// mismatch. `curves` is keyed by device_id.
inline ThicknessEstimate invert_thickness(const std::vector<RegrowthObservation>& obs,
                                          const std::map<std::string, ShiftCurve>& curves,
                                          const InversionOptions& opt = {}) {
    if (obs.empty()) throw EmptySelection("no regrowth observations");
    ThicknessEstimate est;
    std::vector<double> measured;
    std::vector<const ShiftCurve*> model;
    bool any_down = false;
    for (const auto& o : obs) {
        if (!(o.f0_before > 0.0) || !(o.f0_after > 0.0)) throw InvalidParameter("resonance frequencies must be positive");
        auto it = curves.find(o.device_id);
        if (it == curves.end()) throw InvalidParameter("no geometry for device " + o.device_id);
        measured.push_back(o.fractional_shift());
        model.push_back(&it->second);
        if (o.f0_after < o.f0_before) any_down = true;
        else est.warnings.push_back(o.device_id + ": resonance did not shift down");
    }
    if (!any_down) throw NoRegrowthSignal("no device shows a downward frequency shift");

    auto cost = [&](double t) {
        ++est.evaluations;
        double s = 0.0;
        for (std::size_t j = 0; j < measured.size(); ++j) {
            const double r = measured[j] - (*model[j])(t);
            s += r * r;
        }
        return s;
    };
    // Work in nm so the minimiser tolerance is well scaled.
    auto cost_nm = [&](double t_nm) { return cost(t_nm * 1e-9); };
    std::uintmax_t iters = opt.max_iterations;
    const auto [t_nm, c_min] = boost::math::tools::brent_find_minima(cost_nm, 0.0, opt.t_max * 1e9, opt.bits, iters);
    if (iters >= opt.max_iterations) throw ConvergenceError("thickness inversion did not converge", {t_nm * 1e-9});
    est.delta_t_ma = t_nm * 1e-9;
    est.cost = c_min;
    if (t_nm >= 0.999 * opt.t_max * 1e9) est.warnings.push_back("thickness estimate at the upper search limit");

    // sigma^2 = 2 s^2 / S'' with s^2 the residual variance per degree of freedom.
    if (measured.size() > 1) {
        const double h = std::max(0.02, 0.02 * t_nm);
        const double lo = std::max(0.0, t_nm - h);
        const double hi = lo + 2.0 * h;
        const double mid = 0.5 * (lo + hi);
        const double curv = (cost_nm(hi) - 2.0 * cost_nm(mid) + cost_nm(lo)) / (h * h);
        const double s2 = c_min / static_cast<double>(measured.size() - 1);
        if (curv > 0.0) est.sigma = std::sqrt(2.0 * s2 / curv) * 1e-9;
    }
    return est;
}

struct LossTangentEntry {
    std::string device_id;
    double tan_delta = 0.0;
    bool q_not_degraded = false;  // q_intr_after >= q_intr_before
};

struct LossTangentResult {
    std::vector<LossTangentEntry> devices;
    double mean = 0.0;
    std::optional<double> standard_error;
    std::vector<std::string> warnings;
};

inline LossTangentResult extract_ma_loss_tangent(const std::vector<RegrowthObservation>& obs, double delta_t_ma) {
    if (!(delta_t_ma > 0.0)) throw InvalidParameter("oxide thickness change must be positive");
    if (obs.empty()) throw EmptySelection("no regrowth observations");
    LossTangentResult res;
    for (const auto& o : obs) {
        if (!(o.q_intr_before > 0.0) || !(o.q_intr_after > 0.0)) throw InvalidParameter("quality factors must be positive");
        if (!(o.p_tilde_ma_eff > 0.0)) throw InvalidParameter("metal-air participation must be positive");
        LossTangentEntry e{o.device_id, (1.0 / o.q_intr_after - 1.0 / o.q_intr_before) / (o.p_tilde_ma_eff * 1e-6 * (delta_t_ma * 1e9)),
                           o.q_intr_after >= o.q_intr_before};
        if (e.q_not_degraded) res.warnings.push_back(o.device_id + ": intrinsic Q did not degrade");
        res.devices.push_back(e);
    }
    // Sum in id order so the mean does not depend on input order.
    std::vector<LossTangentEntry> sorted = res.devices;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.device_id != b.device_id ? a.device_id < b.device_id : a.tan_delta < b.tan_delta;
    });
    double sum = 0.0;
    for (const auto& e : sorted) sum += e.tan_delta;
    const double n = static_cast<double>(sorted.size());
    res.mean = sum / n;
    if (sorted.size() > 1) {
        double ss = 0.0;
        for (const auto& e : sorted) ss += (e.tan_delta - res.mean) * (e.tan_delta - res.mean);
        res.standard_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return res;
}

}  // namespace nbres
