#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "nbres/constants.hpp"
#include "nbres/errors.hpp"
#include "nbres/tls_model.hpp"

namespace nbres {

/// 1/Q_int = 1/Q_intr + 1/Q_extr solved for Q_intr. An infinite q_extr
/// returns q_int unchanged.
inline double intrinsic_q(double q_int, double q_extr) {
    if (!(q_int > 0.0) || !(q_extr > 0.0)) throw InvalidParameter("quality factors must be positive");
    if (std::isinf(q_extr)) return q_int;
    if (!(q_extr > q_int)) throw NonPhysical("extrinsic loss exceeds the total internal loss");
    return 1.0 / (1.0 / q_int - 1.0 / q_extr);
}

// Classical-skin-effect Q rescaled to the anomalous regime at the resonator frequency.
inline double ase_correct(double q_extr_classical, double omega_cavity, double omega_resonator) {
    if (!(omega_cavity > 0.0) || !(omega_resonator > 0.0)) throw InvalidParameter("frequencies must be positive");
    return q_extr_classical * std::pow(omega_cavity / omega_resonator, 1.0 / 6.0);
}

enum class WallLaw { Classical, Anomalous };

struct ExtrinsicModel {
    double r_meas_cavity = 4.60e-3;  // ohm per square at the cavity mode
    double omega_cavity = 2.0 * constants::pi * 7.687e9;
    std::map<std::string, double> q_extr_classical;

    void validate() const {
        if (!(r_meas_cavity > 0.0) || !(omega_cavity > 0.0)) throw InvalidParameter("extrinsic model must be positive");
        for (const auto& [id, q] : q_extr_classical)
            if (!(q > 0.0)) throw InvalidParameter("extrinsic Q for " + id + " must be positive");
    }
};

inline double wall_resistance_at(double omega_resonator, const ExtrinsicModel& model, WallLaw law) {
    if (!(omega_resonator > 0.0)) throw InvalidParameter("frequency must be positive");
    model.validate();
    const double exponent = law == WallLaw::Classical ? 0.5 : 2.0 / 3.0;
    return model.r_meas_cavity * std::pow(omega_resonator / model.omega_cavity, exponent);
}

/// (alpha / pi D) sqrt(2 / (h f0 Delta)) in um^3: loss per unit n_qp.
inline double quasiparticle_coefficient(double alpha, double f0, const MaterialConstants& mc = {}) {
    if (!(alpha > 0.0) || !(f0 > 0.0)) throw InvalidParameter("alpha and f0 must be positive");
    mc.validate();
    // dos_fermi is per J per um^3, so the result is already in um^3.
    return alpha / (constants::pi * mc.dos_fermi) * std::sqrt(2.0 / (constants::planck * f0 * mc.gap_energy));
}

struct BudgetRow {
    std::string device_id;
    double q_intr = 0.0;
    double p_ma_eff = 0.0;  // ppm/nm
    double p_ms_eff = 0.0;
    double p_sa = 0.0;
    double qp_coeff = 0.0;  // um^3
};

inline constexpr std::size_t kBudgetUnknowns = 4;

struct BudgetSystem {
    std::vector<BudgetRow> rows;

    // Columns give loss per nm of t tan(delta) and per um^-3 of n_qp.
    Eigen::MatrixXd design() const {
        Eigen::MatrixXd a(rows.size(), kBudgetUnknowns);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            a.row(static_cast<Eigen::Index>(i)) << r.p_ma_eff * constants::ppm, r.p_ms_eff * constants::ppm,
                r.p_sa * constants::ppm, r.qp_coeff;
        }
        return a;
    }

    Eigen::VectorXd losses() const {
        Eigen::VectorXd b(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) b(static_cast<Eigen::Index>(i)) = 1.0 / rows[i].q_intr;
        return b;
    }

    void validate() const {
        for (const auto& r : rows) {
            if (!(r.q_intr > 0.0)) throw InvalidParameter(r.device_id + ": q_intr must be positive");
            for (double v : {r.p_ma_eff, r.p_ms_eff, r.p_sa, r.qp_coeff})
                if (!(std::isfinite(v) && v >= 0.0)) throw InvalidParameter(r.device_id + ": coefficients must be non-negative");
        }
    }
};

enum class BudgetMethod { Direct, NonNegative };

struct BudgetSolution {
    double tt_ma = 0.0;  // t tan(delta), nm
    double tt_ms = 0.0;
    double tt_sa = 0.0;
    double n_qp = 0.0;   // um^-3
    double residual_norm = 0.0;
    double condition_number = 0.0;
    bool collinear = false;
    std::vector<std::string> warnings;

    Eigen::Vector4d vector() const { return {tt_ma, tt_ms, tt_sa, n_qp}; }
};

namespace detail {

// Each column divided by its largest magnitude; zero columns are left alone.
inline Eigen::VectorXd column_scales(const Eigen::MatrixXd& a) {
    Eigen::VectorXd s(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double m = a.col(j).cwiseAbs().maxCoeff();
        s(j) = m > 0.0 ? m : 1.0;
    }
    return s;
}

inline double condition_number(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    const double lo = sv(sv.size() - 1);
    return lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
}

// Exact non-negative least squares for a handful of unknowns: the optimum
// is the unconstrained solution on its own support, so the best feasible
// support-restricted solution wins.
inline Eigen::VectorXd nnls_small(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const auto n = a.cols();
    if (n > 16) throw InvalidParameter("too many unknowns for exhaustive non-negative solve");
    Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
    double best_r = b.squaredNorm();
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < n; ++j)
            if (mask & (1u << j)) cols.push_back(j);
        Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
        const Eigen::VectorXd xs = sub.colPivHouseholderQr().solve(b);
        if ((xs.array() < 0.0).any()) continue;
        const double r = (sub * xs - b).squaredNorm();
        if (r < best_r) {
            best_r = r;
            best.setZero();
            for (std::size_t k = 0; k < cols.size(); ++k) best(cols[k]) = xs(static_cast<Eigen::Index>(k));
        }
    }
    return best;
}

}  // namespace detail

inline BudgetSolution solve_budget(const BudgetSystem& system, BudgetMethod method = BudgetMethod::Direct,
                                   double collinearity_threshold = 1e3) {
    system.validate();
    if (system.rows.size() < kBudgetUnknowns) throw Underdetermined("loss budget needs at least four devices");
    const Eigen::MatrixXd a = system.design();
    const Eigen::VectorXd b = system.losses();
    const Eigen::VectorXd scale = detail::column_scales(a);
    const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();

    BudgetSolution sol;
    sol.condition_number = detail::condition_number(as);
    sol.collinear = !(sol.condition_number <= collinearity_threshold);
    if (sol.collinear) sol.warnings.push_back("participation columns are nearly collinear; separated products are unreliable");

    Eigen::VectorXd ys = method == BudgetMethod::Direct ? Eigen::VectorXd(as.colPivHouseholderQr().solve(b))
                                                        : detail::nnls_small(as, b);
    const Eigen::VectorXd x = ys.cwiseQuotient(scale);
    sol.tt_ma = x(0);
    sol.tt_ms = x(1);
    sol.tt_sa = x(2);
    sol.n_qp = x(3);
    sol.residual_norm = (a * x - b).norm();
    if (method == BudgetMethod::Direct && (x.array() < 0.0).any())
        sol.warnings.push_back("unconstrained solution has negative components");
    return sol;
}

}  // namespace nbres
