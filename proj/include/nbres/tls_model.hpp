#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nbres/constants.hpp"
#include "nbres/errors.hpp"
#include "nbres/levenberg_marquardt.hpp"

namespace nbres {

enum TlsParam { kTlsLoss = 0, kNc = 1, kBeta = 2, kQr = 3 };

struct TlsFitParams {
    double f_tls_tan_delta = 0.0;
    double n_c = 1.0;
    double beta_pow = 0.5;
    double q_r = 1.0;
    // Filled by fit_power_sweep; order follows TlsParam.
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
    bool degenerate = false;

    double sigma(TlsParam k) const { return std::sqrt(covariance(k, k)); }
};

/// Niobium material inputs. The gap and density of states are literature values
/// (not measured here); reports flag them as externally sourced.
struct MaterialConstants {
    double gap_energy = 1.50e-3 * constants::elementary_charge;  // J
    double dos_fermi = 5.0e29;                                    // states / (J um^3), both spins
    double london_depth = 39e-9;                                  // m
    double rho_nb = 8570.0;                                       // kg/m^3
    double rho_nb2o5 = 4600.0;                                    // kg/m^3
    double a_nb = 92.906;
    double a_o = 15.999;
    double eps_interface = 10.0;

    void validate() const {
        for (double v : {gap_energy, dos_fermi, london_depth, rho_nb, rho_nb2o5, a_nb, a_o})
            if (!(std::isfinite(v) && v > 0.0)) throw InvalidParameter("material constants must be positive");
        if (!(eps_interface >= 1.0)) throw InvalidParameter("interface permittivity must be at least 1");
    }
};

struct PowerPoint {
    double n = 0.0;
    double q_int = 0.0;
    double q_sigma = 0.0;  // 0 means unknown
};

struct TemperaturePoint {
    double temperature = 0.0;
    double q_intr = 0.0;
    double q_sigma = 0.0;
};

/// tanh(hbar w / 2 kB T)
inline double thermal_factor(double f0, double temperature) {
    if (!(f0 > 0.0) || !(temperature > 0.0)) throw InvalidParameter("frequency and temperature must be positive");
    return std::tanh(constants::hbar * 2.0 * constants::pi * f0 / (2.0 * constants::boltzmann * temperature));
}

namespace detail {

inline void check_tls(const TlsFitParams& p) {
    if (!(std::isfinite(p.f_tls_tan_delta) && p.f_tls_tan_delta >= 0.0))
        throw InvalidParameter("TLS loss must be non-negative");
    if (!(std::isfinite(p.n_c) && p.n_c > 0.0)) throw InvalidParameter("n_c must be positive");
    if (!(p.beta_pow > 0.0 && p.beta_pow <= 2.0)) throw InvalidParameter("beta must lie in (0, 2]");
    if (!(p.q_r > 0.0)) throw InvalidParameter("q_r must be positive");
}

}  // namespace detail

inline double tls_inverse_q(const TlsFitParams& p, double n, double temperature, double f0) {
    detail::check_tls(p);
    if (!(n >= 0.0)) throw InvalidParameter("photon number must be non-negative");
    const double h = thermal_factor(f0, temperature);
    return p.f_tls_tan_delta * std::pow(1.0 + n / p.n_c, -p.beta_pow) * h + 1.0 / p.q_r;
}

/// d(1/Q)/d(f_tls_tan_delta, n_c, beta_pow, q_r)
inline std::array<double, 4> tls_inverse_q_gradient(const TlsFitParams& p, double n, double temperature, double f0) {
    detail::check_tls(p);
    if (!(n >= 0.0)) throw InvalidParameter("photon number must be non-negative");
    const double h = thermal_factor(f0, temperature);
    const double x = 1.0 + n / p.n_c;
    const double g = std::pow(x, -p.beta_pow);
    return {g * h, p.f_tls_tan_delta * h * p.beta_pow * (n / (p.n_c * p.n_c)) * g / x,
            -p.f_tls_tan_delta * h * g * std::log(x), -1.0 / (p.q_r * p.q_r)};
}

struct TlsFitOptions {
    LmOptions lm{};
    double beta_min = 0.1;
    double beta_max = 2.0;
    double beta_initial = 0.5;
};

namespace detail {

// Internal coordinates: ln F, ln n_c, logit of beta within its bounds, ln(1/q_r).
struct TlsFrame {
    double lo, hi;
    TlsFitParams to_public(const Eigen::Vector4d& u) const {
        TlsFitParams p;
        p.f_tls_tan_delta = std::exp(u[0]);
        p.n_c = std::exp(u[1]);
        p.beta_pow = lo + (hi - lo) / (1.0 + std::exp(-u[2]));
        p.q_r = std::exp(-u[3]);
        return p;
    }
    Eigen::Vector4d to_internal(const TlsFitParams& p) const {
        const double s = std::clamp((p.beta_pow - lo) / (hi - lo), 1e-9, 1.0 - 1e-9);
        return {std::log(p.f_tls_tan_delta), std::log(p.n_c), std::log(s / (1.0 - s)), -std::log(p.q_r)};
    }
    // d public / d internal (diagonal)
    Eigen::Vector4d scale(const Eigen::Vector4d& u) const {
        const TlsFitParams p = to_public(u);
        const double s = 1.0 / (1.0 + std::exp(-u[2]));
        return {p.f_tls_tan_delta, p.n_c, (hi - lo) * s * (1.0 - s), -p.q_r};
    }
};

inline std::vector<double> fit_weights(const std::vector<double>& q, const std::vector<double>& q_sigma) {
    const bool weighted = std::all_of(q_sigma.begin(), q_sigma.end(), [](double s) { return s > 0.0; });
    std::vector<double> w(q.size());
    if (weighted) {
        for (std::size_t i = 0; i < q.size(); ++i) w[i] = q[i] * q[i] / q_sigma[i];  // 1 / sigma(1/q)
    } else {
        std::vector<double> y(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) y[i] = 1.0 / q[i];
        std::nth_element(y.begin(), y.begin() + static_cast<long>(y.size() / 2), y.end());
        std::fill(w.begin(), w.end(), 1.0 / y[y.size() / 2]);
    }
    return w;
}

}  // namespace detail

/// Weighted least-squares fit of 1/q_int(n) to the TLS model at fixed
/// temperature. Weights are inverse variances when every point carries a
/// sigma, uniform otherwise. Covariance is scaled by the reduced chi-square.
/// `degenerate` is set when n_c is unidentifiable (its sigma exceeds its value
/// or the Jacobian is rank deficient).
inline TlsFitParams fit_power_sweep(std::span<const PowerPoint> points, double f0, double temperature,
                                    const TlsFitOptions& opt = {}) {
    if (points.size() < 6) throw IllPosedFit("power sweep needs at least 6 points");
    std::vector<PowerPoint> pts(points.begin(), points.end());
    for (const auto& p : pts)
        if (!(p.n >= 0.0 && std::isfinite(p.n)) || !(p.q_int > 0.0 && std::isfinite(p.q_int)) || !(p.q_sigma >= 0.0))
            throw InvalidInput("power sweep point out of range");
    // Sorting makes the result independent of input order.
    std::sort(pts.begin(), pts.end(), [](const PowerPoint& a, const PowerPoint& b) {
        return a.n != b.n ? a.n < b.n : (a.q_int != b.q_int ? a.q_int < b.q_int : a.q_sigma < b.q_sigma);
    });
    const double n_min = pts.front().n, n_max = pts.back().n;
    if (!(n_max > 0.0) || (n_min > 0.0 && n_max / n_min < 100.0))
        throw IllPosedFit("photon-number range spans less than two decades");
    if (!(opt.beta_min > 0.0 && opt.beta_min < opt.beta_initial && opt.beta_initial < opt.beta_max &&
          opt.beta_max <= 2.0))
        throw InvalidParameter("inconsistent beta bounds");

    const double h = thermal_factor(f0, temperature);
    const std::size_t m = pts.size();
    std::vector<double> n(m), y(m), q(m), qs(m);
    for (std::size_t i = 0; i < m; ++i) {
        n[i] = pts[i].n;
        q[i] = pts[i].q_int;
        qs[i] = pts[i].q_sigma;
        y[i] = 1.0 / q[i];
    }
    const std::vector<double> w = detail::fit_weights(q, qs);
    const detail::TlsFrame frame{opt.beta_min, opt.beta_max};

    auto model = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        const TlsFitParams p = frame.to_public(u);
        const Eigen::Vector4d sc = frame.scale(u);
        r.resize(static_cast<Eigen::Index>(m));
        J.resize(static_cast<Eigen::Index>(m), 4);
        for (std::size_t i = 0; i < m; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double x = 1.0 + n[i] / p.n_c;
            const double g = std::pow(x, -p.beta_pow);
            r[ii] = w[i] * (p.f_tls_tan_delta * g * h + 1.0 / p.q_r - y[i]);
            J(ii, 0) = w[i] * g * h * sc[0];
            J(ii, 1) = w[i] * p.f_tls_tan_delta * h * p.beta_pow * (n[i] / (p.n_c * p.n_c)) * g / x * sc[1];
            J(ii, 2) = -w[i] * p.f_tls_tan_delta * h * g * std::log(x) * sc[2];
            J(ii, 3) = w[i] / p.q_r;  // d(1/q_r)/du3 = 1/q_r
        }
    };
    auto cost_at = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        model(u, r, J);
        return 0.5 * r.squaredNorm();
    };

    // Starting points from the sweep's plateaus.
    const double y_lo_n = y.front(), y_hi_n = y.back();
    const double y_min = *std::min_element(y.begin(), y.end());
    const double y_max = *std::max_element(y.begin(), y.end());
    const double rr0 = 0.9 * y_min;
    const double f_tls0 = std::max(y_max - rr0, 1e-3 * y_max) / h;
    double n_mid = std::sqrt(std::max(n_min, n_max * 1e-8) * n_max);
    const double y_half = 0.5 * (y_lo_n + y_hi_n);
    for (std::size_t i = 1; i < m; ++i)
        if (y[i - 1] >= y_half && y[i] < y_half) {
            n_mid = std::max(n[i], n_max * 1e-8);
            break;
        }

    struct Candidate {
        Eigen::VectorXd u;
        double cost;
        bool converged;
        Eigen::MatrixXd J;
        Eigen::VectorXd r;
    };
    std::vector<Candidate> candidates;
    for (double nc_scale : {1.0, 100.0, 0.01}) {
        for (double beta0 : {opt.beta_initial, 1.0, 0.25}) {
            if (beta0 <= opt.beta_min || beta0 >= opt.beta_max) continue;
            TlsFitParams s;
            s.f_tls_tan_delta = f_tls0;
            s.n_c = n_mid * nc_scale;
            s.beta_pow = beta0;
            s.q_r = 1.0 / rr0;
            const Eigen::VectorXd u0 = frame.to_internal(s);
            try {
                const LmResult res = levenberg_marquardt(model, u0, opt.lm);
                candidates.push_back({res.x, res.cost, true, res.jacobian, res.residual});
            } catch (const ConvergenceError& e) {
                Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(e.best_so_far().data(), 4);
                Eigen::VectorXd r;
                Eigen::MatrixXd J;
                model(u, r, J);
                candidates.push_back({u, cost_at(u), false, J, r});
            }
        }
    }
    auto best = std::min_element(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.converged && !b.converged;
    });

    TlsFitParams out = frame.to_public(best->u);
    // Residual variance with a floor so a perfect fit still exposes unidentifiable directions.
    const double dof = static_cast<double>(m) - 4.0;
    double sigma2 = dof > 0.0 ? 2.0 * best->cost / dof : 0.0;
    const double floor = 1e-20;  // residuals are O(1) in weighted units
    sigma2 = std::max(sigma2, floor);
    bool singular = false;
    const Eigen::MatrixXd cov_int = covariance_from_jacobian(best->J, sigma2, 1e-10, &singular);
    const Eigen::Vector4d sc = frame.scale(best->u);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (std::isinf(cov_int(i, i)) || std::isinf(cov_int(j, j)))
                out.covariance(i, j) = (i == j) ? inf : 0.0;
            else
                out.covariance(i, j) = sc[i] * cov_int(i, j) * sc[j];
        }
    out.degenerate = singular || !(out.sigma(kNc) <= out.n_c);
    if (!best->converged && !out.degenerate)
        throw ConvergenceError("power-sweep fit did not converge",
                               {out.f_tls_tan_delta, out.n_c, out.beta_pow, out.q_r});
    return out;
}

struct TemperatureFit {
    double saturated_tls_loss = 0.0;  // A
    double q_r = 0.0;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // over (A, q_r)

    double sigma_loss() const { return std::sqrt(covariance(0, 0)); }
    double sigma_q_r() const { return std::sqrt(covariance(1, 1)); }
};

/// Linear fit of 1/q_intr = A tanh(hbar w / 2 kB T) + 1/q_r.
inline TemperatureFit fit_temperature_sweep(std::span<const TemperaturePoint> points, double f0) {
    if (points.size() < 5) throw IllPosedFit("temperature sweep needs at least 5 points");
    std::vector<TemperaturePoint> pts(points.begin(), points.end());
    for (const auto& p : pts)
        if (!(p.temperature > 0.0) || !(p.q_intr > 0.0 && std::isfinite(p.q_intr)) || !(p.q_sigma >= 0.0))
            throw InvalidInput("temperature sweep point out of range");
    std::sort(pts.begin(), pts.end(), [](const TemperaturePoint& a, const TemperaturePoint& b) {
        return a.temperature != b.temperature ? a.temperature < b.temperature
                                              : (a.q_intr != b.q_intr ? a.q_intr < b.q_intr : a.q_sigma < b.q_sigma);
    });
    const std::size_t m = pts.size();
    std::vector<double> q(m), qs(m);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(m), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(m));
    double t_min = 1.0, t_max = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        q[i] = pts[i].q_intr;
        qs[i] = pts[i].q_sigma;
        const double t = thermal_factor(f0, pts[i].temperature);
        t_min = std::min(t_min, t);
        t_max = std::max(t_max, t);
    }
    if (t_max - t_min < 0.1 * t_max) throw IllPosedFit("thermal factor varies by less than 10% over the sweep");
    const std::vector<double> w = detail::fit_weights(q, qs);
    for (std::size_t i = 0; i < m; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        A(ii, 0) = w[i] * thermal_factor(f0, pts[i].temperature);
        A(ii, 1) = w[i];
        b[ii] = w[i] / q[i];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::Vector2d x = qr.solve(b);
    const double chi2 = (A * x - b).squaredNorm();
    const double sigma2 = std::max(m > 2 ? chi2 / static_cast<double>(m - 2) : 0.0, 1e-24);
    const Eigen::Matrix2d cov_lin = covariance_from_jacobian(A, sigma2, 1e-13);
    if (!(x[1] > 0.0)) throw NonPhysical("fitted temperature-independent loss is not positive");

    TemperatureFit out;
    out.saturated_tls_loss = x[0];
    out.q_r = 1.0 / x[1];
    Eigen::Matrix2d T = Eigen::Matrix2d::Zero();
    T(0, 0) = 1.0;
    T(1, 1) = -out.q_r * out.q_r;
    out.covariance = T * cov_lin * T.transpose();
    return out;
}

/// Mean q_int over points with n < n_c.
inline double low_power_q(std::span<const PowerPoint> points, double n_c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : points)
        if (p.n < n_c) {
            sum += p.q_int;
            ++count;
        }
    if (count == 0) throw EmptySelection("no sweep points below the critical photon number");
    return sum / static_cast<double>(count);
}

/// Upper bound on t_i tan(delta_i) in nm, with p_tilde in ppm/nm.
inline double interface_bound(double f_tls_tan_delta, double p_tilde_ppm_per_nm) {
    if (!(f_tls_tan_delta > 0.0) || !(p_tilde_ppm_per_nm > 0.0))
        throw InvalidParameter("interface bound inputs must be positive");
    return f_tls_tan_delta / (p_tilde_ppm_per_nm * constants::ppm);
}

/// Upper bound on the quasiparticle density in um^-3.
inline double quasiparticle_bound(double q_r, double alpha, double f0, const MaterialConstants& mc) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("kinetic inductance fraction must lie in (0, 1)");
    if (!(q_r > 0.0) || !(f0 > 0.0)) throw InvalidParameter("q_r and f0 must be positive");
    mc.validate();
    return (constants::pi / alpha) * std::sqrt(constants::planck * f0 * mc.gap_energy / 2.0) * mc.dos_fermi / q_r;
}

}  // namespace nbres
