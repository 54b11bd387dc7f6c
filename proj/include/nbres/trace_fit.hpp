#pragma once

// Single-port reflection model, synthetic traces, and resonance fitting.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "nbres/constants.hpp"
#include "nbres/errors.hpp"
#include "nbres/levenberg_marquardt.hpp"

namespace nbres {

using cplx = std::complex<double>;

struct ReflectionTrace {
    std::vector<double> frequencies;  // Hz, strictly increasing
    std::vector<cplx> s11;
    double applied_power = 0.0;  // W at the device plane
    double temperature = 0.0;    // K

    void validate() const {
        if (frequencies.size() < 16) throw InvalidInput("trace needs at least 16 points");
        if (s11.size() != frequencies.size()) throw InvalidInput("s11 length differs from frequency length");
        for (std::size_t i = 0; i < frequencies.size(); ++i) {
            if (!std::isfinite(frequencies[i]) || !std::isfinite(s11[i].real()) || !std::isfinite(s11[i].imag()))
                throw InvalidInput("trace contains non-finite values");
            if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
                throw InvalidInput("trace frequencies must be strictly increasing");
        }
        if (!(applied_power > 0.0)) throw InvalidInput("applied power must be positive");
        if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
    }
};

/// Parameter order used by covariance and Jacobian arrays.
enum ResonanceParam : int { kF0 = 0, kQInt, kQExt, kBaseline, kPhase, kDelay, kNumResonanceParams };

struct ResonanceFit {
    double f0 = 0.0;                // Hz
    double q_int = 0.0;
    double q_ext = 0.0;
    double baseline_mag = 1.0;      // C
    double phase_offset = 0.0;      // rad
    double electrical_delay = 0.0;  // s
    Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
    double residual_rms = 0.0;

    std::array<double, 6> values() const {
        return {f0, q_int, q_ext, baseline_mag, phase_offset, electrical_delay};
    }
    static ResonanceFit from_values(const std::array<double, 6>& v) {
        ResonanceFit p;
        p.f0 = v[kF0];
        p.q_int = v[kQInt];
        p.q_ext = v[kQExt];
        p.baseline_mag = v[kBaseline];
        p.phase_offset = v[kPhase];
        p.electrical_delay = v[kDelay];
        return p;
    }
    std::array<double, 6> sigma() const {
        std::array<double, 6> s{};
        for (int i = 0; i < 6; ++i) s[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, covariance(i, i)));
        return s;
    }
    double q_loaded() const { return 1.0 / (1.0 / q_int + 1.0 / q_ext); }
};

struct PhotonEstimate {
    double n_mean = 0.0;
    double q_loaded = 0.0;
};

namespace detail {

inline void check_params(const ResonanceFit& p) {
    for (double v : p.values())
        if (!std::isfinite(v)) throw InvalidParameter("non-finite resonance parameter");
    if (!(p.f0 > 0.0) || !(p.q_int > 0.0) || !(p.q_ext > 0.0) || !(p.baseline_mag > 0.0))
        throw InvalidParameter("f0, q_int, q_ext and baseline magnitude must be positive");
}

}  // namespace detail

/// Reflection coefficient
///   C exp(i(phi0 + w t_ed)) (2i(w - w0) - w0/Qext + w0/Qint) / (2i(w - w0) + w0/Qext + w0/Qint)
/// evaluated at w = 2 pi freq.
inline cplx model_s11(const ResonanceFit& p, double freq) {
    detail::check_params(p);
    if (!(freq > 0.0) || !std::isfinite(freq)) throw InvalidParameter("probe frequency must be positive");
    const double w = 2.0 * constants::pi * freq;
    const double w0 = 2.0 * constants::pi * p.f0;
    const cplx d(0.0, 2.0 * (w - w0));
    const double a = w0 / p.q_ext;
    const double b = w0 / p.q_int;
    return p.baseline_mag * std::polar(1.0, p.phase_offset + w * p.electrical_delay) * (d - a + b) / (d + a + b);
}

/// Analytic derivatives of model_s11 with respect to (f0, Qint, Qext, C, phi0, t_ed).
inline std::array<cplx, 6> model_s11_jacobian(const ResonanceFit& p, double freq) {
    detail::check_params(p);
    const double tau = 2.0 * constants::pi;
    const double w = tau * freq;
    const double w0 = tau * p.f0;
    const cplx I(0.0, 1.0);
    const cplx d(0.0, 2.0 * (w - w0));
    const double a = w0 / p.q_ext;
    const double b = w0 / p.q_int;
    const cplx N = d - a + b;
    const cplx D = d + a + b;
    const cplx R = N / D;
    const cplx phase = std::polar(1.0, p.phase_offset + w * p.electrical_delay);
    const cplx S = p.baseline_mag * phase * R;
    const cplx pre = p.baseline_mag * phase;

    auto dR = [&](cplx dN, cplx dD) { return (dN * D - N * dD) / (D * D); };
    std::array<cplx, 6> J{};
    J[kF0] = pre * dR(tau * (-2.0 * I - 1.0 / p.q_ext + 1.0 / p.q_int), tau * (-2.0 * I + 1.0 / p.q_ext + 1.0 / p.q_int));
    const double da = -w0 / (p.q_ext * p.q_ext);
    J[kQExt] = pre * dR(-da, da);
    const double db = -w0 / (p.q_int * p.q_int);
    J[kQInt] = pre * dR(db, db);
    J[kBaseline] = phase * R;
    J[kPhase] = I * S;
    J[kDelay] = I * w * S;
    return J;
}

/// Model evaluated on `grid` plus complex Gaussian noise of standard deviation
/// `noise_sigma` per quadrature; deterministic for a fixed seed.
inline ReflectionTrace synthesize_trace(const ResonanceFit& params, std::span<const double> grid, double noise_sigma,
                                        std::uint64_t seed, double applied_power = 1e-15, double temperature = 0.02) {
    if (grid.empty()) throw InvalidInput("empty frequency grid");
    if (!(noise_sigma >= 0.0)) throw InvalidInput("noise sigma must be non-negative");
    ReflectionTrace t;
    t.frequencies.assign(grid.begin(), grid.end());
    t.s11.reserve(grid.size());
    t.applied_power = applied_power;
    t.temperature = temperature;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double f : grid) {
        cplx s = model_s11(params, f);
        if (noise_sigma > 0.0) {
            const double re = normal(rng);
            const double im = normal(rng);
            s += noise_sigma * cplx(re, im);
        }
        t.s11.push_back(s);
    }
    return t;
}

/// `n` points evenly spaced over f0 +- half_span_linewidths * f0 / Q_loaded.
inline std::vector<double> linewidth_grid(const ResonanceFit& p, double half_span_linewidths, std::size_t n) {
    const double hw = half_span_linewidths * p.f0 / p.q_loaded();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = p.f0 - hw + 2.0 * hw * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

struct FitOptions {
    LmOptions lm{};
    double prominence_factor = 3.0;     // dip must exceed this multiple of the noise floor
    double min_span_linewidths = 3.0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

/// Per-quadrature noise estimate from second differences (robust MAD).
inline double noise_floor(const std::vector<cplx>& s) {
    std::vector<double> re, im;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const cplx d2 = s[i + 1] - 2.0 * s[i] + s[i - 1];
        re.push_back(std::abs(d2.real()));
        im.push_back(std::abs(d2.imag()));
    }
    const double k = 1.0 / (0.6744897501960817 * std::sqrt(6.0));
    return 0.5 * k * (median(re) + median(im));
}

inline double unwrap_slope(std::span<const double> f, std::span<const double> phase) {
    const double fm = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
    const double pm = std::accumulate(phase.begin(), phase.end(), 0.0) / static_cast<double>(phase.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        sxy += (f[i] - fm) * (phase[i] - pm);
        sxx += (f[i] - fm) * (f[i] - fm);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline std::vector<double> unwrapped_phase(std::span<const cplx> s) {
    std::vector<double> out(s.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double p = std::arg(s[i]);
        if (i > 0) {
            const double prev = out[i - 1];
            p += offset;
            while (p - prev > constants::pi) { p -= 2.0 * constants::pi; offset -= 2.0 * constants::pi; }
            while (p - prev < -constants::pi) { p += 2.0 * constants::pi; offset += 2.0 * constants::pi; }
        }
        out[i] = p;
    }
    return out;
}

inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * constants::pi);
    if (a <= -constants::pi) a += 2.0 * constants::pi;
    return a;
}

// Internal fit coordinates: [(f0 - fc)/fw, ln Qint, ln Qext, ln C, phase at fc, 2 pi fw t_ed].
struct FitFrame {
    double fc;
    double fw;

    Eigen::VectorXd to_internal(const ResonanceFit& p) const {
        Eigen::VectorXd u(6);
        u << (p.f0 - fc) / fw, std::log(p.q_int), std::log(p.q_ext), std::log(p.baseline_mag),
            p.phase_offset + 2.0 * constants::pi * fc * p.electrical_delay, 2.0 * constants::pi * fw * p.electrical_delay;
        return u;
    }
    ResonanceFit to_public(const Eigen::VectorXd& u) const {
        ResonanceFit p;
        p.f0 = fc + fw * u[0];
        p.q_int = std::exp(u[1]);
        p.q_ext = std::exp(u[2]);
        p.baseline_mag = std::exp(u[3]);
        p.electrical_delay = u[5] / (2.0 * constants::pi * fw);
        p.phase_offset = u[4] - u[5] * fc / fw;
        return p;
    }
    // d(public)/d(internal) at u
    Eigen::Matrix<double, 6, 6> transform(const Eigen::VectorXd& u) const {
        Eigen::Matrix<double, 6, 6> T = Eigen::Matrix<double, 6, 6>::Zero();
        T(kF0, 0) = fw;
        T(kQInt, 1) = std::exp(u[1]);
        T(kQExt, 2) = std::exp(u[2]);
        T(kBaseline, 3) = std::exp(u[3]);
        T(kPhase, 4) = 1.0;
        T(kPhase, 5) = -fc / fw;
        T(kDelay, 5) = 1.0 / (2.0 * constants::pi * fw);
        return T;
    }
};

}  // namespace detail

/// Initial parameters from the trace alone: baseline magnitude from the edges,
/// delay from the unwrapped edge phase, f0 at the minimum of the
/// baseline-corrected magnitude, Q_loaded from the full width at half depth of
/// |1 - S/baseline|^2, and the coupling split from the real part of the
/// corrected reflection at the dip (negative means over-coupled).
inline ResonanceFit initial_guess(const ReflectionTrace& trace, const FitOptions& opt = {}) {
    const auto& f = trace.frequencies;
    const auto& s = trace.s11;
    const std::size_t n = f.size();
    const std::size_t ne = std::max<std::size_t>(3, n / 10);

    double c = 0.0;
    for (std::size_t i = 0; i < ne; ++i) c += std::abs(s[i]) + std::abs(s[n - 1 - i]);
    c /= static_cast<double>(2 * ne);
    if (!(c > 0.0)) throw NoResonance("reflection baseline is zero");

    auto edge_slope = [&](std::span<const double> model_phase_lo, std::span<const double> model_phase_hi) {
        std::vector<double> plo = detail::unwrapped_phase(std::span<const cplx>(s.data(), ne));
        std::vector<double> phi = detail::unwrapped_phase(std::span<const cplx>(s.data() + n - ne, ne));
        for (std::size_t i = 0; i < ne; ++i) {
            plo[i] -= model_phase_lo.empty() ? 0.0 : model_phase_lo[i];
            phi[i] -= model_phase_hi.empty() ? 0.0 : model_phase_hi[i];
        }
        const double s_lo = detail::unwrap_slope(std::span<const double>(f.data(), ne), plo);
        const double s_hi = detail::unwrap_slope(std::span<const double>(f.data() + n - ne, ne), phi);
        return 0.5 * (s_lo + s_hi);
    };

    ResonanceFit g;
    g.baseline_mag = c;
    double slope = edge_slope({}, {});

    const double sigma = detail::noise_floor(s);
    for (int pass = 0; pass < 2; ++pass) {
        g.electrical_delay = slope / (2.0 * constants::pi);
        cplx acc(0.0, 0.0);
        for (std::size_t i = 0; i < ne; ++i) {
            for (std::size_t k : {i, n - 1 - i}) {
                const double rot = 2.0 * constants::pi * f[k] * g.electrical_delay;
                cplx z = s[k] * std::polar(1.0, -rot);
                if (pass == 1) z /= model_s11(ResonanceFit{g.f0, g.q_int, g.q_ext, 1.0, 0.0, 0.0, {}, 0.0}, f[k]);
                acc += z / std::abs(z);
            }
        }
        g.phase_offset = std::arg(acc);

        std::vector<cplx> r(n);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = s[i] / (c * std::polar(1.0, g.phase_offset + 2.0 * constants::pi * f[i] * g.electrical_delay));

        // 5-point moving average keeps the prominence test above single-sample noise spikes.
        std::vector<cplx> rs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i >= 2 ? i - 2 : 0;
            const std::size_t hi = std::min(n - 1, i + 2);
            cplx acc_r(0.0, 0.0);
            for (std::size_t k = lo; k <= hi; ++k) acc_r += r[k];
            rs[i] = acc_r / static_cast<double>(hi - lo + 1);
        }
        std::size_t imin = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(rs[i]) < std::abs(rs[imin])) imin = i;
        // Magnitude dip only: independent of any error in the delay estimate.
        double dip = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i >= 2 ? i - 2 : 0;
            const std::size_t hi = std::min(n - 1, i + 2);
            double mag = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) mag += std::abs(s[k]);
            dip = std::max(dip, c - mag / static_cast<double>(hi - lo + 1));
        }
        if (pass == 0 && (dip <= opt.prominence_factor * sigma || dip < 1e-6 * c))
            throw NoResonance("no resonance feature above " + std::to_string(opt.prominence_factor) +
                              "x the noise floor");

        std::vector<double> dev(n);
        for (std::size_t i = 0; i < n; ++i) dev[i] = std::norm(1.0 - rs[i]);
        const double half = 0.5 * dev[imin];
        auto crossing = [&](int dir) -> std::optional<double> {
            std::ptrdiff_t i = static_cast<std::ptrdiff_t>(imin);
            while (true) {
                const std::ptrdiff_t j = i + dir;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) return std::nullopt;
                const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
                if (dev[uj] <= half) {
                    const double t = (dev[ui] - half) / (dev[ui] - dev[uj]);
                    return f[ui] + t * (f[uj] - f[ui]);
                }
                i = j;
            }
        };
        const auto lo = crossing(-1);
        const auto hi = crossing(+1);
        const double f0 = f[imin];
        double fwhm;
        if (lo && hi) fwhm = *hi - *lo;
        else if (lo) fwhm = 2.0 * (f0 - *lo);
        else if (hi) fwhm = 2.0 * (*hi - f0);
        else throw InvalidInput("trace does not span the resonance linewidth");
        fwhm = std::max(fwhm, f[1] - f[0]);
        const double ql = f0 / fwhm;
        const double r0 = std::clamp(rs[imin].real(), -0.95, 0.95);
        const double k = (1.0 + r0) / (1.0 - r0);  // Qext / Qint
        g.f0 = f0;
        g.q_int = ql * (1.0 + 1.0 / k);
        g.q_ext = k * g.q_int;

        if (pass == 0) {
            // Remove the resonance's own phase slope near the edges and re-estimate the delay.
            const ResonanceFit bare{g.f0, g.q_int, g.q_ext, 1.0, 0.0, 0.0, {}, 0.0};
            std::vector<cplx> mlo(ne), mhi(ne);
            for (std::size_t i = 0; i < ne; ++i) {
                mlo[i] = model_s11(bare, f[i]);
                mhi[i] = model_s11(bare, f[n - ne + i]);
            }
            const auto plo = detail::unwrapped_phase(mlo);
            const auto phi = detail::unwrapped_phase(mhi);
            slope = edge_slope(plo, phi);
        }
    }
    g.phase_offset = detail::wrap_angle(g.phase_offset);
    return g;
}

namespace detail {

inline ResonanceFit run_fit(const ReflectionTrace& trace, const ResonanceFit& start, const FitOptions& opt,
                            double& cost_out) {
    const detail::FitFrame frame{start.f0, start.f0 / start.q_loaded()};
    const auto& f = trace.frequencies;
    const auto& s = trace.s11;
    const auto n = static_cast<Eigen::Index>(f.size());

    auto model = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        r.resize(2 * n);
        J.resize(2 * n, 6);
        const ResonanceFit p = frame.to_public(u);
        const bool ok = std::isfinite(p.f0) && p.f0 > 0.0 && std::isfinite(p.q_int) && p.q_int > 0.0 &&
                        std::isfinite(p.q_ext) && p.q_ext > 0.0 && std::isfinite(p.baseline_mag) &&
                        p.baseline_mag > 0.0;
        if (!ok) {
            r.setConstant(std::numeric_limits<double>::infinity());
            J.setZero();
            return;
        }
        const Eigen::Matrix<double, 6, 6> T = frame.transform(u);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const cplx m = model_s11(p, f[ui]) - s[ui];
            r[2 * i] = m.real();
            r[2 * i + 1] = m.imag();
            const auto jp = model_s11_jacobian(p, f[ui]);
            for (int k = 0; k < 6; ++k) {
                cplx acc(0.0, 0.0);
                for (int q = 0; q < 6; ++q) acc += jp[static_cast<std::size_t>(q)] * T(q, k);
                J(2 * i, k) = acc.real();
                J(2 * i + 1, k) = acc.imag();
            }
        }
    };

    LmResult res;
    try {
        res = levenberg_marquardt(model, frame.to_internal(start), opt.lm);
    } catch (const ConvergenceError& e) {
        Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(e.best_so_far().data(), 6);
        const auto best = frame.to_public(u).values();
        throw ConvergenceError(e.what(), std::vector<double>(best.begin(), best.end()));
    }

    ResonanceFit out = frame.to_public(res.x);
    const double dof = static_cast<double>(2 * n - 6);
    const double sigma2 = 2.0 * res.cost / dof;
    const Eigen::MatrixXd cov_int = covariance_from_jacobian(res.jacobian, sigma2);
    const Eigen::Matrix<double, 6, 6> T = frame.transform(res.x);
    out.covariance = T * cov_int * T.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    out.residual_rms = std::sqrt(2.0 * res.cost / static_cast<double>(n));
    out.phase_offset = wrap_angle(out.phase_offset);
    cost_out = res.cost;
    return out;
}

}  // namespace detail

/// Least-squares fit of the reflection model to `trace` over all six
/// parameters. Without `initial`, starting values come from initial_guess and
/// the opposite coupling regime is also tried; the lower-cost optimum wins.
inline ResonanceFit fit_resonance(const ReflectionTrace& trace, const std::optional<ResonanceFit>& initial = {},
                                  const FitOptions& opt = {}) {
    trace.validate();
    std::vector<ResonanceFit> starts;
    if (initial) {
        detail::check_params(*initial);
        starts.push_back(*initial);
    } else {
        const ResonanceFit g = initial_guess(trace, opt);
        const double span = trace.frequencies.back() - trace.frequencies.front();
        if (span < opt.min_span_linewidths * g.f0 / g.q_loaded())
            throw InvalidInput("trace spans fewer than " + std::to_string(opt.min_span_linewidths) +
                               " estimated linewidths");
        starts.push_back(g);
        ResonanceFit swapped = g;
        std::swap(swapped.q_int, swapped.q_ext);
        starts.push_back(swapped);
    }

    std::optional<ResonanceFit> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::optional<ConvergenceError> last_error;
    for (const auto& s : starts) {
        try {
            double cost = 0.0;
            ResonanceFit r = detail::run_fit(trace, s, opt, cost);
            if (cost < best_cost) {
                best_cost = cost;
                best = r;
            }
        } catch (const ConvergenceError& e) {
            last_error = e;
        }
    }
    if (!best) throw *last_error;
    return *best;
}

/// Mean intracavity photon number for a reflection-coupled mode driven with
/// power P at the device plane: n = 4 Q_l^2 P / (hbar w0^2 Q_ext).
inline PhotonEstimate photon_number(const ResonanceFit& fit, double applied_power) {
    detail::check_params(fit);
    if (!(applied_power >= 0.0)) throw InvalidInput("applied power must be non-negative");
    const double ql = fit.q_loaded();
    const double w0 = 2.0 * constants::pi * fit.f0;
    return {4.0 * ql * ql * applied_power / (constants::hbar * w0 * w0 * fit.q_ext), ql};
}

/// Source power in dBm minus total line attenuation in dB, returned in watts.
inline double device_power_watts(double source_dbm, double line_attenuation_db) {
    return 1e-3 * std::pow(10.0, (source_dbm - line_attenuation_db) / 10.0);
}

}  // namespace nbres
