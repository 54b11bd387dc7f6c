#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "nbres/constants.hpp"
#include "nbres/errors.hpp"
#include "nbres/geometry.hpp"

namespace nbres {

struct InductanceResult {
    double l1 = 0.0;
    double l2 = 0.0;
    double m = 0.0;
    double l_eff = 0.0;
    double l_per_length = 0.0;
};

struct ConductorModel {
    enum class Kind { NormalLossless, Superconducting };
    Kind kind = Kind::NormalLossless;
    double conductivity = 1e30;  // S/m, normal only
    double london_depth = 0.0;   // m, superconducting only

    static ConductorModel normal(double sigma = 1e30) { return {Kind::NormalLossless, sigma, 0.0}; }
    static ConductorModel superconducting(double lambda) { return {Kind::Superconducting, 0.0, lambda}; }

    void validate() const {
        if (kind == Kind::NormalLossless && !(conductivity > 0.0)) throw InvalidParameter("conductivity must be positive");
        if (kind == Kind::Superconducting && !(london_depth >= 0.0 && std::isfinite(london_depth)))
            throw InvalidParameter("London depth must be non-negative");
    }
};

/// Filaments per strip. Lines follow Chebyshev spacing so the cells shrink
/// towards the surfaces where supercurrent crowds.
struct FilamentSpec {
    int nx = 48;
    int ny = 8;

    void validate() const {
        if (nx < 1 || ny < 1) throw InvalidParameter("filament counts must be positive");
    }
};

struct Filament {
    double x0, x1, y0, y1;
    int strip;  // 0 left, 1 right

    double area() const { return (x1 - x0) * (y1 - y0); }
};

namespace detail {

inline std::vector<double> chebyshev_lines(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        v[static_cast<std::size_t>(k)] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(constants::pi * k / n);
    v.front() = a;
    v.back() = b;
    return v;
}

// Fourth antiderivative of ln(sqrt(x^2 + y^2)), twice in x and twice in y.
inline double gmd_phi(double x, double y) {
    x = std::abs(x);
    y = std::abs(y);
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return 0.0;
    const double x2 = x * x, y2 = y * y;
    double v = (x2 * y2 / 8.0 - (x2 * x2 + y2 * y2) / 48.0) * std::log(r2) - 25.0 / 48.0 * x2 * y2;
    if (x > 0.0) v += x2 * x * y / 6.0 * std::atan(y / x);
    if (y > 0.0) v += x * y2 * y / 6.0 * std::atan(x / y);
    return v;
}

// Exact <ln rho> between two rectangles.
inline double mean_log_distance_exact(const Filament& a, const Filament& b) {
    const std::array<double, 4> xs{b.x1 - a.x0, b.x1 - a.x1, b.x0 - a.x0, b.x0 - a.x1};
    const std::array<double, 4> ys{b.y1 - a.y0, b.y1 - a.y1, b.y0 - a.y0, b.y0 - a.y1};
    const std::array<double, 4> sign{1.0, -1.0, -1.0, 1.0};
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s += sign[i] * sign[j] * gmd_phi(xs[i], ys[j]);
    return s / (a.area() * b.area());
}

template <int N>
struct Gauss;
template <>
struct Gauss<2> {
    static constexpr std::array<double, 2> x{-0.57735026918962576, 0.57735026918962576};
    static constexpr std::array<double, 2> w{1.0, 1.0};
};
template <>
struct Gauss<3> {
    static constexpr std::array<double, 3> x{-0.77459666924148338, 0.0, 0.77459666924148338};
    static constexpr std::array<double, 3> w{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
};

// Tensor Gauss average of f(rho) over point pairs of two rectangles.
template <int N, class F>
double gauss_pair_mean(const Filament& a, const Filament& b, F&& f) {
    using G = Gauss<N>;
    std::array<double, N> ax, ay, bx, by;
    for (int i = 0; i < N; ++i) {
        ax[i] = 0.5 * (a.x0 + a.x1) + 0.5 * (a.x1 - a.x0) * G::x[i];
        ay[i] = 0.5 * (a.y0 + a.y1) + 0.5 * (a.y1 - a.y0) * G::x[i];
        bx[i] = 0.5 * (b.x0 + b.x1) + 0.5 * (b.x1 - b.x0) * G::x[i];
        by[i] = 0.5 * (b.y0 + b.y1) + 0.5 * (b.y1 - b.y0) * G::x[i];
    }
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k)
                for (int m = 0; m < N; ++m) {
                    const double dx = ax[i] - bx[k], dy = ay[j] - by[m];
                    s += G::w[i] * G::w[j] * G::w[k] * G::w[m] * f(std::sqrt(dx * dx + dy * dy));
                }
    return s / 16.0;
}

/// Partial mutual inductance of two parallel bars of common length `len`
/// carrying uniform current: (mu0/4pi)[<R(rho)> - 2 len <ln rho>] with
/// R(rho) = 2[len ln(len + s) - s + rho], s = sqrt(len^2 + rho^2).
inline double partial_inductance(const Filament& a, const Filament& b, double len) {
    const double ra = 0.5 * std::hypot(a.x1 - a.x0, a.y1 - a.y0);
    const double rb = 0.5 * std::hypot(b.x1 - b.x0, b.y1 - b.y0);
    const double d = std::hypot(0.5 * (a.x0 + a.x1 - b.x0 - b.x1), 0.5 * (a.y0 + a.y1 - b.y0 - b.y1));
    const double mean_log = d < 6.0 * (ra + rb)
                                ? mean_log_distance_exact(a, b)
                                : gauss_pair_mean<3>(a, b, [](double r) { return std::log(r); });
    const double mean_r = gauss_pair_mean<2>(a, b, [len](double r) {
        const double s = std::sqrt(len * len + r * r);
        return 2.0 * (len * std::log(len + s) - s + r);
    });
    return constants::vacuum_permeability / (4.0 * constants::pi) * (mean_r - 2.0 * len * mean_log);
}

}  // namespace detail

inline std::vector<Filament> make_filaments(const CpsGeometry& g, const FilamentSpec& spec) {
    spec.validate();
    if (!(g.t_nb > 0.0)) throw InvalidParameter("metal thickness must be positive for inductance");
    const auto ys = detail::chebyshev_lines(0.0, g.t_nb, spec.ny);
    const auto xs = detail::chebyshev_lines(g.inner_edge(), g.outer_edge(), spec.nx);
    std::vector<Filament> out;
    out.reserve(static_cast<std::size_t>(2 * spec.nx * spec.ny));
    for (int strip = 0; strip < 2; ++strip)
        for (int j = 0; j < spec.ny; ++j)
            for (int i = 0; i < spec.nx; ++i) {
                const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
                Filament f{xs[ii], xs[ii + 1], ys[jj], ys[jj + 1], strip};
                if (strip == 0) f = {-xs[ii + 1], -xs[ii], ys[jj], ys[jj + 1], 0};
                out.push_back(f);
            }
    return out;
}

/// Geometric partial-inductance matrix of the filaments (H).
inline Eigen::MatrixXd filament_inductance(const std::vector<Filament>& fil, double len) {
    const auto n = static_cast<Eigen::Index>(fil.size());
    Eigen::MatrixXd L(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v =
                detail::partial_inductance(fil[static_cast<std::size_t>(i)], fil[static_cast<std::size_t>(j)], len);
            L(i, j) = v;
            L(j, i) = v;
        }
    return L;
}

namespace detail {

inline Eigen::MatrixXd strip_incidence(const std::vector<Filament>& fil) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fil.size()), 2);
    for (std::size_t i = 0; i < fil.size(); ++i) B(static_cast<Eigen::Index>(i), fil[i].strip) = 1.0;
    return B;
}

inline InductanceResult port_inductance(const Eigen::MatrixXd& lmat, double len) {
    InductanceResult r;
    r.l1 = lmat(0, 0);
    r.l2 = lmat(1, 1);
    r.m = 0.5 * (lmat(0, 1) + lmat(1, 0));
    r.l_eff = r.l1 + r.l2 - 2.0 * r.m;
    r.l_per_length = r.l_eff / len;
    return r;
}

// Each strip is a bundle of parallel filaments between its two end terminals:
// L_port = (B^T L^-1 B)^-1.
inline InductanceResult solve_lossless(const Eigen::MatrixXd& L, const std::vector<Filament>& fil, double len) {
    const Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success) throw IllConditioned(INFINITY, "filament inductance matrix is not positive definite");
    const double rc = llt.rcond();
    if (!(rc > 1e-15)) throw IllConditioned(1.0 / rc, "filament inductance matrix is singular to working precision");
    const Eigen::MatrixXd B = strip_incidence(fil);
    const Eigen::Matrix2d Y = B.transpose() * llt.solve(B);
    return port_inductance(Y.inverse(), len);
}

inline InductanceResult solve_resistive(const Eigen::MatrixXd& L, const Eigen::VectorXd& R,
                                        const std::vector<Filament>& fil, double len, double omega) {
    using cplx = std::complex<double>;
    Eigen::MatrixXcd Z = cplx(0.0, omega) * L.cast<cplx>();
    Z.diagonal() += R.cast<cplx>();
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Z);
    const double rc = lu.rcond();
    if (!(rc > 1e-15)) throw IllConditioned(1.0 / rc, "filament impedance matrix is singular to working precision");
    const Eigen::MatrixXcd B = strip_incidence(fil).cast<cplx>();
    const Eigen::Matrix2cd Y = B.transpose() * lu.solve(B);
    const Eigen::Matrix2cd Zp = Y.inverse();
    return port_inductance(Zp.imag() / omega, len);
}

inline void check_resolution(const std::vector<Filament>& fil, double lambda) {
    if (lambda <= 0.0) return;
    double dx = INFINITY, dy = INFINITY;
    for (const auto& f : fil) {
        dx = std::min(dx, f.x1 - f.x0);
        dy = std::min(dy, f.y1 - f.y0);
    }
    if (dx > 0.5 * lambda || dy > 0.5 * lambda)
        throw ResolutionError("filament", "surface filaments are wider than half the London depth");
}

}  // namespace detail

/// Terminal inductance matrix of the two strips at angular frequency 2 pi f0.
inline InductanceResult inductance_matrix(const CpsGeometry& geom, const ConductorModel& model, double f0,
                                          const FilamentSpec& spec = {}) {
    geom.validate();
    model.validate();
    if (!(f0 > 0.0)) throw InvalidParameter("frequency must be positive");
    const auto fil = make_filaments(geom, spec);
    Eigen::MatrixXd L = filament_inductance(fil, geom.length);
    const double mu0 = constants::vacuum_permeability;
    if (model.kind == ConductorModel::Kind::Superconducting) {
        detail::check_resolution(fil, model.london_depth);
        const double lam2 = model.london_depth * model.london_depth;
        for (std::size_t i = 0; i < fil.size(); ++i)
            L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += mu0 * lam2 * geom.length / fil[i].area();
        return detail::solve_lossless(L, fil, geom.length);
    }
    const double omega = 2.0 * constants::pi * f0;
    Eigen::VectorXd R(static_cast<Eigen::Index>(fil.size()));
    for (std::size_t i = 0; i < fil.size(); ++i)
        R[static_cast<Eigen::Index>(i)] = geom.length / (model.conductivity * fil[i].area());
    // Below this ratio the resistive term cannot change a double-precision result.
    if (R.maxCoeff() < 1e-14 * omega * L.diagonal().minCoeff()) return detail::solve_lossless(L, fil, geom.length);
    return detail::solve_resistive(L, R, fil, geom.length, omega);
}

/// alpha = (L_sc - L_normal) / L_sc, the normal reference being the
/// sigma = 1e30 S/m conductor (current distribution set by inductance alone).
inline double kinetic_fraction(const CpsGeometry& geom, double f0, double lambda_london,
                               const FilamentSpec& spec = {}) {
    const double l_sc = inductance_matrix(geom, ConductorModel::superconducting(lambda_london), f0, spec).l_eff;
    const double l_n = inductance_matrix(geom, ConductorModel::normal(), f0, spec).l_eff;
    return (l_sc - l_n) / l_sc;
}

/// (L_eff(t_nb - delta) - L_eff(t_nb)) / L_eff(t_nb) with identical filament counts.
/// Relative inductance change when the strips thin by `delta_t_nb`; the
/// baseline L_eff is solved once.
class InductanceShiftModel {
public:
    InductanceShiftModel(const CpsGeometry& geom, double f0, double lambda_london, const FilamentSpec& spec = {})
        : geom_(geom), f0_(f0), model_(ConductorModel::superconducting(lambda_london)), spec_(spec) {
        l0_ = inductance_matrix(geom_, model_, f0_, spec_).l_eff;
    }

    double baseline() const { return l0_; }

    double operator()(double delta_t_nb) const {
        if (!(delta_t_nb >= 0.0) || !(delta_t_nb < geom_.t_nb)) throw InvalidParameter("metal consumption out of range");
        if (delta_t_nb == 0.0) return 0.0;
        CpsGeometry thin = geom_;
        thin.t_nb -= delta_t_nb;
        return (inductance_matrix(thin, model_, f0_, spec_).l_eff - l0_) / l0_;
    }

private:
    CpsGeometry geom_;
    double f0_;
    ConductorModel model_;
    FilamentSpec spec_;
    double l0_ = 0.0;
};

inline double inductance_shift(const CpsGeometry& geom, double delta_t_nb, double f0, double lambda_london,
                               const FilamentSpec& spec = {}) {
    if (!(delta_t_nb >= 0.0) || !(delta_t_nb < geom.t_nb)) throw InvalidParameter("metal consumption out of range");
    return InductanceShiftModel(geom, f0, lambda_london, spec)(delta_t_nb);
}

}  // namespace nbres
