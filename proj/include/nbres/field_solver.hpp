#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nbres/constants.hpp"
#include "nbres/errors.hpp"
#include "nbres/geometry.hpp"
#include "nbres/participation.hpp"

namespace nbres {

struct GridSpec {
    double min_cell = 1e-9;       // cell size at metal edges and interface layers (m)
    int layer_cells = 2;          // cells across the probe layer
    double grading = 1.2;         // max ratio between neighbouring cells
    double domain_factor = 20.0;  // domain half-extent in units of (2w + g)
    double voltage = 1.0;         // right strip minus left strip (V)

    double probe_thickness() const { return layer_cells * min_cell; }

    void validate() const {
        if (!(min_cell > 0.0)) throw InvalidParameter("min_cell must be positive");
        if (layer_cells < 2) throw InvalidParameter("layer_cells must be at least 2");
        if (!(grading > 1.0 && grading <= 2.0)) throw InvalidParameter("grading must lie in (1, 2]");
        if (!(domain_factor >= 10.0)) throw InvalidParameter("domain must extend at least 10 (2w+g)");
        if (!(std::isfinite(voltage) && voltage != 0.0)) throw InvalidParameter("voltage must be non-zero");
    }
};

enum class Region : std::uint8_t { Air, Substrate, Metal, MA, MS, SA, Corner };

struct Mesh {
    std::vector<double> x;  // node lines, strictly increasing
    std::vector<double> y;

    std::size_t nx() const { return x.size(); }
    std::size_t ny() const { return y.size(); }
    std::size_t node(std::size_t i, std::size_t j) const { return j * x.size() + i; }
    std::size_t cell(std::size_t i, std::size_t j) const { return j * (x.size() - 1) + i; }
    std::size_t cell_count() const { return (x.size() - 1) * (y.size() - 1); }
};

struct FieldSolution {
    Mesh mesh;
    Eigen::VectorXd potential;          // per node
    std::vector<Region> region;         // per cell
    std::vector<double> energy_x;       // per cell, J/m, from E_x
    std::vector<double> energy_y;       // per cell, J/m, from E_y
    double energy = 0.0;                // W_e, J/m
    double voltage = 0.0;
    double laplace_residual = 0.0;      // relative, over free nodes

    double cell_energy(std::size_t c) const { return energy_x[c] + energy_y[c]; }
    double region_energy(Region r) const {
        double s = 0.0;
        for (std::size_t c = 0; c < region.size(); ++c)
            if (region[c] == r) s += energy_x[c] + energy_y[c];
        return s;
    }
};

namespace detail {

struct KeyPoint {
    double pos;
    double size;  // local cell size; 0 for a plain interval boundary
};

// Node lines on [a, b] with sizes following h(x) = min(cap, s_k + (r - 1)|x - x_k|),
// every key point landing exactly on a line.
inline std::vector<double> graded_lines(std::vector<KeyPoint> keys, double grading, double cap) {
    std::sort(keys.begin(), keys.end(), [](const KeyPoint& l, const KeyPoint& r) { return l.pos < r.pos; });
    std::vector<KeyPoint> merged;
    for (const auto& k : keys) {
        if (!merged.empty() && k.pos - merged.back().pos <= 1e-12 * std::max(1.0, std::abs(k.pos))) {
            if (k.size > 0.0 && (merged.back().size == 0.0 || k.size < merged.back().size)) merged.back().size = k.size;
            continue;
        }
        merged.push_back(k);
    }
    const double slope = grading - 1.0;
    auto h = [&](double x) {
        double v = cap;
        for (const auto& k : merged)
            if (k.size > 0.0) v = std::min(v, k.size + slope * std::abs(x - k.pos));
        return v;
    };
    std::vector<double> lines{merged.front().pos};
    std::vector<double> march;
    for (std::size_t s = 0; s + 1 < merged.size(); ++s) {
        const double a = merged[s].pos, b = merged[s + 1].pos;
        march.assign(1, a);
        while (march.back() < b) march.push_back(march.back() + h(march.back()));
        const std::size_t m = march.size() - 1;
        const double frac = static_cast<double>(m - 1) + (b - march[m - 1]) / (march[m] - march[m - 1]);
        const auto n = static_cast<std::size_t>(std::max(1.0, std::round(frac)));
        for (std::size_t j = 1; j < n; ++j) {
            const double u = frac * static_cast<double>(j) / static_cast<double>(n);
            const auto k = std::min(static_cast<std::size_t>(u), m - 1);
            const double t = u - static_cast<double>(k);
            lines.push_back(march[k] + t * (march[k + 1] - march[k]));
        }
        lines.push_back(b);
    }
    return lines;
}

inline Region classify(const CpsGeometry& g, double xc, double yc) {
    const double ax = std::abs(xc);
    const double xi = g.inner_edge(), xo = g.outer_edge();
    const bool over_metal = ax > xi && ax < xo;
    if (yc < 0.0) return (g.t_ms > 0.0 && yc > -g.t_ms && over_metal) ? Region::MS : Region::Substrate;
    if (over_metal && yc < g.t_nb) return Region::Metal;
    if (g.t_ma > 0.0) {
        if (yc > g.t_nb && yc < g.t_nb + g.t_ma && ax > xi - g.t_ma && ax < xo + g.t_ma) return Region::MA;
        const bool side = (ax > xi - g.t_ma && ax < xi) || (ax > xo && ax < xo + g.t_ma);
        if (side && yc < g.t_nb + g.t_ma) return yc < g.t_sa ? Region::Corner : Region::MA;
    }
    if (g.t_sa > 0.0 && yc < g.t_sa) return Region::SA;
    return Region::Air;
}

inline void region_permittivity(const CpsGeometry& g, Region r, double& ex, double& ey) {
    switch (r) {
        case Region::Substrate:
            ex = g.eps_substrate_x();
            ey = g.eps_substrate_y();
            return;
        case Region::MA:
        case Region::MS:
        case Region::SA:
        case Region::Corner:
            ex = ey = g.eps_interface;
            return;
        default:
            ex = ey = g.eps_ambient;
    }
}

}  // namespace detail

/// Graded rectilinear mesh for `geom`. Lines fall on every metal and layer
/// boundary; the mesh is mirror-symmetric about x = 0.
inline Mesh build_mesh(const CpsGeometry& geom, const GridSpec& grid) {
    geom.validate();
    grid.validate();
    const double span = 2.0 * geom.width + geom.gap;
    const double extent = grid.domain_factor * span + geom.outer_edge();
    const double cap = 0.05 * extent;
    const double s = grid.min_cell;
    const double xi = geom.inner_edge(), xo = geom.outer_edge();

    std::vector<detail::KeyPoint> kx{{0.0, 0.0}, {xi, s}, {xo, s}, {extent, 0.0}};
    if (geom.t_ma > 0.0) {
        kx.push_back({xi - geom.t_ma, s});
        kx.push_back({xo + geom.t_ma, s});
    }
    const auto half = detail::graded_lines(kx, grid.grading, cap);
    Mesh m;
    for (auto it = half.rbegin(); it != half.rend(); ++it)
        if (*it > 0.0) m.x.push_back(-*it);
    m.x.insert(m.x.end(), half.begin(), half.end());

    std::vector<detail::KeyPoint> ky{{-extent, 0.0}, {0.0, s}, {extent, 0.0}};
    if (geom.t_nb > 0.0) ky.push_back({geom.t_nb, s});
    if (geom.t_ms > 0.0) ky.push_back({-geom.t_ms, s});
    if (geom.t_sa > 0.0) ky.push_back({geom.t_sa, s});
    if (geom.t_ma > 0.0) ky.push_back({geom.t_nb + geom.t_ma, s});
    m.y = detail::graded_lines(ky, grid.grading, cap);
    return m;
}

/// Same topology as `mesh` (built for metal thickness `t_nb_old` with an
/// `t_ma` layer on top) with the metal thinned to `t_nb_new`: lines inside the
/// metal scale, lines in the top layer shift rigidly, lines above blend back to
/// the fixed far boundary.
inline Mesh morph_metal_thickness(const Mesh& mesh, double t_nb_old, double t_nb_new, double t_ma) {
    if (!(t_nb_old > 0.0) || !(t_nb_new > 0.0) || t_nb_new > t_nb_old)
        throw InvalidParameter("metal can only be thinned to a positive thickness");
    Mesh out = mesh;
    const double d = t_nb_old - t_nb_new;
    const double top = mesh.y.back();
    const double layer_top = t_nb_old + t_ma;
    for (double& y : out.y) {
        if (y <= 0.0) continue;
        if (y <= t_nb_old)
            y *= t_nb_new / t_nb_old;
        else if (y <= layer_top)
            y -= d;
        else
            y -= d * (top - y) / (top - layer_top);
    }
    return out;
}

/// Electrostatic solve on a given mesh. Strips are Dirichlet at +-V/2 (right
/// strip positive); the outer boundary carries zero normal flux. Energy is the
/// finite-integration form, so W_e = phi^T K phi / 2 exactly.
inline FieldSolution solve_on_mesh(const CpsGeometry& geom, const Mesh& mesh, const GridSpec& grid) {
    geom.validate();
    grid.validate();
    const std::size_t nx = mesh.nx(), ny = mesh.ny();
    if (nx < 3 || ny < 3) throw InvalidParameter("mesh too small");
    const double eps0 = constants::vacuum_permittivity;

    FieldSolution sol;
    sol.mesh = mesh;
    sol.voltage = grid.voltage;
    const std::size_t ncell = mesh.cell_count();
    sol.region.resize(ncell);
    std::vector<double> ex(ncell), ey(ncell);
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const std::size_t c = mesh.cell(i, j);
            const Region r =
                detail::classify(geom, 0.5 * (mesh.x[i] + mesh.x[i + 1]), 0.5 * (mesh.y[j] + mesh.y[j + 1]));
            sol.region[c] = r;
            detail::region_permittivity(geom, r, ex[c], ey[c]);
        }

    // Dirichlet nodes: on or inside a strip.
    const std::size_t nn = nx * ny;
    std::vector<double> fixed(nn, 0.0);
    std::vector<char> is_fixed(nn, 0);
    const double tol = 1e-3 * grid.min_cell;
    for (std::size_t j = 0; j < ny; ++j) {
        if (mesh.y[j] < -tol || mesh.y[j] > geom.t_nb + tol) continue;
        for (std::size_t i = 0; i < nx; ++i) {
            const double ax = std::abs(mesh.x[i]);
            if (ax < geom.inner_edge() - tol || ax > geom.outer_edge() + tol) continue;
            is_fixed[mesh.node(i, j)] = 1;
            fixed[mesh.node(i, j)] = (mesh.x[i] > 0.0 ? 0.5 : -0.5) * grid.voltage;
        }
    }
    std::vector<Eigen::Index> index(nn, -1);
    Eigen::Index nfree = 0;
    for (std::size_t k = 0; k < nn; ++k)
        if (!is_fixed[k]) index[k] = nfree++;
    if (nfree == 0) throw InvalidParameter("no free nodes");

    // Edge capacitances.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nfree) * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(nfree);
    auto add_edge = [&](std::size_t a, std::size_t b, double cap) {
        if (cap == 0.0) return;
        const Eigen::Index ia = index[a], ib = index[b];
        if (ia >= 0) diag[ia] += cap;
        if (ib >= 0) diag[ib] += cap;
        if (ia >= 0 && ib >= 0) {
            trip.emplace_back(std::max(ia, ib), std::min(ia, ib), -cap);
        } else if (ia >= 0) {
            rhs[ia] += cap * fixed[b];
        } else if (ib >= 0) {
            rhs[ib] += cap * fixed[a];
        }
    };
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const double hx = mesh.x[i + 1] - mesh.x[i];
            double w = 0.0;
            if (j > 0) w += ex[mesh.cell(i, j - 1)] * 0.5 * (mesh.y[j] - mesh.y[j - 1]);
            if (j + 1 < ny) w += ex[mesh.cell(i, j)] * 0.5 * (mesh.y[j + 1] - mesh.y[j]);
            add_edge(mesh.node(i, j), mesh.node(i + 1, j), eps0 * w / hx);
        }
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double hy = mesh.y[j + 1] - mesh.y[j];
            double w = 0.0;
            if (i > 0) w += ey[mesh.cell(i - 1, j)] * 0.5 * (mesh.x[i] - mesh.x[i - 1]);
            if (i + 1 < nx) w += ey[mesh.cell(i, j)] * 0.5 * (mesh.x[i + 1] - mesh.x[i]);
            add_edge(mesh.node(i, j), mesh.node(i, j + 1), eps0 * w / hy);
        }
    for (Eigen::Index k = 0; k < nfree; ++k) trip.emplace_back(k, k, diag[k]);
    Eigen::SparseMatrix<double> K(nfree, nfree);
    K.setFromTriplets(trip.begin(), trip.end());
    trip.clear();
    trip.shrink_to_fit();

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw IllConditioned(0.0, "field matrix factorization failed");
    const Eigen::VectorXd phi = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success) throw IllConditioned(0.0, "field solve failed");
    const Eigen::VectorXd res = K.selfadjointView<Eigen::Lower>() * phi - rhs;
    sol.laplace_residual = res.norm() / std::max(rhs.norm(), 1e-300);

    sol.potential.resize(static_cast<Eigen::Index>(nn));
    for (std::size_t k = 0; k < nn; ++k)
        sol.potential[static_cast<Eigen::Index>(k)] = is_fixed[k] ? fixed[k] : phi[index[k]];

    sol.energy_x.assign(ncell, 0.0);
    sol.energy_y.assign(ncell, 0.0);
    const auto& p = sol.potential;
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const std::size_t c = mesh.cell(i, j);
            const double hx = mesh.x[i + 1] - mesh.x[i], hy = mesh.y[j + 1] - mesh.y[j];
            const auto n00 = static_cast<Eigen::Index>(mesh.node(i, j)), n10 = static_cast<Eigen::Index>(mesh.node(i + 1, j));
            const auto n01 = static_cast<Eigen::Index>(mesh.node(i, j + 1)),
                       n11 = static_cast<Eigen::Index>(mesh.node(i + 1, j + 1));
            const double exb = (p[n10] - p[n00]) / hx, ext = (p[n11] - p[n01]) / hx;
            const double eyl = (p[n01] - p[n00]) / hy, eyr = (p[n11] - p[n10]) / hy;
            const double area = hx * hy;
            sol.energy_x[c] = 0.25 * eps0 * ex[c] * area * (exb * exb + ext * ext);
            sol.energy_y[c] = 0.25 * eps0 * ey[c] * area * (eyl * eyl + eyr * eyr);
            sol.energy += sol.energy_x[c] + sol.energy_y[c];
        }
    return sol;
}

inline FieldSolution solve_cross_section(const CpsGeometry& geom, const GridSpec& grid = {}) {
    geom.validate();
    grid.validate();
    const char* names[] = {"MA", "MS", "SA"};
    const double t[] = {geom.t_ma, geom.t_ms, geom.t_sa};
    for (int k = 0; k < 3; ++k)
        if (t[k] > 0.0 && t[k] < 2.0 * grid.min_cell * (1.0 - 1e-9))
            throw ResolutionError(names[k], std::string(names[k]) + " layer is thinner than two mesh cells");
    return solve_on_mesh(geom, build_mesh(geom, grid), grid);
}

/// C = 2 W_e / V^2 per unit length.
inline double capacitance(const FieldSolution& sol) { return 2.0 * sol.energy / (sol.voltage * sol.voltage); }

struct ParticipationOptions {
    // p~ of a thin layer at a sharp metal edge drifts like log(1/t), roughly 7%
    // per doubling at a few nm, so the planar interfaces are held to 10%.
    double linearity_tolerance = 0.10;
    bool check_linearity = true;
};

/// p~ at the probe thickness and at twice that thickness.
struct ParticipationStudy {
    double thickness = 0.0;  // m
    ParticipationSet probe;
    ParticipationSet doubled;

    double drift(double ParticipationSet::*field) const {
        return std::abs(doubled.*field - probe.*field) / std::abs(probe.*field);
    }
};

namespace detail {

inline ParticipationSet participation_at(const CpsGeometry& geom, const GridSpec& grid, double t) {
    CpsGeometry g = geom;
    g.t_ma = g.t_ms = g.t_sa = t;
    const FieldSolution sol = solve_cross_section(g, grid);
    const double per_nm = 1e6 / (t / constants::nm) / sol.energy;  // ppm/nm per joule
    return {sol.region_energy(Region::MA) * per_nm, sol.region_energy(Region::MS) * per_nm,
            sol.region_energy(Region::SA) * per_nm, sol.region_energy(Region::Corner) * per_nm};
}

}  // namespace detail

inline ParticipationStudy participation_study(const CpsGeometry& geom, const GridSpec& grid = {}) {
    const double t = grid.probe_thickness();
    return {t, detail::participation_at(geom, grid, t), detail::participation_at(geom, grid, 2.0 * t)};
}

/// Participation per unit thickness at the probe thickness
/// layer_cells * min_cell. The planar interfaces are re-evaluated at twice that
/// thickness and must agree within the linearity tolerance. The corner is left
/// out of the check: its area grows as t^2, so p_c / t is not expected to be
/// constant.
inline ParticipationSet participation_ratios(const CpsGeometry& geom, const GridSpec& grid = {},
                                             const ParticipationOptions& opt = {}) {
    if (!opt.check_linearity) return detail::participation_at(geom, grid, grid.probe_thickness());
    const ParticipationStudy st = participation_study(geom, grid);
    auto check = [&](double ParticipationSet::*field, const char* name) {
        if (!(st.drift(field) <= opt.linearity_tolerance))
            throw NonlinearRegime(std::string(name) + " participation is not linear in layer thickness");
    };
    check(&ParticipationSet::ma, "MA");
    check(&ParticipationSet::ms, "MS");
    check(&ParticipationSet::sa, "SA");
    return st.probe;
}

/// Relative capacitance change for oxide growth delta_t_ma consuming
/// delta_t_nb of metal. All solves share one mesh topology so discretisation
/// error cancels in the ratios; the baseline and template mesh are kept so
/// repeated evaluations pay only for the two perturbed solves.
class CapacitanceShiftModel {
public:
    CapacitanceShiftModel(const CpsGeometry& geom, const GridSpec& grid = {}) : grid_(grid), base_(geom) {
        base_.validate();
        if (!(base_.t_nb > 0.0)) throw InvalidParameter("capacitance shift needs a finite metal thickness");
        base_.t_ma = base_.t_ms = base_.t_sa = 0.0;
        t_min_ = grid_.probe_thickness();
        CpsGeometry tmpl = base_;
        tmpl.t_ma = t_min_;
        mesh0_ = build_mesh(tmpl, grid_);
        c0_ = capacitance(solve_on_mesh(base_, mesh0_, grid_));
    }

    double baseline() const { return c0_; }

    double operator()(double delta_t_ma, double delta_t_nb) const {
        if (!(delta_t_ma >= 0.0) || !(delta_t_nb >= 0.0)) throw InvalidParameter("thickness changes must be non-negative");
        if (!(delta_t_nb < base_.t_nb)) throw InvalidParameter("metal consumption exceeds thickness");
        CpsGeometry thin = base_;
        thin.t_nb = base_.t_nb - delta_t_nb;
        const Mesh mesh1 = delta_t_nb > 0.0 ? morph_metal_thickness(mesh0_, base_.t_nb, thin.t_nb, t_min_) : mesh0_;
        const double c1 = delta_t_nb > 0.0 ? capacitance(solve_on_mesh(thin, mesh1, grid_)) : c0_;
        if (delta_t_ma == 0.0) return (c1 - c0_) / c0_;

        // Linear extrapolation in oxide thickness from one thin probe layer.
        CpsGeometry oxide = thin;
        oxide.t_ma = t_min_;
        const double c2 = capacitance(solve_on_mesh(oxide, mesh1, grid_));
        const double gamma = (c2 - c1) / c1;
        const double c3 = (1.0 + delta_t_ma * gamma / t_min_) * c1;
        return (c3 - c0_) / c0_;
    }

private:
    GridSpec grid_;
    CpsGeometry base_;
    double t_min_ = 0.0;
    Mesh mesh0_;
    double c0_ = 0.0;
};

inline double capacitance_shift(const CpsGeometry& geom, double delta_t_ma, double delta_t_nb,
                                const GridSpec& grid = {}) {
    if (!(delta_t_ma >= 0.0) || !(delta_t_nb >= 0.0)) throw InvalidParameter("thickness changes must be non-negative");
    if (!(geom.t_nb > 0.0) || !(delta_t_nb < geom.t_nb)) throw InvalidParameter("metal consumption exceeds thickness");
    return CapacitanceShiftModel(geom, grid)(delta_t_ma, delta_t_nb);
}

}  // namespace nbres
