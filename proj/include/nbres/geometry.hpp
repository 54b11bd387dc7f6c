#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "nbres/errors.hpp"

namespace nbres {

/// Cross-section and length of one coplanar-stripline resonator. Lengths in
/// metres. Two strips of `width` sit symmetrically about x = 0 with `gap`
/// between them; the substrate fills y < 0.
struct CpsGeometry {
    double width = 10e-6;
    double gap = 10e-6;
    double length = 5e-3;
    double t_nb = 145e-9;
    double eps_substrate = 10.0;                  // perpendicular (y) component
    std::optional<double> eps_substrate_parallel;  // in-plane (x); isotropic when empty
    double eps_interface = 10.0;
    double eps_ambient = 1.0;
    double t_ma = 0.0;
    double t_ms = 0.0;
    double t_sa = 0.0;

    double eps_substrate_x() const { return eps_substrate_parallel.value_or(eps_substrate); }
    double eps_substrate_y() const { return eps_substrate; }

    // Strip edges as distances from the centre line.
    double inner_edge() const { return 0.5 * gap; }
    double outer_edge() const { return 0.5 * gap + width; }

    void validate() const {
        auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!pos(width) || !pos(gap) || !pos(length)) throw InvalidParameter("width, gap and length must be positive");
        if (!(std::isfinite(t_nb) && t_nb >= 0.0)) throw InvalidParameter("metal thickness must be non-negative");
        if (!(eps_substrate >= 1.0) || !(eps_substrate_x() >= 1.0))
            throw InvalidParameter("substrate permittivity must be at least 1");
        if (!(eps_ambient >= 1.0)) throw InvalidParameter("ambient permittivity must be at least 1");
        if (!(eps_interface >= 1.0)) throw InvalidParameter("interface permittivity must be at least 1");
        for (double t : {t_ma, t_ms, t_sa})
            if (!(std::isfinite(t) && t >= 0.0)) throw InvalidParameter("interface thickness must be non-negative");
        const double limit = 0.5 * std::min(width, gap);
        for (double t : {t_ma, t_ms, t_sa})
            if (t >= limit) throw InvalidParameter("interface layer is not thin compared with the strip");
    }
};

}  // namespace nbres
