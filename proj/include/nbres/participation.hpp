#pragma once

#include <cmath>

namespace nbres {

/// Participation per unit interface thickness, in ppm/nm.
struct ParticipationSet {
    double ma = 0.0;
    double ms = 0.0;
    double sa = 0.0;
    double corner = 0.0;

    // The corner region is split evenly between the two metal interfaces.
    double ma_eff() const { return ma + 0.5 * corner; }
    double ms_eff() const { return ms + 0.5 * corner; }

    bool valid() const {
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
        return ok(ma) && ok(ms) && ok(sa) && ok(corner);
    }
};

}  // namespace nbres
