#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "nbres/regrowth.hpp"

using namespace nbres;

namespace {

struct Device {
    const char* id;
    double gap;
    double f0;
    double length;
    double p_ma_eff;  // Table-style MA plus half the corner
    double q_intr;
};

constexpr Device kDevices[] = {
    {"CPS1", 10e-6, 4.495e9, 7.110e-3, 29.7 + 41.5 / 2, 1.5e6},
    {"CPS2", 22e-6, 4.986e9, 6.410e-3, 21.7 + 30.4 / 2, 1.7e6},
    {"CPS3", 46e-6, 5.470e9, 5.842e-3, 17.4 + 24.0 / 2, 2.0e6},
    {"CPS4", 100e-6, 5.959e9, 5.363e-3, 14.4 + 19.7 / 2, 2.5e6},
};

CpsGeometry geometry(const Device& d) {
    CpsGeometry g;
    g.gap = d.gap;
    g.length = d.length;
    return g;
}

// Cheap stand-in forward models with a little curvature, one per device.
std::map<std::string, ShiftCurve> toy_curves() {
    std::map<std::string, ShiftCurve> m;
    const double slope[] = {6.3e4, 4.6e4, 3.6e4, 3.0e4};
    for (int i = 0; i < 4; ++i) {
        const double a = slope[i];
        m[kDevices[i].id] = [a](double t) { return -a * t * (1.0 + 2e6 * t); };
    }
    return m;
}

std::vector<RegrowthObservation> synth(const std::map<std::string, ShiftCurve>& curves, double t,
                                       double noise = 0.0, unsigned seed = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::vector<RegrowthObservation> obs;
    for (const auto& d : kDevices) {
        const double s = curves.at(d.id)(t) * (1.0 + noise * n01(rng));
        obs.push_back({d.id, d.f0, d.f0 * (1.0 + s), d.q_intr, 0.7 * d.q_intr, d.p_ma_eff});
    }
    return obs;
}

}  // namespace

TEST(Stoichiometry, BetaFromAtomicMasses) {
    StoichiometryModel m;
    EXPECT_NEAR(m.beta_stoich(), 185.812 / 265.807, 1e-12);
    EXPECT_NEAR(m.beta_stoich(), 0.6990, 5e-4);
    EXPECT_GT(m.beta_stoich(), 0.0);
    EXPECT_LT(m.beta_stoich(), 1.0);
}

TEST(Stoichiometry, ConsumptionIsLinearAndLessThanOxide) {
    StoichiometryModel m;
    EXPECT_EQ(nb_consumption(0.0, m), 0.0);
    const double r = nb_consumption(1e-9, m) / 1e-9;
    EXPECT_NEAR(r, 0.6990 * 4600.0 / 8570.0, 1e-3);
    EXPECT_LT(r, 1.0);
    EXPECT_DOUBLE_EQ(nb_consumption(3e-9, m), 3.0 * nb_consumption(1e-9, m));
    EXPECT_THROW(nb_consumption(-1e-9, m), InvalidParameter);
    m.rho_nb = 0.0;
    EXPECT_THROW(nb_consumption(1e-9, m), InvalidParameter);
}

TEST(Stoichiometry, FromMaterialConstants) {
    MaterialConstants mc;
    mc.rho_nb2o5 = 4550.0;
    const auto m = StoichiometryModel::from(mc);
    EXPECT_EQ(m.rho_nb2o5, 4550.0);
    EXPECT_EQ(m.a_nb, mc.a_nb);
}

TEST(FrequencyShift, ZeroWithoutRegrowth) {
    EXPECT_EQ(frequency_shift(0.0, geometry(kDevices[0]), kDevices[0].f0, 39e-9), 0.0);
    EXPECT_THROW(frequency_shift(-1e-9, geometry(kDevices[0]), kDevices[0].f0, 39e-9), InvalidParameter);
}

TEST(FrequencyShift, NegativeAndMonotone) {
    for (const auto& d : {kDevices[0], kDevices[3]}) {
        FrequencyShiftModel m(geometry(d), d.f0, 39e-9);
        double prev = 0.0;
        for (double t : {1e-9, 2.5e-9, 5e-9}) {
            const double s = m(t);
            EXPECT_LT(s, prev) << d.id << " " << t;
            prev = s;
        }
    }
}

TEST(FrequencyShift, CombinesBothShiftsToFirstOrder) {
    const auto& d = kDevices[1];
    FrequencyShiftModel m(geometry(d), d.f0, 39e-9);
    const double t = 2.5e-9;
    const double dt_nb = nb_consumption(t);
    const double gc = capacitance_shift(geometry(d), t, dt_nb);
    const double gl = inductance_shift(geometry(d), dt_nb, d.f0, 39e-9);
    EXPECT_GT(gc, 0.0);
    EXPECT_GT(gl, 0.0);
    EXPECT_NEAR(m(t), -0.5 * (gc + gl), 1e-12);
    // Exact 1/sqrt((1+gc)(1+gl)) - 1 differs only at second order.
    EXPECT_NEAR(m(t), 1.0 / std::sqrt((1.0 + gc) * (1.0 + gl)) - 1.0, 2.0 * (gc + gl) * (gc + gl));
}

TEST(FrequencyShift, OrderedByGeometry) {
    double prev = -1.0;
    for (const auto& d : kDevices) {
        const double mag = -frequency_shift(2.5e-9, geometry(d), d.f0, 39e-9);
        EXPECT_GT(mag, 1e-5) << d.id;
        EXPECT_LT(mag, 1e-3) << d.id;
        if (prev > 0.0) {
            EXPECT_LT(mag, prev) << d.id;
        }
        prev = mag;
    }
}

TEST(FrequencyShift, LinearForThinOxide) {
    const auto& d = kDevices[0];
    FrequencyShiftModel m(geometry(d), d.f0, 39e-9);
    const double s_small = m(0.25e-9) / 0.25e-9;
    const double s_large = m(1e-9) / 1e-9;
    EXPECT_NEAR(s_small / s_large, 1.0, 0.03);
}

TEST(InvertThickness, SolverRoundTrip) {
    const auto& d = kDevices[2];
    auto model = std::make_shared<FrequencyShiftModel>(geometry(d), d.f0, 39e-9);
    std::map<std::string, ShiftCurve> curves{{d.id, [model](double t) { return (*model)(t); }}};
    const double truth = 1.2e-9;
    const double s = (*model)(truth);
    std::vector<RegrowthObservation> obs{{d.id, d.f0, d.f0 * (1.0 + s), d.q_intr, 0.7 * d.q_intr, d.p_ma_eff}};
    InversionOptions opt;
    opt.bits = 24;
    const auto est = invert_thickness(obs, curves, opt);
    EXPECT_NEAR(est.delta_t_ma / truth, 1.0, 0.02);
}

TEST(InvertThickness, ToyRoundTripAcrossRange) {
    const auto curves = toy_curves();
    for (double t : {0.5e-9, 1e-9, 2.5e-9, 5e-9}) {
        const auto est = invert_thickness(synth(curves, t), curves);
        EXPECT_NEAR(est.delta_t_ma / t, 1.0, 1e-6) << t;
        EXPECT_LT(est.cost, 1e-20);
        ASSERT_TRUE(est.sigma.has_value());
        EXPECT_LT(*est.sigma, 1e-3 * t);
    }
}

TEST(InvertThickness, SingleObservationInterpolatesExactly) {
    const auto curves = toy_curves();
    auto obs = synth(curves, 3.3e-9);
    obs.resize(1);
    const auto est = invert_thickness(obs, curves);
    EXPECT_NEAR(est.delta_t_ma, 3.3e-9, 1e-14);
    EXPECT_LT(est.cost, 1e-24);
    EXPECT_FALSE(est.sigma.has_value());
}

TEST(InvertThickness, NoisyMedianWithinTenPercent) {
    const auto curves = toy_curves();
    const double truth = 2.5e-9;
    std::vector<double> err;
    int covered = 0;
    for (unsigned seed = 1; seed <= 50; ++seed) {
        const auto est = invert_thickness(synth(curves, truth, 0.10, seed), curves);
        err.push_back(std::abs(est.delta_t_ma / truth - 1.0));
        if (est.sigma && std::abs(est.delta_t_ma - truth) < *est.sigma) ++covered;
    }
    std::nth_element(err.begin(), err.begin() + 25, err.end());
    EXPECT_LT(err[25], 0.10);
    // A 1-sigma interval should catch roughly two thirds of the truths.
    EXPECT_GT(covered, 15);
    EXPECT_LT(covered, 45);
}

TEST(InvertThickness, RejectsAbsentSignal) {
    const auto curves = toy_curves();
    auto obs = synth(curves, 2e-9);
    for (auto& o : obs) o.f0_after = o.f0_before * (1.0 + 1e-6);
    EXPECT_THROW(invert_thickness(obs, curves), NoRegrowthSignal);
    for (auto& o : obs) o.f0_after = o.f0_before;
    EXPECT_THROW(invert_thickness(obs, curves), NoRegrowthSignal);
    EXPECT_THROW(invert_thickness({}, curves), EmptySelection);
}

TEST(InvertThickness, UpwardDeviceIsFlagged) {
    const auto curves = toy_curves();
    auto obs = synth(curves, 2e-9);
    obs[3].f0_after = obs[3].f0_before * (1.0 + 1e-6);
    const auto est = invert_thickness(obs, curves);
    EXPECT_FALSE(est.warnings.empty());
}

TEST(InvertThickness, UnknownDeviceRejected) {
    const auto curves = toy_curves();
    auto obs = synth(curves, 2e-9);
    obs[0].device_id = "CPS9";
    EXPECT_THROW(invert_thickness(obs, curves), InvalidParameter);
}

TEST(LossTangent, WorkedExample) {
    std::vector<RegrowthObservation> obs{{"CPS3", 5.47e9, 5.4695e9, 2.0e6, 1.4e6, 29.4}};
    const auto r = extract_ma_loss_tangent(obs, 2.5e-9);
    EXPECT_NEAR(r.devices[0].tan_delta, (1.0 / 1.4e6 - 1.0 / 2.0e6) / (29.4e-6 * 2.5), 1e-15);
    EXPECT_NEAR(r.devices[0].tan_delta, 2.9e-3, 0.05e-3);
    EXPECT_FALSE(r.standard_error.has_value());
}

TEST(LossTangent, UnchangedQGivesZeroWithFlag) {
    std::vector<RegrowthObservation> obs{{"CPS1", 4.495e9, 4.494e9, 1.5e6, 1.5e6, 50.45}};
    const auto r = extract_ma_loss_tangent(obs, 2.5e-9);
    EXPECT_EQ(r.devices[0].tan_delta, 0.0);
    EXPECT_TRUE(r.devices[0].q_not_degraded);
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(LossTangent, ImprovedQReportedNegative) {
    std::vector<RegrowthObservation> obs{{"CPS1", 4.495e9, 4.494e9, 1.5e6, 1.6e6, 50.45}};
    const auto r = extract_ma_loss_tangent(obs, 2.5e-9);
    EXPECT_LT(r.devices[0].tan_delta, 0.0);
    EXPECT_TRUE(r.devices[0].q_not_degraded);
}

TEST(LossTangent, InverseInThickness) {
    const auto obs = synth(toy_curves(), 2e-9);
    const auto a = extract_ma_loss_tangent(obs, 2.5e-9);
    const auto b = extract_ma_loss_tangent(obs, 5e-9);
    for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_EQ(b.devices[i].tan_delta, 0.5 * a.devices[i].tan_delta);
}

TEST(LossTangent, OrderInvariantAverage) {
    auto obs = synth(toy_curves(), 2e-9);
    const auto a = extract_ma_loss_tangent(obs, 2.5e-9);
    std::reverse(obs.begin(), obs.end());
    std::swap(obs[0], obs[2]);
    const auto b = extract_ma_loss_tangent(obs, 2.5e-9);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(*a.standard_error, *b.standard_error);
}

TEST(LossTangent, UniformDegradationAverageAndBound) {
    // Thirty percent lower Q after re-exposure on every device.
    const auto obs = synth(toy_curves(), 2.5e-9);
    const auto r = extract_ma_loss_tangent(obs, 2.5e-9);
    double sum = 0.0;
    for (const auto& d : kDevices) sum += (1.0 / (0.7 * d.q_intr) - 1.0 / d.q_intr) / (d.p_ma_eff * 1e-6 * 2.5);
    EXPECT_NEAR(r.mean, sum / 4.0, 1e-15);
    EXPECT_GT(r.mean, 2.2e-3);
    EXPECT_LT(r.mean, 3.6e-3);
    ASSERT_TRUE(r.standard_error.has_value());
    EXPECT_GT(*r.standard_error, 0.0);
    // Never exceeds the thickness-loss-tangent bound from the TLS fit.
    const double bound_nm = interface_bound(1.0 / 3.4e6, kDevices[2].p_ma_eff);
    EXPECT_LE(r.mean * 2.5, bound_nm);
}

TEST(LossTangent, RejectsBadInput) {
    auto obs = synth(toy_curves(), 2e-9);
    EXPECT_THROW(extract_ma_loss_tangent(obs, 0.0), InvalidParameter);
    EXPECT_THROW(extract_ma_loss_tangent({}, 1e-9), EmptySelection);
    obs[1].p_tilde_ma_eff = 0.0;
    EXPECT_THROW(extract_ma_loss_tangent(obs, 1e-9), InvalidParameter);
}
