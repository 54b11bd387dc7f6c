#include <gtest/gtest.h>

#include <random>

#include "nbres/loss_budget.hpp"

using namespace nbres;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

struct TableRow {
    const char* id;
    double f0;
    double ma, ms, sa, corner;
    double q_int, q_extr;
    double alpha;
};

// Design values per device with kinetic fractions from the filament solver.
constexpr TableRow kRows[] = {
    {"CPS1", 4.495e9, 29.7, 196, 192, 41.5, 1.5e6, 250e6, 0.0129},
    {"CPS2", 4.986e9, 21.7, 142, 138, 30.4, 1.7e6, 340e6, 0.0096},
    {"CPS3", 5.470e9, 17.4, 106, 103, 24.0, 2.0e6, 97e6, 0.0076},
    {"CPS4", 5.959e9, 14.4, 77.5, 74.8, 19.7, 2.0e6, 12e6, 0.0062},
};

BudgetSystem table_system() {
    BudgetSystem s;
    for (const auto& r : kRows)
        s.rows.push_back({r.id, intrinsic_q(r.q_int, r.q_extr), r.ma + r.corner / 2, r.ms + r.corner / 2, r.sa,
                          quasiparticle_coefficient(r.alpha, r.f0)});
    return s;
}

// Rows with independent random coefficients, losses from known unknowns.
BudgetSystem random_system(unsigned seed, int n, const Eigen::Vector4d& truth) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> p(5.0, 300.0), q(0.5, 5.0);
    BudgetSystem s;
    for (int i = 0; i < n; ++i) {
        BudgetRow r{"D" + std::to_string(i), 0.0, p(rng), p(rng), p(rng), q(rng)};
        const double loss = (r.p_ma_eff * truth(0) + r.p_ms_eff * truth(1) + r.p_sa * truth(2)) * 1e-6 + r.qp_coeff * truth(3);
        r.q_intr = 1.0 / loss;
        s.rows.push_back(r);
    }
    return s;
}

}  // namespace

TEST(IntrinsicQ, TableRows) {
    const double expect[] = {1.5e6, 1.7e6, 2.0e6, 2.5e6};
    for (int i = 0; i < 4; ++i) {
        const double q = intrinsic_q(kRows[i].q_int, kRows[i].q_extr);
        EXPECT_NEAR(q / expect[i], 1.0, 0.05) << kRows[i].id;
    }
    EXPECT_NEAR(intrinsic_q(2.0e6, 12e6), 2.4e6, 1e-6);
    EXPECT_NEAR(intrinsic_q(1.5e6, 250e6), 1.0 / (1.0 / 1.5e6 - 1.0 / 250e6), 1e-6);
}

TEST(IntrinsicQ, ExtrinsicShareByDevice) {
    for (int i = 0; i < 3; ++i) {
        const double q = intrinsic_q(kRows[i].q_int, kRows[i].q_extr);
        EXPECT_LT(std::abs(q - kRows[i].q_int) / kRows[i].q_int, 0.05);
    }
    const double d = std::abs(intrinsic_q(kRows[3].q_int, kRows[3].q_extr) - kRows[3].q_int) / kRows[3].q_int;
    EXPECT_GT(d, 0.19);
    EXPECT_LT(d, 0.26);
}

TEST(IntrinsicQ, LimitsAndErrors) {
    EXPECT_EQ(intrinsic_q(1.7e6, std::numeric_limits<double>::infinity()), 1.7e6);
    EXPECT_THROW(intrinsic_q(2e6, 2e6), NonPhysical);
    EXPECT_THROW(intrinsic_q(2e6, 1e6), NonPhysical);
    EXPECT_THROW(intrinsic_q(-1.0, 1e6), InvalidParameter);
}

TEST(IntrinsicQ, ReconstructsTotal) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lq(5.0, 7.0), ratio(1.01, 1000.0);
    for (int k = 0; k < 200; ++k) {
        const double q_int = std::pow(10.0, lq(rng));
        const double q_extr = q_int * ratio(rng);
        const double q_intr = intrinsic_q(q_int, q_extr);
        EXPECT_NEAR((1.0 / q_intr + 1.0 / q_extr) * q_int, 1.0, 1e-12);
    }
}

TEST(AnomalousSkin, CorrectionIdentities) {
    EXPECT_EQ(ase_correct(1e7, 5e10, 5e10), 1e7);
    EXPECT_NEAR(ase_correct(1.0, 64.0, 1.0), 2.0, 2e-12);
    const double wc = kTwoPi * 7.687e9;
    for (const auto& r : kRows) EXPECT_GT(ase_correct(1.0, wc, kTwoPi * r.f0), 1.0);
    // Chained corrections equal the direct one.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> w(1e9, 1e11);
    for (int k = 0; k < 50; ++k) {
        const double a = w(rng), m = w(rng), b = w(rng);
        EXPECT_NEAR(ase_correct(ase_correct(3e7, a, m), m, b) / ase_correct(3e7, a, b), 1.0, 1e-12);
    }
    EXPECT_THROW(ase_correct(1.0, 0.0, 1.0), InvalidParameter);
}

TEST(AnomalousSkin, WallResistanceLaws) {
    ExtrinsicModel m;
    EXPECT_NEAR(wall_resistance_at(m.omega_cavity, m, WallLaw::Classical), 4.60e-3, 1e-17);
    EXPECT_NEAR(wall_resistance_at(m.omega_cavity, m, WallLaw::Anomalous), 4.60e-3, 1e-17);
    const double w4 = 4.0 * m.omega_cavity;
    EXPECT_NEAR(wall_resistance_at(w4, m, WallLaw::Classical) / 4.60e-3, 2.0, 1e-12);
    EXPECT_NEAR(wall_resistance_at(w4, m, WallLaw::Anomalous) / 4.60e-3, std::cbrt(16.0), 1e-12);
    for (double ratio : {0.3, 0.58, 0.78, 1.7, 9.0}) {
        const double w = ratio * m.omega_cavity;
        const double r = wall_resistance_at(w, m, WallLaw::Anomalous) / wall_resistance_at(w, m, WallLaw::Classical);
        EXPECT_NEAR(r / std::pow(ratio, 1.0 / 6.0), 1.0, 1e-12);
    }
    m.r_meas_cavity = 0.0;
    EXPECT_THROW(wall_resistance_at(1e10, m, WallLaw::Classical), InvalidParameter);
}

TEST(Budget, QuasiparticleCoefficientMatchesBound) {
    MaterialConstants mc;
    const double qr = 8e6, f0 = 5.47e9, alpha = 0.0076;
    const double coef = quasiparticle_coefficient(alpha, f0, mc);
    EXPECT_NEAR(quasiparticle_bound(qr, alpha, f0, mc) * coef * qr, 1.0, 1e-12);
}

TEST(Budget, WellConditionedRoundTrip) {
    const Eigen::Vector4d truth(7e-3, 2e-3, 3e-3, 5e-8);
    const auto sys = random_system(11, 6, truth);
    const auto sol = solve_budget(sys);
    EXPECT_FALSE(sol.collinear);
    EXPECT_LT(sol.condition_number, 1e3);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(sol.vector()(i) / truth(i), 1.0, 1e-8) << i;
    const auto nn = solve_budget(sys, BudgetMethod::NonNegative);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(nn.vector()(i) / truth(i), 1.0, 1e-8) << i;
}

TEST(Budget, TableMatrixIsCollinear) {
    const auto sol = solve_budget(table_system());
    EXPECT_GT(sol.condition_number, 1e3);
    EXPECT_TRUE(sol.collinear);
    EXPECT_FALSE(sol.warnings.empty());
}

TEST(Budget, ThresholdIsConfigurable) {
    const auto sol = solve_budget(table_system(), BudgetMethod::Direct, 1e6);
    EXPECT_FALSE(sol.collinear);
}

TEST(Budget, ZeroLossGivesZeroUnknowns) {
    auto sys = random_system(5, 5, Eigen::Vector4d(1e-3, 1e-3, 1e-3, 1e-8));
    for (auto& r : sys.rows) r.q_intr = std::numeric_limits<double>::infinity();
    const auto sol = solve_budget(sys, BudgetMethod::NonNegative);
    EXPECT_EQ(sol.vector(), Eigen::Vector4d::Zero());
}

TEST(Budget, DirectResidualNeverWorse) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n01;
    for (unsigned seed = 0; seed < 30; ++seed) {
        auto sys = random_system(100 + seed, 7, Eigen::Vector4d(1e-3, 2e-3, 1e-3, 1e-8));
        for (auto& r : sys.rows) r.q_intr /= std::max(0.2, 1.0 + 0.5 * n01(rng));
        const auto d = solve_budget(sys);
        const auto nn = solve_budget(sys, BudgetMethod::NonNegative);
        EXPECT_LE(d.residual_norm, nn.residual_norm * (1.0 + 1e-12));
        EXPECT_TRUE((nn.vector().array() >= 0.0).all());
    }
}

TEST(Budget, NonNegativeSatisfiesOptimality) {
    // Karush-Kuhn-Tucker: zero gradient on the support, non-negative off it.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    for (unsigned seed = 0; seed < 20; ++seed) {
        auto sys = random_system(200 + seed, 6, Eigen::Vector4d(2e-3, -1e-3, 1e-3, 1e-8));
        for (auto& r : sys.rows) r.q_intr = std::abs(r.q_intr) / std::max(0.2, 1.0 + 0.3 * n01(rng));
        const auto sol = solve_budget(sys, BudgetMethod::NonNegative);
        const Eigen::MatrixXd a = sys.design();
        const Eigen::VectorXd x = sol.vector();
        const Eigen::VectorXd g = a.transpose() * (a * x - sys.losses());
        for (int j = 0; j < 4; ++j) {
            const double tol = 1e-9 * a.col(j).norm() * sys.losses().norm();
            if (x(j) > 0.0) {
                EXPECT_NEAR(g(j), 0.0, tol) << seed << " " << j;
            } else {
                EXPECT_GE(g(j), -tol) << seed << " " << j;
            }
        }
    }
}

TEST(Budget, RejectsUnderdeterminedAndBadRows) {
    auto sys = table_system();
    sys.rows.pop_back();
    EXPECT_THROW(solve_budget(sys), Underdetermined);
    sys = table_system();
    sys.rows[0].p_sa = -1.0;
    EXPECT_THROW(solve_budget(sys), InvalidParameter);
}
