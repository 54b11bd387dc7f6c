#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nbres/errors.hpp"

namespace nbres {

struct LmOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;  // relative (scaled) step norm
    double cost_tolerance = 1e-12;  // relative cost change, actual and predicted
};

struct LmResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  // 0.5 * |r|^2
    int iterations = 0;
};

/// Damped Gauss-Newton with Marquardt diagonal scaling.
///
/// `model(x, r, J)` fills the residual vector and its Jacobian at x. The damped
/// subproblem is solved by QR on the augmented system [J; sqrt(mu D)] so that the
/// squared condition number of J^T J never enters. Throws ConvergenceError with
/// the best iterate when `max_iterations` is exhausted.
template <class Model>
LmResult levenberg_marquardt(Model&& model, Eigen::VectorXd x0, const LmOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    model(x0, r, J);
    const Eigen::Index m = r.size();
    if (m < n) throw IllPosedFit("fewer residuals than parameters");

    LmResult best{x0, r, J, 0.5 * r.squaredNorm(), 0};
    if (!std::isfinite(best.cost)) throw InvalidParameter("non-finite residual at the initial point");

    Eigen::VectorXd diag = J.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(diag[i] > 0.0)) diag[i] = 1.0;
    double mu = 1e-3;
    const double tiny = std::numeric_limits<double>::min() * 1e10;

    Eigen::MatrixXd aug(m + n, n);
    Eigen::VectorXd rhs(m + n);
    Eigen::VectorXd r_new;
    Eigen::MatrixXd J_new;

    for (int it = 1; it <= opt.max_iterations; ++it) {
        best.iterations = it;
        if (best.cost <= tiny) return best;

        const Eigen::VectorXd col = J.colwise().squaredNorm().transpose();
        diag = diag.cwiseMax(col);

        aug.topRows(m) = J;
        aug.bottomRows(n) = (mu * diag).cwiseSqrt().asDiagonal();
        rhs.head(m) = -r;
        rhs.tail(n).setZero();
        const Eigen::VectorXd step = aug.colPivHouseholderQr().solve(rhs);

        const double scaled_step = diag.cwiseSqrt().cwiseProduct(step).norm();
        const double scaled_x = diag.cwiseSqrt().cwiseProduct(best.x).norm();
        const double predicted = best.cost - 0.5 * (r + J * step).squaredNorm();

        const Eigen::VectorXd x_try = best.x + step;
        model(x_try, r_new, J_new);
        const double cost_try = 0.5 * r_new.squaredNorm();

        if (std::isfinite(cost_try) && cost_try < best.cost) {
            const double actual = best.cost - cost_try;
            const double rho = predicted > 0.0 ? actual / predicted : 0.0;
            const double old_cost = best.cost;
            best.x = x_try;
            best.cost = cost_try;
            r = r_new;
            J = J_new;
            best.residual = r;
            best.jacobian = J;
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            if (scaled_step <= opt.step_tolerance * (scaled_x + opt.step_tolerance)) return best;
            if (actual <= opt.cost_tolerance * old_cost && predicted <= opt.cost_tolerance * old_cost)
                return best;
        } else {
            mu *= 4.0;
            // A rejected step that is already below the step tolerance means the
            // model cannot improve further at working precision.
            if (scaled_step <= opt.step_tolerance * (scaled_x + opt.step_tolerance) && mu > 1e6) return best;
            if (mu > 1e30) return best;
        }
    }
    throw ConvergenceError("Levenberg-Marquardt did not converge in " + std::to_string(opt.max_iterations) +
                               " iterations",
                           std::vector<double>(best.x.data(), best.x.data() + best.x.size()));
}

/// Covariance sigma^2 (J^T J)^-1 by SVD. Directions with singular value below
/// `rcond * s_max` are treated as unidentifiable: every parameter with a
/// non-negligible loading on them gets infinite variance.
inline Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& J, double sigma2, double rcond = 1e-13,
                                                bool* singular = nullptr) {
    const Eigen::Index n = J.cols();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const Eigen::MatrixXd& V = svd.matrixV();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    bool degenerate = false;
    std::vector<bool> poisoned(static_cast<std::size_t>(n), false);
    const double smax = s.size() ? s[0] : 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s[k] > rcond * smax && s[k] > 0.0) {
            cov += (sigma2 / (s[k] * s[k])) * V.col(k) * V.col(k).transpose();
        } else {
            degenerate = true;
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(V(i, k)) > 1e-6) poisoned[static_cast<std::size_t>(i)] = true;
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!poisoned[static_cast<std::size_t>(i)]) continue;
        cov.row(i).setZero();
        cov.col(i).setZero();
        cov(i, i) = inf;
    }
    if (singular) *singular = degenerate;
    return cov;
}

}  // namespace nbres
