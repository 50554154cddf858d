#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "palab/market.hpp"

namespace palab {

/// Positive-definiteness margin on I - g_x sigma sigma^T.
inline constexpr double kPdMargin = 1e-8;

/// The principal's incentive controls at one state: asset incentive z,
/// wealth incentive z_x, covariation incentive g, quadratic-variation
/// incentive g_x and the default-jump compensation u.
struct ControlTuple {
    Eigen::VectorXd z;
    double z_x = 0.0;
    Eigen::VectorXd g;
    double g_x = 0.0;
    double u = 0.0;

    static ControlTuple zeros(Eigen::Index m);
    static ControlTuple scalar(double z, double z_x, double g, double g_x, double u);

    double squared_norm() const { return z.squaredNorm() + z_x * z_x + g.squaredNorm() + g_x * g_x + u * u; }
};

/// Agent's concave quadratic program nu -> -nu Q nu^T + nu . ell + c.
struct QForm {
    Eigen::MatrixXd Q;
    Eigen::VectorXd ell;
    double c = 0.0;
};

/// Nearest point of the box [lo, hi] to x in the Q-norm.
struct QProjection {
    Eigen::VectorXd point;
    double distance = 0.0;  ///< (x - point)^T Q (x - point)
};

/// x^T Q x.
double q_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& Q);

/// Q-projection onto a box by a primal active-set method (exact clamping when
/// Q is diagonal). Throws AdmissibilityError when Q is not positive definite.
QProjection q_project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                      const Eigen::VectorXd& hi, const Eigen::MatrixXd& Q);

/// inf over y in [lo, hi] of q_norm(x - y, Q).
double q_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
              const Eigen::MatrixXd& Q);

/// I - g_x sigma sigma^T has smallest eigenvalue above `margin`.
bool is_admissible(const MarketParams& p, const ControlTuple& ct, double margin = kPdMargin);

/// Throws AdmissibilityError unless is_admissible(p, ct, margin).
void require_admissible(const MarketParams& p, const ControlTuple& ct, double margin = kPdMargin);

/// Q = (I - g_x sigma sigma^T) / 2,
/// ell = z_x b + sigma sigma^T g + alpha - eta z_x sigma sigma^T z,
/// c = z.b - |alpha|^2 / 2 - (lambda / eta)(exp(-eta u) - 1) - (eta / 2) z sigma sigma^T z.
QForm build_qform(const MarketParams& p, const ControlTuple& ct, double lambda = 0.0);

/// Unconstrained maximiser e = Q^{-1} ell / 2.
Eigen::VectorXd unconstrained_strategy(const MarketParams& p, const ControlTuple& ct);

/// pi* = Q-projection of e onto C.
Eigen::VectorXd agent_strategy(const MarketParams& p, const ControlTuple& ct);

/// The contract Hamiltonian f(nu) for a given hazard rate.
double raw_f(const MarketParams& p, const ControlTuple& ct, double lambda, const Eigen::VectorXd& nu);

/// F = sup over C of f, evaluated as f(pi*).
double generator_F(const MarketParams& p, const ControlTuple& ct, double lambda);

/// Diagnostic closed form ell Q^{-1} ell / 4 + c - dist_Q(e, C). Agrees with
/// generator_F.
double generator_F_closed_form(const MarketParams& p, const ControlTuple& ct, double lambda);

/// Fixed compensation that meets the reservation utility R < 0: -log(-R) / eta.
double reservation_y0(double R, double eta);

/// Single-asset fast path used inside the solvers. Every member mirrors the
/// general function of the same name for m = 1.
struct ScalarMarket {
    double b = 0.0;
    double cov = 0.0;  ///< sigma sigma^T
    double vol = 0.0;  ///< sigma (d = 1)
    double alpha = 0.0;
    double eta = 1.0;
    double lo = 0.0;
    double hi = 1.0;

    static ScalarMarket from(const MarketParams& p);

    bool admissible(double g_x, double margin = kPdMargin) const { return 1.0 - g_x * cov > margin; }

    double strategy(double z, double z_x, double g, double g_x) const {
        const double e = (z_x * b + cov * g + alpha - eta * z_x * cov * z) / (1.0 - g_x * cov);
        return e < lo ? lo : (e > hi ? hi : e);
    }

    /// f without the jump term, at strategy nu.
    double f_no_jump(double z, double z_x, double g, double g_x, double nu) const {
        const double dev = nu - alpha;
        return z * b + z_x * nu * b + 0.5 * g_x * nu * nu * cov - 0.5 * dev * dev + g * nu * cov -
               0.5 * eta * z * z * cov - eta * z_x * nu * cov * z;
    }

    /// -(lambda / eta)(exp(-eta u) - 1).
    double jump_term(double lambda, double u) const { return -(lambda / eta) * std::expm1(-eta * u); }
};

}  // namespace palab
