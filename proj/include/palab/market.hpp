#pragma once

#include <Eigen/Dense>

namespace palab {

/// Constant-coefficient market: m risky assets driven by a d-dimensional
/// Brownian motion, plus the agent's benchmark, risk aversion and the box C
/// of admissible strategies.
struct MarketParams {
    Eigen::VectorXd b;      ///< drift, length m
    Eigen::MatrixXd sigma;  ///< volatility, m x d
    double x0 = 5.0;        ///< initial wealth
    Eigen::VectorXd alpha;  ///< benchmark strategy, length m
    double eta = 1.0;       ///< agent risk aversion
    Eigen::VectorXd c_lo;   ///< lower corner of C
    Eigen::VectorXd c_hi;   ///< upper corner of C
    double ellipticity_floor = 1e-10;

    Eigen::Index assets() const { return b.size(); }
    Eigen::Index factors() const { return sigma.cols(); }

    /// sigma * sigma^T.
    Eigen::MatrixXd covariance() const { return sigma * sigma.transpose(); }

    /// Checks dimensions, eta > 0, c_lo <= c_hi and ellipticity. Throws
    /// DomainError or EllipticityError.
    void validate() const;

    /// Single asset, single factor market.
    static MarketParams scalar(double b, double sigma, double x0 = 5.0, double alpha = 0.0,
                               double eta = 1.0, double c_lo = 0.0, double c_hi = 1.0);
};

/// theta = sigma^T (sigma sigma^T)^{-1} b.
Eigen::VectorXd risk_premium(const MarketParams& p);

/// One Euler step of X_t = x + int pi sigma dW + int pi b ds.
double wealth_step(double x, const Eigen::VectorXd& pi, const MarketParams& p,
                   const Eigen::VectorXd& dW, double dt);

/// Same step written through beta = pi sigma: x + beta theta dt + beta dW.
double wealth_step_beta(double x, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& dW, double dt);

}  // namespace palab
