#include "palab/market.hpp"

#include <string>

#include "palab/errors.hpp"

namespace palab {

void MarketParams::validate() const {
    const auto m = b.size();
    if (m == 0) throw DomainError("market: drift vector b is empty");
    if (sigma.rows() != m || sigma.cols() == 0)
        throw DomainError("market: sigma must be " + std::to_string(m) + " x d");
    if (alpha.size() != m) throw DomainError("market: alpha must have length m");
    if (c_lo.size() != m || c_hi.size() != m) throw DomainError("market: C bounds must have length m");
    if (!(eta > 0.0)) throw DomainError("market: eta must be positive");
    if (!(ellipticity_floor > 0.0)) throw DomainError("market: ellipticity floor must be positive");
    for (Eigen::Index i = 0; i < m; ++i)
        if (!(c_lo[i] <= c_hi[i])) throw DomainError("market: c_lo must not exceed c_hi");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance(), Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > ellipticity_floor))
        throw EllipticityError("market: sigma sigma^T is not elliptic (smallest eigenvalue " +
                               std::to_string(eig.eigenvalues().minCoeff()) + ")");
}

MarketParams MarketParams::scalar(double b, double sigma, double x0, double alpha, double eta,
                                  double c_lo, double c_hi) {
    MarketParams p;
    p.b = Eigen::VectorXd::Constant(1, b);
    p.sigma = Eigen::MatrixXd::Constant(1, 1, sigma);
    p.x0 = x0;
    p.alpha = Eigen::VectorXd::Constant(1, alpha);
    p.eta = eta;
    p.c_lo = Eigen::VectorXd::Constant(1, c_lo);
    p.c_hi = Eigen::VectorXd::Constant(1, c_hi);
    return p;
}

Eigen::VectorXd risk_premium(const MarketParams& p) {
    p.validate();
    const Eigen::LDLT<Eigen::MatrixXd> cov(p.covariance());
    return p.sigma.transpose() * cov.solve(p.b);
}

double wealth_step(double x, const Eigen::VectorXd& pi, const MarketParams& p,
                   const Eigen::VectorXd& dW, double dt) {
    return x + pi.dot(p.b) * dt + pi.dot(p.sigma * dW);
}

double wealth_step_beta(double x, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& dW, double dt) {
    return x + beta.dot(theta) * dt + beta.dot(dW);
}

}  // namespace palab
