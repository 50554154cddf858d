#include "palab/contract.hpp"

#include <cmath>
#include <vector>

#include "palab/errors.hpp"

namespace palab {

namespace {

enum class Bound { Free, Lower, Upper };

void require_pd(const Eigen::MatrixXd& Q) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
        throw AdmissibilityError("Q-form is not positive definite");
}

bool is_diagonal(const Eigen::MatrixXd& Q) {
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
        for (Eigen::Index j = 0; j < Q.cols(); ++j)
            if (i != j && Q(i, j) != 0.0) return false;
    return true;
}

}  // namespace

ControlTuple ControlTuple::zeros(Eigen::Index m) {
    ControlTuple ct;
    ct.z = Eigen::VectorXd::Zero(m);
    ct.g = Eigen::VectorXd::Zero(m);
    return ct;
}

ControlTuple ControlTuple::scalar(double z, double z_x, double g, double g_x, double u) {
    ControlTuple ct;
    ct.z = Eigen::VectorXd::Constant(1, z);
    ct.z_x = z_x;
    ct.g = Eigen::VectorXd::Constant(1, g);
    ct.g_x = g_x;
    ct.u = u;
    return ct;
}

double q_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& Q) { return x.dot(Q * x); }

QProjection q_project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                      const Eigen::MatrixXd& Q) {
    require_pd(Q);
    const Eigen::Index m = x.size();
    QProjection out;
    out.point = x.cwiseMax(lo).cwiseMin(hi);
    if (is_diagonal(Q)) {
        out.distance = q_norm(x - out.point, Q);
        return out;
    }

    // Primal active-set iteration for min (y - x)^T Q (y - x) over the box,
    // started from the clamped point.
    Eigen::VectorXd& y = out.point;
    std::vector<Bound> state(static_cast<std::size_t>(m), Bound::Free);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (y[i] == lo[i] && x[i] < lo[i]) state[i] = Bound::Lower;
        else if (y[i] == hi[i] && x[i] > hi[i]) state[i] = Bound::Upper;
    }
    const int max_iter = 50 * static_cast<int>(m) + 50;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index i = 0; i < m; ++i)
            if (state[i] == Bound::Free) free_idx.push_back(i);

        Eigen::VectorXd step = Eigen::VectorXd::Zero(m);
        if (!free_idx.empty()) {
            const auto nf = static_cast<Eigen::Index>(free_idx.size());
            Eigen::MatrixXd qff(nf, nf);
            Eigen::VectorXd rhs(nf);
            const Eigen::VectorXd dev = y - x;
            for (Eigen::Index a = 0; a < nf; ++a) {
                rhs[a] = 0.0;
                for (Eigen::Index b = 0; b < nf; ++b) qff(a, b) = Q(free_idx[a], free_idx[b]);
                for (Eigen::Index j = 0; j < m; ++j)
                    if (state[j] != Bound::Free) rhs[a] -= Q(free_idx[a], j) * dev[j];
            }
            const Eigen::VectorXd target = qff.llt().solve(rhs);
            for (Eigen::Index a = 0; a < nf; ++a) step[free_idx[a]] = x[free_idx[a]] + target[a] - y[free_idx[a]];
        }

        if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + y.lpNorm<Eigen::Infinity>())) {
            // Stationary on the current face: check the multipliers of active bounds.
            const Eigen::VectorXd grad = 2.0 * Q * (y - x);
            Eigen::Index worst = -1;
            double worst_violation = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                double violation = 0.0;
                if (state[i] == Bound::Lower) violation = -grad[i];
                if (state[i] == Bound::Upper) violation = grad[i];
                if (violation > worst_violation) {
                    worst_violation = violation;
                    worst = i;
                }
            }
            if (worst < 0) break;
            state[worst] = Bound::Free;
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        Bound blocking_side = Bound::Free;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (state[i] != Bound::Free || step[i] == 0.0) continue;
            const double limit = step[i] < 0.0 ? (lo[i] - y[i]) / step[i] : (hi[i] - y[i]) / step[i];
            if (limit < alpha) {
                alpha = limit;
                blocking = i;
                blocking_side = step[i] < 0.0 ? Bound::Lower : Bound::Upper;
            }
        }
        y += alpha * step;
        if (blocking >= 0) {
            state[blocking] = blocking_side;
            y[blocking] = blocking_side == Bound::Lower ? lo[blocking] : hi[blocking];
        }
    }
    y = y.cwiseMax(lo).cwiseMin(hi);
    out.distance = q_norm(x - y, Q);
    return out;
}

double q_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
              const Eigen::MatrixXd& Q) {
    return q_project(x, lo, hi, Q).distance;
}

bool is_admissible(const MarketParams& p, const ControlTuple& ct, double margin) {
    const auto m = p.assets();
    const Eigen::MatrixXd shifted = Eigen::MatrixXd::Identity(m, m) - ct.g_x * p.covariance();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shifted, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() > margin;
}

void require_admissible(const MarketParams& p, const ControlTuple& ct, double margin) {
    if (!is_admissible(p, ct, margin))
        throw AdmissibilityError("control tuple is not admissible: I - g_x sigma sigma^T must be "
                                 "positive definite (g_x = " +
                                 std::to_string(ct.g_x) + ")");
}

QForm build_qform(const MarketParams& p, const ControlTuple& ct, double lambda) {
    require_admissible(p, ct);
    const auto m = p.assets();
    const Eigen::MatrixXd cov = p.covariance();
    QForm form;
    form.Q = 0.5 * (Eigen::MatrixXd::Identity(m, m) - ct.g_x * cov);
    form.ell = ct.z_x * p.b + cov * ct.g + p.alpha - p.eta * ct.z_x * (cov * ct.z);
    form.c = ct.z.dot(p.b) - 0.5 * p.alpha.squaredNorm() - (lambda / p.eta) * std::expm1(-p.eta * ct.u) -
             0.5 * p.eta * ct.z.dot(cov * ct.z);
    return form;
}

Eigen::VectorXd unconstrained_strategy(const MarketParams& p, const ControlTuple& ct) {
    const QForm form = build_qform(p, ct);
    return 0.5 * form.Q.llt().solve(form.ell);
}

Eigen::VectorXd agent_strategy(const MarketParams& p, const ControlTuple& ct) {
    const QForm form = build_qform(p, ct);
    const Eigen::VectorXd e = 0.5 * form.Q.llt().solve(form.ell);
    return q_project(e, p.c_lo, p.c_hi, form.Q).point;
}

double raw_f(const MarketParams& p, const ControlTuple& ct, double lambda, const Eigen::VectorXd& nu) {
    const Eigen::MatrixXd cov = p.covariance();
    const Eigen::VectorXd dev = nu - p.alpha;
    return ct.z.dot(p.b) + ct.z_x * nu.dot(p.b) + 0.5 * ct.g_x * nu.dot(cov * nu) - 0.5 * dev.squaredNorm() +
           nu.dot(cov * ct.g) - (lambda / p.eta) * std::expm1(-p.eta * ct.u) -
           0.5 * p.eta * ct.z.dot(cov * ct.z) - p.eta * ct.z_x * nu.dot(cov * ct.z);
}

double generator_F(const MarketParams& p, const ControlTuple& ct, double lambda) {
    return raw_f(p, ct, lambda, agent_strategy(p, ct));
}

double generator_F_closed_form(const MarketParams& p, const ControlTuple& ct, double lambda) {
    const QForm form = build_qform(p, ct, lambda);
    const Eigen::VectorXd e = 0.5 * form.Q.llt().solve(form.ell);
    return e.dot(form.Q * e) + form.c - q_dist(e, p.c_lo, p.c_hi, form.Q);
}

double reservation_y0(double R, double eta) {
    if (!(R < 0.0)) throw DomainError("reservation utility must be negative");
    if (!(eta > 0.0)) throw DomainError("risk aversion must be positive");
    return -std::log(-R) / eta;
}

ScalarMarket ScalarMarket::from(const MarketParams& p) {
    p.validate();
    if (p.assets() != 1 || p.factors() != 1)
        throw DomainError("the grid solvers support a single asset driven by a single factor");
    ScalarMarket s;
    s.b = p.b[0];
    s.vol = p.sigma(0, 0);
    s.cov = s.vol * s.vol;
    s.alpha = p.alpha[0];
    s.eta = p.eta;
    s.lo = p.c_lo[0];
    s.hi = p.c_hi[0];
    return s;
}

}  // namespace palab
