#include "fhmp/reml.hpp"

#include "fhmp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fhmp {

namespace {

struct ProjectionTerms {
    double trP = 0.0;
    double trP2 = 0.0;
    double yP2y = 0.0;
    double yP3y = 0.0;
};

// Traces and quadratic forms of P = W - W X M^{-1} X' W, W = V^{-1},
// M = X'WX, in O(m p^2).
ProjectionTerms projection_terms(const FHDataset& data, const GlsFit& fit) {
    const VectorXd W = (data.D.array() + fit.A).inverse();
    ProjectionTerms t;
    const VectorXd u = W.cwiseProduct(fit.residual);  // P y
    t.yP2y = u.squaredNorm();
    t.trP = W.sum();
    t.trP2 = W.squaredNorm();
    VectorXd Pu = W.cwiseProduct(u);
    if (data.p() > 0) {
        const MatrixXd& X = data.X;
        const MatrixXd G2 = X.transpose() * W.cwiseAbs2().asDiagonal() * X;
        const MatrixXd G3 = X.transpose() * W.array().cube().matrix().asDiagonal() * X;
        const MatrixXd MG2 = fit.info_inv * G2;
        t.trP -= MG2.trace();
        t.trP2 += -2.0 * (fit.info_inv * G3).trace() + (MG2 * MG2).trace();
        const VectorXd XtWu = X.transpose() * W.cwiseProduct(u);
        Pu -= W.cwiseProduct(X * (fit.info_inv * XtWu));
    }
    t.yP3y = u.dot(Pu);
    return t;
}

}  // namespace

RemlEval reml_log_likelihood(const FHDataset& data, const GlsFit& fit) {
    const double A = fit.A;
    const VectorXd v = data.D.array() + A;
    RemlEval e;
    e.A = A;
    e.quad_form = (fit.residual.array().square() / v.array()).sum();
    e.log_lre = -0.5 * v.array().log().sum() - 0.5 * fit.log_det_info - 0.5 * e.quad_form;
    e.k = -e.log_lre / static_cast<double>(data.m());
    e.trV2 = v.array().pow(-2.0).sum();
    e.trV3 = v.array().pow(-3.0).sum();
    if (!std::isfinite(e.log_lre)) throw DomainError("restricted log-likelihood is not finite at A=" + std::to_string(A));
    return e;
}

RemlEval reml_log_likelihood(const FHDataset& data, double A) {
    if (!std::isfinite(A) || A < 0.0) throw DomainError("reml_log_likelihood requires finite A >= 0");
    return reml_log_likelihood(data, gls_fit(data, A));
}

double reml_score(const FHDataset& data, const GlsFit& fit) {
    const ProjectionTerms t = projection_terms(data, fit);
    return -0.5 * t.trP + 0.5 * t.yP2y;
}

double reml_score(const FHDataset& data, double A) {
    return reml_score(data, gls_fit(data, A));
}

double reml_hessian(const FHDataset& data, const GlsFit& fit) {
    const ProjectionTerms t = projection_terms(data, fit);
    return 0.5 * t.trP2 - t.yP3y;
}

RemlDerivatives reml_derivatives(const FHDataset& data, double A, int order) {
    if (!(A > 0.0)) throw DomainError("reml_derivatives requires A > 0");
    if (order < 1 || order > 3) throw DomainError("derivative order must be 1, 2 or 3");
    const double m = static_cast<double>(data.m());
    const GlsFit fit = gls_fit(data, A);
    const ProjectionTerms t = projection_terms(data, fit);

    RemlDerivatives d;
    d.A = A;
    d.k1 = -(-0.5 * t.trP + 0.5 * t.yP2y) / m;
    d.k2_leading = trace_inv_power(data.D, A, 2) / (2.0 * m);
    d.k3_leading = -2.0 * trace_inv_power(data.D, A, 3) / m;
    if (order >= 2) d.k2 = -(0.5 * t.trP2 - t.yP3y) / m;
    if (order >= 3) {
        if (data.is_balanced()) {
            // P^j = (A+D)^{-j} (I - H): tr(P^3) = (m-p)/(A+D)^3, y'P^4y = RSS/(A+D)^4
            const double v = A + data.D(0);
            const double rss = fit.residual.squaredNorm();
            const double third = -(m - static_cast<double>(data.p())) / (v * v * v) + 3.0 * rss / (v * v * v * v);
            d.k3 = -third / m;
            d.k3_analytic = true;
        } else {
            double h = std::max(1e-4, 1e-4 * A);
            if (A - h <= 0.0) h = 0.5 * A;
            const auto k2_at = [&](double a) {
                const GlsFit f = gls_fit(data, a);
                return -reml_hessian(data, f) / m;
            };
            d.k3 = (k2_at(A + h) - k2_at(A - h)) / (2.0 * h);
        }
    }
    return d;
}

}  // namespace fhmp
