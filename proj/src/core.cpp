#include "fhmp/core.hpp"

#include "fhmp/errors.hpp"

#include <cmath>
#include <sstream>

namespace fhmp {

namespace {

constexpr double kRankThreshold = 1e-10;

void check_area(const FHDataset& data, Index i) {
    if (i < 0 || i >= data.m()) {
        std::ostringstream msg;
        msg << "area index " << i << " out of range [0, " << data.m() << ")";
        throw DomainError(msg.str());
    }
}

}  // namespace

bool FHDataset::is_balanced() const {
    if (D.size() == 0) return true;
    return (D.array() == D(0)).all();
}

std::string FHDataset::area_label(Index i) const {
    if (i >= 0 && static_cast<std::size_t>(i) < area_ids.size()) return area_ids[static_cast<std::size_t>(i)];
    return std::to_string(i + 1);
}

void FHDataset::validate() const {
    const Index n = m();
    if (n == 0) throw DataError("dataset has no areas");
    if (D.size() != n) throw DataError("D has length " + std::to_string(D.size()) + ", expected " + std::to_string(n));
    if (X.rows() != n && !(X.cols() == 0))
        throw DataError("X has " + std::to_string(X.rows()) + " rows, expected " + std::to_string(n));
    if (!area_ids.empty() && static_cast<Index>(area_ids.size()) != n)
        throw DataError("area_ids has wrong length");
    if (theta_true && theta_true->size() != n) throw DataError("theta_true has wrong length");
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(y(i))) throw DataError("y[" + area_label(i) + "] is not finite");
        if (!std::isfinite(D(i)) || D(i) <= 0.0)
            throw DataError("D[" + area_label(i) + "] must be finite and > 0");
    }
    if (!X.allFinite()) throw DataError("X contains non-finite values");
    if (p() >= 1) {
        if (n <= p()) throw DataError("need m > p (m=" + std::to_string(n) + ", p=" + std::to_string(p()) + ")");
        Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
        qr.setThreshold(kRankThreshold);
        if (qr.rank() < p())
            throw RankDeficiencyError("covariate matrix has rank " + std::to_string(qr.rank()) + " < p = " +
                                      std::to_string(p()));
    }
}

FHDataset FHDataset::make(VectorXd y, VectorXd D, MatrixXd X) {
    FHDataset d;
    d.y = std::move(y);
    d.D = std::move(D);
    d.X = std::move(X);
    if (d.X.cols() == 0) d.X.resize(d.y.size(), 0);
    d.validate();
    return d;
}

FHDataset FHDataset::make_no_covariates(VectorXd y, VectorXd D) {
    const Index n = y.size();
    return make(std::move(y), std::move(D), MatrixXd(n, 0));
}

GlsFit gls_fit(const FHDataset& data, double A) {
    if (!(A >= 0.0) || !std::isfinite(A)) throw DomainError("gls_fit requires finite A >= 0");
    const Index m = data.m();
    const Index p = data.p();
    GlsFit fit;
    fit.A = A;
    if (p == 0) {
        fit.beta.resize(0);
        fit.fitted = VectorXd::Zero(m);
        fit.residual = data.y;
        fit.info_inv.resize(0, 0);
        return fit;
    }
    const VectorXd w = (data.D.array() + A).rsqrt();
    const MatrixXd Xw = w.asDiagonal() * data.X;
    const VectorXd yw = w.cwiseProduct(data.y);

    Eigen::ColPivHouseholderQR<MatrixXd> qr(Xw);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < p) {
        std::ostringstream msg;
        msg << "X'V^{-1}X is singular at A=" << A << " (rank " << qr.rank() << " < p=" << p << ")";
        throw RankDeficiencyError(msg.str());
    }
    fit.beta = qr.solve(yw);
    fit.fitted = data.X * fit.beta;
    fit.residual = data.y - fit.fitted;

    const auto R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    double log_det = 0.0;
    for (Index j = 0; j < p; ++j) log_det += std::log(std::abs(qr.matrixR()(j, j)));
    fit.log_det_info = 2.0 * log_det;

    // (X'V^{-1}X)^{-1} = Pi R^{-1} R^{-T} Pi'
    const MatrixXd Rinv = R.solve(MatrixXd::Identity(p, p));
    const MatrixXd inner = Rinv * Rinv.transpose();
    const auto& perm = qr.colsPermutation();
    fit.info_inv = perm * inner * perm.transpose();
    return fit;
}

VectorXd gls_beta(const FHDataset& data, double A) {
    if (data.p() == 0) throw DomainError("gls_beta requires p >= 1");
    return gls_fit(data, A).beta;
}

AreaQuantities area_quantities(const FHDataset& data, const GlsFit& fit, double A, Index i) {
    check_area(data, i);
    if (!(A >= 0.0)) throw DomainError("area_quantities requires A >= 0");
    const double Di = data.D(i);
    AreaQuantities q;
    q.area = i;
    q.A = A;
    q.B = Di / (A + Di);
    q.g1 = A * Di / (A + Di);
    if (data.p() > 0) {
        const VectorXd xi = data.X.row(i).transpose();
        q.r = xi.dot(fit.info_inv * xi);
        q.q = ols_leverages(data)(i);
    }
    q.g2 = q.B * q.B * q.r;
    q.sigma = std::sqrt(q.g1);
    q.delta = std::sqrt(q.g1 + q.g2);
    return q;
}

AreaQuantities area_quantities(const FHDataset& data, double A, Index i) {
    return area_quantities(data, gls_fit(data, A), A, i);
}

double blup_area(const FHDataset& data, const GlsFit& fit, double A, Index i) {
    const double B = data.D(i) / (A + data.D(i));
    return (1.0 - B) * data.y(i) + B * fit.fitted(i);
}

BlupResult blup(const FHDataset& data, double A) {
    const GlsFit fit = gls_fit(data, A);
    BlupResult out;
    out.A = A;
    out.beta_gls = fit.beta;
    out.theta_blup.resize(data.m());
    out.areas.reserve(static_cast<std::size_t>(data.m()));
    const VectorXd q = ols_leverages(data);
    const VectorXd r = gls_leverages(data, fit);
    for (Index i = 0; i < data.m(); ++i) {
        out.theta_blup(i) = blup_area(data, fit, A, i);
        AreaQuantities a;
        const double Di = data.D(i);
        a.area = i;
        a.A = A;
        a.B = Di / (A + Di);
        a.g1 = A * Di / (A + Di);
        a.r = r(i);
        a.q = q(i);
        a.g2 = a.B * a.B * a.r;
        a.sigma = std::sqrt(a.g1);
        a.delta = std::sqrt(a.g1 + a.g2);
        out.areas.push_back(a);
    }
    return out;
}

VectorXd ols_leverages(const FHDataset& data) {
    const Index m = data.m();
    if (data.p() == 0) return VectorXd::Zero(m);
    Eigen::HouseholderQR<MatrixXd> qr(data.X);
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(m, data.p());
    return Q.rowwise().squaredNorm();
}

VectorXd gls_leverages(const FHDataset& data, const GlsFit& fit) {
    if (data.p() == 0) return VectorXd::Zero(data.m());
    return (data.X * fit.info_inv).cwiseProduct(data.X).rowwise().sum();
}

double trace_inv_power(const VectorXd& D, double A, int k) {
    return (D.array() + A).pow(-static_cast<double>(k)).sum();
}

double dlog_sigma_dA(double A, double D_i) {
    if (!(A > 0.0)) throw DomainError("dlog_sigma_dA requires A > 0");
    return D_i / (A + D_i) / (2.0 * A);
}

}  // namespace fhmp
