#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace fhmp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Area-level data of the two-level normal model: direct estimates y,
/// known sampling variances D and an m x p covariate matrix X.
/// p == 0 (an m x 0 matrix) encodes the zero-mean model without covariates.
struct FHDataset {
    VectorXd y;
    VectorXd D;
    MatrixXd X;
    std::vector<std::string> area_ids;     // empty -> "1".."m"
    std::optional<VectorXd> theta_true;    // evaluation runs only

    Index m() const { return y.size(); }
    Index p() const { return X.cols(); }
    bool has_covariates() const { return X.cols() > 0; }

    /// All D_i exactly equal.
    bool is_balanced() const;

    std::string area_label(Index i) const;

    /// Throws DataError on shape mismatch, non-finite values, D_i <= 0,
    /// m <= p, and RankDeficiencyError when rank(X) < p.
    void validate() const;

    static FHDataset make(VectorXd y, VectorXd D, MatrixXd X);
    static FHDataset make_no_covariates(VectorXd y, VectorXd D);
};

/// Generalized least squares fit of y on X with V = diag(A + D_i).
struct GlsFit {
    double A = 0.0;
    VectorXd beta;         // length p
    VectorXd fitted;       // X * beta
    VectorXd residual;     // y - X * beta
    MatrixXd info_inv;     // (X' V^{-1} X)^{-1}
    double log_det_info = 0.0;  // log |X' V^{-1} X|
};

/// Solved through a column-pivoted QR of V^{-1/2} X; never forms the
/// normal equations. For p == 0 returns empty beta and residual == y.
GlsFit gls_fit(const FHDataset& data, double A);

VectorXd gls_beta(const FHDataset& data, double A);

/// Per-area closed-form quantities at a candidate variance A.
struct AreaQuantities {
    Index area = 0;
    double A = 0.0;
    double B = 0.0;        // D_i / (A + D_i)
    double g1 = 0.0;       // A D_i / (A + D_i)
    double g2 = 0.0;       // B_i^2 r_i
    double sigma = 0.0;    // sqrt(g1)
    double delta = 0.0;    // sqrt(g1 + g2)
    double r = 0.0;        // x_i' (X'V^{-1}X)^{-1} x_i
    double q = 0.0;        // x_i' (X'X)^{-1} x_i
};

AreaQuantities area_quantities(const FHDataset& data, double A, Index i);
AreaQuantities area_quantities(const FHDataset& data, const GlsFit& fit, double A, Index i);

struct BlupResult {
    double A = 0.0;
    VectorXd beta_gls;
    VectorXd theta_blup;
    std::vector<AreaQuantities> areas;
};

/// theta_i = (1 - B_i) y_i + B_i x_i' beta_gls; without covariates this is
/// the best predictor (1 - B_i) y_i.
BlupResult blup(const FHDataset& data, double A);

/// BLUP of a single area given an existing GLS fit.
double blup_area(const FHDataset& data, const GlsFit& fit, double A, Index i);

/// OLS leverages q_i = x_i'(X'X)^{-1}x_i (all zero when p == 0).
VectorXd ols_leverages(const FHDataset& data);

/// GLS leverage r_i(A) for every area.
VectorXd gls_leverages(const FHDataset& data, const GlsFit& fit);

/// Sum_j (A + D_j)^{-k}.
double trace_inv_power(const VectorXd& D, double A, int k);

/// d/dA log sigma_i(A) = B_i / (2A).
double dlog_sigma_dA(double A, double D_i);

}  // namespace fhmp
