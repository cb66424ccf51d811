#include "fhmp/intervals.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/normal.hpp"

#include <cmath>

namespace fhmp {

namespace {

void check_index(const FHDataset& data, Index i) {
    if (i < 0 || i >= data.m()) throw DomainError("area index out of range");
}

double critical_value(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0) && alpha != 1.0) throw DomainError("alpha must lie in (0, 1)");
    return normal_critical_value(alpha);
}

EbInterval finish(EbInterval iv) {
    iv.lower = iv.center - iv.half_width;
    iv.upper = iv.center + iv.half_width;
    return iv;
}

// EB interval at a plugged-in A; `with_g2` selects delta_i over sigma_i.
EbInterval plug_in(const FHDataset& data, Index i, double alpha, double A, bool with_g2, IntervalMethod method) {
    const double z = critical_value(alpha);
    const GlsFit fit = gls_fit(data, A);
    const AreaQuantities q = area_quantities(data, fit, A, i);
    EbInterval iv;
    iv.area = i;
    iv.method = method;
    iv.level = 1.0 - alpha;
    iv.A_used = A;
    iv.center = blup_area(data, fit, A, i);
    iv.half_width = z * (with_g2 ? q.delta : q.sigma);
    if (data.p() > 0) iv.beta_used = fit.beta;
    return finish(iv);
}

void require_fit(const VarianceFit& fit, Index i, VarianceMethod expected) {
    if (fit.method != expected || !fit.area || *fit.area != i)
        throw DomainError("variance fit does not match the requested interval (" + to_string(expected) + ", area " +
                          std::to_string(i) + ")");
}

}  // namespace

std::string to_string(IntervalMethod m) {
    switch (m) {
        case IntervalMethod::Direct: return "Direct";
        case IntervalMethod::Cox: return "Cox";
        case IntervalMethod::YL: return "YL";
        case IntervalMethod::N: return "N";
    }
    return "?";
}

IntervalMethod parse_interval_method(const std::string& s) {
    if (s == "Direct" || s == "direct" || s == "D") return IntervalMethod::Direct;
    if (s == "Cox" || s == "cox") return IntervalMethod::Cox;
    if (s == "YL" || s == "yl") return IntervalMethod::YL;
    if (s == "N" || s == "n") return IntervalMethod::N;
    throw DomainError("unknown interval method '" + s + "'");
}

EbInterval interval_direct(const FHDataset& data, Index i, double alpha) {
    check_index(data, i);
    EbInterval iv;
    iv.area = i;
    iv.method = IntervalMethod::Direct;
    iv.level = 1.0 - alpha;
    iv.center = data.y(i);
    iv.half_width = critical_value(alpha) * std::sqrt(data.D(i));
    iv.A_used = std::numeric_limits<double>::infinity();
    return finish(iv);
}

EbInterval interval_yl(const FHDataset& data, Index i, double alpha, const VarianceFit& fit) {
    require_fit(fit, i, VarianceMethod::YL);
    return plug_in(data, i, alpha, fit.A_hat, false, IntervalMethod::YL);
}

EbInterval interval_yl(const FHDataset& data, Index i, double alpha) {
    check_index(data, i);
    const VarianceFit fit = estimate_variance(data, VarianceMethod::YL, i, critical_value(alpha));
    return interval_yl(data, i, alpha, fit);
}

EbInterval interval_n(const FHDataset& data, Index i, double alpha, const VarianceFit& fit) {
    require_fit(fit, i, VarianceMethod::Hirose);
    return plug_in(data, i, alpha, fit.A_hat, true, IntervalMethod::N);
}

EbInterval interval_n(const FHDataset& data, Index i, double alpha) {
    check_index(data, i);
    const VarianceFit fit = estimate_variance(data, VarianceMethod::Hirose, i, critical_value(alpha));
    return interval_n(data, i, alpha, fit);
}

EbInterval interval_cox(const FHDataset& data, Index i, double alpha, AnovaVariant variant) {
    check_index(data, i);
    const double A = anova_estimate(data, variant == AnovaVariant::Corrected);
    const double D = data.D(0);
    const double B = D / (A + D);
    EbInterval iv;
    iv.area = i;
    iv.method = IntervalMethod::Cox;
    iv.level = 1.0 - alpha;
    iv.A_used = A;
    const double ybar = data.y.mean();
    iv.center = (1.0 - B) * data.y(i) + B * ybar;
    iv.half_width = critical_value(alpha) * std::sqrt(A * D / (A + D));
    iv.beta_used = VectorXd::Constant(1, ybar);
    return finish(iv);
}

EbInterval make_interval(const FHDataset& data, Index i, double alpha, IntervalMethod method) {
    switch (method) {
        case IntervalMethod::Direct: return interval_direct(data, i, alpha);
        case IntervalMethod::Cox: return interval_cox(data, i, alpha);
        case IntervalMethod::YL: return interval_yl(data, i, alpha);
        case IntervalMethod::N: return interval_n(data, i, alpha);
    }
    throw DomainError("unknown interval method");
}

}  // namespace fhmp
