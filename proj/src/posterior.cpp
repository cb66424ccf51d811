#include "fhmp/posterior.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/normal.hpp"
#include "fhmp/quadrature.hpp"
#include "fhmp/reml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fhmp {

namespace {

constexpr int kCoarsePoints = 240;
constexpr double kCoarseBelow = 80.0;
constexpr double kCoarseAbove = 45.0;
constexpr int kMaxTailExtensions = 10;

struct NodeTable {
    std::vector<double> A;
    std::vector<double> log_lre;
    MatrixXd fitted;     // nodes x m
    MatrixXd leverage;   // nodes x m
    MatrixXd exponents;  // nodes x m, only when a general matching prior is present
};

bool needs_exponents(std::span<const PriorSpec> priors) {
    return std::any_of(priors.begin(), priors.end(),
                       [](const PriorSpec& p) { return p.kind() == PriorKind::MatchingGeneral; });
}

NodeTable evaluate_nodes(const FHDataset& data, std::vector<double> A, bool with_exponents, bool with_area_terms) {
    NodeTable t;
    const Index n = static_cast<Index>(A.size());
    t.log_lre.resize(A.size());
    if (with_area_terms) {
        t.fitted.resize(n, data.m());
        t.leverage.resize(n, data.m());
    }
    for (Index k = 0; k < n; ++k) {
        const GlsFit fit = gls_fit(data, A[static_cast<std::size_t>(k)]);
        t.log_lre[static_cast<std::size_t>(k)] = reml_log_likelihood(data, fit).log_lre;
        if (with_area_terms) {
            t.fitted.row(k) = fit.fitted.transpose();
            t.leverage.row(k) = gls_leverages(data, fit).transpose();
        }
    }
    if (with_exponents) t.exponents = matching_exponents(data, A);
    t.A = std::move(A);
    return t;
}

std::vector<double> log_kernel(const NodeTable& t, const PriorSpec& prior) {
    std::vector<double> lp = prior.log_pi_sorted(t.A, t.exponents.size() > 0 ? &t.exponents : nullptr);
    for (std::size_t k = 0; k < lp.size(); ++k) lp[k] += t.log_lre[k];
    return lp;
}

struct Placement {
    double s_lo = 0.0;
    double s_hi = 0.0;
    double s_center = 0.0;
    double width = 1.0;
};

// Coarse scan in s = log A of h(s) = log kernel + s for every prior.
Placement place_nodes(const FHDataset& data, std::span<const PriorSpec> priors, const GridOptions& opts) {
    const double ybar = data.y.mean();
    const double spread = (data.y.array() - ybar).square().mean();
    const double scale = std::max({data.D.maxCoeff(), spread, 1e-12});
    const double s0 = std::log(scale) - kCoarseBelow;
    const double s1 = std::log(scale) + kCoarseAbove;
    const double ds = (s1 - s0) / (kCoarsePoints - 1);
    std::vector<double> A(kCoarsePoints);
    for (int k = 0; k < kCoarsePoints; ++k) A[static_cast<std::size_t>(k)] = std::exp(s0 + ds * k);
    const NodeTable t = evaluate_nodes(data, A, needs_exponents(priors), false);

    Placement pl;
    pl.s_lo = std::numeric_limits<double>::infinity();
    pl.s_hi = -std::numeric_limits<double>::infinity();
    double mode_lo = pl.s_lo, mode_hi = pl.s_hi;
    double width = std::numeric_limits<double>::infinity();
    for (const PriorSpec& prior : priors) {
        std::vector<double> h = log_kernel(t, prior);
        for (int k = 0; k < kCoarsePoints; ++k) h[static_cast<std::size_t>(k)] += s0 + ds * k;
        const auto top = std::max_element(h.begin(), h.end());
        if (!std::isfinite(*top)) throw IntegrationError("posterior kernel is not finite on the coarse scan");
        const int km = static_cast<int>(top - h.begin());
        int klo = km, khi = km;
        while (klo > 0 && h[static_cast<std::size_t>(klo - 1)] >= *top - opts.drop_nats) --klo;
        while (khi + 1 < kCoarsePoints && h[static_cast<std::size_t>(khi + 1)] >= *top - opts.drop_nats) ++khi;
        pl.s_lo = std::min(pl.s_lo, s0 + ds * std::max(klo - 1, 0));
        pl.s_hi = std::max(pl.s_hi, s0 + ds * std::min(khi + 1, kCoarsePoints - 1));
        mode_lo = std::min(mode_lo, s0 + ds * km);
        mode_hi = std::max(mode_hi, s0 + ds * km);
        double w = 1.0;
        if (km > 0 && km + 1 < kCoarsePoints) {
            const auto u = static_cast<std::size_t>(km);
            const double curv = (h[u + 1] - 2.0 * h[u] + h[u - 1]) / (ds * ds);
            if (curv < 0.0) w = 1.0 / std::sqrt(-curv);
        }
        width = std::min(width, std::clamp(w, 0.02, 10.0));
    }
    pl.s_center = 0.5 * (mode_lo + mode_hi);
    pl.width = width;
    return pl;
}

struct NodeLayout {
    std::vector<double> A;
    std::vector<double> log_qw;   // log quadrature weight in A
};

NodeLayout layout(const Placement& pl, double s_hi, int panels) {
    const auto& x = GaussLegendre8::nodes();
    const auto& w = GaussLegendre8::weights();
    NodeLayout out;
    const double a_lo = std::exp(pl.s_lo);
    // [0, a_lo] in A directly
    for (std::size_t j = 0; j < 8; ++j) {
        out.A.push_back(0.5 * a_lo * (x[j] + 1.0));
        out.log_qw.push_back(std::log(0.5 * a_lo * w[j]));
    }
    // sinh-stretched panels in s around the mode region
    const double t_lo = std::asinh((pl.s_lo - pl.s_center) / pl.width);
    const double t_hi = std::asinh((s_hi - pl.s_center) / pl.width);
    const double dt = (t_hi - t_lo) / panels;
    for (int p = 0; p < panels; ++p) {
        const double c = t_lo + dt * (p + 0.5);
        for (std::size_t j = 0; j < 8; ++j) {
            const double t = c + 0.5 * dt * x[j];
            const double s = pl.s_center + pl.width * std::sinh(t);
            out.A.push_back(std::exp(s));
            out.log_qw.push_back(std::log(0.5 * dt * w[j] * pl.width * std::cosh(t)) + s);
        }
    }
    return out;
}

std::vector<PosteriorGrid> build_once(const FHDataset& data, std::span<const Index> areas,
                                      std::span<const PriorSpec> priors, const GridOptions& opts, int panels) {
    const Placement pl = place_nodes(data, priors, opts);
    double s_hi = opts.A_hi ? std::log(*opts.A_hi) : pl.s_hi;
    if (opts.A_hi && s_hi <= pl.s_lo) throw DomainError("explicit A_hi lies below the posterior support");
    const double m = static_cast<double>(data.m());
    const double p = static_cast<double>(data.p());

    for (int attempt = 0;; ++attempt) {
        NodeLayout lay = layout(pl, s_hi, panels);
        std::vector<double> pts = lay.A;
        const double A_hi = std::exp(s_hi);
        pts.push_back(A_hi);
        const NodeTable t = evaluate_nodes(data, pts, needs_exponents(priors), true);
        const std::size_t n = lay.A.size();

        std::vector<PosteriorGrid> grids;
        bool tail_ok = true;
        double worst_tail = 0.0;
        for (std::size_t g = 0; g < priors.size(); ++g) {
            const Index i = areas[g];
            const std::vector<double> lk = log_kernel(t, priors[g]);
            PosteriorGrid grid;
            grid.area = i;
            grid.prior_label = priors[g].label();
            grid.A_hi = A_hi;
            grid.nodes.assign(lay.A.begin(), lay.A.end());
            grid.log_kernel.assign(lk.begin(), lk.begin() + static_cast<std::ptrdiff_t>(n));
            std::vector<double> lw(n);
            for (std::size_t k = 0; k < n; ++k) lw[k] = lay.log_qw[k] + lk[k];
            grid.log_norm = log_sum_exp(lw);
            if (!std::isfinite(grid.log_norm)) throw IntegrationError("posterior normalization is not finite");
            grid.weights.resize(n);
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k) total += grid.weights[k] = std::exp(lw[k] - grid.log_norm);
            for (double& w : grid.weights) w /= total;

            const double kappa = (m - p) / 2.0 - priors[g].tail_power();
            grid.tail_mass_bound = kappa > 1.0 ? std::exp(lk[n] + s_hi - std::log(kappa - 1.0) - grid.log_norm)
                                               : std::numeric_limits<double>::infinity();
            worst_tail = std::max(worst_tail, grid.tail_mass_bound);
            if (!(grid.tail_mass_bound <= opts.tail_tol)) tail_ok = false;

            const double Di = data.D(i);
            grid.center.resize(n);
            grid.delta.resize(n);
            grid.g1.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double A = lay.A[k];
                const double B = Di / (A + Di);
                const auto kk = static_cast<Index>(k);
                grid.center[k] = (1.0 - B) * data.y(i) + (data.p() > 0 ? B * t.fitted(kk, i) : 0.0);
                grid.g1[k] = A * Di / (A + Di);
                grid.delta[k] = std::sqrt(grid.g1[k] + B * B * t.leverage(kk, i));
            }
            grids.push_back(std::move(grid));
        }
        if (tail_ok || opts.A_hi) return grids;
        if (attempt >= kMaxTailExtensions) {
            std::ostringstream msg;
            msg << "tail-bound violation: mass beyond A_hi=" << A_hi << " bounded by " << worst_tail
                << " relative, above " << opts.tail_tol;
            throw IntegrationError(msg.str());
        }
        s_hi += 10.0;
    }
}

}  // namespace

std::vector<PosteriorGrid> build_posterior_grids(const FHDataset& data, std::span<const Index> areas,
                                                 std::span<const PriorSpec> priors, const GridOptions& opts) {
    if (areas.size() != priors.size() || areas.empty()) throw DomainError("need one prior per area");
    if (opts.panels < 2) throw DomainError("node budget too small");
    for (Index i : areas)
        if (i < 0 || i >= data.m()) throw DomainError("area index out of range");
    std::vector<PosteriorGrid> grids = build_once(data, areas, priors, opts, opts.panels);
    if (opts.estimate_error) {
        GridOptions half = opts;
        half.estimate_error = false;
        half.A_hi = grids.front().A_hi;
        const auto coarse = build_once(data, areas, priors, half, std::max(2, opts.panels / 2));
        for (std::size_t g = 0; g < grids.size(); ++g)
            grids[g].quad_error = std::abs(std::expm1(coarse[g].log_norm - grids[g].log_norm));
    }
    return grids;
}

PosteriorGrid build_posterior_grid(const FHDataset& data, Index i, const PriorSpec& prior, const GridOptions& opts) {
    const Index areas[1] = {i};
    const PriorSpec priors[1] = {prior};
    return std::move(build_posterior_grids(data, areas, priors, opts).front());
}

PosteriorGrid build_posterior_grid(const FHDataset& data, Index i, const PriorSpec& prior, int panels) {
    GridOptions opts;
    opts.panels = panels;
    return build_posterior_grid(data, i, prior, opts);
}

CoverageResult posterior_coverage(const PosteriorGrid& grid, const EbInterval& interval) {
    if (interval.area != grid.area) throw DomainError("interval and posterior grid refer to different areas");
    CoverageResult out;
    out.area = grid.area;
    out.interval = interval;
    out.nodes = grid.nodes.size();
    out.quad_error = grid.quad_error + grid.tail_mass_bound;
    const double L = interval.lower, U = interval.upper;
    if (L == -std::numeric_limits<double>::infinity() && U == std::numeric_limits<double>::infinity()) {
        out.posterior_coverage = 1.0;
        return out;
    }
    double cov = 0.0;
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
        const double c = grid.center[k], d = grid.delta[k];
        double pk;
        if (d > 0.0)
            pk = normal_interval_prob((L - c) / d, (U - c) / d);
        else
            pk = (L <= c && c <= U) ? 1.0 : 0.0;
        cov += grid.weights[k] * pk;
    }
    out.posterior_coverage = std::clamp(cov, 0.0, 1.0);
    return out;
}

CoverageResult posterior_coverage(const FHDataset& data, Index i, const PriorSpec& prior, const EbInterval& interval,
                                  const PosteriorGrid& grid) {
    if (grid.area != i || interval.area != i) throw DomainError("interval/grid area mismatch");
    if (prior.area() && *prior.area() != i) throw DomainError("prior is bound to a different area");
    if (grid.prior_label != prior.label()) throw DomainError("grid was built for a different prior");
    if (i < 0 || i >= data.m()) throw DomainError("area index out of range");
    return posterior_coverage(grid, interval);
}

PosteriorMoments posterior_moments(const PosteriorGrid& grid) {
    PosteriorMoments mo;
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
        const double w = grid.weights[k];
        mo.mean_A += w * grid.nodes[k];
        mo.mean_theta += w * grid.center[k];
        mo.mean_g1 += w * grid.g1[k];
    }
    double within = 0.0;
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
        const double w = grid.weights[k];
        mo.var_A += w * (grid.nodes[k] - mo.mean_A) * (grid.nodes[k] - mo.mean_A);
        mo.var_theta += w * (grid.center[k] - mo.mean_theta) * (grid.center[k] - mo.mean_theta);
        within += w * grid.delta[k] * grid.delta[k];
    }
    mo.var_theta += within;
    return mo;
}

namespace {

// Knots of the piecewise-linear grid CDF.
void cdf_knots(const PosteriorGrid& grid, std::vector<double>& xs, std::vector<double>& cs) {
    const std::size_t n = grid.nodes.size();
    xs.assign(n + 2, 0.0);
    cs.assign(n + 2, 0.0);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        xs[k + 1] = grid.nodes[k];
        cs[k + 1] = acc + 0.5 * grid.weights[k];
        acc += grid.weights[k];
    }
    xs[n + 1] = grid.A_hi;
    cs[n + 1] = 1.0;
}

}  // namespace

double grid_cdf(const PosteriorGrid& grid, double A) {
    std::vector<double> xs, cs;
    cdf_knots(grid, xs, cs);
    if (A <= 0.0) return 0.0;
    if (A >= xs.back()) return 1.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), A);
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    const double t = (A - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return cs[k - 1] + t * (cs[k] - cs[k - 1]);
}

std::vector<PosteriorDraw> sample_posterior(const FHDataset& data, const PosteriorGrid& grid, std::size_t n,
                                            std::uint64_t seed) {
    if (n == 0) throw DomainError("sample size must be >= 1");
    std::vector<double> xs, cs;
    cdf_knots(grid, xs, cs);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    const Index i = grid.area;
    const double Di = data.D(i);
    std::vector<PosteriorDraw> out(n);
    for (auto& d : out) {
        const double u = unif(rng);
        const auto it = std::upper_bound(cs.begin(), cs.end(), u);
        const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cs.begin()), 1, cs.size() - 1);
        const double t = (u - cs[k - 1]) / (cs[k] - cs[k - 1]);
        d.A = xs[k - 1] + t * (xs[k] - xs[k - 1]);
        const double A = std::max(d.A, std::numeric_limits<double>::min());
        const double B = Di / (A + Di);
        double center = (1.0 - B) * data.y(i);
        double var = A * Di / (A + Di);
        if (data.p() > 0) {
            const GlsFit fit = gls_fit(data, A);
            center += B * fit.fitted(i);
            const VectorXd xi = data.X.row(i).transpose();
            var += B * B * xi.dot(fit.info_inv * xi);
        }
        d.theta = center + std::sqrt(var) * norm(rng);
    }
    return out;
}

}  // namespace fhmp
