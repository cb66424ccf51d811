#pragma once

#include "fhmp/core.hpp"
#include "fhmp/intervals.hpp"
#include "fhmp/priors.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fhmp {

struct GridOptions {
    int panels = 512;                 // 8 Gauss-Legendre nodes each
    double drop_nats = 60.0;          // support ends where log(kernel * A) falls this far below its peak
    double tail_tol = 1e-10;          // bound on the mass beyond A_hi, relative to the total
    std::optional<double> A_hi;       // explicit upper end; skips the tail requirement
    bool estimate_error = true;       // rebuild at half resolution to estimate the quadrature error
};

/// Quadrature representation of pi(A | y) proportional to pi(A) L_RE(A).
struct PosteriorGrid {
    Index area = 0;
    std::string prior_label;
    std::vector<double> nodes;        // strictly increasing, in (0, A_hi)
    std::vector<double> weights;      // normalized quadrature weights
    std::vector<double> log_kernel;   // log pi(A) + log L_RE(A) at the nodes
    double log_norm = 0.0;            // log of the integral of the kernel
    double A_hi = 0.0;
    double tail_mass_bound = 0.0;     // relative mass beyond A_hi (upper bound)
    double quad_error = 0.0;          // |difference in normalized mass| against a half-resolution grid
    std::vector<double> center;       // BLUP of theta_i at each node
    std::vector<double> delta;        // sqrt(g1 + g2) at each node
    std::vector<double> g1;
};

PosteriorGrid build_posterior_grid(const FHDataset& data, Index i, const PriorSpec& prior, int panels = 512);
PosteriorGrid build_posterior_grid(const FHDataset& data, Index i, const PriorSpec& prior, const GridOptions& opts);

/// Grids for several areas on one shared node set, so the likelihood, GLS
/// fits and matching-prior integrals are evaluated once per node.
std::vector<PosteriorGrid> build_posterior_grids(const FHDataset& data, std::span<const Index> areas,
                                                 std::span<const PriorSpec> priors, const GridOptions& opts);

struct CoverageResult {
    Index area = 0;
    EbInterval interval;
    double posterior_coverage = 0.0;
    std::size_t nodes = 0;
    double quad_error = 0.0;
};

/// sum_k w_k [Phi((U - c_k)/delta_k) - Phi((L - c_k)/delta_k)].
CoverageResult posterior_coverage(const PosteriorGrid& grid, const EbInterval& interval);
CoverageResult posterior_coverage(const FHDataset& data, Index i, const PriorSpec& prior, const EbInterval& interval,
                                  const PosteriorGrid& grid);

struct PosteriorMoments {
    double mean_A = 0.0;
    double var_A = 0.0;
    double mean_theta = 0.0;
    double var_theta = 0.0;
    double mean_g1 = 0.0;
};

PosteriorMoments posterior_moments(const PosteriorGrid& grid);

/// Piecewise-linear CDF of A through (0, 0), the node midpoints of the
/// cumulative weights, and (A_hi, 1).
double grid_cdf(const PosteriorGrid& grid, double A);

struct PosteriorDraw {
    double A = 0.0;
    double theta = 0.0;
};

/// A by inverse-CDF on the grid, then theta | A ~ N(BLUP_i(A), delta_i(A)^2)
/// evaluated exactly at the drawn A.
std::vector<PosteriorDraw> sample_posterior(const FHDataset& data, const PosteriorGrid& grid, std::size_t n,
                                            std::uint64_t seed);

}  // namespace fhmp
