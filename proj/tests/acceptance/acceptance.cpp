// One PASS/FAIL line per acceptance criterion. Reference values are the
// printed tables; tolerances are fixed here and never adjusted at run time.

#include "oracles.hpp"

#include "fhmp/baseball.hpp"
#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/posterior.hpp"
#include "fhmp/priors.hpp"
#include "fhmp/reml.hpp"
#include "fhmp/simulation.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace fhmp;

namespace {

constexpr double kPcTol = 0.7;
constexpr double kEbcTol = 2.5;
constexpr double kLengthTol = 0.1;
constexpr double kM30LengthTol = 0.15;
constexpr double kBaseballPcTol = 1.0;
constexpr double kMeanTol = 0.01;
constexpr double kDefectTol = 1e-8;
constexpr double kTailTol = 1e-10;
constexpr double kSlopeMax = -1.2;
constexpr double kConstTol = 1e-6;
constexpr double kDerivTol = 1e-6;
constexpr double kClosedFormTol = 1e-8;

const std::vector<std::string> kGroups{"G1", "G2", "G3", "G4", "G5"};

// {setting: {method: per-group value}} from the m = 15 tables
const std::map<std::string, std::map<std::string, std::vector<double>>> kPc15{
    {"S11", {{"N", {95.0, 94.9, 94.7, 94.6, 94.3}}, {"YL", {95.0, 94.9, 94.9, 94.8, 94.7}}}},
    {"S12", {{"N", {94.9, 94.9, 94.7, 94.5, 94.2}}, {"YL", {95.0, 94.9, 94.9, 94.9, 94.7}}}},
    {"S31", {{"N", {94.9}}, {"YL", {94.9}}}},
    {"S32", {{"N", {94.8}}, {"YL", {94.8}}}},
    {"S33", {{"N", {94.5}}, {"YL", {94.5}}}},
};
const std::map<std::string, std::map<std::string, std::vector<double>>> kEbc15{
    {"S11", {{"N", {95.3, 95.3, 96.3, 95.3, 93.3}}, {"YL", {95.3, 95.3, 96.3, 95.3, 94.0}}}},
    {"S12", {{"N", {95.0, 95.0, 96.0, 94.3, 92.3}}, {"YL", {95.3, 95.3, 96.3, 95.3, 94.0}}}},
    {"S31", {{"N", {95.3}}, {"YL", {95.3}}}},
    {"S32", {{"N", {96.3}}, {"YL", {96.7}}}},
    {"S33", {{"N", {96.0}}, {"YL", {95.7}}}},
};
const std::map<std::string, std::map<std::string, std::vector<double>>> kLength15{
    {"S11", {{"N", {0.4, 0.6, 1.2, 1.6, 1.9}}, {"YL", {0.4, 0.6, 1.2, 1.6, 1.9}}}},
    {"S12", {{"N", {0.9, 1.2, 2.6, 3.5, 4.2}}, {"YL", {0.9, 1.2, 2.7, 3.7, 4.3}}}},
    {"S31", {{"N", {0.4}}, {"YL", {0.4}}}},
    {"S32", {{"N", {3.7}}, {"YL", {3.7}}}},
    {"S33", {{"N", {7.7}}, {"YL", {7.7}}}},
};

struct PlayerPc {
    const char* player;
    double s4, s5;
};
const std::vector<PlayerPc> kPlayers{
    {"Clemente", 93.9, 94.0},   {"F. Robinson", 93.9, 94.1}, {"Munson", 93.9, 94.5},     {"Scott", 94.0, 94.7},
    {"F. Howard", 94.1, 94.1},  {"Campaneris", 93.9, 93.9},  {"Spencer", 94.5, 94.0},    {"Berry", 93.9, 94.1},
    {"Swoboda", 93.8, 94.0},    {"Kessinger", 93.8, 94.2},   {"E. Rodriguez", 93.9, 94.1}, {"Williams", 93.8, 94.2},
    {"Unser", 93.9, 94.2},      {"Johnstone", 93.9, 94.1},   {"Santo", 93.9, 93.9},      {"Petrocelli", 93.7, 93.9},
    {"L. Alvarado", 94.2, 94.2}, {"Alvis", 94.6, 94.4},
};

int failures = 0;

void verdict(int n, bool ok, const std::string& summary) {
    std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", summary.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

bool near(double v, double ref, double tol) { return std::abs(v - ref) <= tol + 1e-12; }

SimReport run(const std::string& name, Index m, bool pc) {
    SimSetting s = make_setting(name, m);
    RunOptions o;
    o.eb = true;
    o.pc = pc;
    const auto t0 = std::chrono::steady_clock::now();
    SimReport r = run_coverage_study(s, {IntervalMethod::N, IntervalMethod::YL}, o);
    std::printf("  [%s m=%ld M=%d done in %.1f s]\n", name.c_str(), static_cast<long>(m), s.replicates,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return r;
}

const std::string& group_of(const SimReport& r, std::size_t g) { return r.setting.group_labels[g]; }

// Compares one metric of every (group, method) cell with the printed table.
int compare(const SimReport& r, const std::map<std::string, std::vector<double>>& ref, const char* metric,
            double tol) {
    int bad = 0;
    for (const auto& [method, values] : ref) {
        for (std::size_t g = 0; g < values.size(); ++g) {
            const CellStats& c = r.cell(group_of(r, g), parse_interval_method(method));
            const std::optional<double> v = std::string(metric) == "PC"       ? c.pc
                                            : std::string(metric) == "EBC"    ? c.ebc
                                                                              : c.length;
            const bool ok = v && near(*v, values[g], tol);
            bad += !ok;
            std::printf("  %-4s %-4s %-3s %-6s %8.3f  ref %6.1f  %s\n", r.setting.name.c_str(),
                        group_of(r, g).c_str(), method.c_str(), metric, v ? *v : NAN, values[g], ok ? "ok" : "off");
        }
    }
    return bad;
}

}  // namespace

int main() {
    std::printf("acceptance suite (threads: %d)\n", default_thread_count());

    // 1 and 2: unbalanced settings, m = 15
    std::map<std::string, SimReport> m15;
    for (const char* s : {"S11", "S12", "S31", "S32", "S33"}) m15.emplace(s, run(s, 15, true));

    {
        int bad = 0;
        for (const char* s : {"S11", "S12"}) bad += compare(m15.at(s), kPc15.at(s), "PC", kPcTol);
        verdict(1, bad == 0, fmt("S11/S12 PC within +/-%.1f pp: %.0f of 20 cells off", kPcTol, bad));
    }
    {
        int bad = 0;
        for (const char* s : {"S11", "S12"}) {
            bad += compare(m15.at(s), kEbc15.at(s), "EBC", kEbcTol);
            bad += compare(m15.at(s), kLength15.at(s), "length", kLengthTol);
        }
        verdict(2, bad == 0,
                fmt("S11/S12 EBC within +/-%.1f pp and length within +/-%.1f: %.0f of 40 cells off", kEbcTol,
                    kLengthTol, bad));
    }
    {
        int bad = 0;
        for (const char* s : {"S31", "S32", "S33"}) {
            bad += compare(m15.at(s), kPc15.at(s), "PC", kPcTol);
            bad += compare(m15.at(s), kEbc15.at(s), "EBC", kEbcTol);
            bad += compare(m15.at(s), kLength15.at(s), "length", kLengthTol);
        }
        verdict(3, bad == 0, fmt("S31/S32/S33 PC, EBC and length: %.0f of 18 cells off", bad));
    }

    // 4: m = 30 spot checks
    {
        const SimReport s11 = run("S11", 30, true);
        const SimReport s33 = run("S33", 30, false);
        int bad = compare(s11, {{"N", {95.0}}, {"YL", {95.0}}}, "PC", kPcTol);
        bad += compare(s33, {{"N", {7.4}}, {"YL", {7.3}}}, "length", kM30LengthTol);
        verdict(4, bad == 0, fmt("m=30 S11 G1 PC and S33 length: %.0f of 4 cells off", bad));
    }

    // 5: baseball
    {
        int bad = 0;
        for (const char* name : {"S4", "S5"}) {
            SimSetting s = make_setting(name);
            RunOptions o;
            o.pc = true;
            const SimReport r = run_coverage_study(s, {IntervalMethod::YL}, o);
            for (std::size_t k = 0; k < kPlayers.size(); ++k) {
                const double ref = std::string(name) == "S4" ? kPlayers[k].s4 : kPlayers[k].s5;
                const CellStats& c = r.cell(s.group_labels[k], IntervalMethod::YL);
                const bool ok = c.pc && near(*c.pc, ref, kBaseballPcTol);
                bad += !ok;
                std::printf("  %-3s %-13s PC %6.2f  ref %4.1f  %s\n", name, s.group_labels[k].c_str(),
                            c.pc ? *c.pc : NAN, ref, ok ? "ok" : "off");
            }
        }
        const auto records = read_baseball(bundled_baseball_path());
        BaseballOptions o;
        o.model = BaseballModel::M4;
        const FHDataset m4 = ingest_baseball(records, o);
        const double mean_y = m4.y.mean();
        const double q_alvarado = ols_leverages(m4)(16);
        const bool mean_ok = near(mean_y, kBaseballCenter, kMeanTol);
        const bool q_ok = q_alvarado >= 0.85 && q_alvarado <= 0.95;
        std::printf("  mean transformed y %.4f  ref %.3f +/- %.2f  %s\n", mean_y, kBaseballCenter, kMeanTol,
                    mean_ok ? "ok" : "off");
        std::printf("  Alvarado leverage q %.4f  ref [0.85, 0.95]  %s\n", q_alvarado, q_ok ? "ok" : "off");
        verdict(5, bad == 0 && mean_ok && q_ok,
                fmt("S4/S5 PC: %.0f of 36 players off; mean y %.4f; Alvarado q %.3f", bad, mean_y, q_alvarado));
    }

    // 6: the matching prior removes the coverage defect
    {
        double worst = 0.0;
        int datasets = 0, skipped = 0;
        for (Index m : {15, 30}) {
            SimSetting s = make_setting("S11", m);
            s.seed = 606;
            for (std::uint64_t rep = 0; datasets < (m == 15 ? 50 : 100); ++rep) {
                const FHDataset d = simulate_dataset(s, rep);
                try {
                    for (Index i = 0; i < m; ++i)
                        for (IntervalMethod im : {IntervalMethod::N, IntervalMethod::YL})
                            worst = std::max(worst,
                                             std::abs(coverage_defect_ci(d, i, PriorSpec::matching(d, i), 0.05, im)));
                    ++datasets;
                } catch (const TruncationError&) {
                    ++skipped;
                }
            }
        }
        verdict(6, worst <= kDefectTol,
                fmt("max |defect| %.2e over %.0f datasets (%.0f skipped with REML at 0)", worst, datasets, skipped));
    }

    // 7: propriety at m = p + 5
    {
        int checked = 0, bad = 0;
        double worst_tail = 0.0;
        for (int p : {0, 1, 3}) {
            for (unsigned seed = 0; seed < 10; ++seed) {
                const FHDataset d = oracle::random_dataset(p + 5, p, 7000 + 31 * p + seed);
                for (Index i = 0; i < d.m(); ++i) {
                    const PriorSpec prior = PriorSpec::matching(d, i);
                    const ProprietyReport rep = check_propriety(d, i, prior);
                    const PosteriorGrid g = build_posterior_grid(d, i, prior);
                    worst_tail = std::max(worst_tail, g.tail_mass_bound);
                    bad += !(rep.proper && g.tail_mass_bound <= kTailTol);
                    ++checked;
                }
            }
        }
        verdict(7, bad == 0,
                fmt("%.0f posteriors with m = p + 5, %.0f failed; worst tail bound %.1e", checked, bad, worst_tail));
    }

    // 8: bias of the YL estimator and the N/YL length gap
    {
        SimSetting s = make_setting("S11", 100);
        s.replicates = 20000;
        const auto t0 = std::chrono::steady_clock::now();
        const BiasLengthReport bias = run_bias_length_study(s, {100});
        int bad = 0;
        for (const auto& a : bias.rows[0].areas) {
            const bool ok = std::abs(a.mean_excess) <= 3 * a.se_excess;
            bad += !ok;
            std::printf("  m=100 D=%.2f mean(YL - N) %.5f  mean r %.5f  excess %.5f  SE %.5f  %s\n", a.D, a.mean_diff,
                        a.mean_r, a.mean_excess, a.se_excess, ok ? "ok" : "off");
        }
        SimSetting l = make_setting("S11", 30);
        l.replicates = 500;
        const BiasLengthReport len = run_bias_length_study(l, {30, 60, 120, 240});
        for (const auto& row : len.rows)
            std::printf("  m=%ld mean |length_N - length_YL| %.3e (SE %.1e)\n", static_cast<long>(row.m),
                        row.mean_abs_length_diff, row.se_abs_length_diff);
        std::printf("  [bias and length studies done in %.1f s]\n",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        const bool slope_ok = len.length_slope <= kSlopeMax;
        verdict(8, bad == 0 && slope_ok,
                fmt("(i) %.0f of 5 areas outside 3 SE; (ii) log-log slope %.2f (need <= %.1f)", bad,
                    len.length_slope, kSlopeMax));
    }

    // 9: numerical cross-checks
    {
        bool ok = true;
        // sampler against quadrature
        int sampler_bad = 0;
        for (unsigned k = 0; k < 20; ++k) {
            const FHDataset d = oracle::random_dataset(15, 3, 9000 + k);
            const Index i = k % 15;
            const PosteriorGrid g = build_posterior_grid(d, i, PriorSpec::matching(d, i));
            const EbInterval iv = interval_n(d, i, 0.05);
            const std::size_t n = 20000;
            double hits = 0;
            for (const auto& x : sample_posterior(d, g, n, 100 + k)) hits += iv.contains(x.theta);
            const double pc = posterior_coverage(g, iv).posterior_coverage;
            sampler_bad += std::abs(hits / n - pc) > 3 * std::sqrt(pc * (1 - pc) / n);
        }
        std::printf("  sampler vs quadrature: %d of 20 outside 3 SE\n", sampler_bad);
        ok &= sampler_bad == 0;

        // general and balanced priors differ by a constant
        FHDataset b = oracle::random_dataset(15, 3, 9100);
        b.D.setConstant(0.6);
        const PriorSpec gen = PriorSpec::matching_general(b, 4), bal = PriorSpec::matching_balanced(b, 4);
        std::vector<double> grid;
        for (int k = 0; k < 200; ++k) grid.push_back(1e-3 * std::pow(1e6, k / 199.0));
        const auto lg = gen.log_pi_sorted(grid), lb = bal.log_pi_sorted(grid);
        double spread_lo = INFINITY, spread_hi = -INFINITY;
        for (int k = 0; k < 200; ++k) {
            spread_lo = std::min(spread_lo, lg[k] - lb[k]);
            spread_hi = std::max(spread_hi, lg[k] - lb[k]);
        }
        std::printf("  general - balanced prior spread over 200 points: %.2e\n", spread_hi - spread_lo);
        ok &= spread_hi - spread_lo < kConstTol;

        // analytic derivatives against finite differences
        double worst_rel = 0.0;
        for (unsigned k = 0; k < 5; ++k) {
            const FHDataset d = oracle::random_dataset(15, 3, 9200 + k);
            for (double A : {0.3, 1.0, 4.0}) {
                const double h = 1e-4 * A;
                const double fd_score = oracle::central_diff([&](double a) { return oracle::log_lre(d, a); }, A, h);
                const double fd_hess = oracle::central_diff([&](double a) { return reml_score(d, a); }, A, h);
                const PriorSpec pr = PriorSpec::matching_general(d, k);
                worst_rel = std::max(worst_rel, std::abs(reml_score(d, A) - fd_score) / std::max(1.0, std::abs(fd_score)));
                worst_rel = std::max(worst_rel,
                                     std::abs(reml_hessian(d, gls_fit(d, A)) - fd_hess) / std::max(1.0, std::abs(fd_hess)));
                worst_rel = std::max(worst_rel, std::abs(pr.rho1(A) - pr.rho1_finite_difference(A)) /
                                                    std::max(1.0, std::abs(pr.rho1(A))));
            }
        }
        std::printf("  worst relative derivative error: %.2e\n", worst_rel);
        ok &= worst_rel < kDerivTol;

        // balanced REML closed form
        double worst_closed = 0.0;
        for (unsigned k = 0; k < 20; ++k) {
            FHDataset d = oracle::random_dataset(15, 3, 9300 + k);
            d.D.setConstant(0.5);
            const MatrixXd H = d.X * (d.X.transpose() * d.X).inverse() * d.X.transpose();
            const double closed = std::max(d.y.dot(d.y - H * d.y) / 12 - 0.5, 0.0);
            worst_closed = std::max(worst_closed, std::abs(estimate_variance(d, VarianceMethod::Reml).A_hat - closed) /
                                                      std::max(1.0, closed));
        }
        std::printf("  worst balanced REML error: %.2e\n", worst_closed);
        ok &= worst_closed < kClosedFormTol;
        verdict(9, ok, "sampler, prior constant, derivatives and REML closed form");
    }

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
