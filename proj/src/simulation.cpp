#include "fhmp/simulation.hpp"

#include "fhmp/baseball.hpp"
#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/io.hpp"
#include "fhmp/normal.hpp"
#include "fhmp/posterior.hpp"
#include "fhmp/priors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace fhmp {

using nlohmann::json;

namespace {

constexpr std::uint32_t kFrozenXTag = 0xF0F0F0F0u;

// Each setting name gets its own stream so that presets sharing a seed
// do not reuse the same draws.
std::mt19937_64 replicate_rng(const SimSetting& s, std::uint64_t index, std::uint32_t tag = 0) {
    std::vector<std::uint32_t> key{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                                   static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), tag};
    for (unsigned char c : s.name) key.push_back(c);
    std::seed_seq seq(key.begin(), key.end());
    return std::mt19937_64(seq);
}

void set_groups(SimSetting& s, const std::vector<double>& unique_D) {
    const Index groups = static_cast<Index>(unique_D.size());
    if (s.m % groups != 0) throw DataError("m must be a multiple of the number of D groups");
    const Index size = s.m / groups;
    s.D.resize(s.m);
    s.group.assign(static_cast<std::size_t>(s.m), 0);
    s.group_labels.clear();
    for (Index g = 0; g < groups; ++g) {
        s.group_labels.push_back("G" + std::to_string(g + 1));
        for (Index k = 0; k < size; ++k) {
            s.D(g * size + k) = unique_D[static_cast<std::size_t>(g)];
            s.group[static_cast<std::size_t>(g * size + k)] = static_cast<int>(g);
        }
    }
}

void set_balanced(SimSetting& s, double D) {
    s.D = VectorXd::Constant(s.m, D);
    s.group.assign(static_cast<std::size_t>(s.m), 0);
    s.group_labels = {"all"};
}

MatrixXd draw_covariates(Index m, Index p, std::mt19937_64& rng) {
    MatrixXd X(m, p);
    if (p == 0) return X;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Index i = 0; i < m; ++i) {
        X(i, 0) = 1.0;
        for (Index c = 1; c < p; ++c) X(i, c) = nd(rng);
    }
    return X;
}

}  // namespace

void SimSetting::validate() const {
    if (m < 1) throw DataError("setting: m must be positive");
    if (D.size() != m) throw DataError("setting: D must have length m");
    if ((D.array() <= 0.0).any() || !D.allFinite()) throw DataError("setting: D must be positive");
    if (static_cast<Index>(group.size()) != m) throw DataError("setting: group must have length m");
    for (int g : group)
        if (g < 0 || g >= static_cast<int>(group_labels.size())) throw DataError("setting: bad group index");
    if (replicates < 1) throw DataError("setting: replicates must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("setting: alpha must lie in (0, 1)");
    if (panels < 2) throw DataError("setting: panels must be >= 2");
    if (generator == DataGenerator::Normal) {
        if (p < 0 || m <= p) throw DataError("setting: need 0 <= p < m");
        if (beta.size() != p) throw DataError("setting: beta must have length p");
        if (!(A_true > 0.0)) throw DataError("setting: A must be positive");
    } else {
        if (p != 0) throw DataError("setting: baseball designs have no covariates");
        if (theta_fixed.size() != m || p_true.size() != m) throw DataError("setting: baseball truth has wrong length");
    }
}

SimSetting make_setting(const std::string& name, Index m) {
    SimSetting s;
    s.name = name;
    s.m = m;
    const std::vector<double> d1{0.01, 0.02, 0.1, 0.2, 0.3};
    std::vector<double> d2;
    for (double v : d1) d2.push_back(5.0 * v);
    const VectorXd beta3 = (VectorXd(3) << 2.0, -5.0, 8.0).finished();
    if (name == "S11" || name == "S12" || name == "S21" || name == "S22") {
        const bool second = name == "S12" || name == "S22";
        const bool covariates = name[1] == '1';
        s.p = covariates ? 3 : 0;
        s.beta = covariates ? beta3 : VectorXd(0);
        s.A_true = second ? 5.0 : 1.0;
        set_groups(s, second ? d2 : d1);
    } else if (name == "S31" || name == "S32" || name == "S33") {
        s.p = 3;
        s.beta = beta3;
        const double D = name == "S31" ? 0.1 : name == "S32" ? 1.0 : 5.0;
        s.A_true = name == "S31" ? 1.0 : name == "S32" ? 5.0 : 10.0;
        set_balanced(s, D);
    } else if (name == "S4" || name == "S5") {
        const auto records = read_baseball(bundled_baseball_path());
        s.m = static_cast<Index>(records.size());
        s.p = 0;
        s.beta.resize(0);
        s.generator = name == "S4" ? DataGenerator::BaseballBinomial : DataGenerator::BaseballNormal;
        s.D = VectorXd::Ones(s.m);
        s.theta_fixed.resize(s.m);
        s.p_true.resize(s.m);
        s.group_labels.clear();
        s.group.clear();
        for (Index i = 0; i < s.m; ++i) {
            const auto& r = records[static_cast<std::size_t>(i)];
            s.p_true(i) = r.p_true;
            s.theta_fixed(i) = arcsine_transform(r.p_true);
            s.group.push_back(static_cast<int>(i));
            s.group_labels.push_back(r.player);
            s.area_ids.push_back(r.player);
        }
        s.A_true = 0.0;
    } else {
        throw DataError("unknown setting '" + name + "'");
    }
    s.validate();
    return s;
}

SimSetting setting_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("setting JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("setting JSON must be an object");
    try {
        static const std::vector<std::string> presets{"S11", "S12", "S21", "S22", "S31",
                                                      "S32", "S33", "S4",  "S5"};
        const std::string name = j.value("name", std::string("Custom"));
        const bool is_preset = std::find(presets.begin(), presets.end(), name) != presets.end();
        const std::string base = j.value("base", is_preset ? name : std::string());
        const Index m = j.value("m", static_cast<Index>(15));
        SimSetting s;
        if (!base.empty()) {
            s = make_setting(base, m);
            s.name = name;
        } else {
            s.name = name;
            s.m = m;
            s.p = j.at("p").get<Index>();
            s.A_true = j.at("A").get<double>();
        }
        if (j.contains("p")) s.p = j["p"].get<Index>();
        if (j.contains("A")) s.A_true = j["A"].get<double>();
        if (j.contains("beta")) {
            const auto b = j["beta"].get<std::vector<double>>();
            s.beta = Eigen::Map<const VectorXd>(b.data(), static_cast<Index>(b.size()));
        }
        if (j.contains("D_groups")) set_groups(s, j["D_groups"].get<std::vector<double>>());
        if (j.contains("D")) {
            const auto d = j["D"].get<std::vector<double>>();
            if (static_cast<Index>(d.size()) != s.m) throw DataError("setting: D must have length m");
            s.D = Eigen::Map<const VectorXd>(d.data(), s.m);
            if (s.group.size() != d.size()) {
                // group areas by identical D values, in order of first appearance
                std::vector<double> seen;
                s.group.clear();
                s.group_labels.clear();
                for (double v : d) {
                    auto it = std::find(seen.begin(), seen.end(), v);
                    if (it == seen.end()) {
                        seen.push_back(v);
                        s.group_labels.push_back("G" + std::to_string(seen.size()));
                        it = seen.end() - 1;
                    }
                    s.group.push_back(static_cast<int>(it - seen.begin()));
                }
            }
        }
        s.replicates = j.value("replicates", s.replicates);
        s.alpha = j.value("alpha", s.alpha);
        s.seed = j.value("seed", s.seed);
        s.freeze_X = j.value("freeze_X", s.freeze_X);
        s.panels = j.value("panels", s.panels);
        s.center = j.value("center", s.center);
        s.recenter = j.value("recenter", s.recenter);
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw DataError(std::string("setting JSON: ") + e.what());
    }
}

SimSetting read_setting_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return setting_from_json_text(ss.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string setting_to_json_text(const SimSetting& s) {
    json j;
    j["name"] = s.name;
    j["m"] = s.m;
    j["p"] = s.p;
    j["beta"] = std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size());
    j["A"] = s.A_true;
    j["D"] = std::vector<double>(s.D.data(), s.D.data() + s.D.size());
    j["replicates"] = s.replicates;
    j["alpha"] = s.alpha;
    j["seed"] = s.seed;
    j["freeze_X"] = s.freeze_X;
    j["panels"] = s.panels;
    if (s.generator != DataGenerator::Normal) {
        j["center"] = s.center;
        j["recenter"] = s.recenter;
    }
    return j.dump(2);
}

FHDataset simulate_dataset(const SimSetting& s, std::uint64_t index) {
    std::mt19937_64 rng = replicate_rng(s, index);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Index m = s.m;
    VectorXd y(m), theta(m);
    MatrixXd X(m, s.p);

    if (s.generator == DataGenerator::Normal) {
        if (s.freeze_X) {
            std::mt19937_64 xr = replicate_rng(s, 0, kFrozenXTag);
            X = draw_covariates(m, s.p, xr);
        } else {
            X = draw_covariates(m, s.p, rng);
        }
        const double sa = std::sqrt(s.A_true);
        for (Index i = 0; i < m; ++i) {
            const double mean = s.p > 0 ? X.row(i).dot(s.beta) : 0.0;
            theta(i) = mean + sa * nd(rng);
            y(i) = theta(i) + std::sqrt(s.D(i)) * nd(rng);
        }
    } else {
        for (Index i = 0; i < m; ++i) {
            theta(i) = s.theta_fixed(i);
            if (s.generator == DataGenerator::BaseballBinomial) {
                std::binomial_distribution<int> bd(kBaseballAtBats, s.p_true(i));
                y(i) = arcsine_transform(bd(rng) / static_cast<double>(kBaseballAtBats));
            } else {
                y(i) = theta(i) + std::sqrt(s.D(i)) * nd(rng);
            }
        }
        const double c = s.recenter ? y.mean() : s.center;
        y.array() -= c;
        theta.array() -= c;
    }
    FHDataset d = FHDataset::make(y, s.D, X);
    d.area_ids = s.area_ids;
    d.theta_true = theta;
    return d;
}

int default_thread_count() {
    if (const char* env = std::getenv("FHMP_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(k) for k in [0, n) on a small pool; results are written by
// index so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, int threads, Body body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= n) return;
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

PriorSpec make_prior(const std::string& kind, const FHDataset& d, Index i) {
    if (kind == "matching") return PriorSpec::matching(d, i);
    if (kind == "drs") return PriorSpec::drs(d, i);
    if (kind == "flat") return PriorSpec::flat();
    throw DataError("unknown prior '" + kind + "' (matching, drs, flat)");
}

std::vector<ReplicateRecord> run_replicate(const SimSetting& s, int rep, const std::vector<IntervalMethod>& methods,
                                           const RunOptions& opts) {
    const FHDataset d = simulate_dataset(s, static_cast<std::uint64_t>(rep));
    const VectorXd& theta = *d.theta_true;
    const double z = normal_critical_value(s.alpha);
    std::vector<ReplicateRecord> recs;
    std::vector<EbInterval> ivs;
    std::map<double, std::optional<VarianceFit>> hirose;  // the Hirose factor depends on D_i only

    for (IntervalMethod method : methods) {
        for (Index i = 0; i < s.m; ++i) {
            ReplicateRecord r;
            r.replicate = rep;
            r.area = i;
            r.method = to_string(method);
            EbInterval iv;
            try {
                switch (method) {
                    case IntervalMethod::N: {
                        auto it = hirose.find(d.D(i));
                        if (it == hirose.end()) {
                            std::optional<VarianceFit> f;
                            try {
                                f = estimate_variance(d, VarianceMethod::Hirose, i, z);
                            } catch (const ConvergenceError&) {
                            }
                            it = hirose.emplace(d.D(i), f).first;
                        }
                        if (!it->second) throw ConvergenceError("Hirose estimator failed");
                        VarianceFit f = *it->second;
                        f.area = i;
                        iv = interval_n(d, i, s.alpha, f);
                        break;
                    }
                    case IntervalMethod::YL:
                        iv = interval_yl(d, i, s.alpha,
                                         estimate_variance(d, VarianceMethod::YL, i, z));
                        break;
                    default: iv = make_interval(d, i, s.alpha, method); break;
                }
                r.hit = iv.contains(theta(i));
                r.length = iv.length();
                r.A_used = iv.A_used;
            } catch (const ConvergenceError&) {
                r.failed = true;
            }
            recs.push_back(r);
            ivs.push_back(iv);
        }
    }

    if (opts.pc) {
        std::vector<Index> areas;
        std::vector<PriorSpec> priors;
        for (Index i = 0; i < s.m; ++i) {
            areas.push_back(i);
            priors.push_back(make_prior(opts.prior, d, i));
        }
        GridOptions go;
        go.panels = s.panels;
        go.estimate_error = false;
        const std::vector<PosteriorGrid> grids = build_posterior_grids(d, areas, priors, go);
        for (std::size_t k = 0; k < recs.size(); ++k) {
            if (recs[k].failed) continue;
            recs[k].pc = posterior_coverage(grids[static_cast<std::size_t>(recs[k].area)], ivs[k]).posterior_coverage;
        }
    }
    return recs;
}

struct Accumulator {
    std::size_t hits = 0, trials = 0, failures = 0;
    double len_sum = 0.0, len_sq = 0.0;
    std::vector<double> pc_by_rep_sum;
    std::vector<int> pc_by_rep_n;
};

}  // namespace

const CellStats& SimReport::cell(const std::string& group, IntervalMethod method) const {
    const std::string m = to_string(method);
    for (const CellStats& c : cells)
        if (c.group == group && c.method == m) return c;
    throw DomainError("no report cell for group '" + group + "' and method " + m);
}

SimReport run_coverage_study(const SimSetting& s, const std::vector<IntervalMethod>& methods, const RunOptions& opts) {
    s.validate();
    if (methods.empty()) throw DataError("no interval methods requested");
    for (IntervalMethod mth : methods)
        if (mth == IntervalMethod::Cox) throw DataError("the Cox interval is not part of the coverage designs");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t M = static_cast<std::size_t>(s.replicates);
    std::vector<std::vector<ReplicateRecord>> per_rep(M);
    const int threads = opts.threads > 0 ? opts.threads : default_thread_count();
    parallel_for(M, threads, [&](std::size_t k) { per_rep[k] = run_replicate(s, static_cast<int>(k), methods, opts); });

    SimReport rep;
    rep.setting = s;
    rep.methods = methods;
    rep.options = opts;
    const std::size_t G = s.group_labels.size();
    std::vector<Accumulator> acc(G * methods.size());
    for (auto& a : acc) {
        a.pc_by_rep_sum.assign(M, 0.0);
        a.pc_by_rep_n.assign(M, 0);
    }
    const auto method_index = [&](const std::string& name) {
        for (std::size_t k = 0; k < methods.size(); ++k)
            if (to_string(methods[k]) == name) return k;
        return std::size_t{0};
    };
    for (std::size_t r = 0; r < M; ++r) {
        for (const ReplicateRecord& rec : per_rep[r]) {
            const std::size_t g = static_cast<std::size_t>(s.group[static_cast<std::size_t>(rec.area)]);
            Accumulator& a = acc[g * methods.size() + method_index(rec.method)];
            if (rec.failed) {
                ++a.failures;
                continue;
            }
            ++a.trials;
            a.hits += rec.hit ? 1 : 0;
            a.len_sum += rec.length;
            a.len_sq += rec.length * rec.length;
            if (rec.pc >= 0.0) {
                a.pc_by_rep_sum[r] += rec.pc;
                ++a.pc_by_rep_n[r];
            }
        }
        if (opts.keep_records) rep.records.insert(rep.records.end(), per_rep[r].begin(), per_rep[r].end());
    }
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t k = 0; k < methods.size(); ++k) {
            const Accumulator& a = acc[g * methods.size() + k];
            CellStats c;
            c.group = s.group_labels[g];
            c.method = to_string(methods[k]);
            c.failures = a.failures;
            if (a.trials > 0) {
                const double n = static_cast<double>(a.trials);
                const double mean_len = a.len_sum / n;
                c.length = mean_len;
                c.length_se = n > 1 ? std::sqrt(std::max(0.0, (a.len_sq - n * mean_len * mean_len) / (n - 1)) / n) : 0.0;
                if (opts.eb) {
                    const double ph = static_cast<double>(a.hits) / n;
                    c.ebc = 100.0 * ph;
                    c.ebc_se = 100.0 * std::sqrt(ph * (1.0 - ph) / n);
                    c.ebc_trials = a.trials;
                }
            }
            if (opts.pc) {
                // mean over (area, replicate) pairs; SE from the spread of per-replicate group means
                double sum = 0.0, sq = 0.0, cnt = 0.0;
                std::size_t reps = 0;
                for (std::size_t r = 0; r < M; ++r) {
                    if (a.pc_by_rep_n[r] == 0) continue;
                    const double v = a.pc_by_rep_sum[r] / a.pc_by_rep_n[r];
                    sum += a.pc_by_rep_sum[r];
                    cnt += a.pc_by_rep_n[r];
                    sq += v * v;
                    ++reps;
                }
                if (cnt > 0) {
                    std::vector<double> means;
                    double mean_of_means = 0.0;
                    for (std::size_t r = 0; r < M; ++r)
                        if (a.pc_by_rep_n[r] > 0) mean_of_means += a.pc_by_rep_sum[r] / a.pc_by_rep_n[r];
                    mean_of_means /= static_cast<double>(reps);
                    const double var =
                        reps > 1 ? std::max(0.0, (sq - reps * mean_of_means * mean_of_means) / (reps - 1.0)) : 0.0;
                    c.pc = 100.0 * sum / cnt;
                    c.pc_se = 100.0 * std::sqrt(var / static_cast<double>(reps));
                    c.pc_trials = static_cast<std::size_t>(cnt);
                }
            }
            rep.cells.push_back(c);
        }
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

SimReport run_eb_coverage(const SimSetting& s, const std::vector<IntervalMethod>& methods) {
    RunOptions o;
    o.eb = true;
    o.pc = false;
    return run_coverage_study(s, methods, o);
}

SimReport run_posterior_coverage(const SimSetting& s, const std::vector<IntervalMethod>& methods,
                                 const std::string& prior) {
    RunOptions o;
    o.eb = false;
    o.pc = true;
    o.prior = prior;
    return run_coverage_study(s, methods, o);
}

std::string report_csv(const SimReport& r) {
    std::ostringstream out;
    out << "setting,m,group,method,metric,value,se,n,failures\n";
    const auto row = [&](const CellStats& c, const char* metric, double v, double se, std::size_t n) {
        out << r.setting.name << "," << r.setting.m << "," << c.group << "," << c.method << "," << metric << ","
            << format_double(v) << "," << format_double(se) << "," << n << "," << c.failures << "\n";
    };
    for (const CellStats& c : r.cells) {
        if (c.pc) row(c, "PC", *c.pc, c.pc_se, c.pc_trials);
        if (c.ebc) row(c, "EBC", *c.ebc, c.ebc_se, c.ebc_trials);
        if (c.length) row(c, "length", *c.length, c.length_se, c.ebc_trials ? c.ebc_trials : c.pc_trials);
    }
    return out.str();
}

std::string report_json(const SimReport& r) {
    json j;
    j["setting"] = json::parse(setting_to_json_text(r.setting));
    j["prior"] = r.options.pc ? json(r.options.prior) : json(nullptr);
    j["replicates"] = r.setting.replicates;
    j["runtime_seconds"] = r.runtime_seconds;
    std::vector<std::string> methods;
    for (IntervalMethod m : r.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    json cells = json::array();
    for (const CellStats& c : r.cells) {
        json cj;
        cj["group"] = c.group;
        cj["method"] = c.method;
        cj["failures"] = c.failures;
        if (c.pc) cj["PC"] = {{"value", *c.pc}, {"se", c.pc_se}, {"n", c.pc_trials}};
        if (c.ebc) cj["EBC"] = {{"value", *c.ebc}, {"se", c.ebc_se}, {"n", c.ebc_trials}};
        if (c.length) cj["length"] = {{"value", *c.length}, {"se", c.length_se}};
        cells.push_back(cj);
    }
    j["cells"] = cells;
    if (!r.records.empty()) {
        json recs = json::array();
        for (const ReplicateRecord& x : r.records)
            recs.push_back({{"replicate", x.replicate}, {"area", x.area}, {"method", x.method}, {"failed", x.failed},
                            {"hit", x.hit}, {"length", x.length}, {"pc", x.pc}, {"A_used", x.A_used}});
        j["records"] = recs;
    }
    return j.dump(2);
}

std::string report_table(const SimReport& r) {
    std::ostringstream out;
    out << r.setting.name << "  m=" << r.setting.m << "  M=" << r.setting.replicates;
    if (r.options.pc) out << "  prior=" << r.options.prior;
    out << "\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-16s", "group");
    out << buf;
    for (IntervalMethod m : r.methods) {
        std::snprintf(buf, sizeof buf, " | %-22s", to_string(m).c_str());
        out << buf;
    }
    out << "\n";
    for (const std::string& g : r.setting.group_labels) {
        std::snprintf(buf, sizeof buf, "%-16s", g.c_str());
        out << buf;
        for (IntervalMethod m : r.methods) {
            const CellStats& c = r.cell(g, m);
            std::string s;
            if (c.pc) {
                std::snprintf(buf, sizeof buf, "PC %.1f ", *c.pc);
                s += buf;
            }
            if (c.ebc) {
                std::snprintf(buf, sizeof buf, "EBC %.1f ", *c.ebc);
                s += buf;
            }
            if (c.length) {
                std::snprintf(buf, sizeof buf, "(%.2f)", *c.length);
                s += buf;
            }
            std::snprintf(buf, sizeof buf, " | %-22s", s.c_str());
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

BiasLengthReport run_bias_length_study(const SimSetting& base, const std::vector<Index>& m_list) {
    if (m_list.empty()) throw DataError("empty m list");
    for (std::size_t k = 1; k < m_list.size(); ++k)
        if (m_list[k] <= m_list[k - 1]) throw DataError("m list must be increasing");
    if (base.generator != DataGenerator::Normal || base.p == 0)
        throw DataError("bias/length study needs a covariate design");
    BiasLengthReport out;
    const double z = normal_critical_value(base.alpha);
    for (Index m : m_list) {
        SimSetting s = base;
        s.m = m;
        if (base.group_labels.size() > 1) {
            std::vector<double> unique_D;
            for (std::size_t g = 0; g < base.group_labels.size(); ++g) {
                const auto it = std::find(base.group.begin(), base.group.end(), static_cast<int>(g));
                unique_D.push_back(base.D(it - base.group.begin()));
            }
            set_groups(s, unique_D);
        } else {
            set_balanced(s, base.D(0));
        }
        s.validate();
        std::vector<Index> areas;
        for (std::size_t g = 0; g < s.group_labels.size(); ++g)
            areas.push_back(std::find(s.group.begin(), s.group.end(), static_cast<int>(g)) - s.group.begin());

        struct RepOut {
            std::vector<double> diff, r;
            std::vector<bool> ok;
            std::vector<double> len_diff;
        };
        const std::size_t M = static_cast<std::size_t>(s.replicates);
        std::vector<RepOut> outs(M);
        parallel_for(M, default_thread_count(), [&](std::size_t k) {
            const FHDataset d = simulate_dataset(s, k);
            const GlsFit true_fit = gls_fit(d, s.A_true);
            const VectorXd r_true = gls_leverages(d, true_fit);
            RepOut ro;
            for (Index i : areas) {
                try {
                    const VarianceFit fn = estimate_variance(d, VarianceMethod::Hirose, i, z);
                    const VarianceFit fy = estimate_variance(d, VarianceMethod::YL, i, z);
                    const double dn = area_quantities(d, fn.A_hat, i).delta;
                    const double sy = area_quantities(d, fy.A_hat, i).sigma;
                    ro.diff.push_back(fy.A_hat - fn.A_hat);
                    ro.r.push_back(r_true(i));
                    ro.len_diff.push_back(2.0 * z * (dn - sy));
                    ro.ok.push_back(true);
                } catch (const ConvergenceError&) {
                    ro.diff.push_back(0.0);
                    ro.r.push_back(0.0);
                    ro.len_diff.push_back(0.0);
                    ro.ok.push_back(false);
                }
            }
            outs[k] = std::move(ro);
        });

        BiasLengthRow row;
        row.m = m;
        row.replicates = s.replicates;
        double abs_sum = 0.0, abs_sq = 0.0, pos = 0.0, n_len = 0.0;
        for (std::size_t a = 0; a < areas.size(); ++a) {
            BiasAreaRow ar;
            ar.area = areas[a];
            ar.D = s.D(areas[a]);
            double ex_sum = 0.0, ex_sq = 0.0;
            for (std::size_t k = 0; k < M; ++k) {
                if (!outs[k].ok[a]) {
                    ++row.failures;
                    continue;
                }
                const double ex = outs[k].diff[a] - outs[k].r[a];
                ar.mean_diff += outs[k].diff[a];
                ar.mean_r += outs[k].r[a];
                ex_sum += ex;
                ex_sq += ex * ex;
                ++ar.n;
                const double ld = outs[k].len_diff[a];
                abs_sum += std::abs(ld);
                abs_sq += ld * ld;
                pos += ld > 0.0 ? 1.0 : 0.0;
                n_len += 1.0;
            }
            if (ar.n > 0) {
                const double n = static_cast<double>(ar.n);
                ar.mean_diff /= n;
                ar.mean_r /= n;
                ar.mean_excess = ex_sum / n;
                ar.se_excess = n > 1 ? std::sqrt(std::max(0.0, (ex_sq - n * ar.mean_excess * ar.mean_excess) / (n - 1)) / n) : 0.0;
            }
            row.areas.push_back(ar);
        }
        if (n_len > 0) {
            row.mean_abs_length_diff = abs_sum / n_len;
            row.se_abs_length_diff =
                n_len > 1 ? std::sqrt(std::max(0.0, (abs_sq - n_len * row.mean_abs_length_diff * row.mean_abs_length_diff) /
                                                        (n_len - 1)) / n_len)
                          : 0.0;
            row.frac_positive = pos / n_len;
        }
        out.rows.push_back(row);
    }
    if (out.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(out.rows.size());
        for (const auto& r : out.rows) {
            const double x = std::log(static_cast<double>(r.m));
            const double y = std::log(r.mean_abs_length_diff);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        out.length_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return out;
}

std::string bias_report_csv(const BiasLengthReport& r) {
    std::ostringstream out;
    out << "m,replicates,area,D,mean_diff,mean_r,mean_excess,se_excess,n,mean_abs_length_diff,se_abs_length_diff,"
           "frac_positive,failures\n";
    for (const auto& row : r.rows)
        for (const auto& a : row.areas)
            out << row.m << "," << row.replicates << "," << a.area + 1 << "," << format_double(a.D) << ","
                << format_double(a.mean_diff) << "," << format_double(a.mean_r) << "," << format_double(a.mean_excess)
                << "," << format_double(a.se_excess) << "," << a.n << "," << format_double(row.mean_abs_length_diff)
                << "," << format_double(row.se_abs_length_diff) << "," << format_double(row.frac_positive) << ","
                << row.failures << "\n";
    out << "# length_slope," << format_double(r.length_slope) << "\n";
    return out.str();
}

}  // namespace fhmp
