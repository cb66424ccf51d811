#include "fhmp/baseball.hpp"
#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/intervals.hpp"
#include "fhmp/io.hpp"
#include "fhmp/normal.hpp"
#include "fhmp/posterior.hpp"
#include "fhmp/priors.hpp"
#include "fhmp/simulation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace fhmp;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 20240601;
    std::string out;
    std::string format = "csv";
    bool seed_set = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::vector<IntervalMethod> parse_methods(const std::string& s) {
    std::vector<IntervalMethod> out;
    for (const auto& tok : split_list(s)) out.push_back(parse_interval_method(tok));
    if (out.empty()) throw DataError("no interval methods given");
    return out;
}

void emit(const Globals& g, const std::string& text, const std::string& suffix = "") {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    const std::string path = g.out + suffix;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
}

PriorSpec prior_from_flag(const std::string& flag, const FHDataset& d, Index i) {
    if (flag == "matching") return PriorSpec::matching(d, i);
    if (flag == "matching-general") return PriorSpec::matching_general(d, i);
    if (flag == "drs") return PriorSpec::drs(d, i);
    if (flag == "flat") return PriorSpec::flat();
    if (flag.rfind("table:", 0) == 0) return read_prior_table(flag.substr(6));
    throw DataError("unknown prior '" + flag + "' (matching, matching-general, drs, flat, table:PATH)");
}

std::vector<EbInterval> all_intervals(const FHDataset& d, IntervalMethod method, double alpha) {
    std::vector<EbInterval> out;
    for (Index i = 0; i < d.m(); ++i) out.push_back(make_interval(d, i, alpha, method));
    return out;
}

std::string intervals_json(const FHDataset& d, const std::vector<EbInterval>& ivs) {
    json arr = json::array();
    for (const auto& iv : ivs) {
        json j{{"area", d.area_label(iv.area)}, {"method", to_string(iv.method)}, {"center", iv.center},
               {"lower", iv.lower},           {"upper", iv.upper},               {"length", iv.length()},
               {"A_used", iv.A_used}};
        if (d.theta_true) {
            j["theta_true"] = (*d.theta_true)(iv.area);
            j["covers"] = iv.contains((*d.theta_true)(iv.area));
        }
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::string intervals_text(const Globals& g, const FHDataset& d, const std::vector<EbInterval>& ivs) {
    if (g.format == "json") return intervals_json(d, ivs);
    std::ostringstream s;
    write_intervals_csv(s, d, ivs);
    return s.str();
}

// Variance estimates per method; AML methods are reported for every area.
std::string estimates_text(const Globals& g, const FHDataset& d, const std::vector<VarianceMethod>& methods,
                           double alpha, bool tolerate_failures = false) {
    const double z = normal_critical_value(alpha);
    json arr = json::array();
    std::ostringstream csv;
    csv << "method,area,A_hat,truncated,iterations\n";
    for (VarianceMethod vm : methods) {
        const bool per_area = vm == VarianceMethod::Hirose || vm == VarianceMethod::YL;
        const Index n = per_area ? d.m() : 1;
        for (Index i = 0; i < n; ++i) {
            const std::string area = per_area ? d.area_label(i) : "";
            VarianceFit f;
            try {
                f = per_area ? estimate_variance(d, vm, i, z) : estimate_variance(d, vm, std::nullopt, z);
            } catch (const ConvergenceError& e) {
                if (!tolerate_failures) throw;
                std::cerr << "warning: " << to_string(vm) << " " << area << ": " << e.what() << "\n";
                csv << to_string(vm) << "," << area << ",nan,0,0\n";
                arr.push_back({{"method", to_string(vm)}, {"area", area}, {"A_hat", nullptr}});
                continue;
            }
            csv << to_string(vm) << "," << area << "," << format_double(f.A_hat) << "," << (f.truncated ? 1 : 0)
                << "," << f.iterations << "\n";
            arr.push_back({{"method", to_string(vm)}, {"area", area}, {"A_hat", f.A_hat}, {"truncated", f.truncated}});
        }
    }
    return g.format == "json" ? arr.dump(2) + "\n" : csv.str();
}

std::string simulation_outputs(const Globals& g, const SimReport& r) {
    if (!g.out.empty()) {
        emit(g, report_csv(r), ".csv");
        emit(g, report_json(r), ".json");
        return report_table(r);
    }
    return report_table(r) + "\n" + (g.format == "json" ? report_json(r) + "\n" : report_csv(r));
}

SimSetting load_setting(const std::string& name_or_path, Index m) {
    if (name_or_path.find('.') != std::string::npos || name_or_path.find('/') != std::string::npos)
        return read_setting_file(name_or_path);
    return make_setting(name_or_path, m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interval estimation and coverage studies for the Fay-Herriot model"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed for simulation commands");
    app.add_option("--out", g.out, "Output path (prefix for simulate)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

    double alpha = 0.05;
    std::string dataset;
    std::string method = "N";
    std::string var_methods = "reml,hirose,yl";

    auto* fit = app.add_subcommand("fit", "Estimate A and print the per-area interval table");
    fit->add_option("dataset", dataset, "Dataset CSV")->required();
    fit->add_option("--estimators", var_methods, "Variance estimators (reml,hirose,yl,anova,anova-corrected)");
    fit->add_option("--method", method, "Interval method (direct, cox, yl, n)");
    fit->add_option("--alpha", alpha, "Nominal miscoverage");

    auto* intervals = app.add_subcommand("intervals", "Per-area confidence intervals");
    intervals->add_option("dataset", dataset, "Dataset CSV")->required();
    intervals->add_option("--method", method, "Interval method (direct, cox, yl, n)");
    intervals->add_option("--alpha", alpha, "Nominal miscoverage");

    std::string prior = "matching";
    int panels = 512;
    std::vector<int> areas;
    auto* pc = app.add_subcommand("posterior-coverage", "Posterior probability that each interval covers theta");
    pc->add_option("dataset", dataset, "Dataset CSV")->required();
    pc->add_option("--method", method, "Interval method");
    pc->add_option("--prior", prior, "matching, matching-general, drs, flat or table:PATH");
    pc->add_option("--alpha", alpha, "Nominal miscoverage");
    pc->add_option("--panels", panels, "Quadrature panels")->check(CLI::Range(2, 100000));
    pc->add_option("--area", areas, "1-based area indices (default: all)");

    std::string setting = "S11";
    Index m = 15;
    std::string methods = "N,YL";
    int replicates = 0;
    int sim_panels = 0;
    bool no_eb = false, with_pc = false;
    auto* sim = app.add_subcommand("simulate", "Coverage study for a preset or JSON setting");
    sim->add_option("--setting", setting, "Preset name (S11 ... S33, S4, S5) or JSON path");
    sim->add_option("--m", m, "Number of areas for presets");
    sim->add_option("--methods", methods, "Comma-separated interval methods");
    sim->add_option("--prior", prior, "Prior for posterior coverage (matching, drs, flat)");
    sim->add_option("--replicates", replicates, "Override the replicate count");
    sim->add_option("--panels", sim_panels, "Override the quadrature panel count");
    sim->add_flag("--pc", with_pc, "Also compute posterior coverage");
    sim->add_flag("--no-eb", no_eb, "Skip empirical coverage");

    std::string m_list = "30,60,120,240";
    auto* bias = app.add_subcommand("bias-study", "Bias of the YL estimator and N/YL length gap across m");
    bias->add_option("--setting", setting, "Covariate preset or JSON path");
    bias->add_option("--m-list", m_list, "Increasing list of m");
    bias->add_option("--replicates", replicates, "Replicates per m");

    std::string model = "M4";
    bool recenter = false;
    std::string bb_methods = "Direct,N,YL";
    auto* bb = app.add_subcommand("baseball", "Batting-average analysis");
    bb->add_option("--model", model, "M3 or M4")->check(CLI::IsMember({"M3", "M4"}));
    bb->add_option("--method", bb_methods, "Comma-separated interval methods");
    bb->add_option("--alpha", alpha, "Nominal miscoverage");
    bb->add_flag("--pc", with_pc, "Resimulate S4/S5 and report per-player posterior coverage");
    bb->add_flag("--recenter", recenter, "M3: center at the sample mean instead of -3.275");
    bb->add_option("--replicates", replicates, "Replicates for --pc");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    g.seed_set = app.count("--seed") > 0;

    try {
        if (*fit) {
            const FHDataset d = read_dataset_file(dataset);
            std::vector<VarianceMethod> vms;
            for (const auto& t : split_list(var_methods)) vms.push_back(parse_variance_method(t));
            const std::string est = estimates_text(g, d, vms, alpha);
            const std::string ivs = intervals_text(g, d, all_intervals(d, parse_interval_method(method), alpha));
            emit(g, est + (g.format == "csv" ? "\n" : "") + ivs);
        } else if (*intervals) {
            const FHDataset d = read_dataset_file(dataset);
            emit(g, intervals_text(g, d, all_intervals(d, parse_interval_method(method), alpha)));
        } else if (*pc) {
            const FHDataset d = read_dataset_file(dataset);
            const IntervalMethod im = parse_interval_method(method);
            std::vector<Index> idx;
            if (areas.empty())
                for (Index i = 0; i < d.m(); ++i) idx.push_back(i);
            for (int a : areas) {
                if (a < 1 || a > d.m()) throw DataError("--area " + std::to_string(a) + " out of range");
                idx.push_back(a - 1);
            }
            std::ostringstream csv;
            csv << "area,method,prior,lower,upper,posterior_coverage,quad_error,nodes\n";
            json arr = json::array();
            for (Index i : idx) {
                const EbInterval iv = make_interval(d, i, alpha, im);
                const PriorSpec ps = prior_from_flag(prior, d, i);
                GridOptions go;
                go.panels = panels;
                const PosteriorGrid grid = build_posterior_grid(d, i, ps, go);
                const CoverageResult c = posterior_coverage(grid, iv);
                csv << d.area_label(i) << "," << to_string(im) << "," << ps.label() << "," << format_double(iv.lower)
                    << "," << format_double(iv.upper) << "," << format_double(c.posterior_coverage) << ","
                    << format_double(c.quad_error) << "," << c.nodes << "\n";
                arr.push_back({{"area", d.area_label(i)}, {"method", to_string(im)}, {"prior", ps.label()},
                               {"lower", iv.lower}, {"upper", iv.upper}, {"posterior_coverage", c.posterior_coverage},
                               {"quad_error", c.quad_error}, {"nodes", c.nodes}});
            }
            emit(g, g.format == "json" ? arr.dump(2) + "\n" : csv.str());
        } else if (*sim) {
            SimSetting s = load_setting(setting, m);
            if (g.seed_set) s.seed = g.seed;
            if (replicates > 0) s.replicates = replicates;
            if (sim_panels > 0) s.panels = sim_panels;
            RunOptions o;
            o.eb = !no_eb;
            o.pc = with_pc;
            o.prior = prior;
            const SimReport r = run_coverage_study(s, parse_methods(methods), o);
            std::cout << simulation_outputs(g, r);
        } else if (*bias) {
            SimSetting s = load_setting(setting, 15);
            if (g.seed_set) s.seed = g.seed;
            if (replicates > 0) s.replicates = replicates;
            std::vector<Index> ms;
            for (const auto& t : split_list(m_list)) ms.push_back(std::stol(t));
            const BiasLengthReport r = run_bias_length_study(s, ms);
            emit(g, bias_report_csv(r));
        } else if (*bb) {
            BaseballOptions bo;
            bo.model = model == "M3" ? BaseballModel::M3 : BaseballModel::M4;
            bo.recenter = recenter;
            const auto records = read_baseball(bundled_baseball_path());
            const FHDataset d = ingest_baseball(records, bo);
            std::ostringstream out;
            out << "# model " << model << ", mean transformed y " << format_double(d.y.mean()) << "\n";
            out << estimates_text(g, d, {VarianceMethod::Reml, VarianceMethod::Hirose, VarianceMethod::YL}, alpha, true)
                << "\n";
            std::vector<EbInterval> ivs;
            for (IntervalMethod im : parse_methods(bb_methods)) {
                for (Index i = 0; i < d.m(); ++i) {
                    try {
                        ivs.push_back(make_interval(d, i, alpha, im));
                    } catch (const ConvergenceError& e) {
                        std::cerr << "warning: " << d.area_label(i) << " " << to_string(im) << ": " << e.what()
                                  << "\n";
                    }
                }
            }
            out << intervals_text(g, d, ivs);
            if (with_pc) {
                for (const char* name : {"S4", "S5"}) {
                    SimSetting s = make_setting(name);
                    s.recenter = recenter;
                    if (g.seed_set) s.seed = g.seed;
                    if (replicates > 0) s.replicates = replicates;
                    RunOptions o;
                    o.pc = true;
                    out << "\n" << report_table(run_coverage_study(s, {IntervalMethod::YL}, o));
                }
            }
            emit(g, out.str());
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
