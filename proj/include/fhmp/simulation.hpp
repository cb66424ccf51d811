#pragma once

#include "fhmp/core.hpp"
#include "fhmp/intervals.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fhmp {

enum class DataGenerator {
    Normal,            // theta ~ N(X beta, A), y ~ N(theta, D)
    BaseballBinomial,  // hits ~ Bin(45, p_true), y = arcsine transform, centered
    BaseballNormal     // y ~ N(theta_true, 1) around the transformed truth
};

struct SimSetting {
    std::string name = "Custom";
    Index m = 15;
    Index p = 3;
    VectorXd beta;
    double A_true = 1.0;
    VectorXd D;                                // length m
    std::vector<int> group;                    // length m, index into group_labels
    std::vector<std::string> group_labels;
    std::vector<std::string> area_ids;
    bool freeze_X = false;                     // draw X once instead of per replicate
    int replicates = 200;
    double alpha = 0.05;
    std::uint64_t seed = 20240601;
    int panels = 48;                           // posterior grid panels per replicate
    DataGenerator generator = DataGenerator::Normal;
    VectorXd theta_fixed;                      // baseball designs
    VectorXd p_true;
    double center = -3.275;
    bool recenter = false;

    void validate() const;
};

/// Presets S11, S12, S21, S22, S31, S32, S33 (m a multiple of 5), S4, S5.
SimSetting make_setting(const std::string& name, Index m = 15);

/// JSON object with SimSetting field names; a known `name` starts from the
/// preset and the remaining fields override it.
SimSetting setting_from_json_text(const std::string& text);
SimSetting read_setting_file(const std::string& path);
std::string setting_to_json_text(const SimSetting& s);

/// Replicate `index` of the design; theta_true is filled in.
FHDataset simulate_dataset(const SimSetting& s, std::uint64_t index);

struct CellStats {
    std::string group;
    std::string method;
    std::optional<double> ebc;      // percent
    double ebc_se = 0.0;
    std::size_t ebc_trials = 0;
    std::optional<double> length;
    double length_se = 0.0;
    std::optional<double> pc;       // percent
    double pc_se = 0.0;
    std::size_t pc_trials = 0;
    std::size_t failures = 0;
};

struct ReplicateRecord {
    int replicate = 0;
    Index area = 0;
    std::string method;
    bool failed = false;
    bool hit = false;
    double length = 0.0;
    double pc = -1.0;               // < 0 when not computed
    double A_used = 0.0;
};

struct RunOptions {
    bool eb = true;
    bool pc = false;
    std::string prior = "matching";  // matching | drs | flat
    bool keep_records = false;
    int threads = 0;                  // 0: FHMP_THREADS or hardware concurrency
};

struct SimReport {
    SimSetting setting;
    std::vector<IntervalMethod> methods;
    RunOptions options;
    std::vector<CellStats> cells;
    double runtime_seconds = 0.0;
    std::vector<ReplicateRecord> records;

    const CellStats& cell(const std::string& group, IntervalMethod method) const;
};

SimReport run_coverage_study(const SimSetting& s, const std::vector<IntervalMethod>& methods, const RunOptions& opts);
SimReport run_eb_coverage(const SimSetting& s, const std::vector<IntervalMethod>& methods);
SimReport run_posterior_coverage(const SimSetting& s, const std::vector<IntervalMethod>& methods,
                                 const std::string& prior = "matching");

/// One row per group x method x metric.
std::string report_csv(const SimReport& r);
std::string report_json(const SimReport& r);
/// Group-by-method text table.
std::string report_table(const SimReport& r);

struct BiasAreaRow {
    Index area = 0;
    double D = 0.0;
    double mean_diff = 0.0;     // mean(A_YL - A_N)
    double mean_r = 0.0;        // mean r_i at the true A
    double mean_excess = 0.0;   // mean(A_YL - A_N - r_i)
    double se_excess = 0.0;
    std::size_t n = 0;
};

struct BiasLengthRow {
    Index m = 0;
    int replicates = 0;
    std::vector<BiasAreaRow> areas;       // first area of each group
    double mean_abs_length_diff = 0.0;    // mean |len_N - len_YL|
    double se_abs_length_diff = 0.0;
    double frac_positive = 0.0;           // share of len_N > len_YL
    std::size_t failures = 0;
};

struct BiasLengthReport {
    std::vector<BiasLengthRow> rows;
    double length_slope = 0.0;            // least-squares slope of log mean |diff| on log m
};

BiasLengthReport run_bias_length_study(const SimSetting& base, const std::vector<Index>& m_list);

std::string bias_report_csv(const BiasLengthReport& r);

/// Worker count: FHMP_THREADS if set, else hardware concurrency.
int default_thread_count();

}  // namespace fhmp
