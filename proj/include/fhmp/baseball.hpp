#pragma once

#include "fhmp/core.hpp"

#include <string>
#include <vector>

namespace fhmp {

inline constexpr int kBaseballAtBats = 45;
inline constexpr double kBaseballCenter = -3.275;

struct BaseballRecord {
    std::string player;
    std::string team;
    int hits45 = 0;
    double p_hat = 0.0;    // hits45 / 45
    double p_true = 0.0;   // remainder-of-season average
    double x1 = 0.0;       // previous-season batting average
    double x2 = 0.0;       // previous-season at-bats
};

/// sqrt(n) asin(2p - 1); rejects p outside [0, 1].
double arcsine_transform(double p, int n = kBaseballAtBats);
double inverse_arcsine_transform(double y, int n = kBaseballAtBats);

std::vector<BaseballRecord> read_baseball(const std::string& path);
std::string bundled_baseball_path();

enum class BaseballModel { M3, M4 };

struct BaseballOptions {
    BaseballModel model = BaseballModel::M4;
    bool recenter = false;               // M3: subtract the sample mean instead of the fixed constant
    double center = kBaseballCenter;
};

/// Transformed data with D = 1. M4 uses X = [1, x1, x2]; M3 has no
/// covariates and subtracts the common mean from y and theta_true alike.
FHDataset ingest_baseball(const std::vector<BaseballRecord>& records, const BaseballOptions& opts);

}  // namespace fhmp
