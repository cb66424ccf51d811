#include "fhmp/baseball.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/io.hpp"

#include <cmath>

namespace fhmp {

double arcsine_transform(double p, int n) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("proportion " + std::to_string(p) + " outside [0, 1]");
    return std::sqrt(static_cast<double>(n)) * std::asin(2.0 * p - 1.0);
}

double inverse_arcsine_transform(double y, int n) {
    return 0.5 * (std::sin(y / std::sqrt(static_cast<double>(n))) + 1.0);
}

std::string bundled_baseball_path() { return std::string(FHMP_DATA_DIR) + "/baseball.csv"; }

std::vector<BaseballRecord> read_baseball(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    const char* names[] = {"player", "team", "hits45", "p_true", "ba_1969", "ab_1969"};
    int col[6];
    for (int k = 0; k < 6; ++k) {
        col[k] = t.column(names[k]);
        if (col[k] < 0) throw DataError(path + ": missing column '" + names[k] + "'");
    }
    std::vector<BaseballRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]) + ": ";
        BaseballRecord rec;
        rec.player = row[static_cast<std::size_t>(col[0])];
        rec.team = row[static_cast<std::size_t>(col[1])];
        try {
            rec.hits45 = std::stoi(row[static_cast<std::size_t>(col[2])]);
            rec.p_true = std::stod(row[static_cast<std::size_t>(col[3])]);
            rec.x1 = std::stod(row[static_cast<std::size_t>(col[4])]);
            rec.x2 = std::stod(row[static_cast<std::size_t>(col[5])]);
        } catch (const std::exception&) {
            throw DataError(where + "malformed numeric field");
        }
        if (rec.hits45 < 0 || rec.hits45 > kBaseballAtBats) throw DataError(where + "hits45 outside [0, 45]");
        rec.p_hat = rec.hits45 / static_cast<double>(kBaseballAtBats);
        if (!(rec.p_true >= 0.0 && rec.p_true <= 1.0)) throw DataError(where + "p_true outside [0, 1]");
        out.push_back(rec);
    }
    return out;
}

FHDataset ingest_baseball(const std::vector<BaseballRecord>& records, const BaseballOptions& opts) {
    const Index m = static_cast<Index>(records.size());
    if (m == 0) throw DataError("no baseball records");
    VectorXd y(m), theta(m);
    MatrixXd X(m, opts.model == BaseballModel::M4 ? 3 : 0);
    std::vector<std::string> ids;
    for (Index i = 0; i < m; ++i) {
        const BaseballRecord& r = records[static_cast<std::size_t>(i)];
        y(i) = arcsine_transform(r.p_hat);
        theta(i) = arcsine_transform(r.p_true);
        if (opts.model == BaseballModel::M4) X.row(i) << 1.0, r.x1, r.x2;
        ids.push_back(r.player);
    }
    if (opts.model == BaseballModel::M3) {
        const double c = opts.recenter ? y.mean() : opts.center;
        y.array() -= c;
        theta.array() -= c;
    }
    FHDataset d = FHDataset::make(y, VectorXd::Ones(m), X);
    d.area_ids = std::move(ids);
    d.theta_true = theta;
    return d;
}

}  // namespace fhmp
