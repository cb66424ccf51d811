#include "fhmp/io.hpp"

#include "fhmp/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fhmp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& cell, const std::string& source, int line, const std::string& column) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (cell.empty() || ec != std::errc() || ptr != e) {
        std::ostringstream msg;
        msg << source << ":" << line << ": column '" << column << "': cannot parse '" << cell << "' as a number";
        throw DataError(msg.str());
    }
    return v;
}

[[noreturn]] void fail_at(const std::string& source, int line, const std::string& what) {
    throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return static_cast<int>(k);
    return -1;
}

CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        std::vector<std::string> cells = split(s);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            fail_at(source, lineno, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                        std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw DataError(source + ": missing header");
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in, path);
}

FHDataset read_dataset(std::istream& in, const std::string& source) {
    const CsvTable t = read_csv(in, source);
    if (t.header.size() < 3 || t.header[0] != "area_id" || t.header[1] != "y" || t.header[2] != "D")
        throw DataError(source + ": header must start with area_id,y,D");
    const int theta_col = t.column("theta_true");
    std::vector<int> x_cols;
    for (std::size_t k = 3; k < t.header.size(); ++k) {
        if (static_cast<int>(k) == theta_col) continue;
        const std::string expected = "x" + std::to_string(x_cols.size() + 1);
        if (t.header[k] != expected)
            throw DataError(source + ": unexpected column '" + t.header[k] + "' (expected " + expected + ")");
        x_cols.push_back(static_cast<int>(k));
    }
    const Index m = static_cast<Index>(t.rows.size());
    if (m == 0) throw DataError(source + ": no data rows");
    FHDataset d;
    d.y.resize(m);
    d.D.resize(m);
    d.X.resize(m, static_cast<Index>(x_cols.size()));
    VectorXd theta(m);
    std::set<std::string> seen;
    for (Index r = 0; r < m; ++r) {
        const auto& row = t.rows[static_cast<std::size_t>(r)];
        const int line = t.line_numbers[static_cast<std::size_t>(r)];
        if (row[0].empty()) fail_at(source, line, "empty area_id");
        if (!seen.insert(row[0]).second) fail_at(source, line, "duplicate area_id '" + row[0] + "'");
        d.area_ids.push_back(row[0]);
        d.y(r) = parse_number(row[1], source, line, "y");
        d.D(r) = parse_number(row[2], source, line, "D");
        if (!std::isfinite(d.y(r))) fail_at(source, line, "y is not finite");
        if (!std::isfinite(d.D(r)) || d.D(r) <= 0.0) fail_at(source, line, "D must be finite and > 0");
        for (std::size_t c = 0; c < x_cols.size(); ++c) {
            const auto col = static_cast<std::size_t>(x_cols[c]);
            d.X(r, static_cast<Index>(c)) = parse_number(row[col], source, line, t.header[col]);
        }
        if (theta_col >= 0) theta(r) = parse_number(row[static_cast<std::size_t>(theta_col)], source, line, "theta_true");
    }
    if (theta_col >= 0) d.theta_true = theta;
    try {
        d.validate();
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
    return d;
}

FHDataset read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_dataset(in, path);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const FHDataset& data) {
    out << "area_id,y,D";
    for (Index c = 0; c < data.p(); ++c) out << ",x" << c + 1;
    if (data.theta_true) out << ",theta_true";
    out << "\n";
    for (Index i = 0; i < data.m(); ++i) {
        out << data.area_label(i) << "," << format_double(data.y(i)) << "," << format_double(data.D(i));
        for (Index c = 0; c < data.p(); ++c) out << "," << format_double(data.X(i, c));
        if (data.theta_true) out << "," << format_double((*data.theta_true)(i));
        out << "\n";
    }
}

PriorSpec read_prior_table(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    const int ca = t.column("A"), cl = t.column("log_pi");
    if (ca < 0 || cl < 0 || t.header.size() != 2) throw DataError(path + ": header must be A,log_pi");
    std::vector<double> A, lp;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const int line = t.line_numbers[r];
        A.push_back(parse_number(t.rows[r][static_cast<std::size_t>(ca)], path, line, "A"));
        lp.push_back(parse_number(t.rows[r][static_cast<std::size_t>(cl)], path, line, "log_pi"));
        if (r > 0 && !(A[r] > A[r - 1])) fail_at(path, line, "A must be strictly increasing");
    }
    return PriorSpec::custom_table(std::move(A), std::move(lp), "table:" + path);
}

void write_intervals_csv(std::ostream& out, const FHDataset& data, const std::vector<EbInterval>& intervals) {
    out << "area_id,method,center,half_width,lower,upper,level,A_used";
    if (data.theta_true) out << ",theta_true,covers";
    out << "\n";
    for (const EbInterval& iv : intervals) {
        out << data.area_label(iv.area) << "," << to_string(iv.method) << "," << format_double(iv.center) << ","
            << format_double(iv.half_width) << "," << format_double(iv.lower) << "," << format_double(iv.upper) << ","
            << format_double(iv.level) << "," << format_double(iv.A_used);
        if (data.theta_true) {
            const double th = (*data.theta_true)(iv.area);
            out << "," << format_double(th) << "," << (iv.contains(th) ? 1 : 0);
        }
        out << "\n";
    }
}

}  // namespace fhmp
