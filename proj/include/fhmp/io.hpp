#pragma once

#include "fhmp/core.hpp"
#include "fhmp/intervals.hpp"
#include "fhmp/priors.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fhmp {

/// Comma-separated rows with '#' comment lines and blank lines skipped.
/// Each row keeps the 1-based line number it came from.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;

    int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);

/// Header `area_id,y,D,x1,...,xp[,theta_true]`. Validation failures throw
/// DataError citing the offending line.
FHDataset read_dataset(std::istream& in, const std::string& source = "<stream>");
FHDataset read_dataset_file(const std::string& path);

/// Round-trips exactly through read_dataset.
void write_dataset(std::ostream& out, const FHDataset& data);

/// Header `A,log_pi`, strictly increasing A.
PriorSpec read_prior_table(const std::string& path);

void write_intervals_csv(std::ostream& out, const FHDataset& data, const std::vector<EbInterval>& intervals);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace fhmp
