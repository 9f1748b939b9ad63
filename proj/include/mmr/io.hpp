#pragma once

#include <string>
#include <vector>

#include "mmr/core.hpp"

namespace mmr {

// 12 significant digits, enough to round-trip the doubles we emit.
std::string format_sig(double v);

struct CsvData {
    std::vector<Observation> rows;
    int n_covariates = 0;
};

// Reads `treatment,outcome,x1,...,xk` (UTF-8, decimal points, no thousands
// separators).  Throws ValidationError naming the offending column or row.
CsvData read_data_csv(const std::string& path);

// Writes lines joined with '\n'; creates parent directories as needed.
void write_text_file(const std::string& path, const std::vector<std::string>& lines);

}  // namespace mmr
