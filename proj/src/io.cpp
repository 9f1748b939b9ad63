#include "mmr/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mmr {

std::string format_sig(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("invalid number '" + s + "' in " + where);
    }
}

}  // namespace

CsvData read_data_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty data file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "treatment")
        throw ValidationError("data header must start with column 'treatment'");
    if (header[1] != "outcome") throw ValidationError("second data column must be 'outcome'");
    const int k = static_cast<int>(header.size()) - 2;
    for (int i = 0; i < k; ++i) {
        const std::string want = "x" + std::to_string(i + 1);
        if (header[2 + i] != want)
            throw ValidationError("covariate column " + std::to_string(i + 3) + " must be '" +
                                  want + "', found '" + header[2 + i] + "'");
    }

    CsvData data;
    data.n_covariates = k;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != k + 2)
            throw ValidationError("row " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(k + 2));
        Observation ob;
        const std::string where = "row " + std::to_string(line_no);
        ob.treatment = parse_number(fields[0], where + " column treatment");
        ob.outcome = parse_number(fields[1], where + " column outcome");
        ob.x.resize(k);
        for (int i = 0; i < k; ++i)
            ob.x[i] = parse_number(fields[2 + i], where + " column x" + std::to_string(i + 1));
        data.rows.push_back(std::move(ob));
    }
    if (data.rows.empty()) throw ValidationError("data file has no rows: " + path);
    return data;
}

void write_text_file(const std::string& path, const std::vector<std::string>& lines) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);  // binary keeps newlines byte-exact
    if (!out) throw ValidationError("cannot write file: " + path);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace mmr
