#include "locfdrn/table_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "locfdrn/errors.hpp"

namespace locfdrn {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << std::setprecision(17);
    return out;
}

double parse_number(const std::string& cell, const std::string& path, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw ArgumentError(path + ":" + std::to_string(line) + ": not a finite number: '" + cell + "'");
    }
    return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name, const std::string& path) {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) return c;
    }
    throw ArgumentError(path + ": missing column '" + name + "'");
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

ZTable read_z_tsv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError(path + ": empty file");
    const auto header = split(line, '\t');
    const std::size_t cid = column_of(header, "id", path);
    const std::size_t cz = column_of(header, "z", path);
    ZTable t;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (blank(line)) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != header.size()) throw ArgumentError(path + ":" + std::to_string(n) + ": wrong column count");
        t.ids.push_back(cells[cid]);
        t.z.push_back(parse_number(cells[cz], path, n));
    }
    if (t.z.empty()) throw ArgumentError(path + ": no rows");
    return t;
}

SummaryTable read_summary_tsv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError(path + ": empty file");
    const auto header = split(line, '\t');
    const std::size_t cid = column_of(header, "id", path);
    const std::size_t cb = column_of(header, "beta", path);
    const std::size_t cs = column_of(header, "se", path);
    SummaryTable t;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (blank(line)) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != header.size()) throw ArgumentError(path + ":" + std::to_string(n) + ": wrong column count");
        t.ids.push_back(cells[cid]);
        t.beta.push_back(parse_number(cells[cb], path, n));
        t.se.push_back(parse_number(cells[cs], path, n));
    }
    if (t.ids.empty()) throw ArgumentError(path + ": no rows");
    return t;
}

DesignTable read_design_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError(path + ": empty file");
    DesignTable t;
    t.columns = split(line, ',');
    const std::size_t p = t.columns.size();
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (blank(line)) continue;
        const auto cells = split(line, ',');
        if (cells.size() != p) throw ArgumentError(path + ":" + std::to_string(n) + ": wrong column count");
        for (const auto& c : cells) {
            values.push_back(c == "NA" ? std::numeric_limits<double>::quiet_NaN() : parse_number(c, path, n));
        }
        ++rows;
    }
    t.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            t.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * p + c];
        }
    }
    return t;
}

std::vector<double> read_phenotype(const std::string& path) {
    auto in = open_in(path);
    std::vector<double> y;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (blank(line)) continue;
        std::string cell = line;
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        if (n == 1) {
            try {
                std::size_t used = 0;
                (void)std::stod(cell, &used);
                if (used != cell.size()) continue;
            } catch (const std::exception&) {
                continue;  // header
            }
        }
        y.push_back(parse_number(cell, path, n));
    }
    if (y.empty()) throw ArgumentError(path + ": no values");
    return y;
}

void write_z_tsv(const std::string& path, const ZTable& table) {
    auto out = open_out(path);
    out << "id\tz\n";
    for (std::size_t i = 0; i < table.z.size(); ++i) out << table.ids[i] << '\t' << table.z[i] << '\n';
}

void write_locfdr_tsv(const std::string& path, const std::vector<std::string>& ids, std::span<const double> z,
                      const LocFdrVector& T) {
    auto out = open_out(path);
    out << "id\tz\tT\tneg2log10T\n";
    for (std::size_t i = 0; i < T.size(); ++i) {
        out << ids[i] << '\t' << z[i] << '\t' << T[i] << '\t' << neg2log10(T[i]) << '\n';
    }
}

void write_rejections_tsv(const std::string& path, const std::vector<std::string>& ids, std::span<const double> z,
                          const LocFdrVector& T, const RejectionSet& rejected) {
    std::vector<std::uint8_t> flag(T.size(), 0);
    for (std::size_t i : rejected.rejected) flag[i - 1] = 1;
    auto out = open_out(path);
    out << "id\tz\tT\trejected\n";
    for (std::size_t i = 0; i < T.size(); ++i) {
        out << ids[i] << '\t' << z[i] << '\t' << T[i] << '\t' << int(flag[i]) << '\n';
    }
}

void write_manhattan_csv(const std::string& path, const LocFdrVector& T, double t_hat) {
    auto out = open_out(path);
    const double line = neg2log10(t_hat);
    out << "i,neg2log10T,threshold_line\n";
    for (std::size_t i = 0; i < T.size(); ++i) out << i + 1 << ',' << neg2log10(T[i]) << ',' << line << '\n';
}

void write_q_curve_csv(const std::string& path, const ThresholdEstimate& estimate) {
    auto out = open_out(path);
    out << "t,Q\n";
    for (const auto& [t, q] : estimate.q_curve) out << t << ',' << q << '\n';
}

std::vector<std::string> default_ids(std::size_t K) {
    std::vector<std::string> ids(K);
    for (std::size_t i = 0; i < K; ++i) ids[i] = std::to_string(i + 1);
    return ids;
}

double neg2log10(double T) noexcept {
    if (T <= 0.0) return 2.0 * 308.0;
    return -2.0 * std::log10(T);
}

}  // namespace locfdrn
