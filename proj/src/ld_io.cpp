#include "locfdrn/ld_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "locfdrn/errors.hpp"

namespace locfdrn {

namespace {

constexpr std::size_t kMagicLen = sizeof(kBandedMagic) - 1;

template <typename T>
T from_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return std::bit_cast<T>(v);
}

template <typename T>
void put_le(std::ostream& os, T value) {
    const auto v = std::bit_cast<std::uint64_t>(value);
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

CovarianceMatrix load_banded(std::ifstream& in, const std::string& path) {
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), 16)) throw ArgumentError("truncated LD header in " + path);
    const auto K = from_le<std::uint64_t>(header);
    const auto w = from_le<std::uint64_t>(header + 8);
    if (K == 0 || w >= K) throw ArgumentError("invalid LD header (K, w) in " + path);
    const std::size_t count = K * (w + 1);
    std::vector<unsigned char> raw(count * 8);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw ArgumentError("truncated LD band data in " + path);
    }
    std::vector<double> band(count);
    for (std::size_t k = 0; k < count; ++k) band[k] = from_le<double>(raw.data() + 8 * k);
    return CovarianceMatrix::banded(K, w, std::move(band));
}

CovarianceMatrix load_dense_csv(std::ifstream& in, const std::string& path) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ArgumentError("non-numeric LD entry '" + cell + "' in " + path);
            }
        }
        rows.push_back(std::move(row));
    }
    const std::size_t K = rows.size();
    if (K == 0) throw ArgumentError("empty LD file " + path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < K; ++i) {
        if (rows[i].size() != K) {
            throw ArgumentError("LD row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                " values, expected " + std::to_string(K));
        }
        for (std::size_t j = 0; j < K; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return CovarianceMatrix::dense(m);
}

}  // namespace

CovarianceMatrix load_ld(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open LD file " + path);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (in.gcount() == static_cast<std::streamsize>(kMagicLen) && std::memcmp(magic, kBandedMagic, kMagicLen) == 0) {
        return load_banded(in, path);
    }
    in.clear();
    in.seekg(0);
    return load_dense_csv(in, path);
}

void save_ld_banded(const std::string& path, const CovarianceMatrix& sigma) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write LD file " + path);
    out.write(kBandedMagic, kMagicLen);
    put_le<std::uint64_t>(out, sigma.size());
    put_le<std::uint64_t>(out, sigma.bandwidth());
    for (double v : sigma.lower_band()) put_le<double>(out, v);
}

void save_ld_dense_csv(const std::string& path, const CovarianceMatrix& sigma) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write LD file " + path);
    out << std::setprecision(17);
    const std::size_t K = sigma.size();
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            if (j) out << ',';
            out << sigma(i, j);
        }
        out << '\n';
    }
}

}  // namespace locfdrn
