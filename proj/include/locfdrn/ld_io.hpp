#pragma once

#include <string>

#include "locfdrn/covariance.hpp"

namespace locfdrn {

/// ASCII magic that opens a banded LD file.
inline constexpr char kBandedMagic[] = "LDBAND1\n";

/// Loads an LD (correlation) matrix, auto-detecting the format:
///  - banded binary: magic, u64 K, u64 w, then K*(w+1) f64 values, all
///    little-endian; row i slot d holds Sigma(i, i-d) (zero where i-d < 1);
///  - otherwise dense CSV with K rows of K values.
[[nodiscard]] CovarianceMatrix load_ld(const std::string& path);

void save_ld_banded(const std::string& path, const CovarianceMatrix& sigma);
void save_ld_dense_csv(const std::string& path, const CovarianceMatrix& sigma);

}  // namespace locfdrn
