#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "locfdrn/procedures.hpp"
#include "locfdrn/threshold.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

struct ZTable {
    std::vector<std::string> ids;
    ZVector z;
};

struct SummaryTable {
    std::vector<std::string> ids;
    std::vector<double> beta;
    std::vector<double> se;
};

/// Design matrix with column names; missing entries (`NA`) are NaN.
struct DesignTable {
    std::vector<std::string> columns;
    Eigen::MatrixXd X;
};

/// Tab-separated with a header naming (at least) the columns `id` and `z`.
[[nodiscard]] ZTable read_z_tsv(const std::string& path);
/// Tab-separated with header columns `id`, `beta`, `se`.
[[nodiscard]] SummaryTable read_summary_tsv(const std::string& path);
/// Comma-separated; the header holds column ids, cells are numbers or `NA`.
[[nodiscard]] DesignTable read_design_csv(const std::string& path);
/// One numeric value per line; an optional non-numeric first line is a header.
[[nodiscard]] std::vector<double> read_phenotype(const std::string& path);

void write_z_tsv(const std::string& path, const ZTable& table);
/// Columns id, z, T, neg2log10T.
void write_locfdr_tsv(const std::string& path, const std::vector<std::string>& ids, std::span<const double> z,
                      const LocFdrVector& T);
/// Columns id, z, T, rejected (0/1).
void write_rejections_tsv(const std::string& path, const std::vector<std::string>& ids, std::span<const double> z,
                          const LocFdrVector& T, const RejectionSet& rejected);
/// Columns i, neg2log10T, threshold_line with threshold_line = -2 log10(t_hat).
void write_manhattan_csv(const std::string& path, const LocFdrVector& T, double t_hat);
/// Columns t, Q.
void write_q_curve_csv(const std::string& path, const ThresholdEstimate& estimate);

/// ids "1".."K" when none are supplied.
[[nodiscard]] std::vector<std::string> default_ids(std::size_t K);

/// -2 log10(T), capped at 2 * 308 for T = 0.
[[nodiscard]] double neg2log10(double T) noexcept;

}  // namespace locfdrn
