#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "locfdrn/covariance.hpp"
#include "locfdrn/estimate.hpp"
#include "locfdrn/locfdr.hpp"
#include "locfdrn/procedures.hpp"
#include "locfdrn/threshold.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

enum class Provenance { SummaryStats, SmallScaleOls };

[[nodiscard]] std::string to_string(Provenance provenance);

struct GwasInput {
    ZVector z;
    CovarianceMatrix sigma;
    std::vector<std::string> ids;
    Provenance provenance = Provenance::SummaryStats;
};

/// z = beta / se with the given LD matrix as Sigma.
[[nodiscard]] GwasInput gwas_from_summary(std::span<const double> beta, std::span<const double> se,
                                          const CovarianceMatrix& ld, std::vector<std::string> ids = {});

/// Largest design accepted by gwas_from_design.
inline constexpr std::size_t kMaxDesignColumns = 2000;

/// Marginal-adjusted OLS z-scores from a design matrix (NaN = missing).
/// y and the columns of X are centred and scaled to unit sample variance
/// (divisor n - 1); missing entries are replaced by the column mean of the
/// observed ones when `impute_missing`, otherwise rejected.
/// z_j = beta_j / (sigma_hat sqrt(S_j)), Sigma = S^-1/2 (X'X)^-1 S^-1/2 with
/// S = diag((X'X)^-1).
[[nodiscard]] GwasInput gwas_from_design(std::span<const double> y, Eigen::MatrixXd X, bool impute_missing,
                                         std::vector<std::string> ids = {});

/// Steps 2-3: the subset and the EM fit on it.
struct FitResult {
    std::vector<std::size_t> subset;  // 1-based
    EmResult em;
};

[[nodiscard]] FitResult fit_parameters(std::span<const double> z, const CovarianceMatrix& sigma,
                                       const EstimationConfig& config, std::uint64_t seed);

struct PipelineOptions {
    Sampling sampling = Sampling::Independent;
    Engine engine = Engine::Fast;
    unsigned workers = 1;
    std::size_t max_half_width = kDefaultMaxHalfWidth;
};

struct PipelineResult {
    TwoGroupParams fitted;
    ThresholdEstimate t_hat;
    LocFdrVector T;
    RejectionSet rejected;
    nlohmann::json manifest;
};

/// Steps 4-6 given a fit: T_{i,N} with the fitted parameters, the Monte-Carlo
/// cutoff with B replicates, and the rejections {i : T_i <= t_hat}.
[[nodiscard]] PipelineResult algorithm1_from_fit(std::span<const double> z, const CovarianceMatrix& sigma,
                                                 const FitResult& fit, std::size_t N, double alpha, std::size_t B,
                                                 std::uint64_t seed, const PipelineOptions& options = {});

/// The data-driven procedure end to end (Steps 2-6).
[[nodiscard]] PipelineResult algorithm1(std::span<const double> z, const CovarianceMatrix& sigma, std::size_t N,
                                        double alpha, std::size_t B, const EstimationConfig& config,
                                        std::uint64_t seed, const PipelineOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const TwoGroupParams& params);
[[nodiscard]] nlohmann::json to_json(const EmState& state);

}  // namespace locfdrn
