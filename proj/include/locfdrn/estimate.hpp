#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locfdrn/covariance.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

/// How to pick the approximately independent sub-vector used for fitting.
struct SubsetSpec {
    enum class Mode { Stride, CorrThreshold };

    Mode mode = Mode::CorrThreshold;
    std::size_t step = 1;    // Stride
    std::size_t offset = 1;  // Stride, 1-based
    double eps = 0.05;       // CorrThreshold

    static SubsetSpec stride(std::size_t step, std::size_t offset) { return {Mode::Stride, step, offset, 0.0}; }
    static SubsetSpec corr_threshold(double eps) { return {Mode::CorrThreshold, 1, 1, eps}; }
    /// "stride:STEP:OFFSET" or "corr:EPS".
    static SubsetSpec parse(const std::string& text);
    [[nodiscard]] std::string describe() const;
};

/// Strictly increasing 1-based indices. Stride mode is positional; corr mode
/// scans i = 1..K and keeps i iff |Sigma_ij| <= eps for every previously kept j
/// within the storage bandwidth. Throws ArgumentError on an empty result.
[[nodiscard]] std::vector<std::size_t> select_subset(const CovarianceMatrix& sigma, const SubsetSpec& spec);

/// Gathers z at 1-based indices.
[[nodiscard]] std::vector<double> gather(std::span<const double> z, std::span<const std::size_t> indices);

/// One row of an EM trace.
struct EmState {
    std::size_t iteration = 0;
    TwoGroupParams params;
    double loglik = 0.0;
    bool converged = false;
    bool degenerate = false;
    std::optional<double> fixed_pi;  // set for the plug-in variant
};

struct EmResult {
    TwoGroupParams params;
    std::vector<EmState> trace;

    [[nodiscard]] const EmState& final_state() const { return trace.back(); }
};

struct EmOptions {
    double tol = 1e-8;  // relative change of the observed log-likelihood
    std::size_t max_iter = 1000;
};

[[nodiscard]] double observed_loglik(std::span<const double> z_s, const TwoGroupParams& params);

/// pi0 = 0.2, b0 = sample mean, tau_sq0 = max(sample variance - 1, 0.25).
[[nodiscard]] TwoGroupParams default_init(std::span<const double> z_s);

/// EM for (pi, b, tau_sq) on independent statistics. Stops on relative
/// log-likelihood change below tol, max_iter, or when pi collapses to 0 or 1
/// (flagged `degenerate`).
[[nodiscard]] EmResult em_fit_full(std::span<const double> z_s, const TwoGroupParams& init,
                                   const EmOptions& options = {});

/// EM for (b, tau_sq) with pi frozen at pi_hat in (0, 1).
[[nodiscard]] EmResult em_fit_plugin(std::span<const double> z_s, double pi_hat, const TwoGroupParams& init,
                                     const EmOptions& options = {});

struct EstimationConfig {
    SubsetSpec subset = SubsetSpec::corr_threshold(0.05);
    std::optional<double> pi_fixed;  // plug-in variant when set
    std::optional<TwoGroupParams> init;
    EmOptions em;
    std::size_t restarts = 5;
};

/// Runs EM from the given (or default) start plus `restarts` random starts and
/// keeps the fit with the highest final log-likelihood.
[[nodiscard]] EmResult em_fit_multistart(std::span<const double> z_s, const EstimationConfig& config,
                                         std::uint64_t seed);

}  // namespace locfdrn
