#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "locfdrn/covariance.hpp"
#include "locfdrn/rng.hpp"

namespace locfdrn {

/// Mixture parameters: a hypothesis is non-null with probability `pi`; a
/// non-null statistic is N(b, 1 + tau_sq) marginally, a null one N(0, 1).
struct TwoGroupParams {
    double pi = 0.0;
    double b = 0.0;
    double tau_sq = 0.0;

    /// Throws DomainError unless 0 <= pi <= 1, tau_sq >= 0 and all finite.
    void validate() const;
    friend bool operator==(const TwoGroupParams&, const TwoGroupParams&) = default;
};

/// Latent states h_i in {0, 1}; 1 marks a non-null hypothesis.
struct HypothesisStates {
    std::vector<std::uint8_t> h;

    [[nodiscard]] std::size_t size() const noexcept { return h.size(); }
    [[nodiscard]] std::size_t count_nonnull() const noexcept;
};

using ZVector = std::vector<double>;

/// Per-hypothesis posterior null probabilities T_{i,N} for one half-width N.
struct LocFdrVector {
    std::vector<double> values;
    std::size_t N = 0;
    std::uint64_t params_hash = 0;  // provenance of (pi, b, tau_sq, Sigma)

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values[i]; }
};

[[nodiscard]] std::uint64_t params_hash(const TwoGroupParams& params, std::uint64_t sigma_fingerprint) noexcept;

[[nodiscard]] HypothesisStates sample_states(std::size_t K, double pi, Rng& rng);

/// Draws Z | h ~ N(b h, Sigma + tau_sq diag(h)) as b h + L e + tau h.e', with L
/// the (cached) factor of Sigma and e, e' independent standard normals.
[[nodiscard]] ZVector sample_zscores(const HypothesisStates& h, const TwoGroupParams& params,
                                     const CovarianceMatrix& sigma, Rng& rng);

/// Draws K independent statistics from the univariate mixture (states are
/// returned through `states` when non-null).
[[nodiscard]] ZVector sample_independent_mixture(std::size_t K, const TwoGroupParams& params, Rng& rng,
                                                 HypothesisStates* states = nullptr);

[[nodiscard]] double normal_logpdf(double z, double mean, double var) noexcept;
[[nodiscard]] double log_add_exp(double a, double b) noexcept;

/// log[(1-pi) phi(z; 0, 1) + pi phi(z; b, 1 + tau_sq)], evaluated in log space.
[[nodiscard]] double marginal_mixture_logdensity(double z, const TwoGroupParams& params) noexcept;

/// Posterior non-null probability P(h = 1 | z) under the univariate mixture.
[[nodiscard]] double nonnull_responsibility(double z, const TwoGroupParams& params) noexcept;

/// Marginal local fdr (the N = 0 statistic) for every entry.
[[nodiscard]] LocFdrVector marginal_locfdr(std::span<const double> z, const TwoGroupParams& params);

}  // namespace locfdrn
