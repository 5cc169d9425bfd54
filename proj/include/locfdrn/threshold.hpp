#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locfdrn/covariance.hpp"
#include "locfdrn/locfdr.hpp"
#include "locfdrn/rng.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

enum class Sampling { Independent, Joint };
enum class ThresholdMethod { McIndependent, McJoint, QuadratureN0 };

[[nodiscard]] std::string to_string(Sampling sampling);
[[nodiscard]] Sampling parse_sampling(const std::string& text);
[[nodiscard]] std::string to_string(ThresholdMethod method);

/// Calibrated cutoff on T_{i,N} with the evidence behind it.
struct ThresholdEstimate {
    double t_hat = 0.0;
    double alpha = 0.0;
    std::size_t N = 0;
    std::size_t B = 0;  // replicates pooled (0 for quadrature)
    ThresholdMethod method = ThresholdMethod::McIndependent;
    std::vector<std::pair<double, double>> q_curve;  // (t, Q(t)) audit samples
    bool empty_rejection = false;  // no cutoff satisfied Q(t) <= alpha
};

/// Q^(t) = sum I(T <= t) T / sum I(T <= t); nullopt when nothing is <= t.
[[nodiscard]] std::optional<double> q_hat(std::span<const double> pool, double t);

/// sup{t : Q^(t) <= alpha} over the jump points of Q^ (the distinct pooled
/// values). Returns 1 when every jump point qualifies and 0 with
/// `empty_rejection` when none does. `pool` is sorted in place.
[[nodiscard]] ThresholdEstimate search_cutoff(std::vector<double>& pool, double alpha,
                                              std::size_t max_curve_points = 256);

struct McOptions {
    Engine engine = Engine::Fast;
    unsigned workers = 1;
    std::size_t max_half_width = kDefaultMaxHalfWidth;
    std::size_t max_curve_points = 256;
};

/// Monte-Carlo cutoff: draws B z-vectors of length K = Sigma.size() (i.i.d.
/// from the univariate mixture, or jointly with Sigma), computes T_{i,N} for
/// each with (params, Sigma), pools all B*K values and searches the cutoff.
/// Replicate b uses generator seed.replicate(b).
[[nodiscard]] ThresholdEstimate mc_threshold(const TwoGroupParams& params, const CovarianceMatrix& sigma,
                                             std::size_t N, double alpha, std::size_t B, const SeedStream& seed,
                                             Sampling sampling, const McOptions& options = {});

/// Q(t) = E[T 1(T <= t)] / E[1(T <= t)] for the marginal statistic under the
/// univariate mixture, by adaptive Gauss-Kronrod quadrature over the region
/// {z : T(z) <= t}. nullopt when the region has zero mass.
[[nodiscard]] std::optional<double> quadrature_q_n0(const TwoGroupParams& params, double t);

/// Deterministic N = 0 cutoff: bisection on t for sup{t : Q(t) <= alpha}.
[[nodiscard]] ThresholdEstimate quadrature_threshold_n0(const TwoGroupParams& params, double alpha);

}  // namespace locfdrn
