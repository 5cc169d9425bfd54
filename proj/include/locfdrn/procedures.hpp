#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "locfdrn/two_group.hpp"

namespace locfdrn {

enum class RuleKind { TN, BH, ABH, SunCai };

struct RuleDescriptor {
    RuleKind kind = RuleKind::TN;
    double alpha = 0.0;   // BH, ABH, SunCai
    double cutoff = 0.0;  // TN
    std::size_t N = 0;    // TN
    double pi_hat = 0.0;  // ABH

    [[nodiscard]] std::string describe() const;
};

struct RejectionSet {
    std::vector<std::size_t> rejected;  // sorted, 1-based
    RuleDescriptor rule;
    std::string statistics_used;  // "T_N", "p" or "T_0"
    std::size_t K = 0;

    [[nodiscard]] std::size_t size() const noexcept { return rejected.size(); }
};

/// Rejects {i : T_i <= t}.
[[nodiscard]] RejectionSet tn_rule(const LocFdrVector& T, double t);

/// Two-sided p-values 2(1 - Phi(|z|)).
[[nodiscard]] std::vector<double> z_to_pvalue(std::span<const double> z);

/// Benjamini-Hochberg step-up; every p-value tied with p_(k*) is rejected too.
[[nodiscard]] RejectionSet bh(std::span<const double> p, double alpha);

/// BH at level alpha / (1 - pi_hat).
[[nodiscard]] RejectionSet adaptive_bh(std::span<const double> p, double alpha, double pi_hat);

/// Rejects the k* smallest marginal locfdr values where k* is the largest k
/// with running mean of the sorted values <= alpha.
[[nodiscard]] RejectionSet sun_cai(const LocFdrVector& T0, double alpha);

/// Entry (a, b) counts indices rejected by both sets a and b.
[[nodiscard]] Eigen::MatrixXi common_rejections(std::span<const RejectionSet> sets);

}  // namespace locfdrn
