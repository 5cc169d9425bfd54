#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locfdrn/covariance.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

enum class Engine { Naive, Fast };

[[nodiscard]] std::string to_string(Engine engine);
[[nodiscard]] Engine parse_engine(const std::string& text);

/// Default cap on the half-width: 2^(2N+1) configurations per window.
inline constexpr std::size_t kDefaultMaxHalfWidth = 12;
/// Oracle enumeration refuses anything larger.
inline constexpr std::size_t kMaxOracleK = 20;

struct LocFdrOptions {
    std::size_t max_half_width = kDefaultMaxHalfWidth;
    unsigned workers = 1;  // 0 = hardware concurrency
};

/// Log prior and log likelihood of one window configuration.
struct WindowDensity {
    double log_likelihood = 0.0;  // log N(z_w; b h_w, Sigma_w + tau_sq diag(h_w))
    double log_prior = 0.0;       // sum h log pi + (1 - h) log(1 - pi)

    [[nodiscard]] double joint() const noexcept { return log_likelihood + log_prior; }
};

/// Evaluated with a fresh Cholesky of the state-adjusted window covariance
/// (jitter policy applied on failure).
[[nodiscard]] WindowDensity log_joint_window_density(std::span<const double> z_window,
                                                     std::span<const std::uint8_t> h_window,
                                                     const TwoGroupParams& params, const WindowCov& window);

/// Reference path: for every window enumerates all 2^l configurations in
/// binary order and factorizes each one from scratch.
[[nodiscard]] LocFdrVector locfdr_n(std::span<const double> z, const CovarianceMatrix& sigma,
                                    const TwoGroupParams& params, std::size_t N, const LocFdrOptions& options = {});

/// Windows of one covariance matrix and half-width, with the h = 0 factor of
/// every window precomputed. Reusable across z vectors and parameter values.
class WindowPlan {
public:
    WindowPlan(const CovarianceMatrix& sigma, std::size_t N, std::size_t max_half_width = kDefaultMaxHalfWidth);

    [[nodiscard]] std::size_t size() const noexcept { return starts_.size(); }
    [[nodiscard]] std::size_t half_width() const noexcept { return N_; }
    [[nodiscard]] std::uint64_t sigma_fingerprint() const noexcept { return fingerprint_; }

    struct View {
        std::size_t lo;      // 0-based first index
        std::size_t length;  // l
        std::size_t center;  // 0-based offset of the centre within the window
        const double* sigma;  // l*l column-major window covariance
        const double* factor; // l*l column-major lower factor of sigma, or nullptr if it failed
    };
    [[nodiscard]] View window(std::size_t i) const noexcept;

private:
    std::size_t N_ = 0;
    std::uint64_t fingerprint_ = 0;
    std::vector<std::size_t> starts_;
    std::vector<std::size_t> lengths_;
    std::vector<std::size_t> offsets_;  // into storage_
    std::vector<std::uint8_t> factor_ok_;
    std::vector<double> sigma_storage_;
    std::vector<double> factor_storage_;
};

/// Same contract as locfdr_n. Configurations are visited in Gray-code order;
/// each step changes one diagonal entry of the window covariance by +/- tau_sq,
/// applied to the Cholesky factor as a rank-one update or downdate in O(l^2).
/// A failed downdate falls back to a fresh factorization.
[[nodiscard]] LocFdrVector locfdr_n_fast(std::span<const double> z, const CovarianceMatrix& sigma,
                                         const TwoGroupParams& params, std::size_t N,
                                         const LocFdrOptions& options = {});
[[nodiscard]] LocFdrVector locfdr_n_fast(std::span<const double> z, const WindowPlan& plan,
                                         const TwoGroupParams& params, const LocFdrOptions& options = {});

[[nodiscard]] LocFdrVector compute_locfdr(Engine engine, std::span<const double> z, const CovarianceMatrix& sigma,
                                          const TwoGroupParams& params, std::size_t N,
                                          const LocFdrOptions& options = {});

/// Exact P(h_i = 0 | Z = z) by enumerating all 2^K joint configurations.
/// Uses an LU decomposition per configuration, independent of the Cholesky
/// code paths above. Refuses K > kMaxOracleK.
[[nodiscard]] LocFdrVector oracle_locfdr_bruteforce(std::span<const double> z, const CovarianceMatrix& sigma,
                                                    const TwoGroupParams& params);

}  // namespace locfdrn
