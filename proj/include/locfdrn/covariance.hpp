#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace locfdrn {

enum class CovarianceKind { AR1, Banded1, LongRange, Equicorrelated, Explicit };

[[nodiscard]] std::string to_string(CovarianceKind kind);

/// Recipe for one of the correlation structures used in the simulations,
/// or an explicit matrix (e.g. an LD panel).
struct CovarianceSpec {
    CovarianceKind kind = CovarianceKind::AR1;
    std::size_t K = 0;
    double param = 0.0;  // rho for AR1/Banded1/Equicorrelated, H for LongRange
    Eigen::MatrixXd matrix;                 // Explicit only
    std::optional<std::size_t> bandwidth;   // Explicit only: store banded, drop entries beyond w

    static CovarianceSpec ar1(std::size_t K, double rho) { return {CovarianceKind::AR1, K, rho, {}, {}}; }
    static CovarianceSpec banded1(std::size_t K, double rho) { return {CovarianceKind::Banded1, K, rho, {}, {}}; }
    static CovarianceSpec long_range(std::size_t K, double H) { return {CovarianceKind::LongRange, K, H, {}, {}}; }
    static CovarianceSpec equicorrelated(std::size_t K, double rho) {
        return {CovarianceKind::Equicorrelated, K, rho, {}, {}};
    }
    static CovarianceSpec explicit_matrix(Eigen::MatrixXd m, std::optional<std::size_t> w = std::nullopt) {
        const auto K = static_cast<std::size_t>(m.rows());
        return {CovarianceKind::Explicit, K, 0.0, std::move(m), w};
    }

    /// Parses "ar1:0.8", "banded1:0.5", "longrange:0.8", "equi:0.8".
    static CovarianceSpec parse(const std::string& text, std::size_t K);
    [[nodiscard]] std::string describe() const;
};

enum class Storage { Dense, Banded };

/// Lower-triangular factor in band storage: row i keeps L(i, i-d) for d = 0..w.
/// A dense factor is the special case w = n - 1.
class LowerFactor {
public:
    LowerFactor() = default;
    LowerFactor(std::size_t n, std::size_t w, std::vector<double> band, double jitter)
        : n_(n), w_(w), band_(std::move(band)), jitter_(jitter) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return w_; }
    /// Diagonal shift that was needed to factorize (0 when none).
    [[nodiscard]] double jitter() const noexcept { return jitter_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept;

    /// out = L * e
    void multiply(std::span<const double> e, std::span<double> out) const;
    [[nodiscard]] Eigen::MatrixXd to_dense() const;

private:
    std::size_t n_ = 0;
    std::size_t w_ = 0;
    std::vector<double> band_;
    double jitter_ = 0.0;
};

/// Jitter ladder tried after a failed plain factorization.
inline constexpr double kJitterLadder[] = {1e-10, 1e-8, 1e-6};

/// Cholesky factor of a symmetric matrix under the jitter policy: on failure
/// add delta to the diagonal (escalating through kJitterLadder) and rescale so
/// the diagonal is unchanged. Throws NumericalError naming the 1-based leading
/// minor that failed at the last rung.
[[nodiscard]] Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& matrix, double* jitter_used = nullptr);

/// K x K correlation matrix with unit diagonal, stored dense or banded.
/// Immutable once built; the Cholesky factor is computed on first use and shared
/// between copies.
class CovarianceMatrix {
public:
    CovarianceMatrix() = default;

    /// Validates symmetry and unit diagonal within 1e-10, then stores the
    /// exactly symmetrised matrix with an exact unit diagonal.
    static CovarianceMatrix dense(const Eigen::MatrixXd& m);
    /// `band` holds K*(w+1) values, row i slot d = Sigma(i, i-d); slots with i-d < 0 are ignored.
    static CovarianceMatrix banded(std::size_t K, std::size_t w, std::vector<double> band);
    static CovarianceMatrix identity(std::size_t K);

    [[nodiscard]] std::size_t size() const noexcept { return K_; }
    [[nodiscard]] Storage storage() const noexcept { return storage_; }
    /// Largest |i-j| with a stored entry (K-1 for dense).
    [[nodiscard]] std::size_t bandwidth() const noexcept { return w_; }

    /// 0-based element access; zero beyond the band.
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept;
    [[nodiscard]] Eigen::MatrixXd to_dense() const;
    /// 0-based contiguous principal block starting at `lo`.
    [[nodiscard]] Eigen::MatrixXd principal_block(std::size_t lo, std::size_t len) const;
    /// Lower band rows in the file layout (K*(w+1), zero-filled out of range).
    [[nodiscard]] std::vector<double> lower_band() const;

    [[nodiscard]] const LowerFactor& cholesky() const;
    [[nodiscard]] std::uint64_t fingerprint() const noexcept { return fingerprint_; }

private:
    struct FactorCache;

    std::size_t K_ = 0;
    std::size_t w_ = 0;
    Storage storage_ = Storage::Dense;
    std::vector<double> data_;  // dense row-major K*K, or lower band K*(w+1)
    std::uint64_t fingerprint_ = 0;
    std::shared_ptr<FactorCache> cache_;

    void finalize();
};

[[nodiscard]] CovarianceMatrix build_covariance(const CovarianceSpec& spec);

/// Principal window around hypothesis `center` (1-based) of half-width N.
struct WindowCov {
    std::size_t center = 1;  // 1-based
    std::size_t half_width = 0;
    std::size_t lo = 1;  // 1-based, inclusive
    std::size_t hi = 1;  // 1-based, inclusive
    Eigen::MatrixXd submatrix;

    [[nodiscard]] std::size_t length() const noexcept { return hi - lo + 1; }
    /// 0-based position of the centre inside the window.
    [[nodiscard]] std::size_t center_offset() const noexcept { return center - lo; }
};

[[nodiscard]] WindowCov extract_window(const CovarianceMatrix& sigma, std::size_t i, std::size_t N);

}  // namespace locfdrn
