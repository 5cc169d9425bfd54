#include "locfdrn/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "locfdrn/errors.hpp"

namespace locfdrn {

namespace {

constexpr double kValidationTol = 1e-10;
constexpr double kBandTruncation = 1e-12;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// In-place Cholesky of a symmetric band matrix in lower band layout
// (row i, slot d holds A(i, i-d)). Returns 0 on success, else the 1-based
// index of the leading minor that is not positive definite.
std::size_t factor_band_in_place(std::size_t n, std::size_t w, std::vector<double>& b) {
    const std::size_t stride = w + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t jlo = i > w ? i - w : 0;
        double* row_i = b.data() + i * stride;
        for (std::size_t j = jlo; j <= i; ++j) {
            const double* row_j = b.data() + j * stride;
            double sum = row_i[i - j];
            for (std::size_t k = jlo; k < j; ++k) sum -= row_i[i - k] * row_j[j - k];
            if (j == i) {
                if (!(sum > 0.0) || !std::isfinite(sum)) return i + 1;
                row_i[0] = std::sqrt(sum);
            } else {
                row_i[i - j] = sum / row_j[0];
            }
        }
    }
    return 0;
}

// Applies the jitter ladder to a band copy; returns the factor or throws.
LowerFactor factor_with_jitter(std::size_t n, std::size_t w, const std::vector<double>& band) {
    std::vector<double> work = band;
    std::size_t failed = factor_band_in_place(n, w, work);
    if (failed == 0) return LowerFactor(n, w, std::move(work), 0.0);

    const std::size_t stride = w + 1;
    std::vector<double> scale(n);
    for (double delta : kJitterLadder) {
        for (std::size_t i = 0; i < n; ++i) {
            const double a = band[i * stride];
            scale[i] = std::sqrt(a / (a + delta));
        }
        work = band;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t dmax = std::min(i, w);
            for (std::size_t d = 1; d <= dmax; ++d) work[i * stride + d] *= scale[i] * scale[i - d];
        }
        failed = factor_band_in_place(n, w, work);
        if (failed == 0) return LowerFactor(n, w, std::move(work), delta);
    }
    throw NumericalError("Cholesky factorization failed at leading minor " + std::to_string(failed) +
                             " after maximum jitter " + std::to_string(kJitterLadder[2]),
                         failed);
}

void require_range(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

}  // namespace

std::string to_string(CovarianceKind kind) {
    switch (kind) {
        case CovarianceKind::AR1: return "ar1";
        case CovarianceKind::Banded1: return "banded1";
        case CovarianceKind::LongRange: return "longrange";
        case CovarianceKind::Equicorrelated: return "equi";
        case CovarianceKind::Explicit: return "explicit";
    }
    return "unknown";
}

CovarianceSpec CovarianceSpec::parse(const std::string& text, std::size_t K) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ArgumentError("covariance spec must look like kind:value, got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    double value = 0.0;
    try {
        value = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw ArgumentError("covariance parameter is not a number in '" + text + "'");
    }
    if (kind == "ar1") return ar1(K, value);
    if (kind == "banded1") return banded1(K, value);
    if (kind == "longrange" || kind == "lr") return long_range(K, value);
    if (kind == "equi" || kind == "equicorrelated") return equicorrelated(K, value);
    throw ArgumentError("unknown covariance kind '" + kind + "'");
}

std::string CovarianceSpec::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (kind != CovarianceKind::Explicit) os << ':' << param;
    return os.str();
}

double LowerFactor::operator()(std::size_t i, std::size_t j) const noexcept {
    if (j > i || i - j > w_) return 0.0;
    return band_[i * (w_ + 1) + (i - j)];
}

void LowerFactor::multiply(std::span<const double> e, std::span<double> out) const {
    if (e.size() != n_ || out.size() != n_) throw ArgumentError("LowerFactor::multiply: dimension mismatch");
    const std::size_t stride = w_ + 1;
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t klo = i > w_ ? i - w_ : 0;
        const double* row = band_.data() + i * stride;
        double acc = 0.0;
        for (std::size_t k = klo; k <= i; ++k) acc += row[i - k] * e[k];
        out[i] = acc;
    }
}

Eigen::MatrixXd LowerFactor::to_dense() const {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t klo = i > w_ ? i - w_ : 0;
        for (std::size_t k = klo; k <= i; ++k) {
            L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*this)(i, k);
        }
    }
    return L;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& matrix, double* jitter_used) {
    if (matrix.rows() != matrix.cols()) throw ArgumentError("cholesky_lower: matrix is not square");
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (n == 0) return {};
    const std::size_t w = n - 1;
    std::vector<double> band(n * (w + 1), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d <= i; ++d) {
            band[i * (w + 1) + d] = matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - d));
        }
    }
    const LowerFactor factor = factor_with_jitter(n, w, band);
    if (jitter_used != nullptr) *jitter_used = factor.jitter();
    return factor.to_dense();
}

struct CovarianceMatrix::FactorCache {
    std::once_flag once;
    LowerFactor factor;
    std::exception_ptr error;
};

CovarianceMatrix CovarianceMatrix::dense(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ArgumentError("covariance matrix is not square");
    if (m.rows() == 0) throw ArgumentError("covariance matrix is empty");
    const auto K = static_cast<std::size_t>(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isfinite(m(i, i)) || std::abs(m(i, i) - 1.0) > kValidationTol) {
            throw ArgumentError("covariance diagonal entry " + std::to_string(i + 1) + " is not 1 within 1e-10");
        }
        for (Eigen::Index j = 0; j < i; ++j) {
            if (!std::isfinite(m(i, j)) || std::abs(m(i, j) - m(j, i)) > kValidationTol) {
                throw ArgumentError("covariance matrix is not symmetric at (" + std::to_string(i + 1) + ", " +
                                    std::to_string(j + 1) + ")");
            }
        }
    }
    CovarianceMatrix out;
    out.K_ = K;
    out.w_ = K - 1;
    out.storage_ = Storage::Dense;
    out.data_.assign(K * K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        out.data_[i * K + i] = 1.0;
        for (std::size_t j = 0; j < i; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double v = 0.5 * (m(ii, jj) + m(jj, ii));
            out.data_[i * K + j] = v;
            out.data_[j * K + i] = v;
        }
    }
    out.finalize();
    return out;
}

CovarianceMatrix CovarianceMatrix::banded(std::size_t K, std::size_t w, std::vector<double> band) {
    if (K == 0) throw ArgumentError("covariance matrix is empty");
    if (w >= K) w = K - 1;
    if (band.size() < K * (w + 1)) throw ArgumentError("banded covariance: expected K*(w+1) values");
    band.resize(K * (w + 1));
    const std::size_t stride = w + 1;
    for (std::size_t i = 0; i < K; ++i) {
        if (std::abs(band[i * stride] - 1.0) > kValidationTol) {
            throw ArgumentError("covariance diagonal entry " + std::to_string(i + 1) + " is not 1 within 1e-10");
        }
        band[i * stride] = 1.0;
        for (std::size_t d = 0; d <= w; ++d) {
            if (!std::isfinite(band[i * stride + d])) throw ArgumentError("banded covariance: non-finite entry");
            if (d > i) band[i * stride + d] = 0.0;
        }
    }
    CovarianceMatrix out;
    out.K_ = K;
    out.w_ = w;
    out.storage_ = Storage::Banded;
    out.data_ = std::move(band);
    out.finalize();
    return out;
}

CovarianceMatrix CovarianceMatrix::identity(std::size_t K) {
    std::vector<double> band(K, 1.0);
    return banded(K, 0, std::move(band));
}

void CovarianceMatrix::finalize() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, &K_, sizeof K_);
    h = fnv1a(h, &w_, sizeof w_);
    h = fnv1a(h, data_.data(), data_.size() * sizeof(double));
    fingerprint_ = h;
    cache_ = std::make_shared<FactorCache>();
}

double CovarianceMatrix::operator()(std::size_t i, std::size_t j) const noexcept {
    if (storage_ == Storage::Dense) return data_[i * K_ + j];
    if (j > i) std::swap(i, j);
    if (i - j > w_) return 0.0;
    return data_[i * (w_ + 1) + (i - j)];
}

Eigen::MatrixXd CovarianceMatrix::to_dense() const { return principal_block(0, K_); }

Eigen::MatrixXd CovarianceMatrix::principal_block(std::size_t lo, std::size_t len) const {
    if (lo + len > K_) throw ArgumentError("principal_block: range exceeds matrix size");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len));
    for (std::size_t a = 0; a < len; ++a) {
        for (std::size_t c = 0; c < len; ++c) {
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = (*this)(lo + a, lo + c);
        }
    }
    return out;
}

std::vector<double> CovarianceMatrix::lower_band() const {
    if (storage_ == Storage::Banded) return data_;
    std::vector<double> band(K_ * (w_ + 1), 0.0);
    for (std::size_t i = 0; i < K_; ++i) {
        for (std::size_t d = 0; d <= i; ++d) band[i * (w_ + 1) + d] = data_[i * K_ + (i - d)];
    }
    return band;
}

const LowerFactor& CovarianceMatrix::cholesky() const {
    if (!cache_) throw ArgumentError("cholesky of an empty covariance matrix");
    std::call_once(cache_->once, [this] {
        try {
            cache_->factor = factor_with_jitter(K_, w_, lower_band());
        } catch (...) {
            cache_->error = std::current_exception();
        }
    });
    if (cache_->error) std::rethrow_exception(cache_->error);
    return cache_->factor;
}

CovarianceMatrix build_covariance(const CovarianceSpec& spec) {
    const std::size_t K = spec.K;
    if (K == 0) throw ArgumentError("covariance dimension K must be positive");
    const double p = spec.param;
    switch (spec.kind) {
        case CovarianceKind::AR1: {
            require_range(p >= -1.0 && p <= 1.0, "AR1 requires -1 <= rho <= 1, got " + std::to_string(p));
            // smallest w with |rho|^w < 1e-12
            std::size_t w = K;
            const double a = std::abs(p);
            if (a < 1.0) {
                w = 1;
                while (w < K && std::pow(a, static_cast<double>(w)) >= kBandTruncation) ++w;
            }
            if (w >= K) {
                Eigen::MatrixXd m(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
                for (std::size_t i = 0; i < K; ++i) {
                    for (std::size_t j = 0; j < K; ++j) {
                        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                            i == j ? 1.0 : std::pow(p, static_cast<double>(i > j ? i - j : j - i));
                    }
                }
                return CovarianceMatrix::dense(m);
            }
            std::vector<double> band(K * (w + 1), 0.0);
            for (std::size_t i = 0; i < K; ++i) {
                for (std::size_t d = 0; d <= std::min(i, w); ++d) {
                    band[i * (w + 1) + d] = d == 0 ? 1.0 : std::pow(p, static_cast<double>(d));
                }
            }
            return CovarianceMatrix::banded(K, w, std::move(band));
        }
        case CovarianceKind::Banded1: {
            require_range(p >= -0.5 && p <= 0.5, "Banded1 requires -0.5 <= rho <= 0.5, got " + std::to_string(p));
            const std::size_t w = K > 1 ? 1 : 0;
            std::vector<double> band(K * (w + 1), 0.0);
            for (std::size_t i = 0; i < K; ++i) {
                band[i * (w + 1)] = 1.0;
                if (w == 1 && i > 0) band[i * 2 + 1] = p;
            }
            return CovarianceMatrix::banded(K, w, std::move(band));
        }
        case CovarianceKind::LongRange: {
            require_range(p >= 0.5 && p < 1.0, "LongRange requires 1/2 <= H < 1, got " + std::to_string(p));
            const double e = 2.0 * p;
            std::vector<double> acf(K);
            for (std::size_t d = 0; d < K; ++d) {
                const double x = static_cast<double>(d);
                acf[d] = 0.5 * (std::pow(x + 1.0, e) - 2.0 * std::pow(x, e) + std::pow(std::abs(x - 1.0), e));
            }
            Eigen::MatrixXd m(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
            for (std::size_t i = 0; i < K; ++i) {
                for (std::size_t j = 0; j < K; ++j) {
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acf[i > j ? i - j : j - i];
                }
            }
            return CovarianceMatrix::dense(m);
        }
        case CovarianceKind::Equicorrelated: {
            require_range(p >= -1.0 && p <= 1.0, "Equicorrelated requires -1 <= rho <= 1, got " + std::to_string(p));
            Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K), p);
            m.diagonal().setOnes();
            return CovarianceMatrix::dense(m);
        }
        case CovarianceKind::Explicit: {
            if (static_cast<std::size_t>(spec.matrix.rows()) != K) {
                throw ArgumentError("explicit covariance: K does not match matrix size");
            }
            CovarianceMatrix full = CovarianceMatrix::dense(spec.matrix);
            if (!spec.bandwidth || *spec.bandwidth >= K - 1) return full;
            const std::size_t w = *spec.bandwidth;
            std::vector<double> band(K * (w + 1), 0.0);
            for (std::size_t i = 0; i < K; ++i) {
                for (std::size_t d = 0; d <= std::min(i, w); ++d) band[i * (w + 1) + d] = full(i, i - d);
            }
            return CovarianceMatrix::banded(K, w, std::move(band));
        }
    }
    throw ArgumentError("unknown covariance kind");
}

WindowCov extract_window(const CovarianceMatrix& sigma, std::size_t i, std::size_t N) {
    const std::size_t K = sigma.size();
    if (i < 1 || i > K) {
        throw ArgumentError("window centre " + std::to_string(i) + " outside 1.." + std::to_string(K));
    }
    WindowCov w;
    w.center = i;
    w.half_width = N;
    w.lo = i > N ? i - N : 1;
    w.hi = std::min(K, i + N);
    w.submatrix = sigma.principal_block(w.lo - 1, w.length());
    return w;
}

}  // namespace locfdrn
