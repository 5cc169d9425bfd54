#include "locfdrn/locfdr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "locfdrn/errors.hpp"
#include "locfdrn/parallel.hpp"

namespace locfdrn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
// Fresh factorization every this many Gray-code steps bounds update drift.
constexpr std::uint64_t kRefreshPeriod = 256;

/// Streaming log-sum-exp.
class LogSumExp {
public:
    void add(double x) noexcept {
        if (x == kNegInf) return;
        if (x <= max_) {
            sum_ += std::exp(x - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - x) + 1.0;
            max_ = x;
        }
    }
    [[nodiscard]] double value() const noexcept { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

private:
    double max_ = kNegInf;
    double sum_ = 0.0;
};

double batch_log_sum_exp(const std::vector<double>& xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

void check_inputs(std::span<const double> z, const CovarianceMatrix& sigma, const TwoGroupParams& params,
                  std::size_t N, std::size_t max_half_width) {
    params.validate();
    if (z.size() != sigma.size()) throw ArgumentError("z and Sigma dimensions differ");
    if (N > max_half_width) {
        throw RefusalError("half-width N = " + std::to_string(N) + " exceeds the cap " + std::to_string(max_half_width) +
                           " (2^(2N+1) configurations per window); raise max_half_width to override");
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i])) throw ArgumentError("non-finite z at index " + std::to_string(i + 1));
    }
}

double log_prior_of(std::span<const std::uint8_t> h, double pi) {
    double lp = 0.0;
    for (std::uint8_t v : h) lp += v ? std::log(pi) : std::log1p(-pi);
    return lp;
}

// Column-major in-place Cholesky of an l x l matrix (lower part read and written).
bool factor_in_place(double* a, std::size_t l) noexcept {
    for (std::size_t j = 0; j < l; ++j) {
        double d = a[j + j * l];
        for (std::size_t k = 0; k < j; ++k) d -= a[j + k * l] * a[j + k * l];
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a[j + j * l] = ljj;
        for (std::size_t i = j + 1; i < l; ++i) {
            double s = a[i + j * l];
            for (std::size_t k = 0; k < j; ++k) s -= a[i + k * l] * a[j + k * l];
            a[i + j * l] = s / ljj;
        }
    }
    return true;
}

// L L^T +/- tau_sq e_j e_j^T, touching columns j..l-1 only.
bool diagonal_rank_one(double* L, std::size_t l, std::size_t j, double tau_sq, bool add, double* v) noexcept {
    const double sign = add ? 1.0 : -1.0;
    std::fill(v + j, v + l, 0.0);
    v[j] = std::sqrt(tau_sq);
    for (std::size_t k = j; k < l; ++k) {
        const double lkk = L[k + k * l];
        const double vk = v[k];
        const double r2 = lkk * lkk + sign * vk * vk;
        // a near-cancelling downdate loses digits; let the caller refactorize
        if (!(r2 > 1e-10 * lkk * lkk)) return false;
        const double r = std::sqrt(r2);
        const double c = r / lkk;
        const double s = vk / lkk;
        L[k + k * l] = r;
        for (std::size_t i = k + 1; i < l; ++i) {
            const double lik = (L[i + k * l] + sign * s * v[i]) / c;
            L[i + k * l] = lik;
            v[i] = c * v[i] - s * lik;
        }
    }
    return true;
}

struct Scratch {
    std::vector<double> L, v, y;
    void reserve(std::size_t l) {
        if (L.size() < l * l) L.resize(l * l);
        if (v.size() < l) {
            v.resize(l);
            y.resize(l);
        }
    }
};

bool fresh_factor(const WindowPlan::View& w, std::uint64_t mask, double tau_sq, double* L) noexcept {
    const std::size_t l = w.length;
    std::copy(w.sigma, w.sigma + l * l, L);
    for (std::size_t a = 0; a < l; ++a) {
        if ((mask >> a) & 1U) L[a + a * l] += tau_sq;
    }
    return factor_in_place(L, l);
}

// Gray-code enumeration over one window; nullopt asks for the reference path.
std::optional<double> gray_window(const WindowPlan::View& w, const double* zw, const TwoGroupParams& p,
                                  Scratch& s) {
    if (w.factor == nullptr) return std::nullopt;
    const std::size_t l = w.length;
    s.reserve(l);
    double* L = s.L.data();
    double* y = s.y.data();
    std::copy(w.factor, w.factor + l * l, L);

    const double log_pi = p.pi > 0.0 ? std::log(p.pi) : kNegInf;
    const double log_q = p.pi < 1.0 ? std::log1p(-p.pi) : kNegInf;
    std::vector<double> prior(l + 1);
    for (std::size_t o = 0; o <= l; ++o) {
        double lp = 0.0;
        if (o > 0) lp += static_cast<double>(o) * log_pi;
        if (o < l) lp += static_cast<double>(l - o) * log_q;
        prior[o] = lp;
    }
    const double log_norm = -0.5 * static_cast<double>(l) * kLogTwoPi;
    const bool varies = p.tau_sq > 0.0;

    LogSumExp numerator;
    LogSumExp total;
    std::uint64_t mask = 0;
    std::size_t ones = 0;
    const std::uint64_t count = std::uint64_t{1} << l;
    for (std::uint64_t k = 0; k < count; ++k) {
        if (k != 0) {
            const auto j = static_cast<std::size_t>(std::countr_zero(k));
            mask ^= std::uint64_t{1} << j;
            const bool set = (mask >> j) & 1U;
            ones = set ? ones + 1 : ones - 1;
            if (varies) {
                bool ok = false;
                if (k % kRefreshPeriod != 0) ok = diagonal_rank_one(L, l, j, p.tau_sq, set, s.v.data());
                if (!ok && !fresh_factor(w, mask, p.tau_sq, L)) return std::nullopt;
            }
        }
        const double lp = prior[ones];
        if (lp == kNegInf) continue;

        // forward solve L y = z - b h, column oriented
        for (std::size_t a = 0; a < l; ++a) y[a] = zw[a] - (((mask >> a) & 1U) ? p.b : 0.0);
        double quad = 0.0;
        double det = 1.0;
        for (std::size_t c = 0; c < l; ++c) {
            const double lcc = L[c + c * l];
            const double yc = y[c] / lcc;
            quad += yc * yc;
            det *= lcc;
            for (std::size_t i = c + 1; i < l; ++i) y[i] -= L[i + c * l] * yc;
        }
        double logdet = 2.0 * std::log(det);
        if (!std::isfinite(logdet)) {
            logdet = 0.0;
            for (std::size_t c = 0; c < l; ++c) logdet += 2.0 * std::log(L[c + c * l]);
        }
        const double weight = lp + log_norm - 0.5 * (logdet + quad);
        total.add(weight);
        if (!((mask >> w.center) & 1U)) numerator.add(weight);
    }
    const double num = numerator.value();
    if (num == kNegInf) return 0.0;
    return std::min(1.0, std::exp(num - total.value()));
}

// Reference evaluation of a single window: binary order, fresh factorization each time.
double naive_window(std::span<const double> z, const CovarianceMatrix& sigma, const TwoGroupParams& params,
                    std::size_t i, std::size_t N) {
    const WindowCov window = extract_window(sigma, i + 1, N);
    const std::size_t l = window.length();
    const std::size_t c = window.center_offset();
    const std::span<const double> zw = z.subspan(window.lo - 1, l);
    const std::uint64_t count = std::uint64_t{1} << l;
    std::vector<double> weights(count);
    std::vector<std::uint8_t> h(l);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        for (std::size_t a = 0; a < l; ++a) h[a] = static_cast<std::uint8_t>((mask >> a) & 1U);
        double lp = log_prior_of(h, params.pi);
        weights[mask] = lp == kNegInf ? kNegInf : log_joint_window_density(zw, h, params, window).log_likelihood + lp;
    }
    std::vector<double> null_weights;
    null_weights.reserve(count / 2);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        if (!((mask >> c) & 1U)) null_weights.push_back(weights[mask]);
    }
    const double num = batch_log_sum_exp(null_weights);
    if (num == kNegInf) return 0.0;
    return std::min(1.0, std::exp(num - batch_log_sum_exp(weights)));
}

}  // namespace

std::string to_string(Engine engine) { return engine == Engine::Naive ? "naive" : "fast"; }

Engine parse_engine(const std::string& text) {
    if (text == "naive") return Engine::Naive;
    if (text == "fast") return Engine::Fast;
    throw ArgumentError("engine must be naive or fast, got '" + text + "'");
}

WindowDensity log_joint_window_density(std::span<const double> z_window, std::span<const std::uint8_t> h_window,
                                       const TwoGroupParams& params, const WindowCov& window) {
    const std::size_t l = window.length();
    if (z_window.size() != l || h_window.size() != l) throw ArgumentError("window lengths disagree");
    Eigen::MatrixXd C = window.submatrix;
    Eigen::VectorXd r(static_cast<Eigen::Index>(l));
    for (std::size_t a = 0; a < l; ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        if (h_window[a]) C(ia, ia) += params.tau_sq;
        r(ia) = z_window[a] - (h_window[a] ? params.b : 0.0);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) {
        bool ok = false;
        for (double delta : kJitterLadder) {
            const Eigen::VectorXd d = C.diagonal();
            const Eigen::VectorXd scale = (d.array() / (d.array() + delta)).sqrt();
            Eigen::MatrixXd jittered = C;
            jittered.diagonal().array() += delta;
            jittered = scale.asDiagonal() * jittered * scale.asDiagonal();
            llt.compute(jittered);
            if (llt.info() == Eigen::Success) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw NumericalError("window covariance not positive definite at window " + std::to_string(window.center),
                                 window.center);
        }
    }
    const Eigen::MatrixXd& LL = llt.matrixLLT();
    const double logdet = 2.0 * LL.diagonal().array().log().sum();
    const double quad = llt.matrixL().solve(r).squaredNorm();
    WindowDensity out;
    out.log_likelihood = -0.5 * (static_cast<double>(l) * kLogTwoPi + logdet + quad);
    out.log_prior = log_prior_of(h_window, params.pi);
    return out;
}

LocFdrVector locfdr_n(std::span<const double> z, const CovarianceMatrix& sigma, const TwoGroupParams& params,
                      std::size_t N, const LocFdrOptions& options) {
    check_inputs(z, sigma, params, N, options.max_half_width);
    LocFdrVector out;
    out.N = N;
    out.params_hash = params_hash(params, sigma.fingerprint());
    out.values.resize(z.size());
    parallel_for(z.size(), options.workers, [&](std::size_t i) {
        try {
            out.values[i] = naive_window(z, sigma, params, i, N);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("locfdr_n: ") + e.what(), i + 1);
        }
    });
    return out;
}

WindowPlan::WindowPlan(const CovarianceMatrix& sigma, std::size_t N, std::size_t max_half_width)
    : N_(N), fingerprint_(sigma.fingerprint()) {
    if (N > max_half_width) {
        throw RefusalError("half-width N = " + std::to_string(N) + " exceeds the cap " + std::to_string(max_half_width));
    }
    const std::size_t K = sigma.size();
    starts_.resize(K);
    lengths_.resize(K);
    offsets_.resize(K);
    factor_ok_.resize(K);
    std::size_t total = 0;
    for (std::size_t i = 0; i < K; ++i) {
        const std::size_t lo = i > N ? i - N : 0;
        const std::size_t hi = std::min(K - 1, i + N);
        starts_[i] = lo;
        lengths_[i] = hi - lo + 1;
        offsets_[i] = total;
        total += lengths_[i] * lengths_[i];
    }
    sigma_storage_.resize(total);
    factor_storage_.resize(total);
    for (std::size_t i = 0; i < K; ++i) {
        const std::size_t l = lengths_[i];
        double* S = sigma_storage_.data() + offsets_[i];
        for (std::size_t c = 0; c < l; ++c) {
            for (std::size_t r = 0; r < l; ++r) S[r + c * l] = sigma(starts_[i] + r, starts_[i] + c);
        }
        double* F = factor_storage_.data() + offsets_[i];
        std::copy(S, S + l * l, F);
        factor_ok_[i] = factor_in_place(F, l) ? 1 : 0;
    }
}

WindowPlan::View WindowPlan::window(std::size_t i) const noexcept {
    const std::size_t off = offsets_[i];
    return View{starts_[i], lengths_[i], i - starts_[i], sigma_storage_.data() + off,
                factor_ok_[i] ? factor_storage_.data() + off : nullptr};
}

LocFdrVector locfdr_n_fast(std::span<const double> z, const CovarianceMatrix& sigma, const TwoGroupParams& params,
                           std::size_t N, const LocFdrOptions& options) {
    check_inputs(z, sigma, params, N, options.max_half_width);
    if (N == 0) {
        LocFdrVector out = marginal_locfdr(z, params);
        out.params_hash = params_hash(params, sigma.fingerprint());
        return out;
    }
    const WindowPlan plan(sigma, N, options.max_half_width);
    return locfdr_n_fast(z, plan, params, options);
}

LocFdrVector locfdr_n_fast(std::span<const double> z, const WindowPlan& plan, const TwoGroupParams& params,
                           const LocFdrOptions& options) {
    params.validate();
    if (z.size() != plan.size()) throw ArgumentError("z and window plan dimensions differ");
    LocFdrVector out;
    out.N = plan.half_width();
    out.params_hash = params_hash(params, plan.sigma_fingerprint());
    if (plan.half_width() == 0) {
        out.values = marginal_locfdr(z, params).values;
        return out;
    }
    out.values.resize(z.size());
    parallel_for(z.size(), options.workers, [&](std::size_t i) {
        thread_local Scratch scratch;
        const WindowPlan::View w = plan.window(i);
        const std::optional<double> t = gray_window(w, z.data() + w.lo, params, scratch);
        if (t) {
            out.values[i] = *t;
            return;
        }
        // Rebuild the window densely and take the jitter-aware reference route.
        Eigen::MatrixXd m(static_cast<Eigen::Index>(w.length), static_cast<Eigen::Index>(w.length));
        for (std::size_t c = 0; c < w.length; ++c) {
            for (std::size_t r = 0; r < w.length; ++r) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w.sigma[r + c * w.length];
            }
        }
        const CovarianceMatrix local = CovarianceMatrix::dense(m);
        const std::span<const double> zw(z.data() + w.lo, w.length);
        try {
            out.values[i] = naive_window(zw, local, params, w.center, plan.half_width());
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("locfdr_n_fast: ") + e.what(), i + 1);
        }
    });
    return out;
}

LocFdrVector compute_locfdr(Engine engine, std::span<const double> z, const CovarianceMatrix& sigma,
                            const TwoGroupParams& params, std::size_t N, const LocFdrOptions& options) {
    return engine == Engine::Naive ? locfdr_n(z, sigma, params, N, options)
                                   : locfdr_n_fast(z, sigma, params, N, options);
}

LocFdrVector oracle_locfdr_bruteforce(std::span<const double> z, const CovarianceMatrix& sigma,
                                      const TwoGroupParams& params) {
    params.validate();
    const std::size_t K = sigma.size();
    if (z.size() != K) throw ArgumentError("z and Sigma dimensions differ");
    if (K > kMaxOracleK) {
        throw RefusalError("brute-force oracle refuses K = " + std::to_string(K) + " > " + std::to_string(kMaxOracleK));
    }
    const Eigen::MatrixXd base = sigma.to_dense();
    const auto n = static_cast<Eigen::Index>(K);
    std::vector<LogSumExp> null_sums(K);
    LogSumExp total;
    std::vector<std::uint8_t> h(K);
    Eigen::VectorXd r(n);
    const std::uint64_t count = std::uint64_t{1} << K;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        for (std::size_t a = 0; a < K; ++a) h[a] = static_cast<std::uint8_t>((mask >> a) & 1U);
        const double lp = log_prior_of(h, params.pi);
        if (lp == kNegInf) continue;
        Eigen::MatrixXd C = base;
        for (Eigen::Index a = 0; a < n; ++a) {
            if (h[static_cast<std::size_t>(a)]) C(a, a) += params.tau_sq;
            r(a) = z[static_cast<std::size_t>(a)] - (h[static_cast<std::size_t>(a)] ? params.b : 0.0);
        }
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(C);
        const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
        const double quad = r.dot(lu.solve(r));
        const double weight = lp - 0.5 * (static_cast<double>(K) * kLogTwoPi + logdet + quad);
        total.add(weight);
        for (std::size_t a = 0; a < K; ++a) {
            if (!h[a]) null_sums[a].add(weight);
        }
    }
    LocFdrVector out;
    out.N = K > 0 ? K - 1 : 0;
    out.params_hash = params_hash(params, sigma.fingerprint());
    out.values.resize(K);
    const double denom = total.value();
    for (std::size_t a = 0; a < K; ++a) {
        const double num = null_sums[a].value();
        out.values[a] = num == kNegInf ? 0.0 : std::min(1.0, std::exp(num - denom));
    }
    return out;
}

}  // namespace locfdrn
