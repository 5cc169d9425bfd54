#include "locfdrn/two_group.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "locfdrn/errors.hpp"

namespace locfdrn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log((1-pi) phi0) and log(pi phi1), either may be -inf at pi in {0, 1}.
std::pair<double, double> component_logs(double z, const TwoGroupParams& p) noexcept {
    const double null_part = p.pi < 1.0 ? std::log1p(-p.pi) + normal_logpdf(z, 0.0, 1.0) : kNegInf;
    const double alt_part = p.pi > 0.0 ? std::log(p.pi) + normal_logpdf(z, p.b, 1.0 + p.tau_sq) : kNegInf;
    return {null_part, alt_part};
}

}  // namespace

void TwoGroupParams::validate() const {
    if (!std::isfinite(pi) || pi < 0.0 || pi > 1.0) throw DomainError("pi must lie in [0, 1], got " + std::to_string(pi));
    if (!std::isfinite(b)) throw DomainError("b must be finite");
    if (!std::isfinite(tau_sq) || tau_sq < 0.0) {
        throw DomainError("tau_sq must be >= 0, got " + std::to_string(tau_sq));
    }
}

std::size_t HypothesisStates::count_nonnull() const noexcept {
    return static_cast<std::size_t>(std::count(h.begin(), h.end(), std::uint8_t{1}));
}

std::uint64_t params_hash(const TwoGroupParams& params, std::uint64_t sigma_fingerprint) noexcept {
    std::uint64_t h = mix64(sigma_fingerprint);
    for (double v : {params.pi, params.b, params.tau_sq}) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    return h;
}

HypothesisStates sample_states(std::size_t K, double pi, Rng& rng) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("pi must lie in [0, 1], got " + std::to_string(pi));
    std::bernoulli_distribution coin(pi);
    HypothesisStates s;
    s.h.resize(K);
    for (auto& v : s.h) v = coin(rng) ? 1 : 0;
    return s;
}

ZVector sample_zscores(const HypothesisStates& h, const TwoGroupParams& params, const CovarianceMatrix& sigma,
                       Rng& rng) {
    params.validate();
    const std::size_t K = sigma.size();
    if (h.size() != K) throw ArgumentError("sample_zscores: states and covariance dimensions differ");
    const LowerFactor& L = sigma.cholesky();
    std::normal_distribution<double> gauss;
    std::vector<double> e(K);
    for (auto& v : e) v = gauss(rng);
    ZVector z(K);
    L.multiply(e, z);
    const double tau = std::sqrt(params.tau_sq);
    for (std::size_t i = 0; i < K; ++i) {
        const double extra = gauss(rng);
        if (h.h[i]) z[i] += params.b + tau * extra;
    }
    return z;
}

ZVector sample_independent_mixture(std::size_t K, const TwoGroupParams& params, Rng& rng, HypothesisStates* states) {
    params.validate();
    HypothesisStates h = sample_states(K, params.pi, rng);
    std::normal_distribution<double> gauss;
    const double sd1 = std::sqrt(1.0 + params.tau_sq);
    ZVector z(K);
    for (std::size_t i = 0; i < K; ++i) {
        const double e = gauss(rng);
        z[i] = h.h[i] ? params.b + sd1 * e : e;
    }
    if (states != nullptr) *states = std::move(h);
    return z;
}

double normal_logpdf(double z, double mean, double var) noexcept {
    const double d = z - mean;
    return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

double log_add_exp(double a, double b) noexcept {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double marginal_mixture_logdensity(double z, const TwoGroupParams& params) noexcept {
    const auto [null_part, alt_part] = component_logs(z, params);
    return log_add_exp(null_part, alt_part);
}

double nonnull_responsibility(double z, const TwoGroupParams& params) noexcept {
    const auto [null_part, alt_part] = component_logs(z, params);
    if (alt_part == kNegInf) return 0.0;
    return std::exp(alt_part - log_add_exp(null_part, alt_part));
}

LocFdrVector marginal_locfdr(std::span<const double> z, const TwoGroupParams& params) {
    params.validate();
    LocFdrVector out;
    out.N = 0;
    out.params_hash = params_hash(params, 0);
    out.values.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i])) throw ArgumentError("marginal_locfdr: non-finite z at " + std::to_string(i + 1));
        const auto [null_part, alt_part] = component_logs(z[i], params);
        out.values[i] = null_part == kNegInf ? 0.0 : std::exp(null_part - log_add_exp(null_part, alt_part));
    }
    return out;
}

}  // namespace locfdrn
