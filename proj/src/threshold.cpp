#include "locfdrn/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "locfdrn/errors.hpp"
#include "locfdrn/parallel.hpp"

namespace locfdrn {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in (0, 1]");
}

struct Interval {
    double lo;
    double hi;
};

// {z : T(z) <= t} as a union of at most two intervals. T(z) <= t iff the
// log likelihood ratio A z^2 + B z + C reaches log((1 - t) / t).
std::vector<Interval> rejection_region(const TwoGroupParams& p, double t) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (t >= 1.0) return {{-inf, inf}};
    if (t <= 0.0) return {};
    const double s2 = 1.0 + p.tau_sq;
    const double A = 0.5 * (1.0 - 1.0 / s2);
    const double B = p.b / s2;
    const double C = std::log(p.pi) - std::log1p(-p.pi) - 0.5 * std::log(s2) - p.b * p.b / (2.0 * s2);
    const double k = std::log1p(-t) - std::log(t);
    const double c0 = C - k;
    if (A > 0.0) {
        const double disc = B * B - 4.0 * A * c0;
        if (disc <= 0.0) return {{-inf, inf}};
        const double sq = std::sqrt(disc);
        const double r1 = (-B - sq) / (2.0 * A);
        const double r2 = (-B + sq) / (2.0 * A);
        return {{-inf, r1}, {r2, inf}};
    }
    if (B > 0.0) return {{-c0 / B, inf}};
    if (B < 0.0) return {{-inf, -c0 / B}};
    if (c0 >= 0.0) return {{-inf, inf}};
    return {};
}

template <typename F>
double integrate(F f, const Interval& iv) {
    using boost::math::quadrature::gauss_kronrod;
    double error = 0.0;
    const double value = gauss_kronrod<double, 61>::integrate(f, iv.lo, iv.hi, 15, 1e-13, &error);
    if (!std::isfinite(value) || error > 1e-9) {
        throw NumericalError("quadrature did not converge on [" + std::to_string(iv.lo) + ", " +
                             std::to_string(iv.hi) + "]");
    }
    return value;
}

}  // namespace

std::string to_string(Sampling sampling) { return sampling == Sampling::Joint ? "joint" : "independent"; }

Sampling parse_sampling(const std::string& text) {
    if (text == "independent") return Sampling::Independent;
    if (text == "joint") return Sampling::Joint;
    throw ArgumentError("sampling must be independent or joint, got '" + text + "'");
}

std::string to_string(ThresholdMethod method) {
    switch (method) {
        case ThresholdMethod::McIndependent: return "mc_independent";
        case ThresholdMethod::McJoint: return "mc_joint";
        case ThresholdMethod::QuadratureN0: return "quadrature_n0";
    }
    return "unknown";
}

std::optional<double> q_hat(std::span<const double> pool, double t) {
    double num = 0.0;
    std::size_t den = 0;
    for (double v : pool) {
        if (v <= t) {
            num += v;
            ++den;
        }
    }
    if (den == 0) return std::nullopt;
    return num / static_cast<double>(den);
}

ThresholdEstimate search_cutoff(std::vector<double>& pool, double alpha, std::size_t max_curve_points) {
    check_alpha(alpha);
    if (pool.empty()) throw ArgumentError("search_cutoff: empty pool");
    std::sort(pool.begin(), pool.end());
    ThresholdEstimate est;
    est.alpha = alpha;

    // Jump points are the last index of each run of equal values.
    std::vector<std::size_t> ends;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (k + 1 == pool.size() || pool[k + 1] != pool[k]) ends.push_back(k);
    }
    double running = 0.0;
    std::size_t next = 0;
    std::optional<std::size_t> best;
    std::vector<std::pair<double, double>> curve;
    curve.reserve(ends.size());
    for (std::size_t e : ends) {
        for (; next <= e; ++next) running += pool[next];
        const double q = running / static_cast<double>(e + 1);
        curve.emplace_back(pool[e], q);
        if (q <= alpha) best = e;
    }
    if (!best) {
        est.t_hat = 0.0;
        est.empty_rejection = true;
    } else if (*best + 1 == pool.size()) {
        est.t_hat = 1.0;
    } else {
        est.t_hat = pool[*best];
    }
    if (max_curve_points > 0 && curve.size() > max_curve_points) {
        std::vector<std::pair<double, double>> thin;
        thin.reserve(max_curve_points);
        for (std::size_t k = 0; k < max_curve_points; ++k) {
            thin.push_back(curve[k * (curve.size() - 1) / (max_curve_points - 1)]);
        }
        curve = std::move(thin);
    }
    est.q_curve = std::move(curve);
    return est;
}

ThresholdEstimate mc_threshold(const TwoGroupParams& params, const CovarianceMatrix& sigma, std::size_t N,
                               double alpha, std::size_t B, const SeedStream& seed, Sampling sampling,
                               const McOptions& options) {
    params.validate();
    check_alpha(alpha);
    if (B < 1) throw ArgumentError("mc_threshold needs B >= 1");
    const std::size_t K = sigma.size();
    std::vector<double> pool(B * K);
    const LocFdrOptions lopts{options.max_half_width, 1};
    std::optional<WindowPlan> plan;
    if (options.engine == Engine::Fast) plan.emplace(sigma, N, options.max_half_width);
    if (sampling == Sampling::Joint) (void)sigma.cholesky();

    parallel_for(B, options.workers, [&](std::size_t r) {
        Rng rng = seed.replicate(r);
        ZVector z;
        if (sampling == Sampling::Joint) {
            const HypothesisStates h = sample_states(K, params.pi, rng);
            z = sample_zscores(h, params, sigma, rng);
        } else {
            z = sample_independent_mixture(K, params, rng);
        }
        const LocFdrVector T = plan ? locfdr_n_fast(z, *plan, params, lopts) : locfdr_n(z, sigma, params, N, lopts);
        std::copy(T.values.begin(), T.values.end(), pool.begin() + static_cast<std::ptrdiff_t>(r * K));
    });
    ThresholdEstimate est = search_cutoff(pool, alpha, options.max_curve_points);
    est.N = N;
    est.B = B;
    est.method = sampling == Sampling::Joint ? ThresholdMethod::McJoint : ThresholdMethod::McIndependent;
    return est;
}

std::optional<double> quadrature_q_n0(const TwoGroupParams& params, double t) {
    params.validate();
    const double sd1 = std::sqrt(1.0 + params.tau_sq);
    const auto phi = [](double z, double mean, double sd) {
        const double u = (z - mean) / sd;
        return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
    };
    const auto null_density = [&](double z) { return (1.0 - params.pi) * phi(z, 0.0, 1.0); };
    const auto mixture_density = [&](double z) { return null_density(z) + params.pi * phi(z, params.b, sd1); };
    double num = 0.0;
    double den = 0.0;
    // T(z) f(z) = (1 - pi) phi(z): the numerator integrates the null part only.
    for (const Interval& iv : rejection_region(params, t)) {
        num += integrate(null_density, iv);
        den += integrate(mixture_density, iv);
    }
    if (!(den > 0.0)) return std::nullopt;
    return num / den;
}

ThresholdEstimate quadrature_threshold_n0(const TwoGroupParams& params, double alpha) {
    params.validate();
    check_alpha(alpha);
    ThresholdEstimate est;
    est.alpha = alpha;
    est.N = 0;
    est.method = ThresholdMethod::QuadratureN0;
    if (params.pi <= 0.0) {
        est.empty_rejection = true;
        return est;
    }
    if (params.pi >= 1.0 || 1.0 - params.pi <= alpha) {
        est.t_hat = 1.0;
        return est;
    }
    const auto ok = [&](double t) {
        const std::optional<double> q = quadrature_q_n0(params, t);
        if (q) est.q_curve.emplace_back(t, *q);
        return !q || *q <= alpha;
    };
    // Q is nondecreasing in t; bisect on the boundary of {t : Q(t) <= alpha}.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ok(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    est.t_hat = lo;
    if (!quadrature_q_n0(params, lo)) est.empty_rejection = true;
    std::sort(est.q_curve.begin(), est.q_curve.end());
    return est;
}

}  // namespace locfdrn
