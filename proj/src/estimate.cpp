#include "locfdrn/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "locfdrn/errors.hpp"
#include "locfdrn/rng.hpp"

namespace locfdrn {

namespace {

constexpr double kCollapse = 1e-12;

void check_sample(std::span<const double> z_s) {
    if (z_s.size() < 2) throw ArgumentError("EM needs at least two statistics");
    for (std::size_t i = 0; i < z_s.size(); ++i) {
        if (!std::isfinite(z_s[i])) throw ArgumentError("non-finite statistic at position " + std::to_string(i + 1));
    }
}

EmResult run_em(std::span<const double> z_s, TwoGroupParams theta, std::optional<double> fixed_pi,
                const EmOptions& options) {
    check_sample(z_s);
    if (fixed_pi) theta.pi = *fixed_pi;
    theta.validate();

    EmResult result;
    double ll = observed_loglik(z_s, theta);
    result.trace.push_back({0, theta, ll, false, false, fixed_pi});

    const std::size_t n = z_s.size();
    std::vector<double> resp(n);
    for (std::size_t t = 1; t <= options.max_iter; ++t) {
        // E step
        double sum_r = 0.0;
        double sum_rz = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            resp[i] = nonnull_responsibility(z_s[i], theta);
            sum_r += resp[i];
            sum_rz += resp[i] * z_s[i];
        }
        if (!(sum_r > 0.0)) {
            result.trace.back().degenerate = true;
            break;
        }
        // M step
        TwoGroupParams next;
        next.pi = fixed_pi ? *fixed_pi : sum_r / static_cast<double>(n);
        next.b = sum_rz / sum_r;
        double sum_rdev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = z_s[i] - next.b;
            sum_rdev += resp[i] * d * d;
        }
        next.tau_sq = std::max(0.0, sum_rdev / sum_r - 1.0);

        const double next_ll = observed_loglik(z_s, next);
        EmState state{t, next, next_ll, false, false, fixed_pi};
        const bool collapsed = !fixed_pi && (next.pi < kCollapse || next.pi > 1.0 - kCollapse);
        const double scale = std::max(std::abs(ll), 1e-300);
        state.converged = !collapsed && std::abs(next_ll - ll) <= options.tol * scale;
        state.degenerate = collapsed;
        result.trace.push_back(state);
        theta = next;
        ll = next_ll;
        if (collapsed || state.converged) break;
    }
    result.params = theta;
    return result;
}

}  // namespace

SubsetSpec SubsetSpec::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    try {
        if (parts.size() == 3 && parts[0] == "stride") {
            const long step = std::stol(parts[1]);
            const long offset = std::stol(parts[2]);
            if (step < 1 || offset < 1) throw ArgumentError("stride step and offset must be >= 1");
            return stride(static_cast<std::size_t>(step), static_cast<std::size_t>(offset));
        }
        if (parts.size() == 2 && parts[0] == "corr") {
            const double eps = std::stod(parts[1]);
            if (!(eps >= 0.0)) throw ArgumentError("corr threshold must be >= 0");
            return corr_threshold(eps);
        }
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ArgumentError*>(&e) != nullptr) throw;
    }
    throw ArgumentError("subset spec must be stride:STEP:OFFSET or corr:EPS, got '" + text + "'");
}

std::string SubsetSpec::describe() const {
    std::ostringstream os;
    if (mode == Mode::Stride) {
        os << "stride:" << step << ':' << offset;
    } else {
        os << "corr:" << eps;
    }
    return os.str();
}

std::vector<std::size_t> select_subset(const CovarianceMatrix& sigma, const SubsetSpec& spec) {
    const std::size_t K = sigma.size();
    std::vector<std::size_t> kept;
    if (spec.mode == SubsetSpec::Mode::Stride) {
        if (spec.step == 0 || spec.offset == 0) throw ArgumentError("stride step and offset must be >= 1");
        for (std::size_t i = spec.offset; i <= K; i += spec.step) kept.push_back(i);
    } else {
        const std::size_t w = sigma.bandwidth();
        for (std::size_t i = 0; i < K; ++i) {
            bool ok = true;
            for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
                const std::size_t j = *it - 1;
                if (i - j > w) break;
                if (std::abs(sigma(i, j)) > spec.eps) {
                    ok = false;
                    break;
                }
            }
            if (ok) kept.push_back(i + 1);
        }
    }
    if (kept.empty()) throw ArgumentError("subset selection produced no indices");
    return kept;
}

std::vector<double> gather(std::span<const double> z, std::span<const std::size_t> indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx < 1 || idx > z.size()) throw ArgumentError("subset index out of range");
        out.push_back(z[idx - 1]);
    }
    return out;
}

double observed_loglik(std::span<const double> z_s, const TwoGroupParams& params) {
    double ll = 0.0;
    for (double z : z_s) ll += marginal_mixture_logdensity(z, params);
    return ll;
}

TwoGroupParams default_init(std::span<const double> z_s) {
    check_sample(z_s);
    const double n = static_cast<double>(z_s.size());
    const double mean = std::accumulate(z_s.begin(), z_s.end(), 0.0) / n;
    double ss = 0.0;
    for (double z : z_s) ss += (z - mean) * (z - mean);
    const double var = ss / (n - 1.0);
    return {0.2, mean, std::max(var - 1.0, 0.25)};
}

EmResult em_fit_full(std::span<const double> z_s, const TwoGroupParams& init, const EmOptions& options) {
    if (!(init.pi > 0.0 && init.pi < 1.0)) throw ArgumentError("EM initial pi must lie strictly inside (0, 1)");
    return run_em(z_s, init, std::nullopt, options);
}

EmResult em_fit_plugin(std::span<const double> z_s, double pi_hat, const TwoGroupParams& init,
                       const EmOptions& options) {
    if (!(pi_hat > 0.0 && pi_hat < 1.0)) throw ArgumentError("plug-in pi must lie strictly inside (0, 1)");
    return run_em(z_s, init, pi_hat, options);
}

EmResult em_fit_multistart(std::span<const double> z_s, const EstimationConfig& config, std::uint64_t seed) {
    const TwoGroupParams start = config.init ? *config.init : default_init(z_s);
    auto fit = [&](const TwoGroupParams& init) {
        return config.pi_fixed ? em_fit_plugin(z_s, *config.pi_fixed, init, config.em)
                               : em_fit_full(z_s, init, config.em);
    };
    EmResult best = fit(start);

    const double n = static_cast<double>(z_s.size());
    const double mean = std::accumulate(z_s.begin(), z_s.end(), 0.0) / n;
    double ss = 0.0;
    for (double z : z_s) ss += (z - mean) * (z - mean);
    const double sd = std::sqrt(ss / (n - 1.0));

    const SeedStream stream{seed};
    for (std::size_t r = 0; r < config.restarts; ++r) {
        Rng rng = stream.replicate(r);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> g;
        TwoGroupParams init;
        init.pi = 0.05 + 0.45 * u(rng);
        init.b = mean + 0.5 * sd * g(rng);
        init.tau_sq = 0.25 + u(rng) * std::max(1.0, 2.0 * sd * sd);
        EmResult candidate = fit(init);
        const EmState& c = candidate.final_state();
        const EmState& b = best.final_state();
        const bool better = (b.degenerate && !c.degenerate) ||
                            (b.degenerate == c.degenerate && c.loglik > b.loglik);
        if (better) best = std::move(candidate);
    }
    return best;
}

}  // namespace locfdrn
