#include "locfdrn/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <sstream>

#include "locfdrn/errors.hpp"

namespace locfdrn {

namespace {

void check_level(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
}

std::vector<std::size_t> ascending_order(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
}

// Rejects every value <= the sorted value at position k_star - 1 (ties included).
std::vector<std::size_t> threshold_set(std::span<const double> v, const std::vector<std::size_t>& order,
                                       std::size_t k_star) {
    std::vector<std::size_t> out;
    if (k_star == 0) return out;
    const double bound = v[order[k_star - 1]];
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] <= bound) out.push_back(i + 1);
    }
    return out;
}

RejectionSet step_up(std::span<const double> p, double level) {
    for (double x : p) {
        if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("p-values must lie in [0, 1]");
    }
    const auto order = ascending_order(p);
    const double K = static_cast<double>(p.size());
    std::size_t k_star = 0;
    for (std::size_t k = 1; k <= p.size(); ++k) {
        if (p[order[k - 1]] <= static_cast<double>(k) * level / K) k_star = k;
    }
    RejectionSet out;
    out.rejected = threshold_set(p, order, k_star);
    out.statistics_used = "p";
    out.K = p.size();
    return out;
}

}  // namespace

std::string RuleDescriptor::describe() const {
    std::ostringstream os;
    switch (kind) {
        case RuleKind::TN: os << "T" << N << "(t=" << cutoff << ")"; break;
        case RuleKind::BH: os << "BH(alpha=" << alpha << ")"; break;
        case RuleKind::ABH: os << "ABH(alpha=" << alpha << ", pi_hat=" << pi_hat << ")"; break;
        case RuleKind::SunCai: os << "SC(alpha=" << alpha << ")"; break;
    }
    return os.str();
}

RejectionSet tn_rule(const LocFdrVector& T, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("cutoff must lie in [0, 1]");
    RejectionSet out;
    for (std::size_t i = 0; i < T.size(); ++i) {
        if (T[i] <= t) out.rejected.push_back(i + 1);
    }
    out.rule = {RuleKind::TN, 0.0, t, T.N, 0.0};
    out.statistics_used = "T_" + std::to_string(T.N);
    out.K = T.size();
    return out;
}

std::vector<double> z_to_pvalue(std::span<const double> z) {
    std::vector<double> p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i])) throw ArgumentError("non-finite z at index " + std::to_string(i + 1));
        p[i] = std::erfc(std::abs(z[i]) / std::sqrt(2.0));
    }
    return p;
}

RejectionSet bh(std::span<const double> p, double alpha) {
    check_level(alpha);
    RejectionSet out = step_up(p, alpha);
    out.rule = {RuleKind::BH, alpha, 0.0, 0, 0.0};
    return out;
}

RejectionSet adaptive_bh(std::span<const double> p, double alpha, double pi_hat) {
    check_level(alpha);
    if (!(pi_hat >= 0.0 && pi_hat < 1.0)) throw ArgumentError("adaptive BH needs 0 <= pi_hat < 1");
    RejectionSet out = step_up(p, alpha / (1.0 - pi_hat));
    out.rule = {RuleKind::ABH, alpha, 0.0, 0, pi_hat};
    return out;
}

RejectionSet sun_cai(const LocFdrVector& T0, double alpha) {
    check_level(alpha);
    const std::span<const double> v(T0.values);
    const auto order = ascending_order(v);
    std::size_t k_star = 0;
    double running = 0.0;
    for (std::size_t k = 1; k <= v.size(); ++k) {
        running += v[order[k - 1]];
        // Only tie-group ends are admissible stopping points.
        const bool group_end = k == v.size() || v[order[k]] != v[order[k - 1]];
        if (group_end && running / static_cast<double>(k) <= alpha) k_star = k;
    }
    RejectionSet out;
    out.rejected = threshold_set(v, order, k_star);
    out.rule = {RuleKind::SunCai, alpha, 0.0, 0, 0.0};
    out.statistics_used = "T_0";
    out.K = v.size();
    return out;
}

Eigen::MatrixXi common_rejections(std::span<const RejectionSet> sets) {
    const auto n = static_cast<Eigen::Index>(sets.size());
    Eigen::MatrixXi m(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a; b < n; ++b) {
            const auto& ra = sets[static_cast<std::size_t>(a)].rejected;
            const auto& rb = sets[static_cast<std::size_t>(b)].rejected;
            std::vector<std::size_t> both;
            std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(both));
            m(a, b) = m(b, a) = static_cast<int>(both.size());
        }
    }
    return m;
}

}  // namespace locfdrn
