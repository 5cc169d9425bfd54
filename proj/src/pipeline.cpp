#include "locfdrn/pipeline.hpp"

#include <cmath>
#include <exception>

#include "locfdrn/errors.hpp"
#include "locfdrn/table_io.hpp"

namespace locfdrn {

namespace {

constexpr std::uint64_t kFitStream = 1;
constexpr std::uint64_t kThresholdStream = 2;

void standardize(Eigen::Ref<Eigen::VectorXd> v, const std::string& what) {
    const double n = static_cast<double>(v.size());
    v.array() -= v.mean();
    const double sd = std::sqrt(v.squaredNorm() / (n - 1.0));
    if (!(sd > 0.0)) throw ArgumentError(what + " has zero variance");
    v /= sd;
}

}  // namespace

std::string to_string(Provenance provenance) {
    return provenance == Provenance::SummaryStats ? "summary_stats" : "small_scale_ols";
}

GwasInput gwas_from_summary(std::span<const double> beta, std::span<const double> se, const CovarianceMatrix& ld,
                            std::vector<std::string> ids) {
    if (beta.size() != se.size()) throw ArgumentError("beta and se lengths differ");
    if (beta.size() != ld.size()) {
        throw ArgumentError("LD matrix is " + std::to_string(ld.size()) + " but " + std::to_string(beta.size()) +
                            " statistics were given");
    }
    if (ids.empty()) ids = default_ids(beta.size());
    if (ids.size() != beta.size()) throw ArgumentError("id count does not match statistics");
    GwasInput out;
    out.z.resize(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (!(se[i] > 0.0) || !std::isfinite(se[i])) {
            throw ArgumentError("non-positive standard error at index " + std::to_string(i + 1));
        }
        if (!std::isfinite(beta[i])) throw ArgumentError("non-finite beta at index " + std::to_string(i + 1));
        out.z[i] = beta[i] / se[i];
    }
    out.sigma = ld;
    out.ids = std::move(ids);
    out.provenance = Provenance::SummaryStats;
    return out;
}

GwasInput gwas_from_design(std::span<const double> y, Eigen::MatrixXd X, bool impute_missing,
                           std::vector<std::string> ids) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (p < 1) throw ArgumentError("design has no columns");
    if (y.size() != n) throw ArgumentError("phenotype length does not match design rows");
    if (p >= n) throw ArgumentError("need more samples than columns (n > p)");
    if (p > kMaxDesignColumns) {
        throw RefusalError("design has " + std::to_string(p) + " columns; summary statistics are required above " +
                           std::to_string(kMaxDesignColumns));
    }
    if (ids.empty()) ids = default_ids(p);
    if (ids.size() != p) throw ArgumentError("id count does not match design columns");

    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        double sum = 0.0;
        std::size_t seen = 0;
        bool missing = false;
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            if (std::isnan(X(r, c))) {
                missing = true;
            } else if (!std::isfinite(X(r, c))) {
                throw ArgumentError("non-finite design entry in column " + ids[static_cast<std::size_t>(c)]);
            } else {
                sum += X(r, c);
                ++seen;
            }
        }
        if (!missing) continue;
        if (!impute_missing) throw ArgumentError("missing values in column " + ids[static_cast<std::size_t>(c)]);
        if (seen == 0) throw ArgumentError("column " + ids[static_cast<std::size_t>(c)] + " has no observed values");
        const double mean = sum / static_cast<double>(seen);
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            if (std::isnan(X(r, c))) X(r, c) = mean;
        }
    }

    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    if (!yv.allFinite()) throw ArgumentError("non-finite phenotype value");
    standardize(yv, "phenotype");
    for (Eigen::Index c = 0; c < X.cols(); ++c) standardize(X.col(c), "column " + ids[static_cast<std::size_t>(c)]);

    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    const double scale = xtx.diagonal().mean();
    for (double delta : kJitterLadder) {
        if (llt.info() == Eigen::Success) break;
        llt.compute(xtx + delta * scale * Eigen::MatrixXd::Identity(xtx.rows(), xtx.cols()));
    }
    if (llt.info() != Eigen::Success) throw NumericalError("X'X is singular");
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(xtx.rows(), xtx.cols()));
    const Eigen::VectorXd beta = inv * (X.transpose() * yv);
    const Eigen::VectorXd resid = yv - X * beta;
    const double sigma_hat = std::sqrt(resid.squaredNorm() / static_cast<double>(n - p));
    if (!(sigma_hat > 0.0)) throw NumericalError("residual variance is zero");

    const Eigen::VectorXd s_inv_sqrt = inv.diagonal().array().rsqrt();
    Eigen::MatrixXd sigma = s_inv_sqrt.asDiagonal() * inv * s_inv_sqrt.asDiagonal();
    sigma = 0.5 * (sigma + sigma.transpose());
    sigma.diagonal().setOnes();

    GwasInput out;
    out.z.resize(p);
    for (std::size_t j = 0; j < p; ++j) out.z[j] = beta(static_cast<Eigen::Index>(j)) * s_inv_sqrt(static_cast<Eigen::Index>(j)) / sigma_hat;
    out.sigma = CovarianceMatrix::dense(sigma);
    out.ids = std::move(ids);
    out.provenance = Provenance::SmallScaleOls;
    return out;
}

FitResult fit_parameters(std::span<const double> z, const CovarianceMatrix& sigma, const EstimationConfig& config,
                         std::uint64_t seed) {
    if (z.size() != sigma.size()) throw ArgumentError("z and Sigma dimensions differ");
    FitResult fit;
    fit.subset = with_context("step 2 (subset)", [&] { return select_subset(sigma, config.subset); });
    const std::vector<double> zs = gather(z, fit.subset);
    fit.em = with_context("step 3 (EM)", [&] { return em_fit_multistart(zs, config, seed); });
    return fit;
}

PipelineResult algorithm1_from_fit(std::span<const double> z, const CovarianceMatrix& sigma, const FitResult& fit,
                                   std::size_t N, double alpha, std::size_t B, std::uint64_t seed,
                                   const PipelineOptions& options) {
    if (z.size() != sigma.size()) throw ArgumentError("z and Sigma dimensions differ");
    PipelineResult out;
    out.fitted = fit.em.params;
    const LocFdrOptions lopts{options.max_half_width, options.workers};
    out.T = with_context("step 4 (locfdr)", [&] { return compute_locfdr(options.engine, z, sigma, out.fitted, N, lopts); });
    const SeedStream calib = SeedStream{seed}.child(kThresholdStream).child(N);
    McOptions mopts;
    mopts.engine = options.engine;
    mopts.workers = options.workers;
    mopts.max_half_width = options.max_half_width;
    out.t_hat = with_context("step 5 (threshold)",
                     [&] { return mc_threshold(out.fitted, sigma, N, alpha, B, calib, options.sampling, mopts); });
    out.rejected = tn_rule(out.T, out.t_hat.t_hat);

    auto& m = out.manifest;
    m["seed"] = seed;
    m["N"] = N;
    m["alpha"] = alpha;
    m["B"] = B;
    m["K"] = z.size();
    m["sampling"] = to_string(options.sampling);
    m["engine"] = to_string(options.engine);
    m["max_half_width"] = options.max_half_width;
    m["sigma_fingerprint"] = sigma.fingerprint();
    m["subset_size"] = fit.subset.size();
    m["fitted"] = to_json(out.fitted);
    m["em_final"] = to_json(fit.em.final_state());
    m["em_iterations"] = fit.em.trace.size();
    m["t_hat"] = out.t_hat.t_hat;
    m["threshold_method"] = to_string(out.t_hat.method);
    m["empty_rejection"] = out.t_hat.empty_rejection;
    m["rejections"] = out.rejected.size();
    m["params_hash"] = out.T.params_hash;
    return out;
}

PipelineResult algorithm1(std::span<const double> z, const CovarianceMatrix& sigma, std::size_t N, double alpha,
                          std::size_t B, const EstimationConfig& config, std::uint64_t seed,
                          const PipelineOptions& options) {
    const FitResult fit = fit_parameters(z, sigma, config, SeedStream{seed}.child(kFitStream).seed);
    PipelineResult out = algorithm1_from_fit(z, sigma, fit, N, alpha, B, seed, options);
    out.manifest["estimation"] = {{"subset", config.subset.describe()},
                                  {"pi_fixed", config.pi_fixed ? nlohmann::json(*config.pi_fixed) : nlohmann::json()},
                                  {"restarts", config.restarts},
                                  {"tol", config.em.tol},
                                  {"max_iter", config.em.max_iter}};
    return out;
}

nlohmann::json to_json(const TwoGroupParams& params) {
    return {{"pi", params.pi}, {"b", params.b}, {"tau_sq", params.tau_sq}};
}

nlohmann::json to_json(const EmState& state) {
    nlohmann::json j{{"iteration", state.iteration},
                     {"params", to_json(state.params)},
                     {"loglik", state.loglik},
                     {"converged", state.converged},
                     {"degenerate", state.degenerate}};
    if (state.fixed_pi) j["fixed_pi"] = *state.fixed_pi;
    return j;
}

}  // namespace locfdrn
