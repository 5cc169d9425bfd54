// Command-line front end: one subcommand per library entry point.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "locfdrn/covariance.hpp"
#include "locfdrn/errors.hpp"
#include "locfdrn/estimate.hpp"
#include "locfdrn/harness.hpp"
#include "locfdrn/ld_io.hpp"
#include "locfdrn/locfdr.hpp"
#include "locfdrn/pipeline.hpp"
#include "locfdrn/procedures.hpp"
#include "locfdrn/table_io.hpp"
#include "locfdrn/threshold.hpp"

namespace fs = std::filesystem;
using namespace locfdrn;

namespace {

struct SigmaSource {
    std::string ld_path;
    std::string covariance;
    std::size_t K = 0;

    void add(CLI::App* app) {
        app->add_option("--ld", ld_path, "LD matrix file (banded binary or dense CSV)");
        app->add_option("--covariance", covariance, "structure instead of --ld: ar1:RHO, banded1:RHO, longrange:H, equi:RHO");
        app->add_option("--K", K, "dimension for --covariance (defaults to the z-score count)");
    }

    [[nodiscard]] CovarianceMatrix load(std::size_t fallback_K) const {
        if (!ld_path.empty()) return load_ld(ld_path);
        if (covariance.empty()) throw ArgumentError("give --ld or --covariance");
        const std::size_t k = K > 0 ? K : fallback_K;
        if (k == 0) throw ArgumentError("--covariance needs --K");
        return build_covariance(CovarianceSpec::parse(covariance, k));
    }
};

struct ParamsOptions {
    TwoGroupParams params{0.3, 0.0, 4.0};

    void add(CLI::App* app) {
        app->add_option("--pi", params.pi, "non-null proportion")->capture_default_str();
        app->add_option("--b", params.b, "non-null mean")->capture_default_str();
        app->add_option("--tau2", params.tau_sq, "non-null extra variance")->capture_default_str();
    }
};

struct EstimationOptions {
    std::string subset = "corr:0.05";
    std::optional<double> pi_fixed;
    std::size_t restarts = 5;

    void add(CLI::App* app) {
        app->add_option("--subset", subset, "stride:STEP:OFFSET or corr:EPS")->capture_default_str();
        app->add_option("--pi-fixed", pi_fixed, "freeze pi at this value (plug-in EM)");
        app->add_option("--restarts", restarts, "random EM restarts")->capture_default_str();
    }

    [[nodiscard]] EstimationConfig config() const {
        EstimationConfig c;
        c.subset = SubsetSpec::parse(subset);
        c.pi_fixed = pi_fixed;
        c.restarts = restarts;
        return c;
    }
};

void check_sizes(const ZTable& z, const CovarianceMatrix& sigma) {
    if (z.z.size() != sigma.size()) {
        throw ArgumentError("z file has " + std::to_string(z.z.size()) + " rows but the LD matrix is " +
                            std::to_string(sigma.size()));
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_rejection_list(const fs::path& path, const RejectionSet& set, const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << "i\tid\n";
    for (std::size_t i : set.rejected) out << i << '\t' << ids[i - 1] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neighbourhood local false discovery rate procedures"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned workers = 1;
    app.add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();

    // locfdr
    auto* c_locfdr = app.add_subcommand("locfdr", "compute T_{i,N} for a z-score file");
    std::string z_path, out_path, engine_name = "fast";
    std::size_t N = 0;
    SigmaSource sigma_src;
    ParamsOptions params_opt;
    c_locfdr->add_option("--z", z_path, "z-score TSV (id, z)")->required();
    sigma_src.add(c_locfdr);
    params_opt.add(c_locfdr);
    c_locfdr->add_option("--N", N, "half-width")->capture_default_str();
    c_locfdr->add_option("--engine", engine_name, "fast or naive")->capture_default_str();
    c_locfdr->add_option("--out", out_path, "output TSV")->required();

    // fit
    auto* c_fit = app.add_subcommand("fit", "EM fit of (pi, b, tau2) on an approximately independent subset");
    EstimationOptions est_opt;
    std::uint64_t seed = 1;
    c_fit->add_option("--z", z_path, "z-score TSV")->required();
    sigma_src.add(c_fit);
    est_opt.add(c_fit);
    c_fit->add_option("--seed", seed)->capture_default_str();
    c_fit->add_option("--out", out_path, "JSON output (stdout when omitted)");

    // threshold
    auto* c_thr = app.add_subcommand("threshold", "calibrate the cutoff t_{alpha,N}");
    double alpha = 0.05;
    std::size_t B = 500;
    std::string sampling_name = "independent", method = "mc";
    params_opt.add(c_thr);
    sigma_src.add(c_thr);
    c_thr->add_option("--alpha", alpha)->capture_default_str();
    c_thr->add_option("--N", N)->capture_default_str();
    c_thr->add_option("--B", B, "Monte-Carlo replicates")->capture_default_str();
    c_thr->add_option("--sampling", sampling_name, "independent or joint")->capture_default_str();
    c_thr->add_option("--method", method, "mc or quadrature (N = 0 only)")->capture_default_str();
    c_thr->add_option("--seed", seed)->capture_default_str();
    c_thr->add_option("--out", out_path, "q-curve CSV");

    // run
    auto* c_run = app.add_subcommand("run", "data-driven procedure end to end");
    std::string out_dir;
    c_run->add_option("--z", z_path, "z-score TSV")->required();
    sigma_src.add(c_run);
    c_run->add_option("--N", N)->capture_default_str();
    c_run->add_option("--alpha", alpha)->capture_default_str();
    c_run->add_option("--B", B)->capture_default_str();
    est_opt.add(c_run);
    c_run->add_option("--sampling", sampling_name)->capture_default_str();
    c_run->add_option("--seed", seed)->capture_default_str();
    c_run->add_option("--out", out_dir, "output directory")->required();

    // compare
    auto* c_cmp = app.add_subcommand("compare", "T_N, BH, ABH and Sun-Cai on shared inputs");
    c_cmp->add_option("--z", z_path, "z-score TSV")->required();
    sigma_src.add(c_cmp);
    c_cmp->add_option("--N", N)->capture_default_str();
    c_cmp->add_option("--alpha", alpha)->capture_default_str();
    c_cmp->add_option("--B", B)->capture_default_str();
    est_opt.add(c_cmp);
    c_cmp->add_option("--sampling", sampling_name)->capture_default_str();
    c_cmp->add_option("--seed", seed)->capture_default_str();
    c_cmp->add_option("--out", out_dir, "output directory")->required();

    // gwas-prep
    auto* c_prep = app.add_subcommand("gwas-prep", "build z-scores and LD from summary statistics or a design");
    std::string sumstats, design, phenotype;
    bool impute = false;
    c_prep->add_option("--sumstats", sumstats, "TSV with id, beta, se (needs --ld)");
    c_prep->add_option("--ld", sigma_src.ld_path, "LD matrix for --sumstats");
    c_prep->add_option("--design", design, "design CSV (header of ids, NA for missing)");
    c_prep->add_option("--phenotype", phenotype, "phenotype file, one value per line");
    c_prep->add_flag("--impute", impute, "mean-impute missing design entries");
    c_prep->add_option("--out", out_dir, "output directory")->required();

    // experiment
    auto* c_exp = app.add_subcommand("experiment", "replicated simulation producing a table");
    std::string config_path;
    std::vector<std::string> overrides;
    c_exp->add_option("--config", config_path, "key = value config file");
    c_exp->add_option("--set", overrides, "override KEY=VALUE (repeatable)");
    c_exp->add_option("--out", out_dir, "output directory")->required();

    // figure1
    auto* c_fig = app.add_subcommand("figure1", "T_{i,N} for N = 0..N_max on one simulated draw");
    std::size_t N_max = 5;
    params_opt.add(c_fig);
    sigma_src.add(c_fig);
    c_fig->add_option("--N-max", N_max)->capture_default_str();
    c_fig->add_option("--seed", seed)->capture_default_str();
    c_fig->add_option("--out", out_path, "long CSV (i, N, T)")->required();

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "draw (h, z) from the model and write z TSV, LD and truth");
    params_opt.add(c_sim);
    sigma_src.add(c_sim);
    c_sim->add_option("--seed", seed)->capture_default_str();
    c_sim->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_locfdr) {
            const ZTable z = read_z_tsv(z_path);
            const CovarianceMatrix sigma = sigma_src.load(z.z.size());
            check_sizes(z, sigma);
            const LocFdrVector T =
                compute_locfdr(parse_engine(engine_name), z.z, sigma, params_opt.params, N, {kDefaultMaxHalfWidth, workers});
            write_locfdr_tsv(out_path, z.ids, z.z, T);
        } else if (*c_fit) {
            const ZTable z = read_z_tsv(z_path);
            const CovarianceMatrix sigma = sigma_src.load(z.z.size());
            check_sizes(z, sigma);
            const FitResult fit = fit_parameters(z.z, sigma, est_opt.config(), seed);
            nlohmann::json j{{"fitted", to_json(fit.em.params)},
                             {"final", to_json(fit.em.final_state())},
                             {"subset_size", fit.subset.size()},
                             {"seed", seed}};
            nlohmann::json trace = nlohmann::json::array();
            for (const auto& s : fit.em.trace) trace.push_back(to_json(s));
            j["trace"] = trace;
            if (out_path.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                write_json(out_path, j);
            }
        } else if (*c_thr) {
            ThresholdEstimate est;
            if (method == "quadrature") {
                if (N != 0) throw ArgumentError("quadrature cutoff exists for N = 0 only");
                est = quadrature_threshold_n0(params_opt.params, alpha);
            } else if (method == "mc") {
                const CovarianceMatrix sigma = sigma_src.load(0);
                McOptions mopts;
                mopts.workers = workers;
                est = mc_threshold(params_opt.params, sigma, N, alpha, B, SeedStream{seed},
                                   parse_sampling(sampling_name), mopts);
            } else {
                throw ArgumentError("--method must be mc or quadrature");
            }
            std::cout << std::setprecision(10) << "t_hat=" << est.t_hat << " alpha=" << est.alpha << " N=" << est.N
                      << " B=" << est.B << " method=" << to_string(est.method)
                      << " empty_rejection=" << (est.empty_rejection ? 1 : 0) << '\n';
            if (!out_path.empty()) write_q_curve_csv(out_path, est);
        } else if (*c_run || *c_cmp) {
            const ZTable z = read_z_tsv(z_path);
            const CovarianceMatrix sigma = sigma_src.load(z.z.size());
            check_sizes(z, sigma);
            fs::create_directories(out_dir);
            PipelineOptions popts;
            popts.sampling = parse_sampling(sampling_name);
            popts.workers = workers;
            const EstimationConfig est = est_opt.config();
            const PipelineResult res = algorithm1(z.z, sigma, N, alpha, B, est, seed, popts);
            const fs::path dir(out_dir);
            nlohmann::json manifest = res.manifest;
            manifest["z_file"] = z_path;
            manifest["ld"] = sigma_src.ld_path.empty() ? sigma_src.covariance : sigma_src.ld_path;
            if (*c_run) {
                write_rejections_tsv((dir / "rejections.tsv").string(), z.ids, z.z, res.T, res.rejected);
                write_manhattan_csv((dir / "manhattan.csv").string(), res.T, res.t_hat.t_hat);
                write_q_curve_csv((dir / "q_curve.csv").string(), res.t_hat);
                std::cout << "rejected " << res.rejected.size() << " of " << z.z.size() << " at t_hat=" << res.t_hat.t_hat
                          << '\n';
            } else {
                const std::vector<double> p = z_to_pvalue(z.z);
                std::vector<RejectionSet> sets{res.rejected, bh(p, alpha), adaptive_bh(p, alpha, res.fitted.pi),
                                               sun_cai(marginal_locfdr(z.z, res.fitted), alpha)};
                const std::vector<std::string> names{"T" + std::to_string(N), "BH", "ABH", "SC"};
                for (std::size_t k = 0; k < sets.size(); ++k) {
                    write_rejection_list(dir / ("rejected_" + names[k] + ".tsv"), sets[k], z.ids);
                }
                const Eigen::MatrixXi common = common_rejections(sets);
                std::ofstream out(dir / "common.csv");
                out << "procedure";
                for (const auto& n : names) out << ',' << n;
                out << '\n';
                for (std::size_t a = 0; a < names.size(); ++a) {
                    out << names[a];
                    for (std::size_t b = 0; b < names.size(); ++b) {
                        out << ',' << common(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    }
                    out << '\n';
                }
                for (std::size_t k = 0; k < sets.size(); ++k) {
                    manifest["rejections_" + names[k]] = sets[k].size();
                    std::cout << names[k] << ": " << sets[k].size() << '\n';
                }
            }
            write_json(dir / "manifest.json", manifest);
        } else if (*c_prep) {
            fs::create_directories(out_dir);
            GwasInput in;
            if (!sumstats.empty()) {
                if (sigma_src.ld_path.empty()) throw ArgumentError("--sumstats needs --ld");
                const SummaryTable t = read_summary_tsv(sumstats);
                in = gwas_from_summary(t.beta, t.se, load_ld(sigma_src.ld_path), t.ids);
            } else if (!design.empty()) {
                if (phenotype.empty()) throw ArgumentError("--design needs --phenotype");
                DesignTable d = read_design_csv(design);
                const std::vector<double> y = read_phenotype(phenotype);
                in = gwas_from_design(y, std::move(d.X), impute, d.columns);
            } else {
                throw ArgumentError("give --sumstats or --design");
            }
            const fs::path dir(out_dir);
            write_z_tsv((dir / "z.tsv").string(), ZTable{in.ids, in.z});
            save_ld_dense_csv((dir / "ld.csv").string(), in.sigma);
            write_json(dir / "manifest.json", {{"provenance", to_string(in.provenance)}, {"K", in.z.size()}});
        } else if (*c_exp) {
            ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw ArgumentError("--set expects KEY=VALUE, got " + kv);
                cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
            if (app.get_option("--workers")->count() > 0) cfg.workers = workers;
            fs::create_directories(out_dir);
            const ExperimentResult res = run_experiment(cfg);
            const fs::path dir(out_dir);
            std::ofstream table(dir / "table.csv");
            res.write_csv(table);
            res.write_csv(std::cout);
            write_json(dir / "manifest.json", res.manifest());
        } else if (*c_fig) {
            const CovarianceMatrix sigma = sigma_src.load(0);
            const auto points = figure1_data(params_opt.params, sigma, N_max, seed);
            std::ofstream out(out_path);
            if (!out) throw ArgumentError("cannot write " + out_path);
            write_figure1_csv(out, points);
        } else if (*c_sim) {
            const CovarianceMatrix sigma = sigma_src.load(0);
            params_opt.params.validate();
            Rng rng = SeedStream{seed}.replicate(0);
            const HypothesisStates h = sample_states(sigma.size(), params_opt.params.pi, rng);
            const ZVector z = sample_zscores(h, params_opt.params, sigma, rng);
            fs::create_directories(out_dir);
            const fs::path dir(out_dir);
            write_z_tsv((dir / "z.tsv").string(), ZTable{default_ids(z.size()), z});
            if (sigma.storage() == Storage::Banded) {
                save_ld_banded((dir / "ld.bin").string(), sigma);
            } else {
                save_ld_dense_csv((dir / "ld.csv").string(), sigma);
            }
            std::ofstream truth(dir / "truth.tsv");
            truth << "id\th\n";
            for (std::size_t i = 0; i < h.size(); ++i) truth << i + 1 << '\t' << int(h.h[i]) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
