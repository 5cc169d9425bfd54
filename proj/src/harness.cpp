#include "locfdrn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "locfdrn/errors.hpp"
#include "locfdrn/parallel.hpp"
#include "locfdrn/pipeline.hpp"

namespace locfdrn {

namespace {

constexpr std::uint64_t kCalibrationStream = 11;
constexpr std::uint64_t kEvaluationStream = 12;
constexpr std::uint64_t kPipelineStream = 13;
constexpr std::uint64_t kBootstrapStream = 14;
constexpr std::uint64_t kFigureStream = 15;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) throw ArgumentError("config key '" + key + "': not a number: " + value);
    return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw ArgumentError("config key '" + key + "': not a non-negative integer: " + value);
    }
    return v;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Totals {
    double V = 0.0;
    double R = 0.0;
    double fdp = 0.0;
    double tp = 0.0;
};

}  // namespace

ReplicateOutcome evaluate_replicate(const RejectionSet& rejected, const HypothesisStates& h,
                                    std::uint64_t replicate_seed) {
    ReplicateOutcome out;
    out.replicate_seed = replicate_seed;
    for (std::size_t i : rejected.rejected) {
        if (i < 1 || i > h.size()) throw ArgumentError("rejected index " + std::to_string(i) + " out of range");
        if (h.h[i - 1]) {
            ++out.TP;
        } else {
            ++out.V;
        }
    }
    out.R = rejected.rejected.size();
    return out;
}

ErrorReport aggregate(std::span<const ReplicateOutcome> outcomes, std::size_t boot, std::uint64_t seed) {
    if (outcomes.empty()) throw ArgumentError("aggregate needs at least one outcome");
    const std::size_t n = outcomes.size();
    const auto totals = [&](auto index) {
        Totals t;
        for (std::size_t k = 0; k < n; ++k) {
            const ReplicateOutcome& o = outcomes[index(k)];
            t.V += static_cast<double>(o.V);
            t.R += static_cast<double>(o.R);
            t.fdp += o.fdp();
            t.tp += static_cast<double>(o.TP);
        }
        return t;
    };
    const double dn = static_cast<double>(n);
    const Totals all = totals([](std::size_t k) { return k; });

    ErrorReport rep;
    rep.n_replicates = n;
    if (all.R > 0.0) rep.mfdr = all.V / all.R;
    rep.fdr = all.fdp / dn;
    rep.tp_mean = all.tp / dn;
    std::vector<double> fdps(n);
    for (std::size_t k = 0; k < n; ++k) fdps[k] = outcomes[k].fdp();
    rep.fdp_sd = sample_sd(fdps);

    if (boot >= 2) {
        Rng rng = SeedStream{seed}.replicate(0);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> idx(n);
        std::vector<double> m(boot), f(boot), tp(boot);
        for (std::size_t b = 0; b < boot; ++b) {
            for (auto& k : idx) k = pick(rng);
            const Totals t = totals([&](std::size_t k) { return idx[k]; });
            m[b] = t.R > 0.0 ? t.V / t.R : 0.0;
            f[b] = t.fdp / dn;
            tp[b] = t.tp / dn;
        }
        if (rep.mfdr) rep.se_mfdr = sample_sd(m);
        rep.se_fdr = sample_sd(f);
        rep.se_tp = sample_sd(tp);
    }
    return rep;
}

std::string to_string(Procedure procedure) {
    switch (procedure) {
        case Procedure::TN: return "TN";
        case Procedure::BH: return "BH";
        case Procedure::ABH: return "ABH";
        case Procedure::SC: return "SC";
    }
    return "?";
}

Procedure parse_procedure(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "tn") return Procedure::TN;
    if (t == "bh") return Procedure::BH;
    if (t == "abh") return Procedure::ABH;
    if (t == "sc" || t == "suncai") return Procedure::SC;
    throw ArgumentError("unknown procedure '" + text + "' (expected tn, bh, abh, sc)");
}

Sampling ExperimentConfig::effective_sampling() const {
    if (sampling) return *sampling;
    return mode == ExperimentMode::Oracle ? Sampling::Joint : Sampling::Independent;
}

std::string ExperimentConfig::label() const { return name.empty() ? covariance.describe() : name; }

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "name") {
        name = value;
    } else if (key == "covariance") {
        covariance = CovarianceSpec::parse(value, covariance.K);
    } else if (key == "K") {
        covariance.K = to_uint(key, value);
    } else if (key == "pi") {
        params.pi = to_double(key, value);
    } else if (key == "b") {
        params.b = to_double(key, value);
    } else if (key == "tau2") {
        params.tau_sq = to_double(key, value);
    } else if (key == "tau") {
        const double tau = to_double(key, value);
        params.tau_sq = tau * tau;
    } else if (key == "mode") {
        if (value == "oracle") {
            mode = ExperimentMode::Oracle;
        } else if (value == "data_driven" || value == "data-driven") {
            mode = ExperimentMode::DataDriven;
        } else {
            throw ArgumentError("mode must be oracle or data_driven");
        }
    } else if (key == "procedures") {
        procedures.clear();
        for (const auto& p : split_list(value)) procedures.push_back(parse_procedure(p));
        if (procedures.empty()) throw ArgumentError("procedures list is empty");
    } else if (key == "N") {
        Ns.clear();
        for (const auto& n : split_list(value)) Ns.push_back(to_uint(key, n));
        if (Ns.empty()) throw ArgumentError("N list is empty");
    } else if (key == "alpha") {
        alpha = to_double(key, value);
    } else if (key == "replicates") {
        replicates = to_uint(key, value);
    } else if (key == "B") {
        B = to_uint(key, value);
    } else if (key == "calib_B") {
        calib_B = to_uint(key, value);
    } else if (key == "sampling") {
        sampling = parse_sampling(value);
    } else if (key == "subset") {
        estimation.subset = SubsetSpec::parse(value);
    } else if (key == "em") {
        if (value == "full") {
            estimation.pi_fixed.reset();
        } else if (value.rfind("plugin:", 0) == 0) {
            estimation.pi_fixed = to_double(key, value.substr(7));
        } else {
            throw ArgumentError("em must be full or plugin:PI");
        }
    } else if (key == "restarts") {
        estimation.restarts = to_uint(key, value);
    } else if (key == "seed") {
        seed = to_uint(key, value);
    } else if (key == "boot") {
        boot = to_uint(key, value);
    } else if (key == "workers") {
        workers = static_cast<unsigned>(to_uint(key, value));
    } else if (key == "engine") {
        engine = parse_engine(value);
    } else if (key == "max_half_width") {
        max_half_width = to_uint(key, value);
    } else {
        throw ArgumentError("unknown config key '" + key + "'");
    }
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ArgumentError("config line " + std::to_string(n) + ": expected key = value");
        with_context("config line " + std::to_string(n), [&] {
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            return 0;
        });
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config " + path);
    return with_context(path, [&] { return parse(in); });
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json procs = nlohmann::json::array();
    for (Procedure p : procedures) procs.push_back(to_string(p));
    nlohmann::json j{{"name", label()},
                     {"covariance", covariance.describe()},
                     {"K", covariance.K},
                     {"params", locfdrn::to_json(params)},
                     {"mode", mode == ExperimentMode::Oracle ? "oracle" : "data_driven"},
                     {"procedures", procs},
                     {"N", Ns},
                     {"alpha", alpha},
                     {"replicates", replicates},
                     {"seed", seed},
                     {"boot", boot},
                     {"sampling", locfdrn::to_string(effective_sampling())},
                     {"engine", locfdrn::to_string(engine)},
                     {"max_half_width", max_half_width}};
    if (mode == ExperimentMode::Oracle) {
        j["calib_B"] = calib_B;
    } else {
        j["B"] = B;
        j["subset"] = estimation.subset.describe();
        j["em"] = estimation.pi_fixed ? "plugin:" + std::to_string(*estimation.pi_fixed) : "full";
        j["restarts"] = estimation.restarts;
    }
    return j;
}

const ExperimentRow& ExperimentResult::row(Procedure procedure, std::optional<std::size_t> N) const {
    for (const auto& r : rows) {
        if (r.procedure == procedure && (procedure != Procedure::TN || r.N == N)) return r;
    }
    throw ArgumentError("no row for procedure " + to_string(procedure));
}

void ExperimentResult::write_csv(std::ostream& out) const {
    out << "setting,procedure,N,cutoff,mFDR,se_mFDR,FDR,se_FDR,TP,se_TP,FDP_sd,replicates\n";
    out << std::setprecision(6);
    for (const auto& r : rows) {
        out << r.setting << ',' << to_string(r.procedure) << ',';
        if (r.N) out << *r.N;
        out << ',';
        if (r.cutoff) out << *r.cutoff;
        out << ',';
        if (r.report.mfdr) out << *r.report.mfdr;
        out << ',' << r.report.se_mfdr << ',' << r.report.fdr << ',' << r.report.se_fdr << ',' << r.report.tp_mean
            << ',' << r.report.se_tp << ',' << r.report.fdp_sd << ',' << r.report.n_replicates << '\n';
    }
}

nlohmann::json ExperimentResult::manifest() const {
    nlohmann::json j;
    j["config"] = config.to_json();
    j["library_version"] = "0.1.0";
    j["compiler"] = __VERSION__;
    j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    j["streams"] = {{"calibration", kCalibrationStream},
                    {"evaluation", kEvaluationStream},
                    {"pipeline", kPipelineStream},
                    {"bootstrap", kBootstrapStream}};
    nlohmann::json cut = nlohmann::json::array();
    for (const auto& c : oracle_cutoffs) {
        cut.push_back({{"N", c.N},
                       {"t_hat", c.t_hat},
                       {"B", c.B},
                       {"method", to_string(c.method)},
                       {"empty_rejection", c.empty_rejection}});
    }
    j["oracle_cutoffs"] = cut;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row{{"procedure", to_string(r.procedure)},
                           {"fdr", r.report.fdr},
                           {"tp", r.report.tp_mean},
                           {"mfdr", r.report.mfdr ? nlohmann::json(*r.report.mfdr) : nlohmann::json()},
                           {"mfdr_absent", !r.report.mfdr.has_value()}};
        if (r.N) row["N"] = *r.N;
        if (r.cutoff) row["cutoff"] = *r.cutoff;
        rs.push_back(row);
    }
    j["rows"] = rs;
    j["wall_seconds"] = wall_seconds;
    return j;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    config.params.validate();
    if (config.replicates < 1) throw ArgumentError("replicates must be >= 1");
    if (config.procedures.empty()) throw ArgumentError("no procedures requested");
    const CovarianceMatrix sigma = build_covariance(config.covariance);
    (void)sigma.cholesky();
    const std::size_t K = sigma.size();
    const Sampling sampling = config.effective_sampling();
    const bool oracle = config.mode == ExperimentMode::Oracle;
    const SeedStream root{config.seed};

    ExperimentResult result;
    result.config = config;

    const bool want_tn =
        std::find(config.procedures.begin(), config.procedures.end(), Procedure::TN) != config.procedures.end();
    const std::vector<std::size_t> Ns = want_tn ? config.Ns : std::vector<std::size_t>{};

    std::vector<std::optional<WindowPlan>> plans(Ns.size());
    if (oracle) {
        McOptions mopts;
        mopts.engine = config.engine;
        mopts.workers = config.workers;
        mopts.max_half_width = config.max_half_width;
        mopts.max_curve_points = 0;
        for (std::size_t k = 0; k < Ns.size(); ++k) {
            result.oracle_cutoffs.push_back(with_context("calibrating N=" + std::to_string(Ns[k]), [&] {
                return mc_threshold(config.params, sigma, Ns[k], config.alpha, config.calib_B,
                                    root.child(kCalibrationStream).child(Ns[k]), sampling, mopts);
            }));
            if (config.engine == Engine::Fast) plans[k].emplace(sigma, Ns[k], config.max_half_width);
        }
    }

    // Row layout: TN per N first, then the baselines in the order requested.
    std::vector<ExperimentRow> rows;
    for (std::size_t N : Ns) {
        ExperimentRow r;
        r.procedure = Procedure::TN;
        r.N = N;
        rows.push_back(std::move(r));
    }
    for (Procedure p : config.procedures) {
        if (p == Procedure::TN) continue;
        ExperimentRow r;
        r.procedure = p;
        rows.push_back(std::move(r));
    }
    for (auto& r : rows) {
        r.setting = config.label();
        r.outcomes.resize(config.replicates);
    }
    std::vector<std::vector<double>> cutoffs(Ns.size(), std::vector<double>(config.replicates, 0.0));

    const LocFdrOptions lopts{config.max_half_width, 1};
    PipelineOptions popts;
    popts.sampling = sampling;
    popts.engine = config.engine;
    popts.workers = 1;
    popts.max_half_width = config.max_half_width;

    parallel_for(config.replicates, config.workers, [&](std::size_t rep) {
        const SeedStream stream = root.child(kEvaluationStream).child(rep);
        with_context("replicate " + std::to_string(rep) + " (seed " + std::to_string(stream.seed) + ")", [&] {
            Rng rng = stream.replicate(0);
            const HypothesisStates h = sample_states(K, config.params.pi, rng);
            const ZVector z = sample_zscores(h, config.params, sigma, rng);

            TwoGroupParams used = config.params;
            std::optional<FitResult> fit;
            const std::uint64_t pipe_seed = root.child(kPipelineStream).child(rep).seed;
            if (!oracle) {
                fit = fit_parameters(z, sigma, config.estimation, SeedStream{pipe_seed}.child(1).seed);
                used = fit->em.params;
            }
            std::size_t row = 0;
            for (std::size_t k = 0; k < Ns.size(); ++k, ++row) {
                RejectionSet d;
                if (oracle) {
                    const LocFdrVector T = plans[k] ? locfdr_n_fast(z, *plans[k], used, lopts)
                                                    : compute_locfdr(config.engine, z, sigma, used, Ns[k], lopts);
                    d = tn_rule(T, result.oracle_cutoffs[k].t_hat);
                } else {
                    PipelineResult pr =
                        algorithm1_from_fit(z, sigma, *fit, Ns[k], config.alpha, config.B, pipe_seed, popts);
                    cutoffs[k][rep] = pr.t_hat.t_hat;
                    d = std::move(pr.rejected);
                }
                rows[row].outcomes[rep] = evaluate_replicate(d, h, stream.seed);
            }
            std::optional<std::vector<double>> p;
            for (; row < rows.size(); ++row) {
                RejectionSet d;
                switch (rows[row].procedure) {
                    case Procedure::BH:
                        if (!p) p = z_to_pvalue(z);
                        d = bh(*p, config.alpha);
                        break;
                    case Procedure::ABH:
                        if (!p) p = z_to_pvalue(z);
                        d = adaptive_bh(*p, config.alpha, used.pi);
                        break;
                    case Procedure::SC:
                        d = sun_cai(marginal_locfdr(z, used), config.alpha);
                        break;
                    case Procedure::TN:
                        break;
                }
                rows[row].outcomes[rep] = evaluate_replicate(d, h, stream.seed);
            }
            return 0;
        });
    });

    for (std::size_t r = 0; r < rows.size(); ++r) {
        rows[r].report = aggregate(rows[r].outcomes, config.boot, root.child(kBootstrapStream).child(r).seed);
        if (r < Ns.size()) {
            if (oracle) {
                rows[r].cutoff = result.oracle_cutoffs[r].t_hat;
            } else {
                double mean = 0.0;
                for (double c : cutoffs[r]) mean += c;
                rows[r].cutoff = mean / static_cast<double>(config.replicates);
            }
        }
    }
    result.rows = std::move(rows);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<Figure1Point> figure1_data(const TwoGroupParams& params, const CovarianceMatrix& sigma,
                                       std::size_t N_max, std::uint64_t seed, Engine engine) {
    params.validate();
    Rng rng = SeedStream{seed}.child(kFigureStream).replicate(0);
    const HypothesisStates h = sample_states(sigma.size(), params.pi, rng);
    const ZVector z = sample_zscores(h, params, sigma, rng);
    std::vector<Figure1Point> out;
    out.reserve(sigma.size() * (N_max + 1));
    for (std::size_t N = 0; N <= N_max; ++N) {
        const LocFdrVector T = compute_locfdr(engine, z, sigma, params, N);
        for (std::size_t i = 0; i < T.size(); ++i) out.push_back({i + 1, N, T[i]});
    }
    return out;
}

void write_figure1_csv(std::ostream& out, std::span<const Figure1Point> points) {
    out << "i,N,T\n" << std::setprecision(17);
    for (const auto& p : points) out << p.i << ',' << p.N << ',' << p.T << '\n';
}

}  // namespace locfdrn
