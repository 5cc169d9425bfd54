#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locfdrn/covariance.hpp"
#include "locfdrn/estimate.hpp"
#include "locfdrn/locfdr.hpp"
#include "locfdrn/procedures.hpp"
#include "locfdrn/threshold.hpp"
#include "locfdrn/two_group.hpp"

namespace locfdrn {

struct ReplicateOutcome {
    std::size_t V = 0;   // false rejections
    std::size_t R = 0;   // rejections
    std::size_t TP = 0;  // true rejections
    std::uint64_t replicate_seed = 0;

    [[nodiscard]] double fdp() const noexcept { return R == 0 ? 0.0 : static_cast<double>(V) / static_cast<double>(R); }
};

[[nodiscard]] ReplicateOutcome evaluate_replicate(const RejectionSet& rejected, const HypothesisStates& h,
                                                  std::uint64_t replicate_seed = 0);

struct ErrorReport {
    std::optional<double> mfdr;  // sum V / sum R; absent when no replicate rejected anything
    double fdr = 0.0;            // mean V / max(R, 1)
    double tp_mean = 0.0;
    double se_mfdr = 0.0;
    double se_fdr = 0.0;
    double se_tp = 0.0;
    double fdp_sd = 0.0;  // sample s.d. of the per-replicate FDP
    std::size_t n_replicates = 0;
};

/// Bootstrap standard errors resample whole replicates `boot` times.
[[nodiscard]] ErrorReport aggregate(std::span<const ReplicateOutcome> outcomes, std::size_t boot = 1000,
                                    std::uint64_t seed = 0);

enum class Procedure { TN, BH, ABH, SC };

[[nodiscard]] std::string to_string(Procedure procedure);
[[nodiscard]] Procedure parse_procedure(const std::string& text);

enum class ExperimentMode { Oracle, DataDriven };

/// One simulation setting. Text form: one `key = value` per line, `#` comments.
///   name         label used in the table (default: covariance description)
///   covariance   ar1:RHO | banded1:RHO | longrange:H | equi:RHO
///   K, pi, b, tau2 (or tau)
///   mode         oracle | data_driven
///   procedures   comma list of tn, bh, abh, sc
///   N            comma list of half-widths
///   alpha, replicates, seed, boot, workers
///   B            Monte-Carlo replicates per data-driven cutoff
///   calib_B      replicates for the shared oracle cutoffs
///   sampling     independent | joint (default: joint for oracle, independent for data_driven)
///   subset       stride:S:O | corr:EPS (data_driven)
///   em           full | plugin:PI (data_driven)
///   restarts     EM random restarts (data_driven)
///   engine       fast | naive
struct ExperimentConfig {
    std::string name;
    CovarianceSpec covariance = CovarianceSpec::ar1(1000, 0.8);
    TwoGroupParams params{0.3, 0.0, 4.0};
    ExperimentMode mode = ExperimentMode::Oracle;
    std::vector<Procedure> procedures{Procedure::TN};
    std::vector<std::size_t> Ns{0, 1, 2};
    double alpha = 0.05;
    std::size_t replicates = 500;
    std::size_t B = 50;
    std::size_t calib_B = 500;
    std::optional<Sampling> sampling;
    EstimationConfig estimation;
    std::uint64_t seed = 1;
    std::size_t boot = 1000;
    unsigned workers = 1;
    Engine engine = Engine::Fast;
    std::size_t max_half_width = kDefaultMaxHalfWidth;

    [[nodiscard]] Sampling effective_sampling() const;
    [[nodiscard]] std::string label() const;

    static ExperimentConfig parse(std::istream& in);
    static ExperimentConfig load(const std::string& path);
    /// Sets one key; throws ArgumentError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    [[nodiscard]] nlohmann::json to_json() const;
};

struct ExperimentRow {
    std::string setting;
    Procedure procedure = Procedure::TN;
    std::optional<std::size_t> N;  // TN only
    std::optional<double> cutoff;  // oracle: shared cutoff; data-driven: mean of per-replicate cutoffs
    ErrorReport report;
    std::vector<ReplicateOutcome> outcomes;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ExperimentRow> rows;
    std::vector<ThresholdEstimate> oracle_cutoffs;  // oracle mode, one per N
    double wall_seconds = 0.0;

    [[nodiscard]] const ExperimentRow& row(Procedure procedure, std::optional<std::size_t> N = std::nullopt) const;
    /// Table in the row/column layout of the simulation tables.
    void write_csv(std::ostream& out) const;
    /// Config echo, seeds, cutoffs, versions and wall time.
    [[nodiscard]] nlohmann::json manifest() const;
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config);

struct Figure1Point {
    std::size_t i = 0;  // 1-based
    std::size_t N = 0;
    double T = 0.0;
};

/// One joint draw of (h, Z) and T_{i,N} for N = 0..N_max, in long format.
[[nodiscard]] std::vector<Figure1Point> figure1_data(const TwoGroupParams& params, const CovarianceMatrix& sigma,
                                                     std::size_t N_max, std::uint64_t seed,
                                                     Engine engine = Engine::Fast);
void write_figure1_csv(std::ostream& out, std::span<const Figure1Point> points);

}  // namespace locfdrn
