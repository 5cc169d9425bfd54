#include <catch_amalgamated.hpp>

#include <cmath>

#include "locfdrn/errors.hpp"
#include "locfdrn/pipeline.hpp"
#include "test_support.hpp"

using namespace locfdrn;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_design(int n, int p, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(n, p);
    for (int r = 0; r < n; ++r) {
        const double shared = g(rng);
        for (int c = 0; c < p; ++c) X(r, c) = 0.5 * shared + g(rng) + 0.3 * c;
    }
    return X;
}

std::vector<double> response(const Eigen::MatrixXd& X, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> y(std::size_t(X.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) y[std::size_t(r)] = 0.8 * X(r, 0) - 0.4 * X(r, 2) + g(rng);
    return y;
}

}  // namespace

TEST_CASE("z-scores from summary statistics") {
    const auto ld = build_covariance(CovarianceSpec::ar1(4, 0.3));
    const std::vector<double> se{0.5, 1.0, 2.0, 0.1};
    auto in = gwas_from_summary(se, se, ld);
    for (double z : in.z) CHECK(z == 1.0);
    CHECK(in.ids == std::vector<std::string>{"1", "2", "3", "4"});
    CHECK(in.provenance == Provenance::SummaryStats);
    const std::vector<double> zero(4, 0.0);
    for (double z : gwas_from_summary(zero, se, ld).z) CHECK(z == 0.0);

    Rng rng(1);
    const auto beta = testing::random_z(4, rng);
    in = gwas_from_summary(beta, se, ld, {"a", "b", "c", "d"});
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(in.z[i] - beta[i] / se[i]) <= 1e-15);
    CHECK(in.ids[2] == "c");

    const std::vector<double> bad_se{0.5, 0.0, 1.0, 1.0};
    CHECK_THROWS_AS(gwas_from_summary(beta, bad_se, ld), ArgumentError);
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(gwas_from_summary(three, three, ld), ArgumentError);
}

TEST_CASE("design path matches textbook normal equations") {
    const int n = 50, p = 3;
    const Eigen::MatrixXd X = random_design(n, p, 2);
    const auto y = response(X, 3);
    const auto in = gwas_from_design(y, X, false);

    // Independent computation with explicit inverses.
    Eigen::MatrixXd Xs = X;
    Eigen::VectorXd ys = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    ys = (ys.array() - ys.mean()).matrix();
    ys /= std::sqrt(ys.squaredNorm() / (n - 1));
    for (int c = 0; c < p; ++c) {
        Xs.col(c).array() -= Xs.col(c).mean();
        Xs.col(c) /= std::sqrt(Xs.col(c).squaredNorm() / (n - 1));
    }
    const Eigen::MatrixXd inv = (Xs.transpose() * Xs).inverse();
    const Eigen::VectorXd beta = inv * Xs.transpose() * ys;
    const double s2 = (ys - Xs * beta).squaredNorm() / (n - p);
    for (int j = 0; j < p; ++j) {
        CHECK(in.z[std::size_t(j)] == Approx(beta(j) / std::sqrt(s2 * inv(j, j))).epsilon(1e-10));
        for (int k = 0; k < p; ++k) {
            CHECK(in.sigma(std::size_t(j), std::size_t(k)) ==
                  Approx(inv(j, k) / std::sqrt(inv(j, j) * inv(k, k))).epsilon(1e-10).margin(1e-12));
        }
        CHECK(in.sigma(std::size_t(j), std::size_t(j)) == 1.0);
    }
    CHECK(in.provenance == Provenance::SmallScaleOls);

    // Rescaling y leaves z unchanged.
    auto y10 = y;
    for (auto& v : y10) v *= 10.0;
    const auto scaled = gwas_from_design(y10, X, false);
    for (int j = 0; j < p; ++j) CHECK(scaled.z[std::size_t(j)] == Approx(in.z[std::size_t(j)]).epsilon(1e-12));
}

TEST_CASE("orthogonal columns give identity correlation") {
    // Columns of a Hadamard matrix without the constant column.
    Eigen::MatrixXd X(8, 3);
    X << 1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 1, 1, 1, -1, -1, 1, 1, 1, -1, 1, -1, -1, -1;
    REQUIRE((X.transpose() * X - 8.0 * Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
    const std::vector<double> y{0.3, -1.2, 2.2, 0.1, -0.4, 1.7, -0.9, 0.5};
    const auto in = gwas_from_design(y, X, false);
    CHECK((in.sigma.to_dense() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd ys = Eigen::Map<const Eigen::VectorXd>(y.data(), 8);
    ys = (ys.array() - ys.mean()).matrix();
    ys /= std::sqrt(ys.squaredNorm() / 7.0);
    const Eigen::MatrixXd Q = X / std::sqrt(8.0);  // orthonormal columns
    const Eigen::VectorXd qty = Q.transpose() * ys;
    const Eigen::VectorXd beta = (X / std::sqrt(8.0 / 7.0)).transpose() * ys / 7.0;
    const double sigma_hat = std::sqrt((ys - (X / std::sqrt(8.0 / 7.0)) * beta).squaredNorm() / 5.0);
    for (int j = 0; j < 3; ++j) CHECK(in.z[std::size_t(j)] == Approx(qty(j) / sigma_hat).epsilon(1e-12));
}

TEST_CASE("missing design values") {
    Eigen::MatrixXd X = random_design(30, 2, 5);
    const auto y = response(Eigen::MatrixXd::Zero(30, 3) + Eigen::MatrixXd::Ones(30, 3), 6);
    Eigen::MatrixXd filled = X;
    X(3, 1) = NAN;
    X(7, 1) = NAN;
    double sum = 0.0;
    for (int r = 0; r < 30; ++r) {
        if (r != 3 && r != 7) sum += X(r, 1);
    }
    filled(3, 1) = filled(7, 1) = sum / 28.0;
    CHECK_THROWS_AS(gwas_from_design(y, X, false), ArgumentError);
    const auto a = gwas_from_design(y, X, true);
    const auto b = gwas_from_design(y, filled, false);
    CHECK(a.z == b.z);
}

TEST_CASE("design guards") {
    const Eigen::MatrixXd X = random_design(5, 5, 1);
    const std::vector<double> y(5, 1.0);
    CHECK_THROWS_AS(gwas_from_design(y, X, false), ArgumentError);
    Eigen::MatrixXd Xc = random_design(20, 2, 1);
    Xc.col(1).setConstant(3.0);
    auto yv = response(random_design(20, 3, 2), 2);
    CHECK_THROWS_AS(gwas_from_design(yv, Xc, false), ArgumentError);
    const Eigen::MatrixXd wide = Eigen::MatrixXd::Zero(2100, 2001);
    CHECK_THROWS_AS(gwas_from_design(std::vector<double>(2100, 0.0), wide, false), RefusalError);
    CHECK_THROWS_AS(gwas_from_design(std::vector<double>(19, 0.0), random_design(20, 2, 1), false), ArgumentError);
}

TEST_CASE("algorithm 1 end to end") {
    const TwoGroupParams truth{0.3, 0.0, 4.0};
    const auto sigma = build_covariance(CovarianceSpec::ar1(400, 0.5));
    Rng rng = SeedStream{3}.replicate(0);
    const auto h = sample_states(400, truth.pi, rng);
    const auto z = sample_zscores(h, truth, sigma, rng);
    EstimationConfig cfg;
    const auto res = algorithm1(z, sigma, 1, 0.05, 20, cfg, 11);
    CHECK(res.T.N == 1);
    CHECK(res.t_hat.B == 20);
    for (std::size_t i = 0; i < 400; ++i) {
        const bool rejected = std::binary_search(res.rejected.rejected.begin(), res.rejected.rejected.end(), i + 1);
        CHECK(rejected == (res.T[i] <= res.t_hat.t_hat));
    }
    CHECK(res.manifest["seed"] == 11);
    CHECK(res.manifest["N"] == 1);
    CHECK(res.manifest["estimation"]["subset"] == "corr:0.05");

    const auto again = algorithm1(z, sigma, 1, 0.05, 20, cfg, res.manifest["seed"].get<std::uint64_t>());
    CHECK(again.rejected.rejected == res.rejected.rejected);
    CHECK(again.T.values == res.T.values);
    CHECK(again.manifest == res.manifest);

    const auto tiny = algorithm1(std::span(z).first(100), build_covariance(CovarianceSpec::ar1(100, 0.5)), 1, 1e-6,
                                 10, cfg, 1);
    CHECK(tiny.rejected.rejected.empty());
    CHECK(tiny.t_hat.empty_rejection);
}

TEST_CASE("oracle parameters under independence reproduce the quadrature rule") {
    const TwoGroupParams truth{0.3, 0.0, 4.0};
    const auto sigma = CovarianceMatrix::identity(1000);
    Rng rng(9);
    const auto h = sample_states(1000, truth.pi, rng);
    const auto z = sample_zscores(h, truth, sigma, rng);
    FitResult fit;
    fit.subset.resize(1000);
    for (std::size_t i = 0; i < 1000; ++i) fit.subset[i] = i + 1;
    fit.em.params = truth;
    fit.em.trace.push_back({0, truth, 0.0, true, false, {}});
    const auto res = algorithm1_from_fit(z, sigma, fit, 0, 0.05, 300, 4);
    const double tq = quadrature_threshold_n0(truth, 0.05).t_hat;
    CHECK(std::abs(res.t_hat.t_hat - tq) <= 0.005);
    const auto ref = tn_rule(marginal_locfdr(z, truth), tq);
    std::vector<std::size_t> diff;
    std::set_symmetric_difference(ref.rejected.begin(), ref.rejected.end(), res.rejected.rejected.begin(),
                                  res.rejected.rejected.end(), std::back_inserter(diff));
    CHECK(diff.size() <= 3);
}

TEST_CASE("step errors are labelled") {
    const auto sigma = build_covariance(CovarianceSpec::ar1(20, 0.5));
    const std::vector<double> z(20, 0.5);
    EstimationConfig cfg;
    cfg.subset = SubsetSpec::stride(1, 25);
    try {
        (void)algorithm1(z, sigma, 1, 0.05, 5, cfg, 1);
        FAIL("expected an error");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
    cfg.subset = SubsetSpec::stride(1, 1);
    try {
        (void)algorithm1(z, sigma, 13, 0.05, 5, cfg, 1);
        FAIL("expected an error");
    } catch (const RefusalError& e) {
        CHECK(std::string(e.what()).find("step 4") != std::string::npos);
    }
}
