#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "plab/collapse.hpp"
#include "plab/interventions.hpp"

#include <cmath>
#include <cstdio>

using plab::Matrix;
using plab::RngStream;
using namespace plab::interventions;

namespace {

plab::nn::MlpModel seeded_model(std::uint64_t seed) {
    plab::nn::MlpModel m(6, {5, 4}, 3);
    RngStream rng(seed);
    m.init_weights(rng);
    return m;
}

} // namespace

TEST_CASE("lambda 1 with no noise is the identity") {
    const auto m = seeded_model(1);
    const auto out = shrink_and_perturb(m, ShrinkPerturbParams{1.0, 0.0, 9});
    CHECK(out == m);
    CHECK(out.parameter_hash() == m.parameter_hash());
}

TEST_CASE("lambda 0 with no noise zeroes every parameter") {
    const auto m = seeded_model(2);
    const auto out = shrink_and_perturb(m, ShrinkPerturbParams{0.0, 0.0, 9});
    for (std::size_t k = 0; k < out.num_layers(); ++k) {
        CHECK(plab::max_abs(out.layer(k).weight) == 0.0);
        for (double v : out.layer(k).bias) CHECK(v == 0.0);
    }
}

TEST_CASE("default parameters reproduce the moment predictions") {
    // big layer with a visibly nonzero mean so both moment checks bite
    plab::nn::MlpModel m(100, {200}, 2);
    RngStream rng(3);
    for (std::size_t i = 0; i < m.layer(0).weight.size(); ++i)
        m.layer(0).weight.data()[i] = rng.normal(0.5, 0.1);

    double mean0 = 0.0, var0 = 0.0;
    const std::size_t n = m.layer(0).weight.size(); // 20000 params, fan_in 100
    for (std::size_t i = 0; i < n; ++i) mean0 += m.layer(0).weight.data()[i];
    mean0 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = m.layer(0).weight.data()[i] - mean0;
        var0 += d * d;
    }
    var0 /= static_cast<double>(n);

    const ShrinkPerturbParams p{0.6, 0.01, 11};
    const auto out = shrink_and_perturb(m, p);

    double mean1 = 0.0, var1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean1 += out.layer(0).weight.data()[i];
    mean1 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = out.layer(0).weight.data()[i] - mean1;
        var1 += d * d;
    }
    var1 /= static_cast<double>(n);

    const double expected_mean = 0.6 * mean0;
    const double expected_var = 0.36 * var0 + 0.0001 * (2.0 / 100.0);
    CHECK(std::abs(mean1 - expected_mean) <= 0.05 * std::abs(expected_mean));
    CHECK(std::abs(var1 - expected_var) <= 0.05 * expected_var);
}

TEST_CASE("shrink_and_perturb is deterministic and pure") {
    const auto m = seeded_model(4);
    const auto h_before = m.parameter_hash();
    const ShrinkPerturbParams p{0.6, 0.01, 21};
    const auto a = shrink_and_perturb(m, p);
    const auto b = shrink_and_perturb(m, p);
    CHECK(a == b);
    CHECK(m.parameter_hash() == h_before);

    const auto c = shrink_and_perturb(m, ShrinkPerturbParams{0.6, 0.01, 22});
    CHECK(a.parameter_hash() != c.parameter_hash());
}

TEST_CASE("shrink_and_perturb commutes with serialization") {
    const auto m = seeded_model(5);
    const ShrinkPerturbParams p{0.6, 0.01, 31};

    const auto perturbed_then_saved = shrink_and_perturb(m, p);
    perturbed_then_saved.save("plab_sp_a.bin");

    m.save("plab_sp_b.bin");
    const auto saved_then_perturbed = shrink_and_perturb(plab::nn::MlpModel::load("plab_sp_b.bin"), p);

    CHECK(plab::nn::MlpModel::load("plab_sp_a.bin") == saved_then_perturbed);
    std::remove("plab_sp_a.bin");
    std::remove("plab_sp_b.bin");
}

TEST_CASE("shrink_and_perturb validates its parameters") {
    const auto m = seeded_model(6);
    CHECK_THROWS_AS(shrink_and_perturb(m, ShrinkPerturbParams{1.5, 0.0, 0}), plab::Error);
    CHECK_THROWS_AS(shrink_and_perturb(m, ShrinkPerturbParams{-0.1, 0.0, 0}), plab::Error);
    CHECK_THROWS_AS(shrink_and_perturb(m, ShrinkPerturbParams{0.5, -1.0, 0}), plab::Error);
}

TEST_CASE("penalty vanishes when features sit on their class means") {
    Matrix features = Matrix::from_rows({{1, 2}, {1, 2}, {-1, 0}, {-1, 0}});
    const std::vector<int> labels{0, 0, 1, 1};
    const auto r = nc1_batch_loss(features, labels, 2, Nc1RegConfig{});
    CHECK_FALSE(r.skipped);
    CHECK(r.penalty == 0.0);
    CHECK(plab::max_abs(r.grad_features) == 0.0);
}

TEST_CASE("scalar analytic case: penalty 0.02 and hand-derived gradient") {
    Matrix features = Matrix::from_rows({{-1.2}, {-0.8}, {0.8}, {1.2}});
    const std::vector<int> labels{0, 0, 1, 1};
    const auto r = nc1_batch_loss(features, labels, 2, Nc1RegConfig{});
    CHECK_FALSE(r.skipped);
    CHECK(r.penalty == doctest::Approx(0.02).epsilon(1e-12));
    // grad_j = (2/(N*C)) * pinv(sigma_b) * (x_j - mu_cj); sigma_b = 1 here
    CHECK(r.grad_features(0, 0) == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(r.grad_features(1, 0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(r.grad_features(2, 0) == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(r.grad_features(3, 0) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("penalty equals the collapse-metrics nc1 on the same batch") {
    RngStream rng(41);
    plab::collapse::FeatureBatch batch;
    batch.num_classes = 4;
    batch.features = Matrix(32, 7);
    batch.labels.resize(32);
    Matrix centers = oracle::random_matrix(4, 7, rng, -2.0, 2.0);
    for (std::size_t i = 0; i < 32; ++i) {
        batch.labels[i] = static_cast<int>(i % 4);
        for (std::size_t j = 0; j < 7; ++j)
            batch.features(i, j) = centers(i % 4, j) + 0.5 * rng.normal();
    }

    // match the metric's pseudoinverse cut so the comparison is exact
    Nc1RegConfig cfg;
    cfg.rank_tol = plab::kDefaultRankTol;
    const auto r = nc1_batch_loss(batch.features, batch.labels, 4, cfg);
    const double reference = plab::collapse::nc1(plab::collapse::accumulate_stats(batch));
    CHECK(r.penalty == doctest::Approx(reference).epsilon(1e-9));
}

TEST_CASE("gradient matches finite differences of the frozen-pseudoinverse objective") {
    RngStream rng(42);
    const std::size_t n = 12, d = 5, c = 3;
    Matrix features = oracle::random_matrix(n, d, rng, -1.0, 1.0);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);

    Nc1RegConfig cfg;
    cfg.rank_tol = plab::kDefaultRankTol;
    const auto r = nc1_batch_loss(features, labels, c, cfg);
    REQUIRE_FALSE(r.skipped);

    // frozen pinv(sigma_b) from the unperturbed batch, via the dense oracle
    const auto scat0 = oracle::oracle_scatter(features, labels, c);
    const Matrix p0 = oracle::oracle_pinv(scat0.sb);

    auto frozen_objective = [&](const Matrix& x) {
        const auto scat = oracle::oracle_scatter(x, labels, c); // means move, p0 does not
        Matrix centered(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                centered(i, j) = x(i, j) - scat.means(static_cast<std::size_t>(labels[i]), j);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b)
                    acc += centered(i, a) * p0(a, b) * centered(i, b);
        return acc / (static_cast<double>(n) * static_cast<double>(c));
    };

    const double eps = 1e-6;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            Matrix x = features;
            x(i, j) += eps;
            const double up = frozen_objective(x);
            x(i, j) = features(i, j) - eps;
            const double down = frozen_objective(x);
            const double fd = (up - down) / (2.0 * eps);
            const double an = r.grad_features(i, j);
            CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) < 1e-4);
        }
}

TEST_CASE("batches without class diversity skip the penalty") {
    Matrix features = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const auto r = nc1_batch_loss(features, {1, 1, 1}, 3, Nc1RegConfig{});
    CHECK(r.skipped);
    CHECK(r.penalty == 0.0);
    CHECK(plab::max_abs(r.grad_features) == 0.0);

    Nc1RegConfig strict;
    strict.min_classes_in_batch = 3;
    const auto r2 = nc1_batch_loss(features, {0, 1, 0}, 3, strict);
    CHECK(r2.skipped);
}

TEST_CASE("a vanished between-class scatter skips instead of erroring") {
    Matrix features(4, 3, 0.7); // identical rows: class means coincide
    const auto r = nc1_batch_loss(features, {0, 1, 0, 1}, 2, Nc1RegConfig{});
    CHECK(r.skipped);
    CHECK(r.penalty == 0.0);
}

TEST_CASE("nc1_batch_loss validates inputs") {
    Matrix features(4, 3, 0.5);
    CHECK_THROWS_AS(nc1_batch_loss(features, {0, 1}, 2, Nc1RegConfig{}), plab::Error);
    CHECK_THROWS_AS(nc1_batch_loss(features, {0, 1, 2, 5}, 3, Nc1RegConfig{}), plab::Error);
    Nc1RegConfig bad;
    bad.weight = -1.0;
    CHECK_THROWS_AS(nc1_batch_loss(features, {0, 1, 0, 1}, 2, bad), plab::Error);
    Nc1RegConfig bad2;
    bad2.min_classes_in_batch = 1;
    CHECK_THROWS_AS(nc1_batch_loss(features, {0, 1, 0, 1}, 2, bad2), plab::Error);
}

TEST_CASE("larger batches agree with the dense-route nc1 too") {
    RngStream rng(43);
    const std::size_t n = 64, d = 20, c = 10;
    plab::collapse::FeatureBatch batch;
    batch.num_classes = c;
    batch.features = Matrix(n, d);
    batch.labels.resize(n);
    Matrix centers = oracle::random_matrix(c, d, rng, -1.5, 1.5);
    for (std::size_t i = 0; i < n; ++i) {
        batch.labels[i] = static_cast<int>(i % c);
        for (std::size_t j = 0; j < d; ++j)
            batch.features(i, j) = centers(i % c, j) + 0.3 * rng.normal();
    }
    Nc1RegConfig cfg;
    cfg.rank_tol = plab::kDefaultRankTol;
    const auto r = nc1_batch_loss(batch.features, batch.labels, c, cfg);
    const double reference = plab::collapse::nc1(plab::collapse::accumulate_stats(batch));
    CHECK(r.penalty == doctest::Approx(reference).epsilon(1e-8));
}
