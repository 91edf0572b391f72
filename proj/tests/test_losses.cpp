#include "movae/losses.hpp"
#include "movae/rng.hpp"
#include "movae/tensor.hpp"

#include <doctest.h>

#include <cmath>

using namespace movae;

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

template <typename F>
double numeric_derivative(F&& f, double& slot, double step = 1e-6) {
    const double saved = slot;
    slot = saved + step;
    const double up = f();
    slot = saved - step;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("reconstruction loss examples") {
    std::vector<Vector> x{Vector::Zero(2)};
    std::vector<Vector> xp{Vector::Ones(2)};
    CHECK(recon_loss(x, x, ReconLoss::mse) == 0.0);
    CHECK(recon_loss(x, xp, ReconLoss::mse) == doctest::Approx(1.0));
    CHECK(recon_loss(x, xp, ReconLoss::l1) == doctest::Approx(1.0));

    std::vector<Vector> a{Vector::Ones(1)};
    Vector half(1);
    half << 0.5;
    std::vector<Vector> b{half};
    CHECK(recon_loss(a, b, ReconLoss::bce) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("bce rejects inputs outside its domain") {
    Vector bad(1);
    bad << 1.5;
    Vector ok(1);
    ok << 0.5;
    CHECK_THROWS_AS(recon_loss({bad}, {ok}, ReconLoss::bce), DomainError);
    Vector zero(1);
    zero << 0.0;
    CHECK_THROWS_AS(recon_loss({ok}, {zero}, ReconLoss::bce), DomainError);
}

TEST_CASE("recon loss averages per omics type then across types") {
    // one perfectly reconstructed omics type, one off by 1 everywhere
    std::vector<Vector> x{Vector::Zero(4), Vector::Zero(2)};
    std::vector<Vector> xp{Vector::Zero(4), Vector::Ones(2)};
    CHECK(recon_loss(x, xp, ReconLoss::mse) == doctest::Approx(0.5));
}

TEST_CASE("kl divergence closed form") {
    CHECK(kl_divergence(Vector::Zero(3), Vector::Ones(3)) == 0.0);

    Vector mu1 = Vector::Ones(1);
    CHECK(kl_divergence(mu1, Vector::Ones(1)) == doctest::Approx(0.5).epsilon(1e-12));

    Vector sigma2(1);
    sigma2 << 2.0;
    CHECK(kl_divergence(Vector::Zero(1), sigma2) == doctest::Approx(0.8069).epsilon(1e-4));

    Vector bad(1);
    bad << -1.0;
    CHECK_THROWS_AS(kl_divergence(Vector::Zero(1), bad), DomainError);
    CHECK_THROWS_AS(kl_divergence(Vector::Zero(1), Vector::Zero(1)), DomainError);
}

TEST_CASE("kl divergence is nonnegative, zero only at the prior") {
    Rng rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index q = 1 + static_cast<Eigen::Index>(rng.uniform_int(6));
        Vector mu = rng.normal_vector(q);
        Vector sigma = (rng.normal_vector(q).array().abs() + 0.05).matrix();
        const double kl = kl_divergence(mu, sigma);
        CHECK(kl >= 0.0);
        if ((mu.array().abs() > 1e-3).any() || ((sigma.array() - 1.0).abs() > 1e-3).any()) {
            CHECK(kl > 0.0);
        }
    }
    CHECK(kl_divergence(Vector::Zero(4), Vector::Ones(4)) == 0.0);
}

TEST_CASE("kl divergence matches a Monte Carlo estimate") {
    // E_q[ln q(z) - ln p(z)] with z ~ N(mu, diag(sigma^2)); 1e5 draws,
    // agreement within 3 standard errors.
    Rng rng(23);
    const int n_draws = 100000;
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index q = 1 + static_cast<Eigen::Index>(rng.uniform_int(4));
        Vector mu = rng.normal_vector(q);
        Vector sigma = (0.3 + rng.normal_vector(q).array().abs()).matrix();

        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n_draws; ++i) {
            double log_q = 0.0, log_p = 0.0;
            for (Eigen::Index d = 0; d < q; ++d) {
                const double z = mu[d] + sigma[d] * rng.normal();
                const double u = (z - mu[d]) / sigma[d];
                log_q += -0.5 * u * u - std::log(sigma[d]);
                log_p += -0.5 * z * z;
            }
            const double v = log_q - log_p;
            sum += v;
            sum_sq += v * v;
        }
        const double mc = sum / n_draws;
        const double var = (sum_sq / n_draws - mc * mc) / (n_draws - 1);
        const double se = std::sqrt(std::max(var, 1e-30));
        CHECK(std::abs(kl_divergence(mu, sigma) - mc) <= 3.0 * se);
    }
}

TEST_CASE("classification loss examples") {
    CHECK(classification_loss(Vector::Zero(4), 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Vector confident(2);
    confident << 100, 0;
    CHECK(classification_loss(confident, 0) <= 1e-12);

    Vector pair(2);
    pair << 1, 2;
    CHECK(classification_loss(pair, 1) == doctest::Approx(0.3133).epsilon(1e-3));

    CHECK_THROWS_AS(classification_loss(pair, 2), std::out_of_range);
    CHECK_THROWS_AS(classification_loss(pair, -1), std::out_of_range);
}

TEST_CASE("classification loss equals ln C for uniform logits and stays nonnegative") {
    Rng rng(31);
    for (int c = 2; c <= 8; ++c) {
        CHECK(classification_loss(Vector::Constant(c, 3.7), 0) ==
              doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
    }
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.uniform_int(6));
        Vector logits = 5.0 * rng.normal_vector(c);
        CHECK(classification_loss(logits, static_cast<int>(rng.uniform_int(c))) >= 0.0);
    }
}

TEST_CASE("embedding loss additivity and monotonicity") {
    Rng rng(37);
    std::vector<Vector> x{rng.normal_vector(5)};
    std::vector<Vector> xp{rng.normal_vector(5)};
    Vector mu = rng.normal_vector(3);
    Vector sigma = (rng.normal_vector(3).array().abs() + 0.1).matrix();

    const double embed = embedding_loss(x, xp, mu, sigma, ReconLoss::mse);
    CHECK(embed == recon_loss(x, xp, ReconLoss::mse) + kl_divergence(mu, sigma));

    Vector mu2 = mu;
    mu2[1] = mu[1] >= 0.0 ? mu[1] + 1.0 : mu[1] - 1.0;  // larger |mu_1|
    CHECK(embedding_loss(x, xp, mu2, sigma, ReconLoss::mse) > embed);

    CHECK(embedding_loss(x, x, Vector::Zero(3), Vector::Ones(3), ReconLoss::mse) == 0.0);
}

TEST_CASE("joint loss") {
    CHECK(joint_loss({1.0, 2.0, 3.0}, 0.5) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(joint_loss({0.0}, 0.0) == 0.0);
    // single subset reduces to embed + classification
    CHECK(joint_loss({1.25}, 0.75) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(joint_loss({}, 0.0), ValidationError);
}

TEST_CASE("loss identities hold on random inputs") {
    Rng rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform_int(6));
        const Eigen::Index q = 1 + static_cast<Eigen::Index>(rng.uniform_int(5));
        std::vector<Vector> x{rng.normal_vector(n)};
        std::vector<Vector> xp{rng.normal_vector(n)};
        Vector mu = rng.normal_vector(q);
        Vector sigma = (rng.normal_vector(q).array().abs() + 0.05).matrix();

        const double recon = recon_loss(x, xp, ReconLoss::mse);
        const double kl = kl_divergence(mu, sigma);
        const double embed = embedding_loss(x, xp, mu, sigma, ReconLoss::mse);
        CHECK(std::abs(embed - (recon + kl)) <= 1e-12);

        const int m = 1 + static_cast<int>(rng.uniform_int(5));
        std::vector<double> per_subset;
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            per_subset.push_back(std::abs(rng.normal()));
            sum += per_subset.back();
        }
        const double ce = std::abs(rng.normal());
        CHECK(std::abs(joint_loss(per_subset, ce) - (sum / m + ce)) <= 1e-12);
    }
}

TEST_CASE("losses are permutation equivariant in the feature dimension") {
    Rng rng(43);
    for (ReconLoss kind : {ReconLoss::mse, ReconLoss::l1}) {
        Vector a = rng.normal_vector(8);
        Vector b = rng.normal_vector(8);
        const double base = recon_loss({a}, {b}, kind);
        std::vector<int> perm{3, 1, 7, 0, 5, 2, 6, 4};
        Vector ap(8), bp(8);
        for (int i = 0; i < 8; ++i) {
            ap[i] = a[perm[static_cast<std::size_t>(i)]];
            bp[i] = b[perm[static_cast<std::size_t>(i)]];
        }
        CHECK(std::abs(recon_loss({ap}, {bp}, kind) - base) <= 1e-12);
    }
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(47);

    for (ReconLoss kind : {ReconLoss::mse, ReconLoss::l1, ReconLoss::bce}) {
        std::vector<Vector> x{rng.normal_vector(4), rng.normal_vector(3)};
        std::vector<Vector> xp{rng.normal_vector(4), rng.normal_vector(3)};
        if (kind == ReconLoss::bce) {
            for (auto& v : x) v = (0.05 + 0.9 * (v.array().sin() * 0.5 + 0.5)).matrix();
            for (auto& v : xp) v = (0.05 + 0.9 * (v.array().sin() * 0.5 + 0.5)).matrix();
        }
        auto loss = [&]() { return recon_loss(x, xp, kind); };
        std::vector<Vector> grads = recon_loss_backward(x, xp, kind);
        for (std::size_t k = 0; k < x.size(); ++k) {
            for (Eigen::Index i = 0; i < x[k].size(); ++i) {
                CHECK(rel_err(grads[k][i], numeric_derivative(loss, xp[k][i])) < 1e-5);
            }
        }
    }

    {
        Vector mu = rng.normal_vector(4);
        Vector sigma = (rng.normal_vector(4).array().abs() + 0.2).matrix();
        Vector logvar = (2.0 * sigma.array().log()).matrix();
        auto kl_of_logvar = [&]() {
            return kl_divergence(mu, (0.5 * logvar.array()).exp().matrix());
        };
        Vector gmu = kl_backward_mu(mu);
        Vector glv = kl_backward_logvar(sigma);
        for (Eigen::Index i = 0; i < 4; ++i) {
            CHECK(rel_err(gmu[i], numeric_derivative([&]() { return kl_divergence(mu, sigma); },
                                                     mu[i])) < 1e-5);
            CHECK(rel_err(glv[i], numeric_derivative(kl_of_logvar, logvar[i])) < 1e-5);
        }
    }

    {
        Vector logits = rng.normal_vector(5);
        const int label = 3;
        auto loss = [&]() { return classification_loss(logits, label); };
        Vector g = classification_loss_backward(logits, label);
        for (Eigen::Index i = 0; i < 5; ++i) {
            CHECK(rel_err(g[i], numeric_derivative(loss, logits[i])) < 1e-5);
        }
    }
}
