#include "movae/rng.hpp"
#include "movae/tensor.hpp"

#include <doctest.h>

#include <cmath>

using namespace movae;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
    }
    return m;
}

// Test-local central-difference oracle, independent of grad_check.
template <typename F>
double numeric_derivative(F&& f, double& slot, double step = 1e-5) {
    const double saved = slot;
    slot = saved + step;
    const double up = f();
    slot = saved - step;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * step);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("affine basics") {
    Matrix I2 = Matrix::Identity(2, 2);
    Vector x(2);
    x << 3, 4;
    CHECK(affine(x, I2, Vector::Zero(2)) == x);

    Matrix W(2, 2);
    W << 1, 1, 0, 1;
    Vector b(2);
    b << 1, 0;
    Vector in(2);
    in << 1, 2;
    Vector out = affine(in, W, b);
    CHECK(out[0] == doctest::Approx(4.0));
    CHECK(out[1] == doctest::Approx(2.0));

    Matrix Wz = Matrix::Zero(1, 2);
    Vector bz(1);
    bz << 5;
    Vector nine(2);
    nine << 9, 9;
    CHECK(affine(nine, Wz, bz)[0] == doctest::Approx(5.0));
}

TEST_CASE("affine shape mismatch names both shapes") {
    Matrix W = Matrix::Zero(2, 3);
    Vector x = Vector::Zero(4);
    try {
        affine(x, W, Vector::Zero(2));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4") != std::string::npos);
    }
}

TEST_CASE("affine is linear when b = 0") {
    Rng rng(7);
    Matrix W = random_matrix(rng, 4, 6);
    Vector x = rng.normal_vector(6);
    Vector y = rng.normal_vector(6);
    const double alpha = 1.7, beta = -0.4;
    Vector lhs = affine(alpha * x + beta * y, W, Vector::Zero(4));
    Vector rhs = alpha * affine(x, W, Vector::Zero(4)) + beta * affine(y, W, Vector::Zero(4));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("affine_backward hand cases") {
    Vector grad_out(1);
    grad_out << 1;
    Vector x(2);
    x << 2, 3;
    Matrix W = Matrix::Zero(1, 2);
    AffineGrads g = affine_backward(grad_out, x, W);
    CHECK(g.grad_x == Vector::Zero(2));
    CHECK(g.grad_W(0, 0) == 2.0);
    CHECK(g.grad_W(0, 1) == 3.0);
    CHECK(g.grad_b[0] == 1.0);

    AffineGrads zero = affine_backward(Vector::Zero(1), x, W);
    CHECK(zero.grad_x.isZero(0));
    CHECK(zero.grad_W.isZero(0));
    CHECK(zero.grad_b.isZero(0));
}

TEST_CASE("affine_backward matches central differences on a random 3x4 case") {
    Rng rng(11);
    Matrix W = random_matrix(rng, 3, 4);
    Vector x = rng.normal_vector(4);
    Vector b = rng.normal_vector(3);
    Vector grad_out = rng.normal_vector(3);

    // scalar loss: grad_out . affine(x, W, b)
    auto loss = [&]() { return grad_out.dot(affine(x, W, b)); };
    AffineGrads g = affine_backward(grad_out, x, W);

    for (Eigen::Index r = 0; r < 3; ++r) {
        for (Eigen::Index c = 0; c < 4; ++c) {
            CHECK(rel_err(g.grad_W(r, c), numeric_derivative(loss, W(r, c))) < 1e-6);
        }
    }
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(rel_err(g.grad_x[i], numeric_derivative(loss, x[i])) < 1e-6);
    }
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(rel_err(g.grad_b[i], numeric_derivative(loss, b[i])) < 1e-6);
    }
}

TEST_CASE("activations") {
    Vector x(2);
    x << -1, 2;
    Vector r = activation(x, Activation::relu);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 2.0);

    Vector zero(1);
    zero << 0;
    CHECK(activation(zero, Activation::sigmoid)[0] == doctest::Approx(0.5));

    Rng rng(3);
    Vector v = rng.normal_vector(5);
    CHECK(activation(v, Activation::identity) == v);

    Vector big(2);
    big << 1000, -1000;
    Vector s = activation(big, Activation::sigmoid);
    CHECK(std::isfinite(s[0]));
    CHECK(std::isfinite(s[1]));
    CHECK(s[0] > 0.0);
    CHECK(s[1] < 1.0);
}

TEST_CASE("softmax") {
    Vector flat = Vector::Zero(4);
    Vector p = softmax(flat);
    for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25));

    Vector extreme(2);
    extreme << 1000, 0;
    Vector q = softmax(extreme);
    CHECK(std::abs(q[0] - 1.0) <= 1e-12);
    CHECK(std::abs(q[1]) <= 1e-12);

    Vector pair(2);
    pair << 1, 2;
    Vector r = softmax(pair);
    CHECK(r[0] == doctest::Approx(0.2689).epsilon(1e-3));
    CHECK(r[1] == doctest::Approx(0.7311).epsilon(1e-3));

    CHECK_THROWS_AS(softmax(Vector::Zero(1)), ValidationError);
}

TEST_CASE("softmax output is a probability vector") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_int(8));
        Vector logits = 10.0 * rng.normal_vector(n);
        Vector p = softmax(logits);
        CHECK((p.array() >= 0.0).all());
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("gradients match finite differences on random affine/activation chains") {
    // probe . (W2 * act(W1 x + b1) + b2)
    Rng rng(42);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n_in = 1 + static_cast<Eigen::Index>(rng.uniform_int(5));
        const Eigen::Index n_hidden = 1 + static_cast<Eigen::Index>(rng.uniform_int(5));
        const Eigen::Index n_out = 1 + static_cast<Eigen::Index>(rng.uniform_int(4));
        const Activation act = trial % 2 == 0 ? Activation::relu : Activation::sigmoid;

        Matrix W1 = random_matrix(rng, n_hidden, n_in);
        Vector b1 = rng.normal_vector(n_hidden);
        Matrix W2 = random_matrix(rng, n_out, n_hidden);
        Vector b2 = rng.normal_vector(n_out);
        Vector x = rng.normal_vector(n_in);
        Vector probe = rng.normal_vector(n_out);

        auto loss = [&]() {
            return probe.dot(affine(activation(affine(x, W1, b1), act), W2, b2));
        };

        Vector pre1 = affine(x, W1, b1);
        Vector h = activation(pre1, act);
        Vector dh = W2.transpose() * probe;
        Vector dpre1 = activation_backward(dh, pre1, act);
        AffineGrads g2 = affine_backward(probe, h, W2);
        AffineGrads g1 = affine_backward(dpre1, x, W1);

        double max_err = 0.0;
        for (Eigen::Index r = 0; r < n_hidden; ++r) {
            for (Eigen::Index c = 0; c < n_in; ++c) {
                max_err =
                    std::max(max_err, rel_err(g1.grad_W(r, c), numeric_derivative(loss, W1(r, c))));
            }
            max_err = std::max(max_err, rel_err(g1.grad_b[r], numeric_derivative(loss, b1[r])));
        }
        for (Eigen::Index r = 0; r < n_out; ++r) {
            for (Eigen::Index c = 0; c < n_hidden; ++c) {
                max_err =
                    std::max(max_err, rel_err(g2.grad_W(r, c), numeric_derivative(loss, W2(r, c))));
            }
            max_err = std::max(max_err, rel_err(g2.grad_b[r], numeric_derivative(loss, b2[r])));
        }
        if (max_err >= 1e-5) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("grad_check on a quadratic") {
    ParamStore params;
    ParamEntry& e = params.add("w", 1, 2);
    e.W << 1, 2;
    // loss = |W|^2, analytic gradient 2W = [[2, 4]]
    e.grad_W << 2, 4;
    auto loss = [](const ParamStore& p) { return p.at("w").W.squaredNorm(); };
    CHECK(grad_check(loss, params, 1e-5) < 1e-8);
}

TEST_CASE("grad_check skips frozen entries") {
    ParamStore params;
    ParamEntry& e = params.add("w", 1, 1);
    e.W << 3;
    e.grad_W << 12345.0;  // wrong on purpose
    e.frozen = true;
    auto loss = [](const ParamStore& p) { return p.at("w").W.squaredNorm(); };
    CHECK(grad_check(loss, params, 1e-5) == 0.0);
}

TEST_CASE("grad_check reports the parameter that went non-finite") {
    ParamStore params;
    ParamEntry& e = params.add("bad", 1, 1);
    e.W << 0.0;
    auto loss = [](const ParamStore& p) { return std::log(p.at("bad").W(0, 0)); };
    try {
        grad_check(loss, params, 1e-5);
        FAIL("expected DomainError");
    } catch (const DomainError& err) {
        CHECK(std::string(err.what()).find("bad.W(0,0)") != std::string::npos);
    }
}

TEST_CASE("ParamStore freezing and bookkeeping") {
    ParamStore params;
    params.add("enc.a", 2, 2);
    params.add("enc.b", 1, 3);
    params.add("dec.a", 2, 1);
    CHECK(params.scalar_count() == (4 + 2) + (3 + 1) + (2 + 2));

    params.set_frozen("enc.", true);
    CHECK(params.at("enc.a").frozen);
    CHECK(params.at("enc.b").frozen);
    CHECK_FALSE(params.at("dec.a").frozen);
    params.unfreeze_all();
    CHECK_FALSE(params.at("enc.a").frozen);

    CHECK_THROWS_AS(params.add("enc.a", 1, 1), ValidationError);
    CHECK_THROWS_AS(params.at("missing"), ValidationError);
}
