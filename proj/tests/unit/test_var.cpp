#include "ifts/var.hpp"

#include "catch_amalgamated.hpp"

#include <random>

using namespace ifts;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix simulate_var(const std::vector<Matrix>& A, Index n, std::uint64_t seed, Index burn = 200) {
    const Index K = A.front().rows();
    const Index p = static_cast<Index>(A.size());
    Rng rng(seed);
    Matrix x = Matrix::Zero(n + burn, K);
    for (Index t = 0; t < n + burn; ++t) {
        Vector v(K);
        for (Index k = 0; k < K; ++k) v(k) = rng.normal();
        for (Index xi = 1; xi <= p && t - xi >= 0; ++xi) v += A[static_cast<std::size_t>(xi - 1)] * x.row(t - xi).transpose();
        x.row(t) = v.transpose();
    }
    return x.bottomRows(n);
}

}  // namespace

TEST_CASE("VAR(1) coefficient recovery", "[var]") {
    const Matrix A = 0.5 * Matrix::Identity(2, 2);
    auto m = fit_var(simulate_var({A}, 5000, 1), 1);
    CHECK((m.A[0] - A).norm() < 0.05);
    CHECK(m.stationary());
}

TEST_CASE("white noise gives small coefficients and order 1", "[var]") {
    Matrix wn = simulate_var({Matrix::Zero(2, 2)}, 5000, 2);
    auto m = fit_var(wn, 1);
    CHECK(m.A[0].norm() < 0.05);
    CHECK(select_order(wn, 10) == 1);
}

TEST_CASE("scalar VAR is AR least squares", "[var]") {
    Rng rng(3);
    Matrix x(20, 1);
    x(0, 0) = rng.normal();
    for (Index t = 1; t < 20; ++t) x(t, 0) = 0.6 * x(t - 1, 0) + rng.normal();
    double num = 0.0, den = 0.0, bnum = 0.0;
    for (Index t = 1; t < 20; ++t) {
        num += x(t, 0) * x(t - 1, 0);
        den += x(t - 1, 0) * x(t - 1, 0);
    }
    double bden = 0.0;
    for (Index t = 0; t < 19; ++t) {
        bnum += x(t, 0) * x(t + 1, 0);
        bden += x(t + 1, 0) * x(t + 1, 0);
    }
    auto m = fit_var(x, 1);
    CHECK_THAT(m.A[0](0, 0), WithinAbs(num / den, 1e-10));
    CHECK_THAT(m.B[0](0, 0), WithinAbs(bnum / bden, 1e-10));
    double ss = 0.0;
    for (Index t = 1; t < 20; ++t) ss += std::pow(x(t, 0) - num / den * x(t - 1, 0), 2);
    CHECK_THAT(m.sigma(0, 0), WithinRel(ss / 19.0, 1e-10));
}

TEST_CASE("in-sample identity and residual layout", "[var]") {
    std::vector<Matrix> A{Matrix(2, 2), Matrix(2, 2)};
    A[0] << 0.4, 0.1, -0.2, 0.3;
    A[1] << 0.1, 0.0, 0.05, 0.2;
    Matrix x = simulate_var(A, 300, 4);
    auto m = fit_var(x, 2);
    REQUIRE(m.forward_residuals.rows() == 298);
    REQUIRE(m.backward_residuals.rows() == 298);
    for (Index t = 2; t < 300; ++t) {
        Vector fit = m.A[0] * x.row(t - 1).transpose() + m.A[1] * x.row(t - 2).transpose();
        CHECK((x.row(t).transpose() - fit - m.forward_residuals.row(t - 2).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
    for (Index t = 0; t < 298; ++t) {
        Vector fit = m.B[0] * x.row(t + 1).transpose() + m.B[1] * x.row(t + 2).transpose();
        CHECK((x.row(t).transpose() - fit - m.backward_residuals.row(t).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(m.centered_forward_residuals().colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("AICc values", "[var]") {
    VarModel m;
    m.K = 1;
    m.p = 1;
    m.sigma = Matrix::Identity(1, 1);
    CHECK_THAT(aicc(m, 100), WithinAbs(104.12371134020619, 1e-9));
    CHECK_THAT(aicc(m, 100), WithinAbs(100.0 * 101.0 / 97.0, 1e-9));

    m.K = 3;
    m.p = 2;
    m.sigma = Matrix::Identity(3, 3);
    CHECK_THAT(aicc(m, 80), WithinAbs(80.0 * (80.0 * 3 + 2 * 9) / (80.0 - 3 * 3 - 1), 1e-9));

    Matrix x = simulate_var({0.3 * Matrix::Identity(2, 2)}, 150, 5);
    auto f = fit_var(x, 3);
    const double n = 150;
    const double K = 2, p = 3;
    const double logdet = std::log((f.sigma + 1e-12 * Matrix::Identity(2, 2)).determinant());
    CHECK_THAT(aicc(f, 150), WithinAbs(n * logdet + n * (n * K + p * K * K) / (n - K * (p + 1) - 1), 1e-9));

    m.K = 2;
    m.p = 10;
    m.sigma = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(aicc(m, 20), Error);
}

TEST_CASE("order selection is rotation invariant", "[var]") {
    std::vector<Matrix> A{0.4 * Matrix::Identity(2, 2), 0.32 * Matrix::Identity(2, 2)};
    Matrix x = simulate_var(A, 400, 6);
    const double th = 0.7;
    Matrix Q(2, 2);
    Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    CHECK(select_order(x, 10) == select_order(x * Q.transpose(), 10));
}

TEST_CASE("order selection rejects unidentifiable inputs", "[var]") {
    CHECK_THROWS_AS(select_order(Matrix::Ones(3, 2), 10), Error);
}

TEST_CASE("singular design is rejected with a diagnostic", "[var]") {
    Matrix x(50, 2);
    Rng rng(7);
    for (Index t = 0; t < 50; ++t) {
        x(t, 0) = rng.normal();
        x(t, 1) = 2.0 * x(t, 0);
    }
    try {
        fit_var(x, 1);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
        CHECK(std::string(e.what()).find("condition number") != std::string::npos);
    }
}

TEST_CASE("score forecasts", "[var]") {
    Matrix resid = Matrix::Ones(5, 1);
    auto zero = make_var({Matrix::Zero(1, 1)}, {Matrix::Zero(1, 1)}, resid);
    Matrix hist(1, 1);
    hist << 3.0;
    CHECK(forecast_scores(zero, hist, 4).cwiseAbs().maxCoeff() == 0.0);

    auto ar = make_var({Matrix::Constant(1, 1, 0.5)}, {Matrix::Constant(1, 1, 0.5)}, resid);
    hist << 2.0;
    Matrix f = forecast_scores(ar, hist, 3);
    CHECK(f(0, 0) == 1.0);
    CHECK(f(1, 0) == 0.5);
    CHECK(f(2, 0) == 0.25);

    std::vector<Matrix> A{Matrix(2, 2), Matrix(2, 2)};
    A[0] << 0.5, 0.1, 0.0, 0.3;
    A[1] << -0.2, 0.0, 0.1, 0.1;
    auto v2 = make_var(A, A, Matrix::Ones(5, 2));
    Matrix h(3, 2);
    h << 9.0, 9.0, 1.0, -1.0, 2.0, 0.5;
    Matrix g = forecast_scores(v2, h, 3);
    const Vector y1 = A[0] * Vector(h.row(2).transpose()) + A[1] * Vector(h.row(1).transpose());
    const Vector y2 = A[0] * y1 + A[1] * Vector(h.row(2).transpose());
    const Vector y3 = A[0] * y2 + A[1] * y1;
    CHECK((g.row(0).transpose() - y1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.row(1).transpose() - y2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.row(2).transpose() - y3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("MA coefficients follow the recursion", "[var]") {
    std::vector<Matrix> A{Matrix(2, 2), Matrix(2, 2)};
    A[0] << 0.5, 0.1, 0.0, 0.3;
    A[1] << -0.2, 0.0, 0.1, 0.1;
    auto psi = ma_coefficients(A);
    CHECK(psi[0] == Matrix::Identity(2, 2));
    CHECK((psi[1] - A[0]).norm() < 1e-15);
    CHECK((psi[2] - (A[0] * A[0] + A[1])).norm() < 1e-15);
    CHECK(psi.back().norm() < 1e-10);
    CHECK(psi[psi.size() - 2].norm() >= 1e-10);
}

TEST_CASE("innovation transfer with zero dynamics is the identity", "[var]") {
    auto m = make_var({Matrix::Zero(2, 2)}, {Matrix::Zero(2, 2)}, Matrix::Ones(10, 2));
    Rng rng(9);
    Matrix eps(17, 2);
    for (Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    Matrix eta = backward_innovation_transfer(m, eps, rng);
    CHECK(eta.rows() == eps.rows());
    CHECK((eta - eps).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("non-stationary models are refused by the transfer", "[var]") {
    auto m = make_var({Matrix::Constant(1, 1, 1.0)}, {Matrix::Constant(1, 1, 1.0)}, Matrix::Ones(10, 1));
    CHECK_FALSE(m.stationary());
    Rng rng(1);
    CHECK_THROWS_AS(backward_innovation_transfer(m, Matrix::Ones(5, 1), rng), Error);
}

TEST_CASE("companion spectral radius", "[var]") {
    std::vector<Matrix> A{0.4 * Matrix::Identity(2, 2), 0.32 * Matrix::Identity(2, 2)};
    CHECK_THAT(companion_spectral_radius(A), WithinAbs(0.8, 1e-12));
}
