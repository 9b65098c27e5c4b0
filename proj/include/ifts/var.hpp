#pragma once

// Vector autoregression on principal component scores: least-squares fits in
// both time directions, AICc order selection, iterated forecasts and the
// transfer of forward innovations into backward ones used by the sieve
// bootstrap.

#include "ifts/common.hpp"

#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

namespace ifts {

struct VarModel {
    int p = 1;
    int K = 1;
    std::vector<Matrix> A;       // forward coefficients A_1..A_p (K x K)
    std::vector<Matrix> B;       // backward coefficients B_1..B_p (K x K)
    Matrix forward_residuals;    // (n - p) x K, rows t = p+1..n
    Matrix backward_residuals;   // (n - p) x K, rows t = 1..n-p
    Matrix sigma;                // forward residual covariance, divisor n - p
    double spectral_radius = 0.0;
    std::vector<Matrix> psi;     // MA(inf) coefficients psi_0..psi_M; empty when non-stationary
    int psi_truncation = 0;      // M

    static constexpr double kStationarityLimit = 0.999;

    bool stationary() const { return spectral_radius < kStationarityLimit; }

    /// Forward residuals minus their column means.
    Matrix centered_forward_residuals() const {
        Matrix c = forward_residuals;
        c.rowwise() -= forward_residuals.colwise().mean();
        return c;
    }
};

/// Largest modulus among eigenvalues of the companion matrix of A_1..A_p.
inline double companion_spectral_radius(const std::vector<Matrix>& A) {
    if (A.empty()) return 0.0;
    const Index K = A.front().rows();
    const Index p = static_cast<Index>(A.size());
    Matrix companion = Matrix::Zero(K * p, K * p);
    for (Index j = 0; j < p; ++j) companion.block(0, j * K, K, K) = A[static_cast<std::size_t>(j)];
    if (p > 1) companion.block(K, 0, K * (p - 1), K * (p - 1)).setIdentity();
    Eigen::EigenSolver<Matrix> es(companion, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// psi_0 = I, psi_j = sum_{xi=1..min(j,p)} A_xi psi_{j-xi}, stopping at the
/// first M <= cap with ||psi_M||_F < tol.
inline std::vector<Matrix> ma_coefficients(const std::vector<Matrix>& A, double tol = 1e-10, int cap = 200) {
    const Index K = A.front().rows();
    std::vector<Matrix> psi{Matrix::Identity(K, K)};
    for (int j = 1; j <= cap; ++j) {
        Matrix next = Matrix::Zero(K, K);
        for (int xi = 1; xi <= std::min<int>(j, static_cast<int>(A.size())); ++xi)
            next += A[static_cast<std::size_t>(xi - 1)] * psi[static_cast<std::size_t>(j - xi)];
        psi.push_back(std::move(next));
        if (psi.back().norm() < tol) return psi;
    }
    fail(ErrorKind::numerical, "MA expansion did not converge within " + std::to_string(cap) + " terms");
}

namespace detail {

struct LsFit {
    std::vector<Matrix> coef;
    Matrix residuals;
};

/// Regresses rows of `target` on the stacked lag rows built by `lag_row`.
inline LsFit lagged_least_squares(const Matrix& scores, int p, bool backward) {
    const Index n = scores.rows();
    const Index K = scores.cols();
    const Index rows = n - p;
    Matrix X(rows, K * p);
    Matrix Y(rows, K);
    for (Index r = 0; r < rows; ++r) {
        // forward: t = r + p regresses on t-1..t-p; backward: t = r on t+1..t+p
        const Index t = backward ? r : r + p;
        Y.row(r) = scores.row(t);
        for (Index xi = 1; xi <= p; ++xi) X.block(r, (xi - 1) * K, 1, K) = scores.row(backward ? t + xi : t - xi);
    }
    Eigen::JacobiSVD<Matrix> svd(X);
    const Vector sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond < 1e12))
        fail(ErrorKind::numerical, "singular VAR design matrix (condition number " + std::to_string(cond) + ")");
    Matrix stacked = X.colPivHouseholderQr().solve(Y);  // Kp x K
    LsFit fit;
    for (Index xi = 0; xi < p; ++xi) fit.coef.push_back(stacked.middleRows(xi * K, K).transpose());
    fit.residuals = Y - X * stacked;
    return fit;
}

}  // namespace detail

/// Least-squares VAR(p) without intercept, fitted forward and backward.
inline VarModel fit_var(const Matrix& scores, int p) {
    const Index n = scores.rows();
    const Index K = scores.cols();
    require(p >= 1, ErrorKind::usage, "VAR order must be at least 1");
    require(K >= 1, ErrorKind::data, "VAR needs at least one score series");
    require(n - p > K * p, ErrorKind::data,
            "VAR(" + std::to_string(p) + ") not identifiable with n = " + std::to_string(n) + ", K = " + std::to_string(K));
    require(scores.allFinite(), ErrorKind::data, "scores contain non-finite values");

    VarModel m;
    m.p = p;
    m.K = static_cast<int>(K);
    auto fwd = detail::lagged_least_squares(scores, p, false);
    auto bwd = detail::lagged_least_squares(scores, p, true);
    m.A = std::move(fwd.coef);
    m.forward_residuals = std::move(fwd.residuals);
    m.B = std::move(bwd.coef);
    m.backward_residuals = std::move(bwd.residuals);
    m.sigma = (m.forward_residuals.transpose() * m.forward_residuals) / static_cast<double>(n - p);
    m.spectral_radius = companion_spectral_radius(m.A);
    if (m.stationary()) {
        m.psi = ma_coefficients(m.A);
        m.psi_truncation = static_cast<int>(m.psi.size()) - 1;
    }
    return m;
}

/// Builds a model from given coefficients (used by simulations and tests).
inline VarModel make_var(std::vector<Matrix> A, std::vector<Matrix> B, Matrix forward_residuals) {
    require(!A.empty() && A.size() == B.size(), ErrorKind::usage, "forward and backward orders must match");
    VarModel m;
    m.p = static_cast<int>(A.size());
    m.K = static_cast<int>(A.front().rows());
    m.A = std::move(A);
    m.B = std::move(B);
    m.forward_residuals = std::move(forward_residuals);
    m.sigma = (m.forward_residuals.transpose() * m.forward_residuals) /
              static_cast<double>(std::max<Index>(m.forward_residuals.rows(), 1));
    m.spectral_radius = companion_spectral_radius(m.A);
    if (m.stationary()) {
        m.psi = ma_coefficients(m.A);
        m.psi_truncation = static_cast<int>(m.psi.size()) - 1;
    }
    return m;
}

/// n ln|Sigma| + n (nK + pK^2) / (n - K(p+1) - 1), with the log-determinant
/// taken on Sigma + 1e-12 I.
inline double aicc(const VarModel& model, Index n) {
    const double K = model.K;
    const double p = model.p;
    const double nn = static_cast<double>(n);
    const double denom = nn - K * (p + 1.0) - 1.0;
    require(denom > 0.0, ErrorKind::data, "AICc undefined: n - K(p+1) - 1 <= 0");
    Matrix reg = model.sigma + 1e-12 * Matrix::Identity(model.K, model.K);
    Eigen::LDLT<Matrix> ldlt(reg);
    require(ldlt.info() == Eigen::Success, ErrorKind::numerical, "residual covariance factorisation failed");
    const double logdet = ldlt.vectorD().array().log().sum();
    return nn * logdet + nn * (nn * K + p * K * K) / denom;
}

/// AICc-minimising order in 1..p_max among identifiable orders; ties to the
/// smallest p.
inline int select_order(const Matrix& scores, int p_max = 10) {
    require(p_max >= 1, ErrorKind::usage, "p_max must be at least 1");
    const Index n = scores.rows();
    const Index K = scores.cols();
    int best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= p_max; ++p) {
        if (n - p <= K * p) continue;
        if (static_cast<double>(n) - static_cast<double>(K) * (p + 1.0) - 1.0 <= 0.0) continue;
        double value;
        try {
            value = aicc(fit_var(scores, p), n);
        } catch (const Error&) {
            continue;
        }
        if (value < best_value) {
            best_value = value;
            best = p;
        }
    }
    require(best > 0, ErrorKind::data, "no identifiable VAR order in 1.." + std::to_string(p_max));
    return best;
}

/// Iterated conditional-mean forecasts. `history` rows run oldest to newest;
/// its last p rows are used. Returns h x K.
inline Matrix forecast_scores(const VarModel& model, const Matrix& history, int h) {
    require(history.rows() >= model.p, ErrorKind::data, "forecast history shorter than the VAR order");
    require(history.cols() == model.K, ErrorKind::data, "forecast history width must equal K");
    require(h >= 1, ErrorKind::usage, "forecast horizon must be at least 1");
    Matrix path(model.p + h, model.K);
    path.topRows(model.p) = history.bottomRows(model.p);
    for (int s = 0; s < h; ++s) {
        Vector next = Vector::Zero(model.K);
        for (int xi = 1; xi <= model.p; ++xi)
            next += model.A[static_cast<std::size_t>(xi - 1)] * path.row(model.p + s - xi).transpose();
        path.row(model.p + s) = next.transpose();
    }
    return path.bottomRows(h);
}

/// Maps forward innovations eps* (rows, time order) to backward innovations
///   zeta_t = sum_{j=0..M} psi_j eps*_{t-j},
///   eta*_t = zeta_t - sum_{xi=1..p} B_xi zeta_{t+xi}.
/// Innovations needed before the first or after the last row are drawn i.i.d.
/// from the centered forward residual pool.
inline Matrix backward_innovation_transfer(const VarModel& model, const Matrix& eps, Rng& rng) {
    require(model.stationary(), ErrorKind::numerical,
            "VAR model is not stationary (companion spectral radius " + std::to_string(model.spectral_radius) + ")");
    require(eps.cols() == model.K, ErrorKind::data, "innovation width must equal K");
    const Index L = eps.rows();
    const Index M = model.psi_truncation;
    const Index p = model.p;
    const Matrix pool = model.centered_forward_residuals();
    require(pool.rows() > 0, ErrorKind::data, "empty residual pool");

    // extended innovations: M pre-sample, L given, p post-sample
    Matrix ext(M + L + p, model.K);
    for (Index i = 0; i < M; ++i) ext.row(i) = pool.row(rng.index(pool.rows()));
    ext.middleRows(M, L) = eps;
    for (Index i = 0; i < p; ++i) ext.row(M + L + i) = pool.row(rng.index(pool.rows()));

    Matrix zeta = Matrix::Zero(L + p, model.K);
    for (Index t = 0; t < L + p; ++t) {
        const Index e = M + t;
        for (Index j = 0; j <= M; ++j) zeta.row(t) += ext.row(e - j) * model.psi[static_cast<std::size_t>(j)].transpose();
    }
    Matrix eta(L, model.K);
    for (Index t = 0; t < L; ++t) {
        Vector v = zeta.row(t).transpose();
        for (Index xi = 1; xi <= p; ++xi) v -= model.B[static_cast<std::size_t>(xi - 1)] * zeta.row(t + xi).transpose();
        eta.row(t) = v.transpose();
    }
    return eta;
}

}  // namespace ifts
