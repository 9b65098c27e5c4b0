#pragma once

// Synthetic functional time series with known ground truth.

#include "ifts/common.hpp"
#include "ifts/gridcurves.hpp"
#include "ifts/var.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ifts {

enum class BasisFamily { sinusoid, polynomial };

/// Early/late block structure: the late-block scores are a linear map of the
/// early-block scores plus independent noise.
struct LinkageSpec {
    int m = 38;                 // split index; early block is grid indices 2..m
    int late_components = 1;    // S
    Matrix rho;                 // R x S, R = K_true
    double late_innovation_sd = 0.0;
};

struct SynthSpec {
    Index n = 250;
    int tau = 75;
    BasisFamily basis = BasisFamily::sinusoid;
    int K_true = 2;
    double mean_amplitude = 0.0;   // mean curve a * x on x in (0, 1]
    std::vector<Matrix> A;         // score VAR coefficients; empty: i.i.d. scores
    Matrix innovation_cov;         // K_true x K_true; empty: identity
    double noise_sd = 0.0;         // i.i.d. Gaussian noise per grid point
    std::uint64_t seed = 1;
    int burn_in = 200;
    std::optional<LinkageSpec> linkage;

    void validate() const {
        require(n >= 2, ErrorKind::usage, "synthetic n must be at least 2");
        require(tau >= 3, ErrorKind::usage, "synthetic tau must be at least 3");
        require(K_true >= 1 && K_true <= tau - 1, ErrorKind::usage, "K_true must lie in [1, tau - 1]");
        require(noise_sd >= 0.0, ErrorKind::usage, "noise_sd must be non-negative");
        for (const auto& a : A) require(a.rows() == K_true && a.cols() == K_true, ErrorKind::usage, "VAR coefficient shape must be K_true x K_true");
        if (innovation_cov.size() > 0)
            require(innovation_cov.rows() == K_true && innovation_cov.cols() == K_true, ErrorKind::usage,
                    "innovation covariance must be K_true x K_true");
        if (!A.empty())
            require(companion_spectral_radius(A) < 1.0, ErrorKind::usage, "score dynamics are not stationary");
        if (linkage) {
            require(linkage->m >= 2 && linkage->m < tau, ErrorKind::usage, "linkage split must satisfy 2 <= m < tau");
            require(K_true <= linkage->m - 1, ErrorKind::usage, "early block too short for K_true components");
            require(linkage->late_components >= 1 && linkage->late_components <= tau - linkage->m, ErrorKind::usage,
                    "late block too short for the requested components");
            require(linkage->rho.rows() == K_true && linkage->rho.cols() == linkage->late_components, ErrorKind::usage,
                    "linkage rho must be K_true x late_components");
        }
    }
};

struct GroundTruth {
    Vector mean;
    Matrix eigenfunctions;  // d x K_true (without linkage) or block-diagonal early/late bases
    Matrix scores;          // n x K_true (early scores under linkage)
    Matrix late_scores;     // n x S under linkage, else empty
    std::vector<Matrix> A;
    Matrix innovation_cov;
    std::optional<Matrix> rho;
};

struct SynthResult {
    FunctionalTimeSeries fts;
    GroundTruth truth;
};

/// `count` basis functions on `len` points x_i = (i+1)/len, Gram-Schmidt
/// orthonormalised under the rectangle weight `w`.
inline Matrix orthonormal_basis(BasisFamily family, Index len, int count, double w) {
    require(count >= 1 && count <= len, ErrorKind::usage, "basis size must lie in [1, len]");
    Matrix b(len, count);
    for (Index i = 0; i < len; ++i) {
        const double x = static_cast<double>(i + 1) / static_cast<double>(len);
        for (int k = 0; k < count; ++k)
            b(i, k) = family == BasisFamily::sinusoid ? std::sqrt(2.0) * std::sin((k + 0.5) * M_PI * x) : std::pow(x, k + 1);
    }
    for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < count; ++k) {
            for (int j = 0; j < k; ++j) b.col(k) -= (w * b.col(j).dot(b.col(k))) * b.col(j);
            const double norm = std::sqrt(w * b.col(k).squaredNorm());
            require(norm > 1e-12, ErrorKind::numerical, "basis functions are linearly dependent on this grid");
            b.col(k) /= norm;
        }
    return b;
}

namespace detail {

inline Matrix simulate_scores(const SynthSpec& spec, Rng& rng) {
    const Index K = spec.K_true;
    Matrix chol = Matrix::Identity(K, K);
    if (spec.innovation_cov.size() > 0) {
        Eigen::LLT<Matrix> llt(spec.innovation_cov);
        require(llt.info() == Eigen::Success, ErrorKind::usage, "innovation covariance must be positive definite");
        chol = llt.matrixL();
    }
    const Index p = static_cast<Index>(spec.A.size());
    const Index total = spec.n + spec.burn_in + p;
    Matrix beta = Matrix::Zero(total, K);
    for (Index t = 0; t < total; ++t) {
        Vector z(K);
        for (Index k = 0; k < K; ++k) z(k) = rng.normal();
        Vector v = chol * z;
        for (Index xi = 1; xi <= p && t - xi >= 0; ++xi) v += spec.A[static_cast<std::size_t>(xi - 1)] * beta.row(t - xi).transpose();
        beta.row(t) = v.transpose();
    }
    return beta.bottomRows(spec.n);
}

}  // namespace detail

/// Curves mean + sum_k beta_tk phi_k + noise with VAR-driven scores.
inline SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    const Index d = spec.tau - 1;
    const double w = 1.0 / static_cast<double>(spec.tau - 2);
    Rng rng(spec.seed);

    GroundTruth truth;
    truth.A = spec.A;
    truth.innovation_cov = spec.innovation_cov.size() > 0 ? spec.innovation_cov : Matrix::Identity(spec.K_true, spec.K_true);
    truth.mean.resize(d);
    for (Index i = 0; i < d; ++i) truth.mean(i) = spec.mean_amplitude * static_cast<double>(i + 1) / static_cast<double>(d);
    truth.scores = detail::simulate_scores(spec, rng);

    Matrix signal;
    if (!spec.linkage) {
        truth.eigenfunctions = orthonormal_basis(spec.basis, d, spec.K_true, w);
        signal = truth.scores * truth.eigenfunctions.transpose();
    } else {
        const auto& link = *spec.linkage;
        const Index ne = link.m - 1;
        const Index nl = d - ne;
        const Matrix early = orthonormal_basis(spec.basis, ne, spec.K_true, 1.0 / static_cast<double>(std::max<Index>(ne - 1, 1)));
        const Matrix late = orthonormal_basis(spec.basis, nl, link.late_components, 1.0 / static_cast<double>(std::max<Index>(nl - 1, 1)));
        truth.eigenfunctions = Matrix::Zero(d, spec.K_true + link.late_components);
        truth.eigenfunctions.topLeftCorner(ne, spec.K_true) = early;
        truth.eigenfunctions.bottomRightCorner(nl, link.late_components) = late;
        truth.late_scores = truth.scores * link.rho;
        for (Index t = 0; t < spec.n; ++t)
            for (Index s = 0; s < link.late_components; ++s) truth.late_scores(t, s) += link.late_innovation_sd * rng.normal();
        truth.rho = link.rho;
        signal.resize(spec.n, d);
        signal.leftCols(ne) = truth.scores * early.transpose();
        signal.rightCols(nl) = truth.late_scores * late.transpose();
    }

    Matrix values = signal.rowwise() + truth.mean.transpose();
    if (spec.noise_sd > 0.0)
        for (Index t = 0; t < spec.n; ++t)
            for (Index i = 0; i < d; ++i) values(t, i) += spec.noise_sd * rng.normal();

    return {FunctionalTimeSeries(IntradayGrid::uniform(spec.tau), std::move(values)), std::move(truth)};
}

/// FAR(1) with rank-one kernel c * phi_1 phi_1' and innovations spread over
/// the first basis functions with standard deviations `innovation_sd`.
inline SynthSpec far1_spec(Index n, int tau, double c, const std::vector<double>& innovation_sd, double noise_sd,
                           std::uint64_t seed) {
    SynthSpec s;
    s.n = n;
    s.tau = tau;
    s.K_true = static_cast<int>(innovation_sd.size());
    Matrix a = Matrix::Zero(s.K_true, s.K_true);
    a(0, 0) = c;
    s.A = {a};
    s.innovation_cov = Matrix::Zero(s.K_true, s.K_true);
    for (int k = 0; k < s.K_true; ++k) s.innovation_cov(k, k) = innovation_sd[static_cast<std::size_t>(k)] * innovation_sd[static_cast<std::size_t>(k)];
    s.noise_sd = noise_sd;
    s.seed = seed;
    return s;
}

/// Converts curves to prices with a constant opening price.
inline PriceMatrix to_prices(const FunctionalTimeSeries& fts, double open_price = 100.0) {
    return inverse_cidr(fts, Vector::Constant(fts.n(), open_price));
}

}  // namespace ifts
