#pragma once

// Sieve bootstrap for one-step-ahead functional forecasts.
//
// Pseudo curve series are regenerated by running the fitted score VAR
// backward in time with transferred innovations, then adding whole resampled
// residual curves. Each pseudo-series is forecast with FAR(1); the spread of
// (pseudo future - pseudo forecast) gives pointwise intervals and, through
// the sup of the standardised error, a uniform band.

#include "ifts/common.hpp"
#include "ifts/fpca.hpp"
#include "ifts/var.hpp"

#include <cstdint>
#include <vector>

namespace ifts {

enum class IntervalCenter { far1, ts };

struct BootstrapConfig {
    int B = 400;
    std::uint64_t seed = 20211223;
    std::vector<double> alpha_levels{0.2, 0.05};
    IntervalCenter center = IntervalCenter::far1;
    int threads = 0;            // 0: hardware concurrency
    bool keep_pseudo_series = false;

    void validate() const {
        require(B >= 1, ErrorKind::usage, "bootstrap replicate count B must be at least 1");
        require(!alpha_levels.empty(), ErrorKind::usage, "at least one significance level is required");
        for (double a : alpha_levels) require(a > 0.0 && a < 1.0, ErrorKind::usage, "significance levels must lie in (0, 1)");
    }
};

/// One-step point forecast: mean + Phi_K * (VAR h=1 forecast of the scores).
inline Vector ts_point_forecast(const FpcaModel& fpca, const VarModel& var) {
    require(var.K == fpca.K, ErrorKind::usage, "VAR dimension must equal the retained component count");
    Matrix next = forecast_scores(var, fpca.retained_scores(), 1);
    return reconstruct(fpca, next.row(0).transpose());
}

// ---------------------------------------------------------------------------
// FAR(1)

/// x_{n+1} = mean + op * (x_n - mean), where op realises Gamma(1) Gamma(0)^-
/// with Gamma(0) truncated to its J leading eigenpairs.
struct Far1Predictor {
    Vector mean;
    Matrix op;  // d x d acting on grid coordinates
    int J = 1;

    Vector predict(const Vector& last) const { return mean + op * (last - mean); }

    /// Operator norm on L2 of the grid; equal to the spectral norm of `op`
    /// because the rectangle-rule inner product is a multiple of the Euclidean one.
    double operator_norm() const {
        Eigen::JacobiSVD<Matrix> svd(op);
        return svd.singularValues()(0);
    }
};

inline Far1Predictor far1_fit(const Matrix& values, double w) {
    const Index n = values.rows();
    const Index d = values.cols();
    require(n >= 3, ErrorKind::data, "FAR(1) needs at least 3 curves");
    Far1Predictor f;
    f.mean = values.colwise().mean().transpose();
    Matrix c = values.rowwise() - f.mean.transpose();

    Matrix gamma0 = (w / static_cast<double>(n)) * (c.transpose() * c);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma0);
    require(eig.info() == Eigen::Success, ErrorKind::numerical, "FAR(1) eigendecomposition failed");
    const Index r = std::min(n - 1, d);
    Vector lambda(r);
    for (Index k = 0; k < r; ++k) lambda(k) = std::max(eig.eigenvalues()(d - 1 - k), 0.0);
    if (!(lambda(0) > 0.0)) {
        f.J = 0;
        f.op = Matrix::Zero(d, d);
        return f;
    }
    for (Index k = 0; k < r; ++k)
        if (lambda(k) < 1e-12 * lambda(0)) lambda(k) = 0.0;
    f.J = select_components(lambda, n).K;

    // eigenfunctions phi_j = v_j / sqrt(w); scores s_tj = w c_t' phi_j
    Matrix phi(d, f.J);
    for (int j = 0; j < f.J; ++j) phi.col(j) = eig.eigenvectors().col(d - 1 - j) / std::sqrt(w);
    Matrix s = w * c * phi;  // n x J
    // Gamma(1) applied to phi_j: (1/n) sum_{t<n} <c_t, phi_j> c_{t+1}
    Matrix cross = (c.bottomRows(n - 1).transpose() * s.topRows(n - 1)) / static_cast<double>(n);  // d x J
    Vector inv = lambda.head(f.J).cwiseInverse();
    f.op = cross * inv.asDiagonal() * (w * phi.transpose());
    return f;
}

// ---------------------------------------------------------------------------
// Pseudo-series

struct PseudoSeries {
    Matrix curves;          // n x d
    Vector future;          // d, X*_{n+1}
    Vector future_scores;   // K, beta*_{n+1} from the forward recursion
    Vector future_residual; // d, e*_{n+1}
};

/// Centered residual-curve pool {e_t - e_bar}.
inline Matrix centered_residual_pool(const FpcaModel& fpca) {
    Matrix pool = fpca.residuals;
    pool.rowwise() -= fpca.residuals.colwise().mean();
    return pool;
}

namespace detail {

inline PseudoSeries generate_pseudo_series(const FpcaModel& fpca, const VarModel& var, const Matrix& eps_pool,
                                           const Matrix& curve_pool, std::uint64_t seed, Index replicate) {
    const Index n = fpca.n();
    const Index p = var.p;
    const Index K = fpca.K;
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(replicate));
    const Matrix observed = fpca.retained_scores();

    Matrix eps(n - p, K);
    for (Index t = 0; t < n - p; ++t) eps.row(t) = eps_pool.row(rng.index(eps_pool.rows()));
    Matrix eta = backward_innovation_transfer(var, eps, rng);

    Matrix beta(n, K);
    beta.bottomRows(p) = observed.bottomRows(p);
    for (Index t = n - p - 1; t >= 0; --t) {
        Vector v = eta.row(t).transpose();
        for (Index xi = 1; xi <= p; ++xi) v += var.B[static_cast<std::size_t>(xi - 1)] * beta.row(t + xi).transpose();
        beta.row(t) = v.transpose();
    }

    PseudoSeries out;
    out.curves = beta * fpca.retained_eigenfunctions().transpose();
    for (Index t = 0; t < n; ++t) out.curves.row(t) += fpca.mean.transpose() + curve_pool.row(rng.index(curve_pool.rows()));

    Vector next = eps_pool.row(rng.index(eps_pool.rows())).transpose();
    for (Index xi = 1; xi <= p; ++xi) next += var.A[static_cast<std::size_t>(xi - 1)] * observed.row(n - xi).transpose();
    out.future_scores = next;
    out.future_residual = curve_pool.row(rng.index(curve_pool.rows())).transpose();
    out.future = reconstruct(fpca, next) + out.future_residual;
    return out;
}

}  // namespace detail

/// Replicate `replicate` of the sieve bootstrap. Its random stream is derived
/// from (cfg.seed, replicate) alone.
inline PseudoSeries generate_pseudo_series(const FpcaModel& fpca, const VarModel& var, const BootstrapConfig& cfg,
                                           Index replicate) {
    require(var.K == fpca.K, ErrorKind::usage, "VAR dimension must equal the retained component count");
    return detail::generate_pseudo_series(fpca, var, var.centered_forward_residuals(), centered_residual_pool(fpca),
                                          cfg.seed, replicate);
}

// ---------------------------------------------------------------------------
// Intervals and bands

struct PointwiseInterval {
    double alpha = 0.0;
    Vector lower;
    Vector upper;
};

struct UniformBand {
    double alpha = 0.0;
    double radius_factor = 0.0;  // Q*_{1-alpha}
    Vector lower;
    Vector upper;
};

struct SieveForecast {
    Vector point;             // interval center
    Vector ts_point;          // TS (FPCA + VAR) forecast
    Vector far1_point;        // FAR(1) forecast from the original series
    Matrix replicates_future; // B x d, X*_{n+1}
    Matrix replicates_pred;   // B x d, FAR(1) forecast of each pseudo-series
    Matrix future_scores;     // B x K, bootstrap TS score draws
    Matrix future_residuals;  // B x d, e*_{n+1} per replicate
    Vector error_sd;          // d, sigma*(u)
    Vector sup_statistic;     // B, M*_b
    std::vector<PointwiseInterval> pointwise;
    std::vector<UniformBand> band;
    bool degenerate = false;  // some sigma*(u) was floored
    std::vector<Matrix> pseudo_series;  // filled when cfg.keep_pseudo_series

    const PointwiseInterval& pointwise_at(double alpha) const {
        for (const auto& pi : pointwise)
            if (std::abs(pi.alpha - alpha) < 1e-12) return pi;
        fail(ErrorKind::usage, "no pointwise interval at the requested level");
    }
    const UniformBand& band_at(double alpha) const {
        for (const auto& b : band)
            if (std::abs(b.alpha - alpha) < 1e-12) return b;
        fail(ErrorKind::usage, "no uniform band at the requested level");
    }
};

/// Builds pointwise intervals and uniform bands from bootstrap prediction
/// errors around `center`.
inline void summarise_errors(SieveForecast& out, const Matrix& errors, const Vector& center,
                             const std::vector<double>& alphas) {
    const Index B = errors.rows();
    const Index d = errors.cols();
    out.error_sd = Vector::Zero(d);
    if (B > 1) {
        const Vector mu = errors.colwise().mean().transpose();
        for (Index i = 0; i < d; ++i)
            out.error_sd(i) = std::sqrt((errors.col(i).array() - mu(i)).square().sum() / static_cast<double>(B - 1));
    }
    constexpr double kFloor = 1e-12;
    out.degenerate = false;
    out.sup_statistic = Vector::Zero(B);
    for (Index i = 0; i < d; ++i) {
        double sd = out.error_sd(i);
        if (sd < kFloor) {
            sd = kFloor;
            out.degenerate = true;
        }
        for (Index b = 0; b < B; ++b) out.sup_statistic(b) = std::max(out.sup_statistic(b), std::abs(errors(b, i)) / sd);
    }

    std::vector<double> probs;
    for (double a : alphas) {
        probs.push_back(a / 2.0);
        probs.push_back(1.0 - a / 2.0);
    }
    Matrix shifted = errors.rowwise() + center.transpose();
    Matrix q = column_quantiles(shifted, probs);

    std::vector<double> sup(out.sup_statistic.data(), out.sup_statistic.data() + B);
    std::sort(sup.begin(), sup.end());

    out.pointwise.clear();
    out.band.clear();
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        out.pointwise.push_back({alphas[a], q.row(static_cast<Index>(2 * a)).transpose(),
                                 q.row(static_cast<Index>(2 * a + 1)).transpose()});
        UniformBand band;
        band.alpha = alphas[a];
        band.radius_factor = quantile_sorted(sup, 1.0 - alphas[a]);
        band.lower = center - band.radius_factor * out.error_sd;
        band.upper = center + band.radius_factor * out.error_sd;
        out.band.push_back(std::move(band));
    }
}

/// Full sieve bootstrap: B pseudo-series, FAR(1) per replicate, then
/// pointwise intervals and uniform bands at each configured level.
/// `values` are the curves `fpca` and `var` were fitted on.
inline SieveForecast sieve_prediction(const Matrix& values, const FpcaModel& fpca, const VarModel& var,
                                      const BootstrapConfig& cfg) {
    cfg.validate();
    require(values.rows() == fpca.n() && values.cols() == fpca.points(), ErrorKind::usage,
            "curves do not match the FPCA fit");
    require(var.K == fpca.K, ErrorKind::usage, "VAR dimension must equal the retained component count");
    require(var.stationary(), ErrorKind::numerical,
            "VAR model is not stationary (companion spectral radius " + std::to_string(var.spectral_radius) +
                "); sieve bootstrap unavailable");

    const Index B = cfg.B;
    const Index d = fpca.points();
    const Index n = fpca.n();
    const double w = fpca.quad_weight;
    const Vector last = values.row(n - 1).transpose();
    const Matrix eps_pool = var.centered_forward_residuals();
    const Matrix curve_pool = centered_residual_pool(fpca);

    SieveForecast out;
    out.ts_point = ts_point_forecast(fpca, var);
    out.far1_point = far1_fit(values, w).predict(last);
    out.point = cfg.center == IntervalCenter::far1 ? out.far1_point : out.ts_point;
    out.replicates_future.resize(B, d);
    out.replicates_pred.resize(B, d);
    out.future_scores.resize(B, fpca.K);
    out.future_residuals.resize(B, d);
    if (cfg.keep_pseudo_series) out.pseudo_series.resize(static_cast<std::size_t>(B));

    parallel_for(B, cfg.threads, [&](Index b) {
        PseudoSeries ps = detail::generate_pseudo_series(fpca, var, eps_pool, curve_pool, cfg.seed, b);
        // the bootstrap operator is applied to the observed last curve
        Far1Predictor far = far1_fit(ps.curves, w);
        out.replicates_future.row(b) = ps.future.transpose();
        out.replicates_pred.row(b) = far.predict(last).transpose();
        out.future_scores.row(b) = ps.future_scores.transpose();
        out.future_residuals.row(b) = ps.future_residual.transpose();
        if (cfg.keep_pseudo_series) out.pseudo_series[static_cast<std::size_t>(b)] = std::move(ps.curves);
    });

    Matrix errors = out.replicates_future - out.replicates_pred;
    summarise_errors(out, errors, out.point, cfg.alpha_levels);
    return out;
}

}  // namespace ifts
