#pragma once

// Functional principal component analysis on a common discrete grid.
//
// Inner products use the rectangle rule <f, g> = w * sum_i f(u_i) g(u_i).
// The covariance operator is discretised as w * S with S = C'C / n, so the
// eigenvectors v of w * S give eigenfunctions phi = v / sqrt(w) that are
// w-orthonormal, and scores beta = w * C * phi.

#include "ifts/common.hpp"
#include "ifts/gridcurves.hpp"

#include <optional>

namespace ifts {

struct FpcaModel {
    Vector mean;             // d
    Matrix eigenfunctions;   // d x K_full, w-orthonormal columns
    Vector eigenvalues;      // min(n - 1, d), non-increasing, clipped entries are 0
    Matrix scores;           // n x K_full
    int K = 1;               // retained components
    bool degenerate = false; // no positive eigenvalue; K forced to 1
    Matrix residuals;        // n x d, remainder after K components
    double quad_weight = 1.0;

    Index points() const { return mean.size(); }
    Index n() const { return scores.rows(); }
    int full_rank() const { return static_cast<int>(eigenfunctions.cols()); }
    auto retained_eigenfunctions() const { return eigenfunctions.leftCols(K); }
    auto retained_scores() const { return scores.leftCols(K); }
};

struct ComponentSelection {
    int K = 1;
    bool degenerate = false;
};

/// Eigenvalue-ratio selector. Minimises, over 1 <= k <= k_max,
///   (l_{k+1}/l_k) * 1(l_k/l_1 >= v) + 1(l_k/l_1 < v),
/// with v = 1/ln(max(l_1, n)) and k_max = #{k : l_k >= sum(l)/n}. Ties go to
/// the smallest k. When l_{k+1} lies past the end of the supplied spectrum the
/// ratio is taken as 1 (no evidence of a gap).
inline ComponentSelection select_components(const Vector& eigenvalues, Index n) {
    require(eigenvalues.size() >= 1, ErrorKind::data, "component selection needs at least one eigenvalue");
    const double l1 = eigenvalues(0);
    if (!(l1 > 0.0)) return {1, true};
    const double upsilon = 1.0 / std::log(std::max(l1, static_cast<double>(n)));
    const double mean_level = eigenvalues.sum() / static_cast<double>(n);
    Index k_max = 0;
    for (Index k = 0; k < eigenvalues.size(); ++k)
        if (eigenvalues(k) >= mean_level) ++k_max;
    k_max = std::max<Index>(k_max, 1);

    int best = 1;
    double best_value = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < k_max; ++k) {
        const double lk = eigenvalues(k);
        double value;
        if (lk / l1 < upsilon) {
            value = 1.0;
        } else {
            const double next = k + 1 < eigenvalues.size() ? eigenvalues(k + 1) : lk;
            value = next / lk;
        }
        if (value < best_value) {
            best_value = value;
            best = static_cast<int>(k + 1);
        }
    }
    return {best, false};
}

/// Smallest K whose leading eigenvalues explain at least `threshold` of the
/// total variance.
inline int select_components_by_variance(const Vector& eigenvalues, double threshold = 0.85) {
    require(threshold > 0.0 && threshold <= 1.0, ErrorKind::usage, "variance threshold must lie in (0, 1]");
    const double total = eigenvalues.sum();
    if (!(total > 0.0)) return 1;
    double acc = 0.0;
    for (Index k = 0; k < eigenvalues.size(); ++k) {
        acc += eigenvalues(k);
        if (acc >= threshold * total - 1e-15 * total) return static_cast<int>(k + 1);
    }
    return static_cast<int>(eigenvalues.size());
}

namespace detail {

/// Deterministic sign: non-negative integral, or a positive first nonzero
/// coordinate when the integral vanishes.
inline void fix_sign(Eigen::Ref<Vector> phi) {
    const double scale = phi.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) return;
    const double integral = phi.sum();
    bool flip;
    if (std::abs(integral) > 1e-10 * phi.cwiseAbs().sum()) {
        flip = integral < 0.0;
    } else {
        flip = false;
        for (Index i = 0; i < phi.size(); ++i)
            if (std::abs(phi(i)) > 1e-12 * scale) {
                flip = phi(i) < 0.0;
                break;
            }
    }
    if (flip) phi = -phi;
}

}  // namespace detail

inline Matrix compute_residuals(const Matrix& values, const Vector& mean, const Matrix& eigenfunctions,
                                const Matrix& scores, int K) {
    Matrix fitted = scores.leftCols(K) * eigenfunctions.leftCols(K).transpose();
    fitted.rowwise() += mean.transpose();
    return values - fitted;
}

/// Fits FPCA to the rows of `values` with quadrature weight w. K is chosen by
/// the eigenvalue-ratio rule unless `fixed_K` is given.
inline FpcaModel fit_fpca(const Matrix& values, double w, std::optional<int> fixed_K = std::nullopt) {
    const Index n = values.rows();
    const Index d = values.cols();
    require(n >= 2, ErrorKind::data, "FPCA needs at least 2 curves");
    require(d >= 1, ErrorKind::data, "FPCA needs at least 1 grid point");
    require(values.allFinite(), ErrorKind::data, "FPCA input contains non-finite values");
    require(w > 0.0, ErrorKind::usage, "quadrature weight must be positive");

    FpcaModel model;
    model.quad_weight = w;
    model.mean = values.colwise().mean().transpose();
    Matrix centered = values.rowwise() - model.mean.transpose();

    Matrix cov = (w / static_cast<double>(n)) * (centered.transpose() * centered);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    require(eig.info() == Eigen::Success, ErrorKind::numerical, "covariance eigendecomposition failed");

    const Index r = std::min(n - 1, d);
    model.eigenvalues.resize(r);
    for (Index k = 0; k < r; ++k) model.eigenvalues(k) = std::max(eig.eigenvalues()(d - 1 - k), 0.0);
    const double l1 = model.eigenvalues(0);
    Index rank = 0;
    for (Index k = 0; k < r; ++k) {
        if (l1 > 0.0 && model.eigenvalues(k) >= 1e-12 * l1)
            ++rank;
        else
            model.eigenvalues(k) = 0.0;
    }
    const Index kept = std::max<Index>(rank, 1);
    model.eigenfunctions.resize(d, kept);
    for (Index k = 0; k < kept; ++k) {
        model.eigenfunctions.col(k) = eig.eigenvectors().col(d - 1 - k) / std::sqrt(w);
        detail::fix_sign(model.eigenfunctions.col(k));
    }
    model.scores = w * centered * model.eigenfunctions;
    if (rank == 0) model.scores.setZero();

    if (fixed_K) {
        require(*fixed_K >= 1, ErrorKind::usage, "K must be at least 1");
        model.K = static_cast<int>(std::min<Index>(*fixed_K, kept));
        model.degenerate = rank == 0;
    } else {
        auto sel = select_components(model.eigenvalues, n);
        model.K = static_cast<int>(std::min<Index>(sel.K, kept));
        model.degenerate = sel.degenerate;
    }
    model.residuals = compute_residuals(values, model.mean, model.eigenfunctions, model.scores, model.K);
    return model;
}

inline FpcaModel fit_fpca(const FunctionalTimeSeries& fts, std::optional<int> fixed_K = std::nullopt) {
    return fit_fpca(fts.values(), fts.quad_weight(), fixed_K);
}

/// Copy of `model` truncated at a different K (residuals recomputed).
inline FpcaModel with_components(const FpcaModel& model, const Matrix& values, int K) {
    require(K >= 1 && K <= model.full_rank(), ErrorKind::usage, "K outside [1, K_full]");
    FpcaModel out = model;
    out.K = K;
    out.residuals = compute_residuals(values, model.mean, model.eigenfunctions, model.scores, K);
    return out;
}

/// Scores of `curve` on the K retained eigenfunctions.
inline Vector project_scores(const FpcaModel& model, const Vector& curve) {
    require(curve.size() == model.points(), ErrorKind::data, "curve length does not match the FPCA grid");
    require(curve.allFinite(), ErrorKind::data, "curve contains non-finite values");
    return model.quad_weight * model.retained_eigenfunctions().transpose() * (curve - model.mean);
}

/// Mean plus the score-weighted retained eigenfunctions.
inline Vector reconstruct(const FpcaModel& model, const Vector& scores) {
    require(scores.size() == model.K, ErrorKind::data, "score vector length must equal K");
    return model.mean + model.retained_eigenfunctions() * scores;
}

}  // namespace ifts
