#pragma once

// Intraday dynamic updating. Once the first m grid times of day n+1 are
// observed, the rest of the day is re-forecast by
//   * penalized least squares (PLS): regress the observed block on the FPCA
//     eigenfunctions while shrinking toward the TS score forecast;
//   * OLS: the lambda = 0 limit of PLS;
//   * function-on-function regression (FLR): separate FPCAs on the early and
//     late blocks linked by a least-squares score regression.
//
// Grid index convention: curve column c holds grid index c + 2, so an update
// at m observes columns [0, m-1) and forecasts columns [m-1, tau-1).

#include "ifts/common.hpp"
#include "ifts/fpca.hpp"
#include "ifts/metrics.hpp"
#include "ifts/sieve.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace ifts {

/// Columns observed before an update at grid index m.
inline Index observed_count(int m) { return m - 1; }

struct UpdateContext {
    int m = 2;            // last observed grid index, 2 <= m < tau
    Vector observed;      // X_{n+1}(u_2..u_m)
    Matrix F_e;           // (m-1) x K, eigenfunctions on the observed block
    Matrix F_l;           // (tau-m) x K, eigenfunctions on the updating grid
    Vector mean_e;        // mean on the observed block
    Vector mean_l;        // mean on the updating grid
    Vector ts_scores;     // K, TS score forecast

    Index updating_points() const { return F_l.rows(); }
};

inline UpdateContext make_update_context(const FpcaModel& fpca, int m, const Vector& observed, const Vector& ts_scores) {
    const Index d = fpca.points();
    const int tau = static_cast<int>(d) + 1;
    require(m >= 2 && m < tau, ErrorKind::usage, "update index m must satisfy 2 <= m < tau");
    const Index ne = observed_count(m);
    require(observed.size() == ne, ErrorKind::data, "observed block length must equal m - 1");
    require(ts_scores.size() == fpca.K, ErrorKind::data, "TS score forecast length must equal K");
    UpdateContext ctx;
    ctx.m = m;
    ctx.observed = observed;
    ctx.F_e = fpca.retained_eigenfunctions().topRows(ne);
    ctx.F_l = fpca.retained_eigenfunctions().bottomRows(d - ne);
    ctx.mean_e = fpca.mean.head(ne);
    ctx.mean_l = fpca.mean.tail(d - ne);
    ctx.ts_scores = ts_scores;
    return ctx;
}

// ---------------------------------------------------------------------------
// PLS / OLS

/// (F'F + lambda I)^-1 [F' x_c + lambda beta_prior], with x_c the observed
/// block minus the mean.
inline Vector pls_scores(const UpdateContext& ctx, double lambda, const Vector& prior) {
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::usage, "lambda must be finite and non-negative");
    const Index K = ctx.F_e.cols();
    Matrix lhs = ctx.F_e.transpose() * ctx.F_e;
    lhs.diagonal().array() += lambda;
    Vector rhs = ctx.F_e.transpose() * (ctx.observed - ctx.mean_e) + lambda * prior;
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(ctx.F_e);
        require(ctx.F_e.rows() >= K && qr.rank() == K, ErrorKind::numerical,
                "OLS update needs a full-column-rank observed block (m - 1 >= K); use lambda > 0");
    }
    Eigen::LLT<Matrix> llt(lhs);
    require(llt.info() == Eigen::Success, ErrorKind::numerical, "PLS normal equations are not positive definite");
    return llt.solve(rhs);
}

/// Penalized criterion ||x_c - F beta||^2 + lambda ||beta - beta_TS||^2.
inline double pls_criterion(const UpdateContext& ctx, const Vector& beta, double lambda) {
    const Vector resid = (ctx.observed - ctx.mean_e) - ctx.F_e * beta;
    return resid.squaredNorm() + lambda * (beta - ctx.ts_scores).squaredNorm();
}

inline Vector pls_update(const UpdateContext& ctx, double lambda) {
    return ctx.mean_l + ctx.F_l * pls_scores(ctx, lambda, ctx.ts_scores);
}

inline Vector ols_update(const UpdateContext& ctx) { return pls_update(ctx, 0.0); }

/// Bootstrap inputs shared by all updating-period interval computations for
/// one forecast day: TS score draws and e*_{n+1} residual curves, one row per
/// replicate.
struct BootstrapDraws {
    Matrix ts_scores;  // B x K
    Matrix residuals;  // B x d
};

inline BootstrapDraws draws_from(const SieveForecast& sf) { return {sf.future_scores, sf.future_residuals}; }

/// Pointwise (1 - alpha) intervals on the updating grid.
struct UpdateInterval {
    double alpha = 0.0;
    Vector lower;
    Vector upper;
};

/// Per replicate b, PLS with the prior replaced by the bootstrap TS scores,
/// plus the replicate's residual curve restricted to the updating grid;
/// intervals are type-7 quantiles across replicates.
inline std::vector<UpdateInterval> pls_interval_update(const UpdateContext& ctx, double lambda,
                                                       const BootstrapDraws& draws, std::span<const double> alphas) {
    const Index B = draws.ts_scores.rows();
    require(B >= 1, ErrorKind::data, "no bootstrap replicates");
    require(draws.ts_scores.cols() == ctx.F_e.cols(), ErrorKind::data, "bootstrap score width must equal K");
    const Index ne = ctx.F_e.rows();
    const Index nl = ctx.F_l.rows();
    require(draws.residuals.cols() == ne + nl, ErrorKind::data, "bootstrap residual width must equal tau - 1");

    const Index K = ctx.F_e.cols();
    Matrix lhs = ctx.F_e.transpose() * ctx.F_e;
    lhs.diagonal().array() += lambda;
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(ctx.F_e);
        require(ne >= K && qr.rank() == K, ErrorKind::numerical,
                "OLS update needs a full-column-rank observed block (m - 1 >= K); use lambda > 0");
    }
    Eigen::LLT<Matrix> llt(lhs);
    require(llt.info() == Eigen::Success, ErrorKind::numerical, "PLS normal equations are not positive definite");
    const Vector data_term = ctx.F_e.transpose() * (ctx.observed - ctx.mean_e);

    Matrix rhs = (lambda * draws.ts_scores.transpose()).colwise() + data_term;  // K x B
    Matrix beta = llt.solve(rhs);                                                 // K x B
    Matrix reps = (ctx.F_l * beta).transpose();                                   // B x nl
    reps.rowwise() += ctx.mean_l.transpose();
    reps += draws.residuals.rightCols(nl);

    std::vector<double> probs;
    for (double a : alphas) {
        probs.push_back(a / 2.0);
        probs.push_back(1.0 - a / 2.0);
    }
    Matrix q = column_quantiles(reps, probs);
    std::vector<UpdateInterval> out;
    for (std::size_t a = 0; a < alphas.size(); ++a)
        out.push_back({alphas[a], q.row(static_cast<Index>(2 * a)).transpose(), q.row(static_cast<Index>(2 * a + 1)).transpose()});
    return out;
}

// ---------------------------------------------------------------------------
// Lambda tuning

/// {0} U {10^j : j = -2..8}.
inline std::vector<double> default_lambda_grid() {
    std::vector<double> g{0.0};
    for (int j = -2; j <= 8; ++j) g.push_back(std::pow(10.0, j));
    return g;
}

/// Per-period shrinkage values: one schedule for point forecasts and one per
/// significance level for intervals.
struct LambdaSchedule {
    std::map<int, double> point;
    std::map<double, std::map<int, double>> interval;

    double point_at(int m) const {
        auto it = point.find(m);
        require(it != point.end(), ErrorKind::usage, "no point lambda for m = " + std::to_string(m));
        return it->second;
    }
    double interval_at(double alpha, int m) const {
        for (const auto& [a, sched] : interval)
            if (std::abs(a - alpha) < 1e-12) {
                auto it = sched.find(m);
                require(it != sched.end(), ErrorKind::usage, "no interval lambda for m = " + std::to_string(m));
                return it->second;
            }
        fail(ErrorKind::usage, "no interval lambda schedule at the requested level");
    }
};

/// Everything the tuner needs about one validation day: the FPCA fitted on
/// the days before it, the TS score forecast, the realised curve and
/// (for interval tuning) its bootstrap draws.
struct ValidationDay {
    const FpcaModel* fpca = nullptr;
    Vector ts_scores;
    Vector actual;
    std::optional<BootstrapDraws> draws;
};

enum class TuningObjective { msfe, interval_score };

/// For each m, the grid value minimising the objective averaged over the
/// validation days (ties to the smaller lambda). Infeasible candidates
/// (lambda = 0 with a rank-deficient observed block) are skipped.
inline std::map<int, double> tune_lambda(std::span<const ValidationDay> days, TuningObjective objective,
                                         std::span<const int> periods, std::span<const double> grid,
                                         double alpha = 0.2, int threads = 1) {
    require(!days.empty(), ErrorKind::usage, "lambda tuning needs at least one validation day");
    require(!grid.empty(), ErrorKind::usage, "empty lambda grid");
    std::vector<double> sorted_grid(grid.begin(), grid.end());
    std::sort(sorted_grid.begin(), sorted_grid.end());
    for (double l : sorted_grid) require(l >= 0.0 && std::isfinite(l), ErrorKind::usage, "lambda grid values must be finite and >= 0");
    if (objective == TuningObjective::interval_score)
        for (const auto& day : days) require(day.draws.has_value(), ErrorKind::usage, "interval tuning needs bootstrap draws");

    std::vector<double> chosen(periods.size(), sorted_grid.back());
    const double alphas[1] = {alpha};
    parallel_for(static_cast<Index>(periods.size()), threads, [&](Index pi) {
        const int m = periods[static_cast<std::size_t>(pi)];
        double best = std::numeric_limits<double>::infinity();
        for (double lambda : sorted_grid) {
            double total = 0.0;
            bool feasible = true;
            for (const auto& day : days) {
                const Index ne = observed_count(m);
                UpdateContext ctx = make_update_context(*day.fpca, m, day.actual.head(ne), day.ts_scores);
                const Vector truth = day.actual.tail(ctx.updating_points());
                try {
                    if (objective == TuningObjective::msfe) {
                        total += (truth - pls_update(ctx, lambda)).squaredNorm() / static_cast<double>(truth.size());
                    } else {
                        auto iv = pls_interval_update(ctx, lambda, *day.draws, alphas);
                        double s = 0.0;
                        for (Index i = 0; i < truth.size(); ++i) s += interval_score(iv[0].lower(i), iv[0].upper(i), truth(i), alpha);
                        total += s / static_cast<double>(truth.size());
                    }
                } catch (const Error&) {
                    feasible = false;
                    break;
                }
            }
            if (!feasible) continue;
            const double avg = total / static_cast<double>(days.size());
            if (avg < best) {
                best = avg;
                chosen[static_cast<std::size_t>(pi)] = lambda;
            }
        }
    });
    std::map<int, double> out;
    for (std::size_t i = 0; i < periods.size(); ++i) out[periods[i]] = chosen[i];
    return out;
}

// ---------------------------------------------------------------------------
// FLR

struct FlrModel {
    int m = 2;
    int R = 1;
    int S = 1;
    FpcaModel early;  // FPCA on columns [0, m-1)
    FpcaModel late;   // FPCA on columns [m-1, d)
    Matrix rho;       // R x S
    bool ridge = false;

    Matrix theta() const { return early.retained_scores(); }
    Matrix vartheta() const { return late.retained_scores(); }
};

/// Rectangle-rule weight for a block of `len` grid points.
inline double block_weight(Index len) { return 1.0 / static_cast<double>(std::max<Index>(len - 1, 1)); }

/// (theta' theta)^-1 theta' vartheta, falling back to a ridge of 1e-8 * trace
/// when the normal matrix is singular.
inline Matrix link_scores(const Matrix& theta, const Matrix& vartheta, bool* ridge = nullptr) {
    Matrix gram = theta.transpose() * theta;
    Matrix rhs = theta.transpose() * vartheta;
    Eigen::LDLT<Matrix> ldlt(gram);
    bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive();
    if (!singular) {
        const Vector dvals = ldlt.vectorD().cwiseAbs();
        singular = !(dvals.minCoeff() > 1e-12 * std::max(dvals.maxCoeff(), 1e-300));
    }
    if (singular) {
        gram.diagonal().array() += 1e-8 * std::max(gram.trace(), 1e-300);
        if (ridge) *ridge = true;
        return gram.ldlt().solve(rhs);
    }
    if (ridge) *ridge = false;
    return ldlt.solve(rhs);
}

inline FlrModel flr_fit(const Matrix& values, int m) {
    const Index d = values.cols();
    const int tau = static_cast<int>(d) + 1;
    require(m >= 2 && m < tau, ErrorKind::usage, "split index m must satisfy 2 <= m < tau");
    const Index ne = observed_count(m);
    const Index nl = d - ne;
    FlrModel f;
    f.m = m;
    f.early = fit_fpca(values.leftCols(ne), block_weight(ne));
    f.late = fit_fpca(values.rightCols(nl), block_weight(nl));
    f.R = f.early.K;
    f.S = f.late.K;
    require(values.rows() >= f.R + f.S + 1, ErrorKind::data, "FLR needs n >= R + S + 1 curves");
    f.rho = link_scores(f.theta(), f.vartheta(), &f.ridge);
    return f;
}

/// Late-block forecast mean_l + Phi_l rho' theta_{n+1}.
inline Vector flr_update(const FlrModel& model, const Vector& observed) {
    const Vector theta = project_scores(model.early, observed);
    return model.late.mean + model.late.retained_eigenfunctions() * (model.rho.transpose() * theta);
}

/// Per replicate b: project pseudo-series b onto the fitted early/late
/// eigenfunctions, re-estimate rho*, forecast from the observed block and add
/// the replicate's residual curve restricted to the late block.
inline std::vector<UpdateInterval> flr_interval_update(const FlrModel& model, const Vector& observed,
                                                       std::span<const Matrix> pseudo_series, const Matrix& residuals,
                                                       std::span<const double> alphas, bool* ridge_used = nullptr) {
    const Index B = static_cast<Index>(pseudo_series.size());
    require(B >= 1, ErrorKind::data, "no bootstrap pseudo-series");
    require(residuals.rows() == B, ErrorKind::data, "one residual curve per pseudo-series is required");
    const Index ne = observed_count(model.m);
    const Index nl = model.late.points();
    const Vector theta_next = project_scores(model.early, observed);
    const Matrix phi_e = model.early.retained_eigenfunctions();
    const Matrix phi_l = model.late.retained_eigenfunctions();

    Matrix reps(B, nl);
    bool any_ridge = false;
    for (Index b = 0; b < B; ++b) {
        const Matrix& xs = pseudo_series[static_cast<std::size_t>(b)];
        require(xs.cols() == ne + nl, ErrorKind::data, "pseudo-series width must equal tau - 1");
        Matrix theta = model.early.quad_weight * (xs.leftCols(ne).rowwise() - model.early.mean.transpose()) * phi_e;
        Matrix vartheta = model.late.quad_weight * (xs.rightCols(nl).rowwise() - model.late.mean.transpose()) * phi_l;
        bool ridge = false;
        Matrix rho = link_scores(theta, vartheta, &ridge);
        any_ridge = any_ridge || ridge;
        reps.row(b) = (model.late.mean + phi_l * (rho.transpose() * theta_next)).transpose() + residuals.row(b).tail(nl);
    }
    if (ridge_used) *ridge_used = any_ridge;

    std::vector<double> probs;
    for (double a : alphas) {
        probs.push_back(a / 2.0);
        probs.push_back(1.0 - a / 2.0);
    }
    Matrix q = column_quantiles(reps, probs);
    std::vector<UpdateInterval> out;
    for (std::size_t a = 0; a < alphas.size(); ++a)
        out.push_back({alphas[a], q.row(static_cast<Index>(2 * a)).transpose(), q.row(static_cast<Index>(2 * a + 1)).transpose()});
    return out;
}

}  // namespace ifts
