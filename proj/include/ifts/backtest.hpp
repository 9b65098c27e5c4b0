#pragma once

// Expanding-window evaluation of TS forecasts, sieve intervals and the
// intraday updating methods.

#include "ifts/common.hpp"
#include "ifts/fpca.hpp"
#include "ifts/metrics.hpp"
#include "ifts/sieve.hpp"
#include "ifts/updating.hpp"
#include "ifts/var.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ifts {

enum class Method { ts, pls, ols, flr };

inline const char* method_name(Method m) {
    switch (m) {
    case Method::ts: return "TS";
    case Method::pls: return "PLS";
    case Method::ols: return "OLS";
    case Method::flr: return "FLR";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    std::string u;
    for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (u == "TS") return Method::ts;
    if (u == "PLS") return Method::pls;
    if (u == "OLS") return Method::ols;
    if (u == "FLR") return Method::flr;
    fail(ErrorKind::usage, "unknown method \"" + s + "\" (expected TS, PLS, OLS or FLR)");
}

struct TuningPlan {
    Index train = 150;
    Index validation = 50;
    std::vector<double> lambda_grid = default_lambda_grid();
};

struct BacktestPlan {
    Index initial_train = 200;
    Index n_test = 50;
    std::vector<Method> methods{Method::ts, Method::pls, Method::ols, Method::flr};
    std::vector<int> periods;  // empty: every m in 2..tau-1
    BootstrapConfig bootstrap;
    int p_max = 10;
    std::optional<int> fixed_K;
    bool rolling = false;
    TuningPlan tuning;
    std::optional<LambdaSchedule> lambdas;  // pre-tuned schedule; tuned internally when absent

    bool has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }
    bool updating() const { return has(Method::pls) || has(Method::ols) || has(Method::flr); }

    std::vector<int> resolved_periods(int tau) const {
        if (!periods.empty()) return periods;
        std::vector<int> all;
        for (int m = 2; m <= tau - 1; ++m) all.push_back(m);
        return all;
    }

    void validate(Index n, int tau) const {
        bootstrap.validate();
        require(!methods.empty(), ErrorKind::usage, "backtest needs at least one method");
        require(initial_train >= 3, ErrorKind::usage, "initial training window must hold at least 3 days");
        require(n_test >= 1, ErrorKind::usage, "n_test must be at least 1");
        require(initial_train + n_test <= n, ErrorKind::usage,
                "initial_train + n_test = " + std::to_string(initial_train + n_test) + " exceeds the " +
                    std::to_string(n) + " available days");
        for (int m : periods) require(m >= 2 && m < tau, ErrorKind::usage, "updating periods must satisfy 2 <= m < tau");
        if (has(Method::pls) && !lambdas) {
            require(tuning.train >= 3 && tuning.validation >= 1, ErrorKind::usage, "invalid tuning split");
            require(tuning.train + tuning.validation <= initial_train, ErrorKind::usage,
                    "lambda tuning must use only days before the test window (train + validation <= initial_train)");
            require(!tuning.lambda_grid.empty(), ErrorKind::usage, "empty lambda grid");
        }
    }
};

struct IntervalSummary {
    double alpha = 0.0;
    double ecp_pointwise = 0.0;
    std::optional<double> ecp_uniform;
    Vector score_by_point;
    double mean_score = 0.0;
};

struct MethodSummary {
    Method method = Method::ts;
    double msfe = 0.0;
    Vector msfe_by_point;
    std::vector<IntervalSummary> intervals;
};

struct PeriodMethodMetrics {
    double msfe = 0.0;
    double sign_probability = 0.0;
    std::vector<IntervalSummary> intervals;  // ecp_pointwise and mean_score per alpha
};

struct PeriodMetrics {
    int m = 2;
    std::map<Method, PeriodMethodMetrics> methods;
};

struct SkippedDay {
    Index day = 0;
    std::string reason;
};

struct MetricReport {
    std::vector<double> alphas;
    std::vector<Index> evaluated_days;
    std::vector<SkippedDay> skipped;
    std::vector<int> selected_K;
    std::vector<int> selected_p;
    MethodSummary ts_summary;                // TS over the whole curve
    std::vector<MethodSummary> method_summaries;   // per method, averaged over updating periods
    std::vector<PeriodMetrics> periods;  // empty when no updating method is requested
    std::optional<LambdaSchedule> lambdas;
};

/// One day's TS forecast with its sieve bootstrap.
struct DayForecast {
    FpcaModel fpca;
    VarModel var;
    SieveForecast sieve;
    Vector ts_scores;
};

inline DayForecast forecast_day(const Matrix& history, double w, const BootstrapConfig& cfg, int p_max,
                                std::optional<int> fixed_K) {
    DayForecast f;
    f.fpca = fit_fpca(history, w, fixed_K);
    const Matrix scores = f.fpca.retained_scores();
    f.var = fit_var(scores, select_order(scores, p_max));
    f.ts_scores = forecast_scores(f.var, scores, 1).row(0).transpose();
    f.sieve = sieve_prediction(history, f.fpca, f.var, cfg);
    return f;
}

namespace detail {

struct PeriodForecast {
    Vector point;
    std::vector<UpdateInterval> intervals;
};

struct DayOutcome {
    bool ok = false;
    std::string error;
    Vector actual;
    Vector ts_point;
    std::vector<PointwiseInterval> pointwise;
    std::vector<UniformBand> bands;
    int K = 0;
    int p = 0;
    std::map<int, std::map<Method, PeriodForecast>> periods;
};

inline Index window_begin(const BacktestPlan& plan, Index day) {
    return plan.rolling ? std::max<Index>(0, day - plan.initial_train) : 0;
}

inline BootstrapConfig day_config(const BacktestPlan& plan, Index day, bool keep_pseudo) {
    BootstrapConfig cfg = plan.bootstrap;
    cfg.seed = derive_seed(plan.bootstrap.seed, static_cast<std::uint64_t>(day));
    cfg.keep_pseudo_series = keep_pseudo;
    return cfg;
}

inline std::vector<UpdateInterval> restrict_intervals(const std::vector<PointwiseInterval>& full, Index offset) {
    std::vector<UpdateInterval> out;
    for (const auto& pi : full)
        out.push_back({pi.alpha, pi.lower.tail(pi.lower.size() - offset), pi.upper.tail(pi.upper.size() - offset)});
    return out;
}

inline LambdaSchedule tune_schedules(const Matrix& values, double w, const BacktestPlan& plan, const std::vector<int>& periods) {
    const Index begin = plan.tuning.train;
    const Index end = plan.tuning.train + plan.tuning.validation;
    std::vector<DayForecast> fits;
    std::vector<Vector> actuals;
    for (Index day = begin; day < end; ++day) {
        try {
            const Index start = plan.rolling ? std::max<Index>(0, day - plan.tuning.train) : 0;
            fits.push_back(forecast_day(values.middleRows(start, day - start), w, day_config(plan, day, false), plan.p_max,
                                        plan.fixed_K));
            actuals.push_back(values.row(day).transpose());
        } catch (const Error&) {
            // an unusable validation day is left out of tuning
        }
    }
    require(!fits.empty(), ErrorKind::numerical, "every validation day failed; cannot tune lambda");
    std::vector<ValidationDay> days;
    for (std::size_t i = 0; i < fits.size(); ++i)
        days.push_back({&fits[i].fpca, fits[i].ts_scores, actuals[i], draws_from(fits[i].sieve)});

    LambdaSchedule sched;
    sched.point = tune_lambda(days, TuningObjective::msfe, periods, plan.tuning.lambda_grid, 0.2, plan.bootstrap.threads);
    for (double a : plan.bootstrap.alpha_levels)
        sched.interval[a] = tune_lambda(days, TuningObjective::interval_score, periods, plan.tuning.lambda_grid, a,
                                        plan.bootstrap.threads);
    return sched;
}

inline DayOutcome evaluate_day(const Matrix& values, double w, const BacktestPlan& plan, Index day,
                               const std::vector<int>& periods, const std::optional<LambdaSchedule>& lambdas) {
    DayOutcome out;
    out.actual = values.row(day).transpose();
    const bool updating = plan.updating();
    const Index begin = window_begin(plan, day);
    const Matrix history = values.middleRows(begin, day - begin);
    DayForecast f = forecast_day(history, w, day_config(plan, day, updating && plan.has(Method::flr)), plan.p_max, plan.fixed_K);
    out.K = f.fpca.K;
    out.p = f.var.p;
    out.ts_point = f.sieve.ts_point;
    out.pointwise = f.sieve.pointwise;
    out.bands = f.sieve.band;
    if (!updating) {
        out.ok = true;
        return out;
    }

    const auto& alphas = plan.bootstrap.alpha_levels;
    const BootstrapDraws draws = draws_from(f.sieve);
    for (int m : periods) {
        const Index ne = observed_count(m);
        const Vector observed = out.actual.head(ne);
        auto& slot = out.periods[m];
        UpdateContext ctx = make_update_context(f.fpca, m, observed, f.ts_scores);
        slot[Method::ts] = {f.sieve.ts_point.tail(ctx.updating_points()), restrict_intervals(f.sieve.pointwise, ne)};
        if (plan.has(Method::pls)) {
            PeriodForecast pf;
            pf.point = pls_update(ctx, lambdas->point_at(m));
            for (double a : alphas) {
                const double one[1] = {a};
                pf.intervals.push_back(pls_interval_update(ctx, lambdas->interval_at(a, m), draws, one).front());
            }
            slot[Method::pls] = std::move(pf);
        }
        if (plan.has(Method::ols) && ne >= f.fpca.K) {
            try {
                slot[Method::ols] = {ols_update(ctx), pls_interval_update(ctx, 0.0, draws, alphas)};
            } catch (const Error&) {
                // rank-deficient observed block: OLS undefined at this m
            }
        }
        if (plan.has(Method::flr)) {
            FlrModel flr = flr_fit(history, m);
            slot[Method::flr] = {flr_update(flr, observed),
                                 flr_interval_update(flr, observed, f.sieve.pseudo_series, f.sieve.future_residuals, alphas)};
        }
    }
    out.ok = true;
    return out;
}

inline Matrix stack_rows(const std::vector<Vector>& rows) {
    Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Index>(i)) = rows[i].transpose();
    return m;
}

}  // namespace detail

/// Runs the expanding-window backtest. Deterministic given the plan's seed;
/// results do not depend on the thread count.
inline MetricReport run_backtest(const FunctionalTimeSeries& fts, const BacktestPlan& plan) {
    const int tau = fts.grid().tau();
    plan.validate(fts.n(), tau);
    const Matrix& values = fts.values();
    const double w = fts.quad_weight();
    const std::vector<int> periods = plan.updating() ? plan.resolved_periods(tau) : std::vector<int>{};

    MetricReport report;
    report.alphas = plan.bootstrap.alpha_levels;
    std::optional<LambdaSchedule> lambdas = plan.lambdas;
    if (plan.has(Method::pls) && !lambdas) lambdas = detail::tune_schedules(values, w, plan, periods);
    report.lambdas = lambdas;

    const Index first = plan.initial_train;
    std::vector<detail::DayOutcome> outcomes;
    for (Index day = first; day < first + plan.n_test; ++day) {
        try {
            outcomes.push_back(detail::evaluate_day(values, w, plan, day, periods, lambdas));
        } catch (const Error& e) {
            report.skipped.push_back({day, e.what()});
            continue;
        }
        report.evaluated_days.push_back(day);
        report.selected_K.push_back(outcomes.back().K);
        report.selected_p.push_back(outcomes.back().p);
    }
    require(!outcomes.empty(), ErrorKind::numerical, "every holdout day failed");

    const auto& alphas = plan.bootstrap.alpha_levels;

    // TS over the whole curve
    {
        std::vector<Vector> actual, point;
        for (const auto& o : outcomes) {
            actual.push_back(o.actual);
            point.push_back(o.ts_point);
        }
        const Matrix act = detail::stack_rows(actual);
        auto err = msfe(act, detail::stack_rows(point));
        report.ts_summary.method = Method::ts;
        report.ts_summary.msfe = err.aggregate;
        report.ts_summary.msfe_by_point = err.by_point;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            std::vector<Vector> lo, hi, blo, bhi;
            for (const auto& o : outcomes) {
                lo.push_back(o.pointwise[a].lower);
                hi.push_back(o.pointwise[a].upper);
                blo.push_back(o.bands[a].lower);
                bhi.push_back(o.bands[a].upper);
            }
            const Matrix L = detail::stack_rows(lo), U = detail::stack_rows(hi);
            IntervalSummary s;
            s.alpha = alphas[a];
            s.ecp_pointwise = ecp(act, L, U, CoverageMode::pointwise);
            s.ecp_uniform = ecp(act, detail::stack_rows(blo), detail::stack_rows(bhi), CoverageMode::uniform);
            auto sc = mean_interval_score(interval_scores(act, L, U, alphas[a]));
            s.score_by_point = sc.by_point;
            s.mean_score = sc.aggregate;
            report.ts_summary.intervals.push_back(std::move(s));
        }
    }

    if (periods.empty()) return report;

    std::vector<Method> methods{Method::ts};
    for (Method m : {Method::pls, Method::ols, Method::flr})
        if (plan.has(m)) methods.push_back(m);

    std::map<Method, std::vector<PeriodMethodMetrics>> per_method;
    for (int m : periods) {
        PeriodMetrics pm;
        pm.m = m;
        for (Method method : methods) {
            std::vector<Vector> actual, point;
            std::vector<std::vector<Vector>> lo(alphas.size()), hi(alphas.size());
            for (const auto& o : outcomes) {
                auto it = o.periods.at(m).find(method);
                if (it == o.periods.at(m).end()) continue;
                actual.push_back(o.actual.tail(it->second.point.size()));
                point.push_back(it->second.point);
                for (std::size_t a = 0; a < alphas.size(); ++a) {
                    lo[a].push_back(it->second.intervals[a].lower);
                    hi[a].push_back(it->second.intervals[a].upper);
                }
            }
            if (actual.empty()) continue;
            const Matrix act = detail::stack_rows(actual);
            const Matrix pt = detail::stack_rows(point);
            PeriodMethodMetrics r;
            r.msfe = msfe(act, pt).aggregate;
            r.sign_probability = sign_prediction_probability(act, pt);
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                const Matrix L = detail::stack_rows(lo[a]), U = detail::stack_rows(hi[a]);
                IntervalSummary s;
                s.alpha = alphas[a];
                s.ecp_pointwise = ecp(act, L, U, CoverageMode::pointwise);
                auto sc = mean_interval_score(interval_scores(act, L, U, alphas[a]));
                s.score_by_point = sc.by_point;
                s.mean_score = sc.aggregate;
                r.intervals.push_back(std::move(s));
            }
            per_method[method].push_back(r);
            pm.methods[method] = std::move(r);
        }
        report.periods.push_back(std::move(pm));
    }

    for (Method method : methods) {
        const auto& rows = per_method[method];
        if (rows.empty()) continue;
        MethodSummary s;
        s.method = method;
        for (const auto& r : rows) s.msfe += r.msfe / static_cast<double>(rows.size());
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            IntervalSummary is;
            is.alpha = alphas[a];
            for (const auto& r : rows) {
                is.ecp_pointwise += r.intervals[a].ecp_pointwise / static_cast<double>(rows.size());
                is.mean_score += r.intervals[a].mean_score / static_cast<double>(rows.size());
            }
            s.intervals.push_back(std::move(is));
        }
        report.method_summaries.push_back(std::move(s));
    }
    return report;
}

inline const MethodSummary* find_summary(const MetricReport& r, Method m) {
    for (const auto& s : r.method_summaries)
        if (s.method == m) return &s;
    return nullptr;
}

}  // namespace ifts
