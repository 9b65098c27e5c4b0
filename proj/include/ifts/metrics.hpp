#pragma once

// Point and interval forecast accuracy measures. Matrices are days x grid
// points.

#include "ifts/common.hpp"

namespace ifts {

struct PointwiseAggregate {
    Vector by_point;
    double aggregate = 0.0;
};

/// Mean squared forecast error per grid point and averaged over points.
inline PointwiseAggregate msfe(const Matrix& actual, const Matrix& forecast) {
    require(actual.rows() == forecast.rows() && actual.cols() == forecast.cols(), ErrorKind::data,
            "MSFE: actual and forecast shapes differ");
    require(actual.rows() > 0 && actual.cols() > 0, ErrorKind::data, "MSFE: empty input");
    PointwiseAggregate out;
    out.by_point = (actual - forecast).array().square().colwise().mean().transpose();
    out.aggregate = out.by_point.mean();
    return out;
}

enum class CoverageMode { pointwise, uniform };

/// Empirical coverage. Pointwise: share of (day, point) cells inside
/// [lower, upper]. Uniform: share of days whose whole curve is inside.
inline double ecp(const Matrix& actual, const Matrix& lower, const Matrix& upper, CoverageMode mode) {
    require(actual.rows() == lower.rows() && actual.rows() == upper.rows() && actual.cols() == lower.cols() &&
                actual.cols() == upper.cols(),
            ErrorKind::data, "ECP: shape mismatch");
    require(actual.size() > 0, ErrorKind::data, "ECP: empty input");
    if (mode == CoverageMode::pointwise) {
        Index misses = 0;
        for (Index t = 0; t < actual.rows(); ++t)
            for (Index i = 0; i < actual.cols(); ++i)
                misses += (actual(t, i) < lower(t, i) ? 1 : 0) + (actual(t, i) > upper(t, i) ? 1 : 0);
        return static_cast<double>(actual.size() - misses) / static_cast<double>(actual.size());
    }
    Index covered = 0;
    for (Index t = 0; t < actual.rows(); ++t) {
        bool inside = true;
        for (Index i = 0; i < actual.cols() && inside; ++i) inside = actual(t, i) >= lower(t, i) && actual(t, i) <= upper(t, i);
        covered += inside ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(actual.rows());
}

/// Width plus 2/alpha times the distance by which `actual` falls outside.
inline double interval_score(double lower, double upper, double actual, double alpha) {
    double s = upper - lower;
    if (actual < lower) s += 2.0 / alpha * (lower - actual);
    if (actual > upper) s += 2.0 / alpha * (actual - upper);
    return s;
}

inline Matrix interval_scores(const Matrix& actual, const Matrix& lower, const Matrix& upper, double alpha) {
    require(actual.rows() == lower.rows() && actual.rows() == upper.rows() && actual.cols() == lower.cols() &&
                actual.cols() == upper.cols(),
            ErrorKind::data, "interval score: shape mismatch");
    Matrix s(actual.rows(), actual.cols());
    for (Index t = 0; t < actual.rows(); ++t)
        for (Index i = 0; i < actual.cols(); ++i) s(t, i) = interval_score(lower(t, i), upper(t, i), actual(t, i), alpha);
    return s;
}

/// Mean over days per grid point, then over grid points.
inline PointwiseAggregate mean_interval_score(const Matrix& per_day_scores) {
    require(per_day_scores.size() > 0, ErrorKind::data, "mean interval score: empty input");
    PointwiseAggregate out;
    out.by_point = per_day_scores.colwise().mean().transpose();
    out.aggregate = out.by_point.mean();
    return out;
}

/// Share of cells where forecast and actual have the same sign. An exact zero
/// actual counts as correct only when the forecast is also exactly zero.
inline double sign_prediction_probability(const Matrix& actual, const Matrix& forecast) {
    require(actual.rows() == forecast.rows() && actual.cols() == forecast.cols(), ErrorKind::data,
            "sign prediction: shape mismatch");
    require(actual.size() > 0, ErrorKind::data, "sign prediction: empty input");
    auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    Index hits = 0;
    for (Index t = 0; t < actual.rows(); ++t)
        for (Index i = 0; i < actual.cols(); ++i) hits += sign(actual(t, i)) == sign(forecast(t, i)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(actual.size());
}

}  // namespace ifts
