#pragma once

// JSON and CSV serialisation for models, forecasts, schedules and reports.
// Every JSON document carries `schema_version`.

#include "ifts/backtest.hpp"
#include "ifts/datagen.hpp"
#include "ifts/fpca.hpp"
#include "ifts/gridcurves.hpp"
#include "ifts/sieve.hpp"
#include "ifts/updating.hpp"
#include "ifts/var.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <ostream>
#include <string>

namespace ifts {

using json = nlohmann::ordered_json;

inline json to_json(const Vector& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

/// Row-major nested arrays.
inline json to_json(const Matrix& m) {
    json j = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(std::move(row));
    }
    return j;
}

inline Vector vector_from_json(const json& j) {
    require(j.is_array(), ErrorKind::data, "expected a JSON array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

inline Matrix matrix_from_json(const json& j) {
    require(j.is_array(), ErrorKind::data, "expected a JSON array of rows");
    if (j.empty()) return Matrix(0, 0);
    const std::size_t cols = j.front().size();
    Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        require(j[r].is_array() && j[r].size() == cols, ErrorKind::data, "ragged matrix in JSON");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

inline void check_schema(const json& j, const std::string& kind) {
    require(j.is_object() && j.contains("schema_version"), ErrorKind::data, kind + " document lacks schema_version");
    require(j.at("schema_version").get<int>() == kSchemaVersion, ErrorKind::data,
            kind + " schema_version " + std::to_string(j.at("schema_version").get<int>()) + " is not supported");
}

// ---------------------------------------------------------------------------
// Models

inline json fpca_to_json(const FpcaModel& m) {
    return json{{"mean", to_json(m.mean)},
                {"eigenvalues", to_json(m.eigenvalues)},
                {"eigenfunctions", to_json(Matrix(m.eigenfunctions.transpose()))},
                {"K", m.K},
                {"degenerate", m.degenerate},
                {"quad_weight", m.quad_weight}};
}

inline json var_to_json(const VarModel& v) {
    json A = json::array(), B = json::array();
    for (const auto& a : v.A) A.push_back(to_json(a));
    for (const auto& b : v.B) B.push_back(to_json(b));
    return json{{"p", v.p},
                {"K", v.K},
                {"A", A},
                {"B", B},
                {"sigma", to_json(v.sigma)},
                {"spectral_radius", v.spectral_radius},
                {"psi_truncation", v.psi_truncation}};
}

/// Fitted model document: FPCA (eigenfunctions stored one per row) and VAR.
inline json model_to_json(const FpcaModel& fpca, const VarModel& var, const IntradayGrid& grid) {
    json times = json::array();
    for (double t : grid.times()) times.push_back(format_time(t));
    return json{{"schema_version", kSchemaVersion},
                {"kind", "ifts.model"},
                {"grid", times},
                {"n", fpca.n()},
                {"fpca", fpca_to_json(fpca)},
                {"var", var_to_json(var)}};
}

/// Restores the parts of an FPCA fit needed for projection and reconstruction.
inline FpcaModel fpca_from_json(const json& j) {
    FpcaModel m;
    m.mean = vector_from_json(j.at("mean"));
    m.eigenvalues = vector_from_json(j.at("eigenvalues"));
    m.eigenfunctions = matrix_from_json(j.at("eigenfunctions")).transpose();
    m.K = j.at("K").get<int>();
    m.degenerate = j.value("degenerate", false);
    m.quad_weight = j.at("quad_weight").get<double>();
    require(m.eigenfunctions.rows() == m.mean.size(), ErrorKind::data, "eigenfunction length does not match the mean");
    require(m.K >= 1 && m.K <= m.eigenfunctions.cols(), ErrorKind::data, "stored K outside the stored eigenfunctions");
    return m;
}

// ---------------------------------------------------------------------------
// Forecasts

inline std::string level_label(double alpha) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%g", std::round((1.0 - alpha) * 1000.0) / 10.0);
    return buf;
}

inline json sieve_to_json(const SieveForecast& f, const BootstrapConfig& cfg) {
    json pw = json::array(), bands = json::array();
    for (const auto& p : f.pointwise) pw.push_back({{"alpha", p.alpha}, {"lower", to_json(p.lower)}, {"upper", to_json(p.upper)}});
    for (const auto& b : f.band)
        bands.push_back({{"alpha", b.alpha}, {"radius_factor", b.radius_factor}, {"lower", to_json(b.lower)}, {"upper", to_json(b.upper)}});
    return json{{"schema_version", kSchemaVersion},
                {"kind", "ifts.sieve_forecast"},
                {"B", cfg.B},
                {"seed", cfg.seed},
                {"center", cfg.center == IntervalCenter::far1 ? "far1" : "ts"},
                {"degenerate", f.degenerate},
                {"point", to_json(f.point)},
                {"ts_point", to_json(f.ts_point)},
                {"far1_point", to_json(f.far1_point)},
                {"error_sd", to_json(f.error_sd)},
                {"pointwise", pw},
                {"bands", bands}};
}

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Plot-ready rows: grid_index, point, then lo/hi per level, then band lo/hi
/// per level.
inline void write_sieve_csv(std::ostream& out, const SieveForecast& f) {
    out << "grid_index,point";
    for (const auto& p : f.pointwise) out << ",lo" << level_label(p.alpha) << ",hi" << level_label(p.alpha);
    for (const auto& b : f.band) out << ",band_lo" << level_label(b.alpha) << ",band_hi" << level_label(b.alpha);
    out << '\n';
    for (Index i = 0; i < f.point.size(); ++i) {
        out << i + 2 << ',' << csv_num(f.point(i));
        for (const auto& p : f.pointwise) out << ',' << csv_num(p.lower(i)) << ',' << csv_num(p.upper(i));
        for (const auto& b : f.band) out << ',' << csv_num(b.lower(i)) << ',' << csv_num(b.upper(i));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Lambda schedules

inline json schedule_to_json(const LambdaSchedule& s) {
    json point = json::object();
    for (const auto& [m, l] : s.point) point[std::to_string(m)] = l;
    json interval = json::array();
    for (const auto& [a, sched] : s.interval) {
        json by_m = json::object();
        for (const auto& [m, l] : sched) by_m[std::to_string(m)] = l;
        interval.push_back({{"alpha", a}, {"lambda", by_m}});
    }
    return json{{"schema_version", kSchemaVersion}, {"kind", "ifts.lambda_schedule"}, {"point", point}, {"interval", interval}};
}

inline LambdaSchedule schedule_from_json(const json& j) {
    check_schema(j, "lambda schedule");
    LambdaSchedule s;
    for (const auto& [k, v] : j.at("point").items()) s.point[std::stoi(k)] = v.get<double>();
    for (const auto& entry : j.at("interval")) {
        auto& sched = s.interval[entry.at("alpha").get<double>()];
        for (const auto& [k, v] : entry.at("lambda").items()) sched[std::stoi(k)] = v.get<double>();
    }
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic specs

inline json synth_spec_to_json(const SynthSpec& s) {
    json A = json::array();
    for (const auto& a : s.A) A.push_back(to_json(a));
    json j{{"schema_version", kSchemaVersion},
           {"kind", "ifts.synth_spec"},
           {"n", s.n},
           {"tau", s.tau},
           {"basis", s.basis == BasisFamily::sinusoid ? "sinusoid" : "polynomial"},
           {"K_true", s.K_true},
           {"mean_amplitude", s.mean_amplitude},
           {"A", A},
           {"innovation_cov", to_json(s.innovation_cov)},
           {"noise_sd", s.noise_sd},
           {"seed", s.seed},
           {"burn_in", s.burn_in}};
    if (s.linkage)
        j["linkage"] = {{"m", s.linkage->m},
                        {"late_components", s.linkage->late_components},
                        {"rho", to_json(s.linkage->rho)},
                        {"late_innovation_sd", s.linkage->late_innovation_sd}};
    return j;
}

inline SynthSpec synth_spec_from_json(const json& j) {
    check_schema(j, "synthetic spec");
    SynthSpec s;
    s.n = j.value("n", s.n);
    s.tau = j.value("tau", s.tau);
    const std::string basis = j.value("basis", std::string("sinusoid"));
    require(basis == "sinusoid" || basis == "polynomial", ErrorKind::data, "basis must be sinusoid or polynomial");
    s.basis = basis == "sinusoid" ? BasisFamily::sinusoid : BasisFamily::polynomial;
    s.K_true = j.value("K_true", s.K_true);
    s.mean_amplitude = j.value("mean_amplitude", 0.0);
    if (j.contains("A"))
        for (const auto& a : j.at("A")) s.A.push_back(matrix_from_json(a));
    if (j.contains("innovation_cov")) s.innovation_cov = matrix_from_json(j.at("innovation_cov"));
    s.noise_sd = j.value("noise_sd", 0.0);
    s.seed = j.value("seed", s.seed);
    s.burn_in = j.value("burn_in", s.burn_in);
    if (j.contains("linkage")) {
        const auto& l = j.at("linkage");
        LinkageSpec link;
        link.m = l.at("m").get<int>();
        link.late_components = l.value("late_components", 1);
        link.rho = matrix_from_json(l.at("rho"));
        link.late_innovation_sd = l.value("late_innovation_sd", 0.0);
        s.linkage = link;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Metric reports

inline json interval_summary_json(const IntervalSummary& s) {
    json j{{"alpha", s.alpha}, {"ecp_pointwise", s.ecp_pointwise}, {"mean_interval_score", s.mean_score}};
    if (s.ecp_uniform) j["ecp_uniform"] = *s.ecp_uniform;
    return j;
}

inline json report_to_json(const MetricReport& r) {
    json t1{{"method", method_name(r.ts_summary.method)}, {"msfe", r.ts_summary.msfe}, {"msfe_by_point", to_json(r.ts_summary.msfe_by_point)}};
    json t1i = json::array();
    for (const auto& s : r.ts_summary.intervals) {
        json j = interval_summary_json(s);
        j["score_by_point"] = to_json(s.score_by_point);
        t1i.push_back(j);
    }
    t1["intervals"] = t1i;

    json t2 = json::array();
    for (const auto& s : r.method_summaries) {
        json iv = json::array();
        for (const auto& i : s.intervals) iv.push_back(interval_summary_json(i));
        t2.push_back({{"method", method_name(s.method)}, {"msfe", s.msfe}, {"intervals", iv}});
    }
    json periods = json::array();
    for (const auto& p : r.periods) {
        json methods = json::object();
        for (const auto& [m, pm] : p.methods) {
            json iv = json::array();
            for (const auto& i : pm.intervals) iv.push_back(interval_summary_json(i));
            methods[method_name(m)] = {{"msfe", pm.msfe}, {"sign_probability", pm.sign_probability}, {"intervals", iv}};
        }
        periods.push_back({{"m", p.m}, {"methods", methods}});
    }
    json skipped = json::array();
    for (const auto& s : r.skipped) skipped.push_back({{"day", s.day}, {"reason", s.reason}});
    json j{{"schema_version", kSchemaVersion},
           {"kind", "ifts.metric_report"},
           {"alphas", r.alphas},
           {"evaluated_days", r.evaluated_days},
           {"selected_K", r.selected_K},
           {"selected_p", r.selected_p},
           {"skipped", skipped},
           {"ts_summary", t1},
           {"method_summary", t2},
           {"periods", periods}};
    if (r.lambdas) j["lambdas"] = schedule_to_json(*r.lambdas);
    return j;
}

/// TS accuracy over whole curves.
inline void write_ts_summary_csv(std::ostream& out, const MetricReport& r) {
    out << "method,msfe";
    for (const auto& s : r.ts_summary.intervals) out << ",ecp_pointwise_" << level_label(s.alpha);
    for (const auto& s : r.ts_summary.intervals) out << ",ecp_uniform_" << level_label(s.alpha);
    for (const auto& s : r.ts_summary.intervals) out << ",interval_score_" << level_label(s.alpha);
    out << '\n' << method_name(r.ts_summary.method) << ',' << csv_num(r.ts_summary.msfe);
    for (const auto& s : r.ts_summary.intervals) out << ',' << csv_num(s.ecp_pointwise);
    for (const auto& s : r.ts_summary.intervals) out << ',' << csv_num(s.ecp_uniform.value_or(std::nan("")));
    for (const auto& s : r.ts_summary.intervals) out << ',' << csv_num(s.mean_score);
    out << '\n';
}

/// Per-grid-point TS errors.
inline void write_ts_by_point_csv(std::ostream& out, const MetricReport& r) {
    out << "grid_index,msfe";
    for (const auto& s : r.ts_summary.intervals) out << ",interval_score_" << level_label(s.alpha);
    out << '\n';
    for (Index i = 0; i < r.ts_summary.msfe_by_point.size(); ++i) {
        out << i + 2 << ',' << csv_num(r.ts_summary.msfe_by_point(i));
        for (const auto& s : r.ts_summary.intervals) out << ',' << csv_num(s.score_by_point(i));
        out << '\n';
    }
}

/// Methods averaged over updating periods.
inline void write_method_summary_csv(std::ostream& out, const MetricReport& r) {
    out << "method,msfe";
    for (double a : r.alphas) out << ",ecp_pointwise_" << level_label(a);
    for (double a : r.alphas) out << ",interval_score_" << level_label(a);
    out << '\n';
    for (const auto& s : r.method_summaries) {
        out << method_name(s.method) << ',' << csv_num(s.msfe);
        for (const auto& i : s.intervals) out << ',' << csv_num(i.ecp_pointwise);
        for (const auto& i : s.intervals) out << ',' << csv_num(i.mean_score);
        out << '\n';
    }
}

/// Tidy per-period metrics, one row per (m, method).
inline void write_period_csv(std::ostream& out, const MetricReport& r) {
    out << "m,method,msfe,sign_probability";
    for (double a : r.alphas) out << ",ecp_pointwise_" << level_label(a);
    for (double a : r.alphas) out << ",interval_score_" << level_label(a);
    out << '\n';
    for (const auto& p : r.periods)
        for (const auto& [m, pm] : p.methods) {
            out << p.m << ',' << method_name(m) << ',' << csv_num(pm.msfe) << ',' << csv_num(pm.sign_probability);
            for (const auto& i : pm.intervals) out << ',' << csv_num(i.ecp_pointwise);
            for (const auto& i : pm.intervals) out << ',' << csv_num(i.mean_score);
            out << '\n';
        }
}

/// Tuned lambda per updating period.
inline void write_lambda_csv(std::ostream& out, const LambdaSchedule& s) {
    out << "m,objective,alpha,lambda\n";
    for (const auto& [m, l] : s.point) out << m << ",msfe,," << csv_num(l) << '\n';
    for (const auto& [a, sched] : s.interval)
        for (const auto& [m, l] : sched) out << m << ",interval_score," << csv_num(a) << ',' << csv_num(l) << '\n';
}

/// 64-bit FNV-1a of a string, hex encoded; used for config hashes.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ifts
