// ifts command-line front end.
//
//   ifts <ingest|fit|forecast|update|tune|backtest|simulate|export-plots>
//        [--config run.json] [flags]
//
// Flags override values from the config file. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 numerical failure.

#include "ifts/ifts.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace ifts;

namespace {

struct RunConfig {
    std::string input;
    std::string partial;
    std::string spec;
    std::string report;
    std::string lambdas;
    std::string output_dir = ".";
    std::optional<int> K;
    int p_max = 10;
    int B = 400;
    std::uint64_t seed = 20211223;
    std::vector<double> alphas{0.2, 0.05};
    std::vector<double> lambda_grid = default_lambda_grid();
    std::optional<double> lambda;
    std::optional<int> m;
    Index train = 150;
    Index validation = 50;
    Index initial_train = 200;
    Index n_test = 50;
    std::vector<std::string> methods{"TS", "PLS", "OLS", "FLR"};
    std::vector<int> periods;
    std::string center = "far1";
    int threads = 0;
    bool rolling = false;

    /// Canonical form; threads are excluded because they never change outputs.
    json to_json() const {
        nlohmann::json j;  // sorted keys
        j["input"] = input;
        j["partial"] = partial;
        j["spec"] = spec;
        j["report"] = report;
        j["lambdas"] = lambdas;
        j["K"] = K ? nlohmann::json(*K) : nlohmann::json("auto");
        j["p_max"] = p_max;
        j["B"] = B;
        j["seed"] = seed;
        j["alphas"] = alphas;
        j["lambda_grid"] = lambda_grid;
        j["lambda"] = lambda ? nlohmann::json(*lambda) : nlohmann::json(nullptr);
        j["m"] = m ? nlohmann::json(*m) : nlohmann::json(nullptr);
        j["train"] = train;
        j["validation"] = validation;
        j["initial_train"] = initial_train;
        j["n_test"] = n_test;
        j["methods"] = methods;
        j["periods"] = periods;
        j["center"] = center;
        j["rolling"] = rolling;
        return json::parse(j.dump());
    }
};

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), ErrorKind::usage, "cannot read config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::usage, "config " + path + ": " + e.what());
    }
    require(j.is_object(), ErrorKind::usage, "config must be a JSON object");
    static const std::vector<std::string> known{"input",  "partial", "spec",  "report",  "lambdas", "output_dir",
                                                "K",      "p_max",   "B",     "seed",    "alphas",  "lambda_grid",
                                                "lambda", "m",       "train", "validation", "initial_train",
                                                "n_test", "methods", "periods", "center", "threads", "rolling",
                                                "schema_version"};
    for (const auto& [k, _] : j.items())
        require(std::find(known.begin(), known.end(), k) != known.end(), ErrorKind::usage, "unknown config key \"" + k + "\"");
    RunConfig c;
    try {
        read_key(j, "input", c.input);
        read_key(j, "partial", c.partial);
        read_key(j, "spec", c.spec);
        read_key(j, "report", c.report);
        read_key(j, "lambdas", c.lambdas);
        read_key(j, "output_dir", c.output_dir);
        if (j.contains("K") && j.at("K").is_number_integer()) c.K = j.at("K").get<int>();
        read_key(j, "p_max", c.p_max);
        read_key(j, "B", c.B);
        read_key(j, "seed", c.seed);
        read_key(j, "alphas", c.alphas);
        read_key(j, "lambda_grid", c.lambda_grid);
        if (j.contains("lambda") && !j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
        if (j.contains("m") && !j.at("m").is_null()) c.m = j.at("m").get<int>();
        read_key(j, "train", c.train);
        read_key(j, "validation", c.validation);
        read_key(j, "initial_train", c.initial_train);
        read_key(j, "n_test", c.n_test);
        read_key(j, "methods", c.methods);
        read_key(j, "periods", c.periods);
        read_key(j, "center", c.center);
        read_key(j, "threads", c.threads);
        read_key(j, "rolling", c.rolling);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::usage, "config " + path + ": " + e.what());
    }
    return c;
}

// Flag values; set only when given on the command line.
struct Flags {
    std::string config;
    std::optional<std::string> input, partial, spec, report, lambdas, output_dir, center, K;
    std::optional<int> p_max, B, threads, m;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<double>> alphas, lambda_grid;
    std::optional<double> lambda;
    std::optional<Index> train, validation, initial_train, n_test;
    std::optional<std::vector<std::string>> methods;
    std::optional<std::vector<int>> periods;
    bool rolling = false;
};

RunConfig resolve(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    auto set = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    set(c.input, f.input);
    set(c.partial, f.partial);
    set(c.spec, f.spec);
    set(c.report, f.report);
    set(c.lambdas, f.lambdas);
    set(c.output_dir, f.output_dir);
    set(c.center, f.center);
    set(c.p_max, f.p_max);
    set(c.B, f.B);
    set(c.threads, f.threads);
    set(c.seed, f.seed);
    set(c.alphas, f.alphas);
    set(c.lambda_grid, f.lambda_grid);
    set(c.train, f.train);
    set(c.validation, f.validation);
    set(c.initial_train, f.initial_train);
    set(c.n_test, f.n_test);
    set(c.methods, f.methods);
    set(c.periods, f.periods);
    if (f.lambda) c.lambda = f.lambda;
    if (f.m) c.m = f.m;
    if (f.K) {
        if (*f.K == "auto") {
            c.K.reset();
        } else {
            try {
                c.K = std::stoi(*f.K);
            } catch (const std::exception&) {
                fail(ErrorKind::usage, "--K expects an integer or \"auto\"");
            }
        }
    }
    if (f.rolling) c.rolling = true;
    require(c.p_max >= 1, ErrorKind::usage, "p_max must be at least 1");
    require(c.center == "far1" || c.center == "ts", ErrorKind::usage, "center must be far1 or ts");
    return c;
}

BootstrapConfig bootstrap_config(const RunConfig& c) {
    BootstrapConfig b;
    b.B = c.B;
    b.seed = c.seed;
    b.alpha_levels = c.alphas;
    b.center = c.center == "ts" ? IntervalCenter::ts : IntervalCenter::far1;
    b.threads = c.threads;
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Files

fs::path out_path(const RunConfig& c, const std::string& name) {
    fs::path dir(c.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), ErrorKind::usage, "cannot create output directory " + c.output_dir);
    return dir / name;
}

class OutputSet {
public:
    explicit OutputSet(const RunConfig& c) : cfg_(c) {}

    template <class Writer>
    void write(const std::string& name, Writer&& writer) {
        const fs::path p = out_path(cfg_, name);
        std::ofstream out(p, std::ios::binary);
        require(bool(out), ErrorKind::usage, "cannot write " + p.string());
        writer(out);
        require(bool(out), ErrorKind::usage, "write failed for " + p.string());
        files_.push_back(name);
    }

    void json_file(const std::string& name, const json& j) {
        write(name, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    }

    /// Config hash, seed and version alongside the produced files.
    void manifest(const std::string& command) {
        const json config = cfg_.to_json();
        json m{{"schema_version", kSchemaVersion},
               {"kind", "ifts.manifest"},
               {"command", command},
               {"library_version", kLibraryVersion},
               {"seed", cfg_.seed},
               {"config_hash", fnv1a_hex(config.dump())},
               {"config", config},
               {"outputs", files_}};
        const fs::path p = out_path(cfg_, "manifest.json");
        std::ofstream out(p, std::ios::binary);
        require(bool(out), ErrorKind::usage, "cannot write " + p.string());
        out << m.dump(2) << '\n';
    }

private:
    const RunConfig& cfg_;
    std::vector<std::string> files_;
};

RawPriceTable read_raw(const std::string& path) {
    require(!path.empty(), ErrorKind::usage, "no input file given (--input)");
    std::ifstream in(path);
    require(bool(in), ErrorKind::usage, "cannot read input file " + path);
    return read_price_csv(in);
}

FunctionalTimeSeries load_curves(const RunConfig& c, IngestSummary* summary = nullptr) {
    IngestResult r = ingest(read_raw(c.input));
    for (const auto& w : r.summary.warnings) std::cerr << "warning: " << w << '\n';
    if (summary) *summary = r.summary;
    return cidr_transform(r.prices);
}

json summary_json(const IngestSummary& s, CsvLayout layout) {
    json dropped = json::array();
    for (const auto& d : s.dropped) dropped.push_back({{"date", d.date}, {"reason", d.reason}});
    return json{{"schema_version", kSchemaVersion},
                {"kind", "ifts.ingest_summary"},
                {"layout", layout == CsvLayout::long_format ? "long" : "wide"},
                {"n", s.n},
                {"tau", s.tau},
                {"missing_cells", s.missing_cells},
                {"interpolated_cells", s.interpolated_cells},
                {"dropped_days", dropped},
                {"warnings", s.warnings}};
}

// ---------------------------------------------------------------------------
// Tidy plotting exports from a report document

void write_plot_exports(OutputSet& out, const json& report) {
    check_schema(report, "metric report");
    if (report.contains("lambdas")) {
        const auto& l = report.at("lambdas");
        out.write("lambda_point.csv", [&](std::ostream& o) {
            o << "m,lambda\n";
            std::vector<std::pair<int, double>> rows;
            for (const auto& [k, v] : l.at("point").items()) rows.emplace_back(std::stoi(k), v.get<double>());
            std::sort(rows.begin(), rows.end());
            for (auto [m, v] : rows) o << m << ',' << csv_num(v) << '\n';
        });
        out.write("lambda_interval.csv", [&](std::ostream& o) {
            o << "m,alpha,lambda\n";
            for (const auto& entry : l.at("interval")) {
                std::vector<std::pair<int, double>> rows;
                for (const auto& [k, v] : entry.at("lambda").items()) rows.emplace_back(std::stoi(k), v.get<double>());
                std::sort(rows.begin(), rows.end());
                for (auto [m, v] : rows) o << m << ',' << csv_num(entry.at("alpha").get<double>()) << ',' << csv_num(v) << '\n';
            }
        });
    }
    if (report.at("periods").empty()) return;
    out.write("msfe_by_period.csv", [&](std::ostream& o) {
        o << "m,method,msfe\n";
        for (const auto& p : report.at("periods"))
            for (const auto& [name, v] : p.at("methods").items())
                o << p.at("m").get<int>() << ',' << name << ',' << csv_num(v.at("msfe").get<double>()) << '\n';
    });
    out.write("sign_by_period.csv", [&](std::ostream& o) {
        o << "m,method,sign_probability\n";
        for (const auto& p : report.at("periods"))
            for (const auto& [name, v] : p.at("methods").items())
                o << p.at("m").get<int>() << ',' << name << ',' << csv_num(v.at("sign_probability").get<double>()) << '\n';
    });
    out.write("interval_score_by_period.csv", [&](std::ostream& o) {
        o << "m,method,alpha,ecp_pointwise,mean_interval_score\n";
        for (const auto& p : report.at("periods"))
            for (const auto& [name, v] : p.at("methods").items())
                for (const auto& iv : v.at("intervals"))
                    o << p.at("m").get<int>() << ',' << name << ',' << csv_num(iv.at("alpha").get<double>()) << ','
                      << csv_num(iv.at("ecp_pointwise").get<double>()) << ','
                      << csv_num(iv.at("mean_interval_score").get<double>()) << '\n';
    });
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const RunConfig& c) {
    RawPriceTable raw = read_raw(c.input);
    IngestResult r = ingest(raw);
    for (const auto& w : r.summary.warnings) std::cerr << "warning: " << w << '\n';
    OutputSet out(c);
    out.write("prices.csv", [&](std::ostream& o) { write_wide_csv(o, r.prices); });
    out.json_file("summary.json", summary_json(r.summary, raw.layout));
    out.manifest("ingest");
    std::cout << "ingested " << r.summary.n << " days x " << r.summary.tau << " times; " << r.summary.interpolated_cells
              << " cells interpolated, " << r.summary.dropped.size() << " days dropped\n";
    return 0;
}

int cmd_fit(const RunConfig& c) {
    const auto fts = load_curves(c);
    const FpcaModel fpca = fit_fpca(fts, c.K);
    const Matrix scores = fpca.retained_scores();
    const VarModel var = fit_var(scores, select_order(scores, c.p_max));
    json model = model_to_json(fpca, var, fts.grid());
    model["aicc"] = aicc(var, fpca.n());
    OutputSet out(c);
    out.json_file("model.json", model);
    out.manifest("fit");
    std::cout << "K = " << fpca.K << ", VAR order p = " << var.p << ", companion spectral radius "
              << var.spectral_radius << '\n';
    if (!var.stationary()) std::cerr << "warning: fitted VAR is not stationary; the sieve bootstrap will refuse it\n";
    return 0;
}

int cmd_forecast(const RunConfig& c) {
    const auto fts = load_curves(c);
    const BootstrapConfig cfg = bootstrap_config(c);
    DayForecast f = forecast_day(fts.values(), fts.quad_weight(), cfg, c.p_max, c.K);
    if (f.sieve.degenerate) std::cerr << "warning: bootstrap spread is degenerate (B = " << cfg.B << "); intervals collapse\n";
    json doc = sieve_to_json(f.sieve, cfg);
    doc["K"] = f.fpca.K;
    doc["p"] = f.var.p;
    OutputSet out(c);
    out.json_file("forecast.json", doc);
    out.write("forecast.csv", [&](std::ostream& o) { write_sieve_csv(o, f.sieve); });
    out.manifest("forecast");
    std::cout << "forecast written for " << f.sieve.point.size() << " grid points (K = " << f.fpca.K << ", p = " << f.var.p
              << ")\n";
    return 0;
}

int cmd_update(const RunConfig& c) {
    const auto fts = load_curves(c);
    require(!c.partial.empty(), ErrorKind::usage, "update needs --partial with the current day's prices");
    RawPriceTable part = read_raw(c.partial);
    require(part.prices.rows() >= 1, ErrorKind::data, "partial-day file has no rows");
    require(part.grid == fts.grid(), ErrorKind::data, "partial-day grid differs from the history grid");
    const Vector row = part.prices.row(part.prices.rows() - 1).transpose();
    const int tau = fts.grid().tau();
    int observed = 0;
    while (observed < tau && !is_missing(row(observed))) ++observed;
    const int m = c.m.value_or(observed);
    require(m >= 2 && m < tau, ErrorKind::usage,
            "update index m = " + std::to_string(m) + " must satisfy 2 <= m < tau = " + std::to_string(tau));
    require(m <= observed, ErrorKind::data, "partial day observes only " + std::to_string(observed) + " leading prices");
    for (int i = 0; i < m; ++i) require(row(i) > 0.0, ErrorKind::data, "partial-day prices must be positive");
    Vector x(m - 1);
    for (int i = 1; i < m; ++i) x(i - 1) = 100.0 * (std::log(row(i)) - std::log(row(0)));

    std::vector<Method> methods;
    for (const auto& s : c.methods) methods.push_back(parse_method(s));
    auto has = [&](Method me) { return std::find(methods.begin(), methods.end(), me) != methods.end(); };

    BootstrapConfig cfg = bootstrap_config(c);
    cfg.keep_pseudo_series = has(Method::flr);
    const Matrix& values = fts.values();
    DayForecast f = forecast_day(values, fts.quad_weight(), cfg, c.p_max, c.K);
    const UpdateContext ctx = make_update_context(f.fpca, m, x, f.ts_scores);
    const BootstrapDraws draws = draws_from(f.sieve);
    std::optional<LambdaSchedule> sched;
    if (!c.lambdas.empty()) {
        std::ifstream in(c.lambdas);
        require(bool(in), ErrorKind::usage, "cannot read lambda schedule " + c.lambdas);
        sched = schedule_from_json(json::parse(in));
    }

    struct Row {
        Method method;
        Vector point;
        std::vector<UpdateInterval> intervals;
        std::optional<double> lambda;
    };
    std::vector<Row> rows;
    const Index ne = m - 1;
    for (Method me : methods) {
        Row r{me, {}, {}, std::nullopt};
        switch (me) {
        case Method::ts:
            r.point = f.sieve.ts_point.tail(ctx.updating_points());
            for (const auto& pi : f.sieve.pointwise) r.intervals.push_back({pi.alpha, pi.lower.tail(ctx.updating_points()), pi.upper.tail(ctx.updating_points())});
            break;
        case Method::pls: {
            require(c.lambda || sched, ErrorKind::usage, "PLS needs --lambda or a tuned --lambdas schedule");
            const double lp = c.lambda ? *c.lambda : sched->point_at(m);
            r.lambda = lp;
            r.point = pls_update(ctx, lp);
            for (double a : c.alphas) {
                const double la = c.lambda ? *c.lambda : sched->interval_at(a, m);
                const double one[1] = {a};
                r.intervals.push_back(pls_interval_update(ctx, la, draws, one).front());
            }
            break;
        }
        case Method::ols:
            r.point = ols_update(ctx);
            r.intervals = pls_interval_update(ctx, 0.0, draws, c.alphas);
            break;
        case Method::flr: {
            FlrModel flr = flr_fit(values, m);
            r.point = flr_update(flr, x);
            r.intervals = flr_interval_update(flr, x, f.sieve.pseudo_series, f.sieve.future_residuals, c.alphas);
            break;
        }
        }
        rows.push_back(std::move(r));
    }

    json doc{{"schema_version", kSchemaVersion}, {"kind", "ifts.update"}, {"m", m}, {"B", cfg.B}, {"seed", cfg.seed}};
    json jm = json::object();
    for (const auto& r : rows) {
        json iv = json::array();
        for (const auto& i : r.intervals) iv.push_back({{"alpha", i.alpha}, {"lower", to_json(i.lower)}, {"upper", to_json(i.upper)}});
        json e{{"point", to_json(r.point)}, {"intervals", iv}};
        if (r.lambda) e["lambda"] = *r.lambda;
        jm[method_name(r.method)] = e;
    }
    doc["methods"] = jm;
    OutputSet out(c);
    out.json_file("update.json", doc);
    out.write("update.csv", [&](std::ostream& o) {
        o << "grid_index,method,point";
        for (double a : c.alphas) o << ",lo" << level_label(a) << ",hi" << level_label(a);
        o << '\n';
        for (const auto& r : rows)
            for (Index i = 0; i < r.point.size(); ++i) {
                o << ne + i + 2 << ',' << method_name(r.method) << ',' << csv_num(r.point(i));
                for (const auto& iv : r.intervals) o << ',' << csv_num(iv.lower(i)) << ',' << csv_num(iv.upper(i));
                o << '\n';
            }
    });
    out.manifest("update");
    std::cout << "updated forecasts for grid indices " << m + 1 << ".." << tau << '\n';
    return 0;
}

BacktestPlan make_plan(const RunConfig& c) {
    BacktestPlan p;
    p.initial_train = c.initial_train;
    p.n_test = c.n_test;
    p.methods.clear();
    for (const auto& s : c.methods) p.methods.push_back(parse_method(s));
    p.periods = c.periods;
    p.bootstrap = bootstrap_config(c);
    p.p_max = c.p_max;
    p.fixed_K = c.K;
    p.rolling = c.rolling;
    p.tuning.train = c.train;
    p.tuning.validation = c.validation;
    p.tuning.lambda_grid = c.lambda_grid;
    if (!c.lambdas.empty()) {
        std::ifstream in(c.lambdas);
        require(bool(in), ErrorKind::usage, "cannot read lambda schedule " + c.lambdas);
        p.lambdas = schedule_from_json(json::parse(in));
    }
    return p;
}

int cmd_tune(const RunConfig& c) {
    const auto fts = load_curves(c);
    BacktestPlan plan = make_plan(c);
    require(c.train >= 3 && c.validation >= 1, ErrorKind::usage, "invalid tuning split");
    require(c.train + c.validation <= fts.n(), ErrorKind::usage,
            "train + validation = " + std::to_string(c.train + c.validation) + " exceeds the " + std::to_string(fts.n()) +
                " available days");
    for (int m : plan.periods) require(m >= 2 && m < fts.grid().tau(), ErrorKind::usage, "updating periods must satisfy 2 <= m < tau");
    const LambdaSchedule sched =
        detail::tune_schedules(fts.values(), fts.quad_weight(), plan, plan.resolved_periods(fts.grid().tau()));
    OutputSet out(c);
    out.json_file("lambdas.json", schedule_to_json(sched));
    out.write("lambdas.csv", [&](std::ostream& o) { write_lambda_csv(o, sched); });
    out.manifest("tune");
    std::cout << "tuned lambda for " << sched.point.size() << " updating periods\n";
    return 0;
}

int cmd_backtest(const RunConfig& c) {
    const auto fts = load_curves(c);
    const BacktestPlan plan = make_plan(c);
    const MetricReport rep = run_backtest(fts, plan);
    for (const auto& s : rep.skipped) std::cerr << "warning: skipped day " << s.day + 1 << ": " << s.reason << '\n';
    const json doc = report_to_json(rep);
    OutputSet out(c);
    out.json_file("report.json", doc);
    out.write("ts_summary.csv", [&](std::ostream& o) { write_ts_summary_csv(o, rep); });
    out.write("ts_by_point.csv", [&](std::ostream& o) { write_ts_by_point_csv(o, rep); });
    if (!rep.periods.empty()) {
        out.write("method_summary.csv", [&](std::ostream& o) { write_method_summary_csv(o, rep); });
        out.write("periods.csv", [&](std::ostream& o) { write_period_csv(o, rep); });
    }
    write_plot_exports(out, doc);
    out.manifest("backtest");
    std::cout << "evaluated " << rep.evaluated_days.size() << " days (" << rep.skipped.size() << " skipped); TS MSFE "
              << rep.ts_summary.msfe << '\n';
    for (const auto& s : rep.method_summaries) std::cout << "  " << method_name(s.method) << " MSFE " << s.msfe << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& c) {
    SynthSpec spec;
    if (!c.spec.empty()) {
        std::ifstream in(c.spec);
        require(bool(in), ErrorKind::usage, "cannot read spec file " + c.spec);
        try {
            spec = synth_spec_from_json(json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::usage, "spec " + c.spec + ": " + e.what());
        }
    } else {
        spec.A = {0.5 * Matrix::Identity(spec.K_true, spec.K_true)};
        spec.noise_sd = 0.05;
        spec.seed = c.seed;
    }
    const SynthResult r = generate(spec);
    OutputSet out(c);
    out.write("prices.csv", [&](std::ostream& o) { write_wide_csv(o, to_prices(r.fts)); });
    json truth{{"schema_version", kSchemaVersion},
               {"kind", "ifts.ground_truth"},
               {"spec", synth_spec_to_json(spec)},
               {"mean", to_json(r.truth.mean)},
               {"eigenfunctions", to_json(Matrix(r.truth.eigenfunctions.transpose()))},
               {"scores", to_json(r.truth.scores)}};
    if (r.truth.rho) truth["rho"] = to_json(*r.truth.rho);
    out.json_file("truth.json", truth);
    out.manifest("simulate");
    std::cout << "simulated " << spec.n << " days on tau = " << spec.tau << '\n';
    return 0;
}

int cmd_export_plots(const RunConfig& c) {
    require(!c.report.empty(), ErrorKind::usage, "export-plots needs --report report.json");
    std::ifstream in(c.report);
    require(bool(in), ErrorKind::usage, "cannot read report " + c.report);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, "report " + c.report + ": " + e.what());
    }
    OutputSet out(c);
    write_plot_exports(out, doc);
    out.manifest("export-plots");
    return 0;
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("-c,--config", f.config, "JSON run configuration");
    sub->add_option("-o,--output-dir", f.output_dir, "Directory for outputs");
}

void add_data(CLI::App* sub, Flags& f) {
    sub->add_option("-i,--input", f.input, "Price CSV (long or wide)");
    sub->add_option("--K", f.K, "Retained components, integer or auto");
    sub->add_option("--p-max", f.p_max, "Largest VAR order considered");
}

void add_bootstrap(CLI::App* sub, Flags& f) {
    sub->add_option("-B,--replicates", f.B, "Bootstrap replicates");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--alphas", f.alphas, "Significance levels")->delimiter(',');
    sub->add_option("--center", f.center, "Interval center: far1 or ts");
    sub->add_option("--threads", f.threads, "Worker threads (0: all cores)");
}

void add_methods(CLI::App* sub, Flags& f) {
    sub->add_option("--methods", f.methods, "Methods among TS,PLS,OLS,FLR")->delimiter(',');
    sub->add_option("--periods", f.periods, "Updating periods m")->delimiter(',');
    sub->add_option("--lambda-grid", f.lambda_grid, "Candidate lambda values")->delimiter(',');
    sub->add_option("--lambdas", f.lambdas, "Pre-tuned lambda schedule JSON");
    sub->add_option("--train", f.train, "Tuning training days");
    sub->add_option("--validation", f.validation, "Tuning validation days");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional time series forecasting of intraday return curves"};
    app.set_version_flag("--version", std::string(kLibraryVersion));
    app.require_subcommand(1);
    Flags f;

    auto* ingest_cmd = app.add_subcommand("ingest", "Validate and reshape a price CSV");
    add_common(ingest_cmd, f);
    ingest_cmd->add_option("-i,--input", f.input, "Price CSV (long or wide)");

    auto* fit_cmd = app.add_subcommand("fit", "Fit FPCA and the score VAR");
    add_common(fit_cmd, f);
    add_data(fit_cmd, f);

    auto* forecast_cmd = app.add_subcommand("forecast", "One-step-ahead forecast with intervals and bands");
    add_common(forecast_cmd, f);
    add_data(forecast_cmd, f);
    add_bootstrap(forecast_cmd, f);

    auto* update_cmd = app.add_subcommand("update", "Update the rest of a partially observed day");
    add_common(update_cmd, f);
    add_data(update_cmd, f);
    add_bootstrap(update_cmd, f);
    update_cmd->add_option("--partial", f.partial, "Wide CSV whose last row is the partial day");
    update_cmd->add_option("--m", f.m, "Last observed grid index (default: inferred)");
    update_cmd->add_option("--lambda", f.lambda, "Fixed PLS shrinkage");
    update_cmd->add_option("--lambdas", f.lambdas, "Pre-tuned lambda schedule JSON");
    update_cmd->add_option("--methods", f.methods, "Methods among TS,PLS,OLS,FLR")->delimiter(',');

    auto* tune_cmd = app.add_subcommand("tune", "Tune PLS lambda per updating period");
    add_common(tune_cmd, f);
    add_data(tune_cmd, f);
    add_bootstrap(tune_cmd, f);
    add_methods(tune_cmd, f);

    auto* backtest_cmd = app.add_subcommand("backtest", "Expanding-window evaluation");
    add_common(backtest_cmd, f);
    add_data(backtest_cmd, f);
    add_bootstrap(backtest_cmd, f);
    add_methods(backtest_cmd, f);
    backtest_cmd->add_option("--initial-train", f.initial_train, "Days before the first forecast");
    backtest_cmd->add_option("--n-test", f.n_test, "Holdout days");
    backtest_cmd->add_flag("--rolling", f.rolling, "Rolling instead of expanding window");

    auto* simulate_cmd = app.add_subcommand("simulate", "Generate synthetic prices with ground truth");
    add_common(simulate_cmd, f);
    simulate_cmd->add_option("--spec", f.spec, "Synthetic spec JSON");
    simulate_cmd->add_option("--seed", f.seed, "Seed when no spec is given");

    auto* export_cmd = app.add_subcommand("export-plots", "Tidy CSVs for plotting from a report");
    add_common(export_cmd, f);
    export_cmd->add_option("--report", f.report, "report.json from backtest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const RunConfig c = resolve(f);
        if (*ingest_cmd) return cmd_ingest(c);
        if (*fit_cmd) return cmd_fit(c);
        if (*forecast_cmd) return cmd_forecast(c);
        if (*update_cmd) return cmd_update(c);
        if (*tune_cmd) return cmd_tune(c);
        if (*backtest_cmd) return cmd_backtest(c);
        if (*simulate_cmd) return cmd_simulate(c);
        if (*export_cmd) return cmd_export_plots(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
