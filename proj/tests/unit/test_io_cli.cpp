#include "ifts/io.hpp"

#include "catch_amalgamated.hpp"

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ifts;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ifts_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Run {
    int code;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(IFTS_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

json load(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

// small synthetic price file shared by the CLI tests
fs::path small_prices(const fs::path& dir) {
    SynthSpec s;
    s.n = 40;
    s.tau = 12;
    s.A = {0.4 * Matrix::Identity(2, 2)};
    s.noise_sd = 0.1;
    s.seed = 11;
    write_text(dir / "spec.json", synth_spec_to_json(s).dump());
    REQUIRE(cli("simulate --spec " + (dir / "spec.json").string() + " -o " + (dir / "sim").string(), dir).code == 0);
    return dir / "sim" / "prices.csv";
}

}  // namespace

TEST_CASE("JSON matrix and vector round trips", "[io]") {
    Matrix m(2, 3);
    m << 1.5, -2.0, 3.25, 0.1, 1e-17, -7.0;
    CHECK(matrix_from_json(json::parse(to_json(m).dump())) == m);
    Vector v = Vector::LinSpaced(5, -1.0, 1.0);
    CHECK(vector_from_json(json::parse(to_json(v).dump())) == v);
    CHECK_THROWS_AS(matrix_from_json(json::parse("[[1,2],[3]]")), Error);
}

TEST_CASE("synthetic spec and lambda schedule round trips", "[io]") {
    SynthSpec s;
    s.n = 33;
    s.tau = 21;
    s.A = {0.2 * Matrix::Identity(2, 2)};
    s.noise_sd = 0.3;
    s.seed = 77;
    LinkageSpec l;
    l.m = 9;
    l.rho = Matrix::Ones(2, 1);
    l.late_innovation_sd = 0.2;
    s.linkage = l;
    auto back = synth_spec_from_json(json::parse(synth_spec_to_json(s).dump()));
    CHECK(generate(back).fts.values() == generate(s).fts.values());

    LambdaSchedule sched;
    sched.point = {{2, 0.0}, {5, 100.0}};
    sched.interval[0.2] = {{2, 1.0}, {5, 0.01}};
    sched.interval[0.05] = {{2, 1e8}, {5, 0.0}};
    auto sb = schedule_from_json(json::parse(schedule_to_json(sched).dump()));
    CHECK(sb.point == sched.point);
    CHECK(sb.interval_at(0.05, 2) == 1e8);
    CHECK(sb.interval_at(0.2, 5) == 0.01);

    json bad = schedule_to_json(sched);
    bad["schema_version"] = 99;
    CHECK_THROWS_AS(schedule_from_json(bad), Error);
}

TEST_CASE("FPCA model document round trip", "[io]") {
    SynthSpec s;
    s.n = 30;
    s.tau = 10;
    s.noise_sd = 0.1;
    auto fts = generate(s).fts;
    auto m = fit_fpca(fts);
    auto back = fpca_from_json(json::parse(fpca_to_json(m).dump()));
    const Vector x = fts.values().row(3).transpose();
    CHECK((project_scores(back, x) - project_scores(m, x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("FNV-1a hash", "[io]") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("cli ingest", "[cli]") {
    auto dir = scratch("ingest");
    std::string csv = "date,time,price\n";
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < 5; ++i) {
            csv += "2021-01-0" + std::to_string(d + 4) + ",10:0" + std::to_string(i * 2) + ",";
            csv += (d == 1 && i == 2) ? "NA\n" : std::to_string(100 + d + i) + "\n";
        }
    write_text(dir / "long.csv", csv);
    auto r = cli("ingest -i " + (dir / "long.csv").string() + " -o " + (dir / "out").string(), dir);
    REQUIRE(r.code == 0);
    auto rows = lines(dir / "out" / "prices.csv");
    CHECK(rows.size() == 3);
    auto summary = load(dir / "out" / "summary.json");
    CHECK(summary["schema_version"] == kSchemaVersion);
    CHECK(summary["n"] == 2);
    CHECK(summary["tau"] == 5);
    CHECK(summary["interpolated_cells"] == 1);
    auto manifest = load(dir / "out" / "manifest.json");
    for (const char* k : {"schema_version", "kind", "library_version", "seed", "config_hash", "outputs"}) CHECK(manifest.contains(k));
    CHECK(manifest["library_version"] == kLibraryVersion);

    write_text(dir / "bad.csv", "date,10:00,10:05,10:10\nd1,100,101,102\nd2,100,-3,102\n");
    auto bad = cli("ingest -i " + (dir / "bad.csv").string() + " -o " + (dir / "bad").string(), dir);
    CHECK(bad.code == 2);
    CHECK(bad.err.find("line 3") != std::string::npos);
}

TEST_CASE("cli exit codes", "[cli]") {
    auto dir = scratch("codes");
    CHECK(cli("no-such-command", dir).code == 1);
    CHECK(cli("forecast --bogus-flag 3", dir).code == 1);
    CHECK(cli("forecast -i " + (dir / "missing.csv").string() + " -o " + dir.string(), dir).code != 0);
    write_text(dir / "cfg.json", "{\"B\": 10, \"unknown_key\": 1}");
    CHECK(cli("forecast -c " + (dir / "cfg.json").string(), dir).code == 1);
    write_text(dir / "broken.json", "{\"B\": ");
    // a malformed config file is an invocation problem, not a data problem
    CHECK(cli("forecast -c " + (dir / "broken.json").string(), dir).code == 1);
}

TEST_CASE("cli forecast is reproducible", "[cli]") {
    auto dir = scratch("forecast");
    const auto prices = small_prices(dir).string();
    const std::string args = "forecast -i " + prices + " -B 60 --seed 5 --threads 2 -o ";
    REQUIRE(cli(args + (dir / "a").string(), dir).code == 0);
    REQUIRE(cli("forecast -i " + prices + " -B 60 --seed 5 --threads 1 -o " + (dir / "b").string(), dir).code == 0);
    auto rows = lines(dir / "a" / "forecast.csv");
    CHECK(rows.size() == 12);  // header plus tau - 1 rows
    CHECK(rows.front().rfind("grid_index,point,lo80,hi80,lo95,hi95", 0) == 0);
    CHECK(slurp(dir / "a" / "forecast.csv") == slurp(dir / "b" / "forecast.csv"));
    CHECK(slurp(dir / "a" / "forecast.json") == slurp(dir / "b" / "forecast.json"));
    CHECK(load(dir / "a" / "manifest.json")["config_hash"] == load(dir / "b" / "manifest.json")["config_hash"]);

    auto one = cli("forecast -i " + prices + " -B 1 -o " + (dir / "c").string(), dir);
    CHECK(one.code == 0);
    CHECK(one.err.find("degenerate") != std::string::npos);
    CHECK(load(dir / "c" / "forecast.json")["degenerate"] == true);
}

TEST_CASE("cli fit and update", "[cli]") {
    auto dir = scratch("update");
    const auto prices = small_prices(dir);
    REQUIRE(cli("fit -i " + prices.string() + " -o " + (dir / "fit").string(), dir).code == 0);
    auto model = load(dir / "fit" / "model.json");
    CHECK(model["kind"] == "ifts.model");
    CHECK(model["fpca"]["eigenfunctions"].front().size() == 11);

    // partial day: the last simulated day with everything after the sixth price blanked
    auto rows = lines(prices);
    std::string last = rows.back();
    std::stringstream ss(last);
    std::string cell, partial;
    for (int i = 0; std::getline(ss, cell, ','); ++i) partial += (i > 0 ? "," : "") + (i <= 6 ? cell : std::string());
    write_text(dir / "partial.csv", rows.front() + "\n" + partial + "\n");

    auto r = cli("update -i " + prices.string() + " --partial " + (dir / "partial.csv").string() +
                     " --methods TS,PLS,OLS,FLR --lambda 1 -B 40 -o " + (dir / "up").string(),
                 dir);
    REQUIRE(r.code == 0);
    auto doc = load(dir / "up" / "update.json");
    CHECK(doc["m"] == 6);
    CHECK(doc["methods"]["PLS"]["lambda"] == 1.0);
    CHECK(lines(dir / "up" / "update.csv").size() == 1 + 4 * 6);

    auto no_lambda = cli("update -i " + prices.string() + " --partial " + (dir / "partial.csv").string() +
                             " --methods PLS -B 20 -o " + (dir / "up2").string(),
                         dir);
    CHECK(no_lambda.code == 1);
}

TEST_CASE("cli backtest artifacts and determinism", "[cli][slow]") {
    auto dir = scratch("backtest");
    const auto prices = small_prices(dir).string();
    const std::string args = "backtest -i " + prices +
                             " --initial-train 30 --n-test 4 -B 30 --p-max 3 --periods 3,6,9 --train 20 --validation 10 -o ";
    REQUIRE(cli(args + (dir / "a").string(), dir).code == 0);
    REQUIRE(cli(args + (dir / "b").string(), dir).code == 0);
    for (const char* f : {"report.json", "ts_summary.csv", "ts_by_point.csv", "method_summary.csv", "periods.csv", "lambda_point.csv",
                          "msfe_by_period.csv", "sign_by_period.csv", "lambda_interval.csv", "interval_score_by_period.csv"}) {
        INFO(f);
        REQUIRE(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(load(dir / "a" / "report.json")["schema_version"] == kSchemaVersion);
    CHECK(lines(dir / "a" / "method_summary.csv").size() == 5);

    REQUIRE(cli("export-plots --report " + (dir / "a" / "report.json").string() + " -o " + (dir / "plots").string(), dir).code == 0);
    CHECK(slurp(dir / "plots" / "msfe_by_period.csv") == slurp(dir / "a" / "msfe_by_period.csv"));

    // tuning window reaching into the test days is refused
    CHECK(cli("backtest -i " + prices + " --initial-train 30 --n-test 4 --train 25 --validation 10 -o " + (dir / "c").string(), dir)
              .code == 1);
}
