#include "ifts/gridcurves.hpp"

#include "catch_amalgamated.hpp"

#include <random>
#include <sstream>

using namespace ifts;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PriceMatrix random_prices(Index n, int tau, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(1.0, 500.0);
    Matrix p(n, tau);
    for (Index t = 0; t < n; ++t)
        for (Index i = 0; i < tau; ++i) p(t, i) = u(gen);
    return PriceMatrix(IntradayGrid::uniform(tau), p);
}

}  // namespace

TEST_CASE("constant prices give zero curves", "[gridcurves]") {
    PriceMatrix p(IntradayGrid::uniform(5), Matrix::Constant(3, 5, 100.0));
    auto x = cidr_transform(p);
    CHECK(x.points() == 4);
    CHECK(x.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single log return of 1%", "[gridcurves]") {
    Matrix p(1, 3);
    p << 100.0, 100.0 * std::exp(0.01), 100.0;
    auto x = cidr_transform(PriceMatrix(IntradayGrid::uniform(3), p));
    CHECK_THAT(x.values()(0, 0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(x.values()(0, 1), WithinAbs(0.0, 1e-12));

    auto back = inverse_cidr(x, Vector::Constant(1, 100.0));
    CHECK_THAT(back.prices()(0, 1), WithinRel(100.0 * std::exp(0.01), 1e-14));
}

TEST_CASE("zero curves invert to the opening price", "[gridcurves]") {
    auto x = FunctionalTimeSeries::on_uniform_grid(Matrix::Zero(2, 4));
    auto p = inverse_cidr(x, Vector::Constant(2, 100.0));
    CHECK((p.prices().array() == 100.0).all());
}

TEST_CASE("cidr round trip on random price matrices", "[gridcurves]") {
    auto p = random_prices(3, 5, 42);
    auto back = inverse_cidr(cidr_transform(p), p.prices().col(0));
    const Matrix rel = ((back.prices() - p.prices()).array() / p.prices().array()).abs();
    CHECK(rel.maxCoeff() < 1e-10);
    CHECK((back.prices().col(0).array() == p.prices().col(0).array()).all());
}

TEST_CASE("scaling a day's prices leaves its curve unchanged", "[gridcurves]") {
    auto p = random_prices(2, 6, 7);
    Matrix scaled = p.prices();
    scaled.row(1) *= 3.7;
    auto a = cidr_transform(p);
    auto b = cidr_transform(PriceMatrix(p.grid(), scaled));
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-positive price is rejected with its position", "[gridcurves]") {
    Matrix p = Matrix::Constant(2, 4, 10.0);
    p(1, 2) = -1.0;
    try {
        PriceMatrix bad(IntradayGrid::uniform(4), p);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("day 2, index 3") != std::string::npos);
    }
}

TEST_CASE("inverse requires one opening price per day", "[gridcurves]") {
    auto x = FunctionalTimeSeries::on_uniform_grid(Matrix::Zero(3, 4));
    CHECK_THROWS_AS(inverse_cidr(x, Vector::Constant(2, 1.0)), Error);
}

TEST_CASE("linear interpolation of interior gaps", "[gridcurves]") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Matrix a(1, 3);
    a << 100, nan, 102;
    CHECK_THAT(interpolate_missing(a)(0, 1), WithinAbs(101.0, 1e-12));

    Matrix b(1, 4);
    b << 100, nan, nan, 103;
    Index filled = 0;
    Matrix fb = interpolate_missing(b, &filled);
    CHECK(filled == 2);
    CHECK_THAT(fb(0, 1), WithinAbs(101.0, 1e-12));
    CHECK_THAT(fb(0, 2), WithinAbs(102.0, 1e-12));

    Matrix c(2, 3);
    c << 1, 2, 3, 4, 5, 6;
    CHECK(interpolate_missing(c) == c);
    CHECK(interpolate_missing(fb) == fb);
}

TEST_CASE("interpolation refuses to extrapolate", "[gridcurves]") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Matrix a(1, 3);
    a << nan, 1, 2;
    CHECK_THROWS_AS(interpolate_missing(a), Error);
    a << 1, 2, nan;
    CHECK_THROWS_AS(interpolate_missing(a), Error);
}

TEST_CASE("long-format CSV reshapes to a day by time matrix", "[gridcurves][csv]") {
    std::stringstream in;
    in << "date,time,price\n";
    for (int d = 0; d < 2; ++d)
        for (int i = 0; i < 5; ++i) in << "2021-01-0" << d + 4 << ",10:0" << i * 2 << "," << 100 + d + i << "\n";
    auto raw = read_price_csv(in);
    CHECK(raw.layout == CsvLayout::long_format);
    auto r = ingest(raw);
    CHECK(r.prices.n() == 2);
    CHECK(r.prices.grid().tau() == 5);
    CHECK(r.prices.prices()(1, 4) == 105.0);
    CHECK(r.prices.dates()[1] == "2021-01-05");
}

TEST_CASE("malformed price names its line", "[gridcurves][csv]") {
    std::stringstream in("date,10:00,10:05,10:10\nd1,1,2,3\nd2,1,abc,3\n");
    try {
        read_price_csv(in);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("ingest interpolates one interior gap and drops sparse days", "[gridcurves][csv]") {
    std::stringstream in(
        "date,10:00,10:05,10:10,10:15\n"
        "d1,100,,102,103\n"
        "d2,100,NA,NA,NA\n"
        "d3,,100,100,100\n"
        "d4,100,101,102,103\n");
    auto r = ingest(read_price_csv(in));
    CHECK(r.summary.n == 2);
    CHECK(r.summary.interpolated_cells == 1);
    CHECK(r.summary.missing_cells == 5);
    REQUIRE(r.summary.dropped.size() == 2);
    CHECK(r.summary.dropped[0].date == "d2");
    CHECK(r.summary.dropped[1].date == "d3");
    CHECK(r.prices.prices()(0, 1) == 101.0);
}

TEST_CASE("wide CSV writer round-trips exactly", "[gridcurves][csv]") {
    auto p = random_prices(4, 6, 99);
    std::stringstream buf;
    write_wide_csv(buf, p);
    auto r = ingest(read_price_csv(buf));
    CHECK(r.prices.prices() == p.prices());
    CHECK(r.prices.grid() == p.grid());
}
