#pragma once

// Intraday price ingestion and cumulative intraday return (CIDR) curves.
//
// A trading day is sampled at tau intraday times u_1 < ... < u_tau. The curve
// for day t lives on u_2..u_tau and holds 100 * (ln P_t(u_i) - ln P_t(u_1)).

#include "ifts/common.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ifts {

/// Sample times of one trading day, in minutes since midnight.
class IntradayGrid {
public:
    IntradayGrid() = default;
    explicit IntradayGrid(std::vector<double> times) : times_(std::move(times)) {
        require(times_.size() >= 3, ErrorKind::data, "intraday grid needs at least 3 sample times");
        for (std::size_t i = 1; i < times_.size(); ++i)
            require(times_[i] > times_[i - 1], ErrorKind::data, "intraday grid times must be strictly increasing");
    }

    static IntradayGrid uniform(int tau, double start_minutes = 600.0, double step_minutes = 5.0) {
        require(tau >= 3, ErrorKind::usage, "tau must be at least 3");
        std::vector<double> t(static_cast<std::size_t>(tau));
        for (int i = 0; i < tau; ++i) t[static_cast<std::size_t>(i)] = start_minutes + step_minutes * i;
        return IntradayGrid(std::move(t));
    }

    int tau() const { return static_cast<int>(times_.size()); }
    /// Number of curve points, tau - 1.
    int points() const { return tau() - 1; }
    const std::vector<double>& times() const { return times_; }
    /// Grid step in index units; the grid is uniform in index by construction.
    double spacing() const { return 1.0; }
    /// Rectangle-rule weight over the curve indices 2..tau.
    double quad_weight() const { return 1.0 / static_cast<double>(tau() - 2); }

    bool operator==(const IntradayGrid&) const = default;

private:
    std::vector<double> times_;
};

inline std::string format_time(double minutes) {
    const int total = static_cast<int>(std::lround(minutes));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", total / 60, total % 60);
    return buf;
}

inline std::optional<double> parse_time(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    int h = 0, m = 0;
    auto [p1, e1] = std::from_chars(s.data(), s.data() + colon, h);
    auto [p2, e2] = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != s.data() + colon || p2 != s.data() + s.size()) return std::nullopt;
    if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
    return 60.0 * h + m;
}

/// Strictly positive close prices, one row per day, one column per grid time.
class PriceMatrix {
public:
    PriceMatrix(IntradayGrid grid, Matrix prices, std::vector<std::string> dates = {})
        : grid_(std::move(grid)), prices_(std::move(prices)), dates_(std::move(dates)) {
        require(prices_.cols() == grid_.tau(), ErrorKind::data, "price matrix width does not match the grid");
        for (Index t = 0; t < prices_.rows(); ++t)
            for (Index i = 0; i < prices_.cols(); ++i) {
                const double v = prices_(t, i);
                if (!std::isfinite(v) || v <= 0.0)
                    fail(ErrorKind::data, "non-positive or non-finite price at day " + std::to_string(t + 1) +
                                              ", index " + std::to_string(i + 1));
            }
        if (dates_.empty()) dates_ = default_dates(prices_.rows());
        require(static_cast<Index>(dates_.size()) == prices_.rows(), ErrorKind::data, "date label count mismatch");
    }

    Index n() const { return prices_.rows(); }
    const IntradayGrid& grid() const { return grid_; }
    const Matrix& prices() const { return prices_; }
    const std::vector<std::string>& dates() const { return dates_; }

    static std::vector<std::string> default_dates(Index n) {
        std::vector<std::string> d(static_cast<std::size_t>(n));
        for (Index t = 0; t < n; ++t) d[static_cast<std::size_t>(t)] = "day" + std::to_string(t + 1);
        return d;
    }

private:
    IntradayGrid grid_;
    Matrix prices_;
    std::vector<std::string> dates_;
};

/// n curves sampled on the tau - 1 grid points u_2..u_tau.
class FunctionalTimeSeries {
public:
    FunctionalTimeSeries(IntradayGrid grid, Matrix values, std::vector<std::string> dates = {})
        : grid_(std::move(grid)), values_(std::move(values)), dates_(std::move(dates)) {
        require(values_.cols() == grid_.points(), ErrorKind::data, "curve width must equal tau - 1");
        require(values_.allFinite(), ErrorKind::data, "curves contain non-finite values");
        if (dates_.empty()) dates_ = PriceMatrix::default_dates(values_.rows());
        require(static_cast<Index>(dates_.size()) == values_.rows(), ErrorKind::data, "date label count mismatch");
    }

    /// Curves on a uniform grid with the default 5-minute labels.
    static FunctionalTimeSeries on_uniform_grid(Matrix values) {
        auto grid = IntradayGrid::uniform(static_cast<int>(values.cols()) + 1);
        return FunctionalTimeSeries(std::move(grid), std::move(values));
    }

    Index n() const { return values_.rows(); }
    Index points() const { return values_.cols(); }
    const IntradayGrid& grid() const { return grid_; }
    const Matrix& values() const { return values_; }
    const std::vector<std::string>& dates() const { return dates_; }
    double quad_weight() const { return grid_.quad_weight(); }

    /// Days [begin, end) as a new series.
    FunctionalTimeSeries slice(Index begin, Index end) const {
        require(begin >= 0 && begin <= end && end <= n(), ErrorKind::usage, "slice out of range");
        return FunctionalTimeSeries(grid_, values_.middleRows(begin, end - begin),
                                    {dates_.begin() + begin, dates_.begin() + end});
    }

private:
    IntradayGrid grid_;
    Matrix values_;
    std::vector<std::string> dates_;
};

inline FunctionalTimeSeries cidr_transform(const PriceMatrix& prices) {
    const Matrix& p = prices.prices();
    Matrix x(p.rows(), p.cols() - 1);
    for (Index t = 0; t < p.rows(); ++t) {
        const double open = std::log(p(t, 0));
        for (Index i = 1; i < p.cols(); ++i) x(t, i - 1) = 100.0 * (std::log(p(t, i)) - open);
    }
    return FunctionalTimeSeries(prices.grid(), std::move(x), prices.dates());
}

inline PriceMatrix inverse_cidr(const FunctionalTimeSeries& curves, const Vector& open_prices) {
    require(open_prices.size() == curves.n(), ErrorKind::data,
            "open price count " + std::to_string(open_prices.size()) + " does not match day count " +
                std::to_string(curves.n()));
    Matrix p(curves.n(), curves.points() + 1);
    for (Index t = 0; t < curves.n(); ++t) {
        p(t, 0) = open_prices(t);
        for (Index i = 0; i < curves.points(); ++i) p(t, i + 1) = std::exp(curves.values()(t, i) / 100.0) * open_prices(t);
    }
    return PriceMatrix(curves.grid(), std::move(p), curves.dates());
}

inline bool is_missing(double v) { return std::isnan(v); }

/// Fills interior gaps (NaN) by linear interpolation in index space. Each row
/// must have observed first and last entries.
inline Matrix interpolate_missing(const Matrix& raw, Index* filled = nullptr) {
    Matrix out = raw;
    Index count = 0;
    for (Index t = 0; t < raw.rows(); ++t) {
        const Index last = raw.cols() - 1;
        if (is_missing(raw(t, 0)) || is_missing(raw(t, last)))
            fail(ErrorKind::data, "day " + std::to_string(t + 1) + " is missing a boundary price; no extrapolation");
        Index left = 0;
        for (Index i = 1; i <= last; ++i) {
            if (is_missing(raw(t, i))) continue;
            for (Index j = left + 1; j < i; ++j) {
                const double frac = static_cast<double>(j - left) / static_cast<double>(i - left);
                out(t, j) = raw(t, left) + frac * (raw(t, i) - raw(t, left));
                ++count;
            }
            left = i;
        }
    }
    if (filled) *filled = count;
    return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

enum class CsvLayout { long_format, wide_format };

/// Parsed price table before gap handling; missing cells are NaN.
struct RawPriceTable {
    CsvLayout layout = CsvLayout::wide_format;
    IntradayGrid grid;
    std::vector<std::string> dates;
    Matrix prices;
};

struct DroppedDay {
    std::string date;
    std::string reason;
};

struct IngestSummary {
    Index n = 0;
    int tau = 0;
    Index missing_cells = 0;
    Index interpolated_cells = 0;
    std::vector<DroppedDay> dropped;
    std::vector<std::string> warnings;
};

struct IngestResult {
    PriceMatrix prices;
    IngestSummary summary;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Parses a price cell. Empty and "NA" are missing (NaN); anything else must be
/// a finite decimal.
inline double parse_price_cell(const std::string& cell, std::size_t line_no) {
    if (cell.empty() || cell == "NA" || cell == "na") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        fail(ErrorKind::data, "line " + std::to_string(line_no) + ": malformed price \"" + cell + "\"");
    if (v <= 0.0) fail(ErrorKind::data, "line " + std::to_string(line_no) + ": non-positive price " + cell);
    return v;
}

}  // namespace detail

/// Reads long (`date,time,price`) or wide (`date,HH:MM,...`) price CSV,
/// chosen by the header row.
inline RawPriceTable read_price_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    require(!header.empty(), ErrorKind::data, "empty CSV input");

    RawPriceTable table;
    const bool is_long = header.size() == 3 && detail::lower(header[0]) == "date" && detail::lower(header[1]) == "time" &&
                         detail::lower(header[2]) == "price";
    if (is_long) {
        table.layout = CsvLayout::long_format;
        std::vector<std::string> order;
        std::map<std::string, std::map<double, double>> cells;
        std::map<double, bool> all_times;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            auto f = detail::split_csv_line(line);
            if (f.size() != 3)
                fail(ErrorKind::data, "line " + std::to_string(line_no) + ": expected 3 fields, found " + std::to_string(f.size()));
            auto tm = parse_time(f[1]);
            if (!tm) fail(ErrorKind::data, "line " + std::to_string(line_no) + ": malformed time \"" + f[1] + "\"");
            const double price = detail::parse_price_cell(f[2], line_no);
            if (f[0].empty()) fail(ErrorKind::data, "line " + std::to_string(line_no) + ": empty date");
            auto [it, fresh] = cells.try_emplace(f[0]);
            if (fresh) order.push_back(f[0]);
            if (!it->second.emplace(*tm, price).second)
                fail(ErrorKind::data, "line " + std::to_string(line_no) + ": duplicate row for " + f[0] + " " + f[1]);
            all_times[*tm] = true;
        }
        std::vector<double> times;
        for (auto& [t, _] : all_times) times.push_back(t);
        table.grid = IntradayGrid(times);
        table.prices = Matrix::Constant(static_cast<Index>(order.size()), static_cast<Index>(times.size()),
                                        std::numeric_limits<double>::quiet_NaN());
        for (std::size_t d = 0; d < order.size(); ++d) {
            const auto& row = cells[order[d]];
            for (std::size_t i = 0; i < times.size(); ++i) {
                auto it = row.find(times[i]);
                if (it != row.end()) table.prices(static_cast<Index>(d), static_cast<Index>(i)) = it->second;
            }
        }
        table.dates = std::move(order);
        return table;
    }

    table.layout = CsvLayout::wide_format;
    const bool has_date = !parse_time(header[0]).has_value();
    std::vector<double> times;
    for (std::size_t c = has_date ? 1 : 0; c < header.size(); ++c) {
        auto tm = parse_time(header[c]);
        if (!tm) fail(ErrorKind::data, "line " + std::to_string(line_no) + ": header field \"" + header[c] + "\" is not HH:MM");
        times.push_back(*tm);
    }
    table.grid = IntradayGrid(times);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            fail(ErrorKind::data, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(f.size()));
        std::vector<double> row;
        for (std::size_t c = has_date ? 1 : 0; c < f.size(); ++c) row.push_back(detail::parse_price_cell(f[c], line_no));
        rows.push_back(std::move(row));
        table.dates.push_back(has_date ? f[0] : "day" + std::to_string(rows.size()));
    }
    table.prices.resize(static_cast<Index>(rows.size()), static_cast<Index>(times.size()));
    for (std::size_t d = 0; d < rows.size(); ++d)
        for (std::size_t i = 0; i < times.size(); ++i) table.prices(static_cast<Index>(d), static_cast<Index>(i)) = rows[d][i];
    return table;
}

/// Gap policy: days missing more than half their prices, or missing the
/// opening or closing print, are dropped with a warning; remaining interior
/// gaps are linearly interpolated.
inline IngestResult ingest(const RawPriceTable& raw) {
    IngestSummary summary;
    summary.tau = raw.grid.tau();
    std::vector<Index> keep;
    std::vector<std::string> dates;
    const Index tau = raw.prices.cols();
    for (Index t = 0; t < raw.prices.rows(); ++t) {
        Index missing = 0;
        for (Index i = 0; i < tau; ++i) missing += is_missing(raw.prices(t, i)) ? 1 : 0;
        summary.missing_cells += missing;
        const std::string& date = raw.dates[static_cast<std::size_t>(t)];
        std::string reason;
        if (2 * missing > tau)
            reason = "more than 50% of prices missing";
        else if (is_missing(raw.prices(t, 0)))
            reason = "missing opening price";
        else if (is_missing(raw.prices(t, tau - 1)))
            reason = "missing closing price";
        if (!reason.empty()) {
            summary.dropped.push_back({date, reason});
            summary.warnings.push_back("dropped " + date + ": " + reason);
            continue;
        }
        keep.push_back(t);
        dates.push_back(date);
    }
    require(!keep.empty(), ErrorKind::data, "no usable trading days after gap handling");
    Matrix kept(static_cast<Index>(keep.size()), tau);
    for (std::size_t k = 0; k < keep.size(); ++k) kept.row(static_cast<Index>(k)) = raw.prices.row(keep[k]);
    Index filled = 0;
    Matrix clean = interpolate_missing(kept, &filled);
    summary.interpolated_cells = filled;
    summary.n = clean.rows();
    return {PriceMatrix(raw.grid, std::move(clean), std::move(dates)), std::move(summary)};
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Canonical wide CSV: `date,HH:MM,...` with full round-trip precision.
inline void write_wide_csv(std::ostream& out, const PriceMatrix& prices) {
    out << "date";
    for (double t : prices.grid().times()) out << ',' << format_time(t);
    out << '\n';
    for (Index d = 0; d < prices.n(); ++d) {
        out << prices.dates()[static_cast<std::size_t>(d)];
        for (Index i = 0; i < prices.prices().cols(); ++i) out << ',' << format_double(prices.prices()(d, i));
        out << '\n';
    }
}

}  // namespace ifts
