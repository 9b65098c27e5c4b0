// Simulates a year of intraday curves, forecasts the next day with sieve
// bootstrap intervals, then updates the afternoon after seeing the morning.

#include "ifts/ifts.hpp"

#include <cstdio>

int main() {
    using namespace ifts;

    SynthSpec spec;
    spec.n = 251;
    spec.tau = 75;
    spec.A = {Matrix(Eigen::DiagonalMatrix<double, 2>(0.7, 0.6))};
    spec.innovation_cov = Eigen::Vector2d(1.0, 0.8).asDiagonal();
    spec.noise_sd = 0.05;
    spec.seed = 11;
    const SynthResult sim = generate(spec);

    // the last simulated day plays the role of "today"
    const FunctionalTimeSeries history = sim.fts.slice(0, 250);
    const Vector today = sim.fts.values().row(250).transpose();

    BootstrapConfig cfg;
    cfg.B = 200;
    const DayForecast f = forecast_day(history.values(), history.quad_weight(), cfg, 10, std::nullopt);
    std::printf("K = %d, VAR(%d), band factor Q*(0.80) = %.3f\n", f.fpca.K, f.var.p, f.sieve.band_at(0.2).radius_factor);

    const auto& pi = f.sieve.pointwise_at(0.2);
    std::printf("%8s %9s %9s %9s %9s\n", "time", "actual", "forecast", "lo80", "hi80");
    for (Index i = 0; i < today.size(); i += 12)
        std::printf("%8s %9.4f %9.4f %9.4f %9.4f\n", format_time(history.grid().times()[static_cast<std::size_t>(i + 1)]).c_str(),
                    today(i), f.sieve.point(i), pi.lower(i), pi.upper(i));

    const int m = 37;  // morning observed through grid index 37
    const UpdateContext ctx = make_update_context(f.fpca, m, today.head(m - 1), f.ts_scores);
    const Vector afternoon = today.tail(ctx.updating_points());
    auto mse = [&](const Vector& v) { return (v - afternoon).squaredNorm() / static_cast<double>(v.size()); };
    std::printf("afternoon MSE  TS %.4f  PLS(lambda=1) %.4f  OLS %.4f\n", mse(f.sieve.ts_point.tail(afternoon.size())),
                mse(pls_update(ctx, 1.0)), mse(ols_update(ctx)));
    return 0;
}
