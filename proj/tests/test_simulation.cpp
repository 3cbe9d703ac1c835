#include <gtest/gtest.h>

#include <cmath>

#include "crband/simulation.hpp"
#include "properties.hpp"

using namespace crband;

TEST(Covariates, Moments)
{
    const auto z = props::covariate_moments(1, 100000);
    EXPECT_LE(z.z1_mean, 3.0);
    EXPECT_LE(z.z1_var, 3.0);
    EXPECT_LE(z.z2_mean, 3.0);
    EXPECT_LE(z.z3_mean, 3.0);
}

TEST(GenEvent, CauseSpecificMoments)
{
    SimConfig cfg;
    const double risk = std::exp(dot(cfg.z0, cfg.beta0));
    const double total = (cfg.rates[0] + cfg.rates[1]) * risk;
    Stream s{StreamKey(2)};
    const int n = 100000;
    double sum = 0.0, ones = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto e = gen_event(cfg.z0, cfg, s);
        sum += e.time;
        ones += e.cause == 1 ? 1.0 : 0.0;
    }
    EXPECT_LE(std::abs(sum / n - 1.0 / total), 3.0 * (1.0 / total) / std::sqrt(n));
    const double p = cfg.rates[0] / (cfg.rates[0] + cfg.rates[1]);
    EXPECT_LE(std::abs(ones / n - p), 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(TrueCif, Limits)
{
    SimConfig cfg;
    EXPECT_EQ(true_cif(cfg.z0, cfg, 0.0), 0.0);
    EXPECT_NEAR(true_cif(cfg.z0, cfg, 1e6), 0.08 / 0.088, 1e-12);
    cfg.generator = Generator::FineGrayDirect;
    EXPECT_EQ(true_cif(cfg.z0, cfg, 0.0), 0.0);
    const double risk = std::exp(dot(cfg.z0, cfg.beta0));
    EXPECT_NEAR(true_cif(cfg.z0, cfg, 1e6), 1.0 - std::pow(0.7, risk), 1e-12);
    double prev = 0.0;
    for (double t = 0.1; t < 30.0; t += 0.1) {
        const double f = true_cif(cfg.z0, cfg, t);
        EXPECT_GE(f, prev);
        prev = f;
    }
}

TEST(TrueCif, MatchesGeneratorEmpirically)
{
    SimConfig cfg;
    EXPECT_LE(props::generator_cif_error(cfg, 3, 100000), 0.01);
    cfg.generator = Generator::FineGrayDirect;
    EXPECT_LE(props::generator_cif_error(cfg, 4, 100000), 0.01);
}

TEST(Calibration, ExponentialLatentTimes)
{
    // P(c V < T) = (1 - e^-c) / c for T ~ Exp(1), V ~ U(0,1); 0.5 at c = 1.5936
    Stream s{StreamKey(5)};
    std::vector<double> t(100000), v(100000);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = -std::log(s.uniform());
        v[i] = s.uniform();
    }
    const auto cal = calibrate_uniform(t, v, {0.45, 0.55});
    EXPECT_NEAR(cal.c, 1.5936, 0.03);
    EXPECT_NEAR(cal.rate, 0.5, 0.005);
    EXPECT_FALSE(cal.enormous);
}

TEST(Calibration, TinyTargetFlagged)
{
    Stream s{StreamKey(6)};
    std::vector<double> t(100000), v(100000);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = -std::log(s.uniform());
        v[i] = s.uniform();
    }
    EXPECT_TRUE(calibrate_uniform(t, v, {0.0001, 0.0002}).enormous);
}

TEST(Calibration, UnreachableTarget)
{
    const std::vector<double> t{1.0}, v{0.5};
    try {
        calibrate_uniform(t, v, {0.4, 0.6});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CalibrationFailed);
    }
}

TEST(GenDataset, HugeHorizonMeansNoCensoring)
{
    SimConfig cfg;
    cfg.n = 1000;
    Stream s{StreamKey(7)};
    const auto d = gen_dataset(cfg, 1e9, s);
    EXPECT_EQ(censoring_rate(d), 0.0);
    EXPECT_EQ(d.completeness, Completeness::CensoringComplete);
    EXPECT_EQ(d.horizon, 1e9);
}

TEST(GenDataset, CalibratedCensoringRate)
{
    SimConfig cfg;
    const auto cal = calibrate_censoring(cfg);
    double rate = 0.0;
    for (std::size_t k = 1; k <= 200; ++k) {
        auto s = sim_stream(8, k, "data");
        rate += censoring_rate(gen_dataset(cfg, cal.c, s));
    }
    rate /= 200.0;
    EXPECT_GE(rate, cfg.censor_target[0]);
    EXPECT_LE(rate, cfg.censor_target[1]);
}

TEST(GenDataset, DegradeAndReplayRoundTrip)
{
    SimConfig cfg;
    Stream s{StreamKey(9)};
    const auto complete = gen_dataset(cfg, 30.0, s);
    const auto incomplete = degrade_to_incomplete(complete);
    censoring::Known known;
    for (const auto& r : complete.records) {
        EXPECT_EQ(r.is_event(), r.cens_time.has_value());
        if (r.is_event()) known.times[r.id] = *r.cens_time;
    }
    for (const auto& r : incomplete.records) EXPECT_FALSE(r.cens_time.has_value());
    Stream u{StreamKey(1)};
    auto replay = impute_once(incomplete, known, u);
    EXPECT_EQ(replay.records, complete.records);
}

TEST(Summarize, PermutationInvariantAndCountsFailures)
{
    std::vector<SimOutcome> v{{true, true, 0.3, ""}, {true, false, 0.5, ""}, {false, false, 0.0, "x"}, {true, true, 0.4, ""}};
    const auto a = summarize(BandMethod::CC, v);
    std::reverse(v.begin(), v.end());
    const auto b = summarize(BandMethod::CC, v);
    EXPECT_EQ(a.cp_percent, b.cp_percent);
    EXPECT_EQ(a.median_width, b.median_width);
    EXPECT_NEAR(a.cp_percent, 200.0 / 3.0, 1e-12);
    EXPECT_EQ(a.median_width, 0.4);
    EXPECT_EQ(a.n_ok, 3);
    EXPECT_EQ(a.failures, 1);
    EXPECT_EQ(median({1.0, 4.0}), 2.5);
}

TEST(BandCovers, Cases)
{
    SimConfig cfg;
    const auto truth = [&](double t) { return true_cif(cfg.z0, cfg, t); };
    BandConfig bc;
    bc.interval = {1.0, 20.0};
    const StepFunction center({5.0, 10.0}, {0.2, 0.3}, 0.1);
    const auto wide = make_band(BandMethod::CC, center, std::numeric_limits<double>::infinity(), 100, bc);
    EXPECT_TRUE(band_covers(wide, truth));
    const auto flat = make_band(BandMethod::CC, center, 0.0, 100, bc);
    EXPECT_FALSE(band_covers(flat, truth));
    // a band that holds at every grid point but not inside a segment
    const StepFunction zero(0.0);
    const auto steep = make_band(BandMethod::CC, zero, 0.5, 100, bc);
    EXPECT_TRUE(band_covers(steep, [](double) { return 0.0; }));
    EXPECT_FALSE(band_covers(steep, [](double t) { return t > 10.0 ? 0.06 : 0.0; }));
}

TEST(BandResult, WidthFormula)
{
    BandConfig bc;
    bc.interval = {0.0, 1.0};
    const auto band = make_band(BandMethod::CC, StepFunction(0.5), 1.3, 25, bc);
    EXPECT_DOUBLE_EQ(band.half_width(), 1.3 / 5.0);
    EXPECT_DOUBLE_EQ(band.width(), 2.0 * 1.3 / 5.0);
}

TEST(RunCoverage, SmallStudyIsThreadInvariant)
{
    SimConfig cfg;
    cfg.n_sims = 6;
    cfg.B = 30;
    cfg.M = 8;
    cfg.I = 3;
    cfg.seed = 4;
    CoverageOptions opt;
    opt.threads = 1;
    const auto a = run_coverage(cfg, opt);
    opt.threads = 3;
    const auto b = run_coverage(cfg, opt);
    ASSERT_EQ(a.rows.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a.rows[k].method, kCoverageMethods[k]);
        EXPECT_EQ(a.rows[k].n_ok + a.rows[k].failures, 6);
        EXPECT_EQ(a.rows[k].cp_percent, b.rows[k].cp_percent);
        EXPECT_EQ(a.rows[k].median_width, b.rows[k].median_width);
    }
    EXPECT_EQ(a.calibration.c, b.calibration.c);
    EXPECT_LT(a.interval.t1, a.interval.t2);
}
