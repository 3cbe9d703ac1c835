#pragma once

// Simulation study: covariate and event generators, uniform censoring
// calibration, the true CIF, and the coverage/width harness.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crband/bands.hpp"
#include "crband/censoring.hpp"
#include "crband/data.hpp"
#include "crband/error.hpp"
#include "crband/parallel.hpp"
#include "crband/rng.hpp"

namespace crband {

enum class Generator { CauseSpecific, FineGrayDirect };

inline std::string to_string(Generator g)
{
    return g == Generator::CauseSpecific ? "cause-specific" : "fg-direct";
}

struct SimConfig {
    std::size_t n = 100;
    std::vector<double> beta0{-0.05, -0.25, -0.05};
    std::array<double, 2> rates{0.08, 0.008};
    std::array<double, 2> censor_target{0.20, 0.25};
    std::vector<double> z0{-2.0 / 3.0, 0.0, 1.0};
    double alpha = 0.05;
    int n_sims = 500;
    int B = 500;
    int M = 1000;
    int I = 10;
    std::uint64_t seed = 1;
    Generator generator = Generator::CauseSpecific;
    /// Cause-1 mass at z'beta = 0 for FineGrayDirect.
    double fg_p = 0.3;
};

inline void check_config(const SimConfig& cfg)
{
    if (!(cfg.rates[0] > 0.0 && cfg.rates[1] >= 0.0)) throw Error(Errc::InvalidArgument, "rates must be positive");
    if (!(cfg.censor_target[0] > 0.0 && cfg.censor_target[0] <= cfg.censor_target[1] && cfg.censor_target[1] < 1.0)) {
        throw Error(Errc::InvalidArgument, "censoring target must lie inside (0,1)");
    }
    if (cfg.beta0.size() != 3 || cfg.z0.size() != 3) {
        throw Error(Errc::CovariateLengthMismatch, "beta0 and z0 must have 3 entries");
    }
}

/// Z1 ~ N(0,1), Z2 ~ Bernoulli(0.15), Z3 ~ Bernoulli(0.4), independent.
inline std::vector<double> gen_covariate_row(Stream& s)
{
    const double z1 = s.normal();
    const double z2 = s.uniform() < 0.15 ? 1.0 : 0.0;
    const double z3 = s.uniform() < 0.4 ? 1.0 : 0.0;
    return {z1, z2, z3};
}

inline std::vector<std::vector<double>> gen_covariates(std::size_t n, Stream& s)
{
    std::vector<std::vector<double>> rows(n);
    for (auto& r : rows) r = gen_covariate_row(s);
    return rows;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

struct EventDraw {
    double time;
    int cause;
};

/// Latent event time and cause for covariates z.
inline EventDraw gen_event(std::span<const double> z, const SimConfig& cfg, Stream& s)
{
    const double risk = std::exp(dot(z, cfg.beta0));
    if (cfg.generator == Generator::CauseSpecific) {
        const double total = cfg.rates[0] + cfg.rates[1];
        const double t = -std::log(s.uniform()) / (total * risk);
        const int cause = s.uniform() * total < cfg.rates[0] ? 1 : 2;
        return {t, cause};
    }
    // F1(t|z) = 1 - (1 - p (1 - e^-t))^risk; cause 2 given not 1 is Exp(risk)
    const double p1 = 1.0 - std::pow(1.0 - cfg.fg_p, risk);
    const double u = s.uniform();
    const double v = s.uniform();
    if (u < p1) {
        const double f = v * p1;
        const double inner = 1.0 - (1.0 - std::pow(1.0 - f, 1.0 / risk)) / cfg.fg_p;
        return {-std::log(inner), 1};
    }
    return {-std::log(v) / risk, 2};
}

/// Cause-1 cumulative incidence of the generator at covariates z.
inline double true_cif(std::span<const double> z, const SimConfig& cfg, double t)
{
    if (t <= 0.0) return 0.0;
    const double risk = std::exp(dot(z, cfg.beta0));
    if (cfg.generator == Generator::CauseSpecific) {
        const double total = cfg.rates[0] + cfg.rates[1];
        return cfg.rates[0] / total * -std::expm1(-total * risk * t);
    }
    if (cfg.generator == Generator::FineGrayDirect) {
        return 1.0 - std::pow(1.0 - cfg.fg_p * -std::expm1(-t), risk);
    }
    throw Error(Errc::UnsupportedGenerator, "unknown generator");
}

struct Calibration {
    double c = 0.0;
    double rate = 0.0;
    /// c is far beyond the latent event times; the target is barely reachable.
    bool enormous = false;
};

/// Finds c such that the share of {c V < T} lies at the midpoint of the
/// target window, for latent times T and uniforms V drawn once up front.
inline Calibration calibrate_uniform(std::span<const double> latent, std::span<const double> v,
                                     std::array<double, 2> target, int max_iter = 60)
{
    if (latent.empty() || latent.size() != v.size()) throw Error(Errc::InvalidSize, "calibration sample mismatch");
    const double mid = 0.5 * (target[0] + target[1]);
    const double tol = std::min(0.005, 0.5 * (target[1] - target[0]));
    auto rate = [&](double c) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < latent.size(); ++i) k += c * v[i] < latent[i] ? 1 : 0;
        return static_cast<double>(k) / static_cast<double>(latent.size());
    };
    double mean_t = 0.0;
    for (double t : latent) mean_t += t;
    mean_t /= static_cast<double>(latent.size());

    // rate(c) decreases in c
    double lo = mean_t;
    double hi = mean_t;
    int it = 0;
    while (rate(lo) < mid) {
        lo *= 0.5;
        if (++it > max_iter) throw Error(Errc::CalibrationFailed, "censoring target not bracketed");
    }
    while (rate(hi) > mid) {
        hi *= 2.0;
        if (++it > max_iter) throw Error(Errc::CalibrationFailed, "censoring target not bracketed");
    }
    Calibration out;
    for (int k = 0; k < max_iter; ++k) {
        const double c = 0.5 * (lo + hi);
        const double r = rate(c);
        out = {c, r, false};
        if (std::abs(r - mid) <= tol) break;
        (r > mid ? lo : hi) = c;
    }
    if (std::abs(out.rate - mid) > tol) throw Error(Errc::CalibrationFailed, "censoring target not reached");
    out.enormous = out.c > 1000.0 * mean_t;
    return out;
}

/// Calibrates U(0, c) censoring for the configured generator on `probes` subjects.
inline Calibration calibrate_censoring(const SimConfig& cfg, std::size_t probes = 100000)
{
    check_config(cfg);
    Stream s(StreamKey(cfg.seed).with("calibrate"));
    std::vector<double> latent(probes);
    std::vector<double> v(probes);
    for (std::size_t i = 0; i < probes; ++i) {
        const auto z = gen_covariate_row(s);
        latent[i] = gen_event(z, cfg, s).time;
        v[i] = s.uniform();
    }
    return calibrate_uniform(latent, v, cfg.censor_target);
}

/// Censoring-complete sample with C ~ U(0, c) retained for every subject.
inline Dataset gen_dataset(const SimConfig& cfg, double c, Stream& s)
{
    Dataset d;
    d.completeness = Completeness::CensoringComplete;
    d.horizon = c;
    d.records.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        CompetingRisksRecord r;
        r.id = "s" + std::to_string(i + 1);
        r.covariates = gen_covariate_row(s);
        const auto ev = gen_event(r.covariates, cfg, s);
        const double cens = c * s.uniform();
        if (ev.time <= cens) {
            r.time = ev.time;
            r.status = ev.cause;
            r.cens_time = cens;
        } else {
            r.time = cens;
            r.status = 0;
        }
        d.records.push_back(std::move(r));
    }
    return validate(std::move(d));
}

/// Drops the censoring times of event subjects.
inline Dataset degrade_to_incomplete(Dataset dataset)
{
    for (auto& r : dataset.records) {
        if (r.is_event()) r.cens_time.reset();
    }
    dataset.completeness = Completeness::Incomplete;
    dataset.imputation_index = 0;
    return dataset;
}

inline double censoring_rate(const Dataset& dataset)
{
    std::size_t k = 0;
    for (const auto& r : dataset.records) k += r.is_censored() ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(dataset.size());
}

/// Whether a band contains a nondecreasing continuous curve on its whole
/// window. The band is constant between grid points, so each segment is
/// checked against the curve at both of its ends; `extra` points are
/// checked as well.
template <class Curve>
bool band_covers(const BandResult& band, Curve&& truth, std::size_t extra = 200)
{
    const auto& g = band.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double at = truth(g[i]);
        if (at < band.lower[i] || at > band.upper[i]) return false;
        if (i + 1 < g.size() && truth(g[i + 1]) > band.upper[i]) return false;
    }
    const double t1 = band.interval.t1;
    const double t2 = band.interval.t2;
    for (std::size_t k = 0; k < extra && extra > 1; ++k) {
        const double t = t1 + (t2 - t1) * static_cast<double>(k) / static_cast<double>(extra - 1);
        const auto pos = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), t) - g.begin());
        const std::size_t i = pos == 0 ? 0 : pos - 1;
        const double at = truth(t);
        if (at < band.lower[i] || at > band.upper[i]) return false;
    }
    return true;
}

inline constexpr std::array<BandMethod, 3> kCoverageMethods{BandMethod::CC, BandMethod::WBMI, BandMethod::BIPCW};

/// Per-simulation outcome for one method.
struct SimOutcome {
    bool ok = false;
    bool covers = false;
    double width = 0.0;
    std::string error;
};

struct CoverageRow {
    BandMethod method = BandMethod::CC;
    double cp_percent = 0.0;
    double median_width = 0.0;
    int n_ok = 0;
    int failures = 0;
};

inline double median(std::vector<double> v)
{
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Coverage percent and median width over simulations.
inline CoverageRow summarize(BandMethod method, std::span<const SimOutcome> outcomes)
{
    CoverageRow row;
    row.method = method;
    std::vector<double> widths;
    int covered = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++row.failures;
            continue;
        }
        widths.push_back(o.width);
        covered += o.covers ? 1 : 0;
    }
    row.n_ok = static_cast<int>(widths.size());
    row.cp_percent = widths.empty() ? std::nan("") : 100.0 * covered / static_cast<double>(widths.size());
    row.median_width = median(std::move(widths));
    return row;
}

struct CoverageOptions {
    bool run_cc = true;
    bool run_wbmi = true;
    bool run_bipcw = true;
    unsigned threads = 0;
    TailRule tail_rule = TailRule::LargestObservedTime;
    CenterRule center_rule = CenterRule::SubsampleDraw;
    /// Calibrated c; computed when not positive.
    double c = 0.0;
};

struct CoverageResult {
    std::vector<CoverageRow> rows;
    /// outcomes[method][sim]
    std::array<std::vector<SimOutcome>, 3> outcomes;
    Calibration calibration;
    BandInterval interval;
    double mean_censoring_rate = 0.0;
    double runtime_s = 0.0;
};

inline Stream sim_stream(std::uint64_t seed, std::size_t s, std::string_view role)
{
    return Stream(StreamKey(seed).with("sim").with(s).with(role));
}

inline std::uint64_t sim_seed(std::uint64_t seed, std::size_t s, std::string_view role)
{
    return StreamKey(seed).with("sim").with(s).with(role).value();
}

/// Coverage study: bands at z0 for n_sims datasets on the across-sample
/// decile window of observed cause-1 times, floored per sample at its
/// first cause-1 time.
inline CoverageResult run_coverage(const SimConfig& cfg, const CoverageOptions& opt = {})
{
    check_config(cfg);
    if (cfg.n_sims < 1) throw Error(Errc::InvalidSize, "n_sims must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    CoverageResult res;
    if (opt.c > 0.0) {
        res.calibration.c = opt.c;
    } else {
        res.calibration = calibrate_censoring(cfg);
    }
    const double c = res.calibration.c;
    const auto S = static_cast<std::size_t>(cfg.n_sims);

    std::vector<Dataset> data(S);
    parallel_for(S, opt.threads, [&](std::size_t s) {
        auto stream = sim_stream(cfg.seed, s + 1, "data");
        data[s] = gen_dataset(cfg, c, stream);
    });
    std::vector<double> pooled;
    double rate = 0.0;
    for (const auto& d : data) {
        const auto t = event_times(d, 1);
        pooled.insert(pooled.end(), t.begin(), t.end());
        rate += censoring_rate(d);
    }
    res.mean_censoring_rate = rate / static_cast<double>(S);
    if (pooled.size() < 2) throw Error(Errc::TooFewEvents, "too few cause-1 events across samples");
    std::sort(pooled.begin(), pooled.end());
    res.interval = {order_statistic_quantile(pooled, 0.1), order_statistic_quantile(pooled, 0.9)};

    for (auto& o : res.outcomes) o.assign(S, {});
    const auto truth = [&](double t) { return true_cif(cfg.z0, cfg, t); };
    parallel_for(S, opt.threads, [&](std::size_t s) {
        const auto& complete = data[s];
        const auto times = event_times(complete, 1);
        BandConfig bc;
        bc.alpha = cfg.alpha;
        bc.B = cfg.B;
        bc.threads = 1;
        bc.interval = res.interval;
        if (!times.empty()) bc.interval.t1 = std::max(bc.interval.t1, times.front());
        const Dataset incomplete = degrade_to_incomplete(complete);

        auto run = [&](std::size_t k, auto&& make) {
            auto& out = res.outcomes[k][s];
            try {
                if (bc.interval.t1 >= bc.interval.t2) throw Error(Errc::TooFewEvents, "empty band window");
                const BandResult band = make();
                out.ok = true;
                out.width = band.width();
                out.covers = band_covers(band, truth);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        };
        if (opt.run_cc) {
            run(0, [&] {
                bc.seed = sim_seed(cfg.seed, s + 1, "cc");
                return cc_band(complete, cfg.z0, bc);
            });
        }
        if (opt.run_wbmi) {
            run(1, [&] {
                bc.seed = sim_seed(cfg.seed, s + 1, "wbmi");
                WbMiConfig mi;
                mi.M = cfg.M;
                mi.I = cfg.I;
                mi.tail_rule = opt.tail_rule;
                mi.center_rule = opt.center_rule;
                return wb_mi_band(incomplete, km_censoring(incomplete), cfg.z0, bc, mi);
            });
        }
        if (opt.run_bipcw) {
            run(2, [&] {
                bc.seed = sim_seed(cfg.seed, s + 1, "bipcw");
                return bipcw_band(incomplete, cfg.z0, bc);
            });
        }
    });

    const std::array<bool, 3> enabled{opt.run_cc, opt.run_wbmi, opt.run_bipcw};
    for (std::size_t k = 0; k < 3; ++k) {
        if (enabled[k]) res.rows.push_back(summarize(kCoverageMethods[k], res.outcomes[k]));
    }
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

} // namespace crband
