#pragma once

// Time-simultaneous confidence bands for the cumulative incidence function:
// wild bootstrap on censoring-complete data (CC), wild bootstrap with
// multiple imputation (WB-MI), and Efron bootstrap with IPCW (B-IPCW).
// Every band is center -/+ q / sqrt(n) on [t1, t2].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crband/censoring.hpp"
#include "crband/finegray.hpp"
#include "crband/imputation.hpp"
#include "crband/ipcw.hpp"
#include "crband/parallel.hpp"
#include "crband/resampling.hpp"

namespace crband {

enum class BandMethod { CC, WBMI, BIPCW };

inline std::string to_string(BandMethod m)
{
    switch (m) {
        case BandMethod::CC: return "cc";
        case BandMethod::WBMI: return "wbmi";
        case BandMethod::BIPCW: return "bipcw";
    }
    return "unknown";
}

struct BandResult {
    BandMethod method = BandMethod::CC;
    std::vector<double> grid;
    std::vector<double> center;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> clipped_lower;
    std::vector<double> clipped_upper;
    double q = 0.0;
    double alpha = 0.05;
    std::size_t n = 0;
    BandInterval interval;
    int B = 0;
    int M = 0;
    int I = 0;
    std::uint64_t seed = 0;
    /// Dropped bootstrap replicates (B-IPCW only).
    int failures = 0;
    /// Full curves behind the band.
    StepFunction center_curve;

    double half_width() const { return q / std::sqrt(static_cast<double>(n)); }
    double width() const { return 2.0 * half_width(); }
};

struct BandConfig {
    double alpha = 0.05;
    int B = 1000;
    BandInterval interval;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    FitOptions fit;
};

/// Test seams: override the multiplier vector or bootstrap indices of
/// replicate b (1-based). Empty functions use the keyed streams.
struct ResamplingHooks {
    std::function<MultiplierVector(std::size_t n, std::size_t b)> multipliers;
    std::function<std::vector<std::size_t>(std::size_t n, std::size_t b)> resample_indices;
};

enum class CenterRule { SubsampleDraw, FullMean };

struct WbMiConfig {
    int M = 1000;
    int I = 10;
    TailRule tail_rule = TailRule::LargestObservedTime;
    CenterRule center_rule = CenterRule::SubsampleDraw;
};

inline MultiplierVector replicate_multipliers(std::uint64_t seed, std::size_t n, std::size_t b)
{
    Stream s(StreamKey(seed).with("wb").with(b));
    return draw_multipliers(n, s);
}

inline SubsampleDraw replicate_subsample(std::uint64_t seed, std::size_t M, std::size_t I, std::size_t b)
{
    Stream s(StreamKey(seed).with("pi").with(b));
    return draw_subsample(M, I, s);
}

/// Assembles a band from its center curve and quantile. The grid is t1,
/// every center jump inside (t1, t2], and t2.
inline BandResult make_band(BandMethod method, const StepFunction& center, double q, std::size_t n,
                            const BandConfig& cfg)
{
    BandResult r;
    r.method = method;
    r.q = q;
    r.alpha = cfg.alpha;
    r.n = n;
    r.interval = cfg.interval;
    r.B = cfg.B;
    r.seed = cfg.seed;
    r.center_curve = center;
    r.grid.push_back(cfg.interval.t1);
    for (double t : center.jump_times()) {
        if (t > cfg.interval.t1 && t <= cfg.interval.t2) r.grid.push_back(t);
    }
    if (r.grid.back() < cfg.interval.t2) r.grid.push_back(cfg.interval.t2);
    const double h = q / std::sqrt(static_cast<double>(n));
    for (double t : r.grid) {
        const double c = center(t);
        r.center.push_back(c);
        r.lower.push_back(c - h);
        r.upper.push_back(c + h);
        r.clipped_lower.push_back(std::clamp(c - h, 0.0, 1.0));
        r.clipped_upper.push_back(std::clamp(c + h, 0.0, 1.0));
    }
    return r;
}

namespace detail {

inline MultiplierVector multipliers_for(const ResamplingHooks& hooks, std::uint64_t seed, std::size_t n, std::size_t b)
{
    if (hooks.multipliers) return hooks.multipliers(n, b);
    return replicate_multipliers(seed, n, b);
}

} // namespace detail

/// Wild-bootstrap band from censoring-complete data.
inline BandResult cc_band(const Dataset& dataset, std::span<const double> z, const BandConfig& cfg,
                          const ResamplingHooks& hooks = {})
{
    if (cfg.B < 1) throw Error(Errc::InvalidSize, "number of bootstrap replicates must be >= 1");
    const auto model = cc_risk_model(dataset, true, cfg.fit.cause);
    const auto fit = detail::fit_risk_model(model, cfg.fit, LinearSolver::Cholesky, "cc");
    require_converged(fit);
    const auto basis = make_wb_basis(model, fit);
    const auto center = basis_cif_values(basis, z);
    const GridWindow window(basis.times, cfg.interval);
    const double root_n = std::sqrt(static_cast<double>(dataset.size()));

    std::vector<double> sups(static_cast<std::size_t>(cfg.B));
    parallel_for(sups.size(), cfg.threads, [&](std::size_t idx) {
        const auto g = detail::multipliers_for(hooks, cfg.seed, dataset.size(), idx + 1);
        std::vector<double> star;
        wb_cif_values(basis, g.g, z, star);
        sups[idx] = root_n * window.sup_abs_diff(star, center);
    });
    return make_band(BandMethod::CC, StepFunction(basis.times, center, 0.0), band_quantile(std::move(sups), cfg.alpha),
                     dataset.size(), cfg);
}

/// Censoring-complete risk model of augmented dataset m, built from the
/// incomplete dataset's model by moving competing-event exits to the
/// imputed censoring times.
inline RiskSetModel augmented_risk_model(const RiskSetModel& base, const Dataset& incomplete,
                                         std::span<const std::optional<double>> imputed, int cause)
{
    RiskSetModel m = base;
    for (std::size_t j = 0; j < incomplete.size(); ++j) {
        const auto& r = incomplete.records[j];
        if (!r.is_event() || r.status == cause) continue;
        const auto it = std::upper_bound(m.times.begin(), m.times.end(), *imputed[j]);
        m.exit_bucket[j] = static_cast<long>(it - m.times.begin()) - 1;
    }
    return m;
}

/// Fitted augmented datasets behind a WB-MI band.
struct ImputedFits {
    std::vector<FineGrayFit> fits;
    std::vector<WildBootstrapBasis> bases;
};

inline ImputedFits fit_imputed(const Dataset& incomplete, const CensoringSurvival& g_model, const WbMiConfig& mi,
                               const BandConfig& cfg)
{
    if (mi.M < 1 || mi.I < 1) throw Error(Errc::InvalidSize, "WB-MI needs M >= 1 and I >= 1");
    const int cause = cfg.fit.cause;
    // exits of competing events are placeholders until imputation
    Dataset placeholder = incomplete;
    for (auto& r : placeholder.records) {
        if (r.is_event() && r.status != cause) r.cens_time = r.time;
    }
    const auto base = cc_risk_model(placeholder, true, cause);
    const double tail = tail_value(incomplete, mi.tail_rule);

    const auto M = static_cast<std::size_t>(mi.M);
    ImputedFits out;
    out.fits.resize(M);
    out.bases.resize(M);
    std::vector<int> failed(M, 0);
    std::vector<std::string> messages(M);
    parallel_for(M, cfg.threads, [&](std::size_t idx) {
        std::vector<std::optional<double>> times;
        try {
            Stream stream(imputation_key(cfg.seed, static_cast<int>(idx) + 1));
            times = draw_censoring_times(incomplete, g_model, stream, tail);
        } catch (const Error& e) {
            throw Error(Errc::ImputationFailed, e.what());
        }
        try {
            const auto model = augmented_risk_model(base, incomplete, times, cause);
            out.fits[idx] = detail::fit_risk_model(model, cfg.fit, LinearSolver::Cholesky, "cc");
            if (!out.fits[idx].converged) {
                failed[idx] = 1;
                return;
            }
            out.bases[idx] = make_wb_basis(model, out.fits[idx]);
        } catch (const Error& e) {
            failed[idx] = 1;
            messages[idx] = e.what();
        }
    });
    std::string list;
    for (std::size_t m = 0; m < M; ++m) {
        if (failed[m]) list += (list.empty() ? "" : ",") + std::to_string(m + 1);
    }
    if (!list.empty()) throw Error(Errc::FitFailed, "fits failed for augmented datasets m = " + list);
    return out;
}

/// WB-MI band from incomplete data.
inline BandResult wb_mi_band(const Dataset& incomplete, const CensoringSurvival& g_model, std::span<const double> z,
                             const BandConfig& cfg, const WbMiConfig& mi = {}, const ResamplingHooks& hooks = {})
{
    if (cfg.B < 1) throw Error(Errc::InvalidSize, "number of bootstrap replicates must be >= 1");
    const auto imputed = fit_imputed(incomplete, g_model, mi, cfg);
    const auto M = static_cast<std::size_t>(mi.M);
    const auto I = static_cast<std::size_t>(mi.I);
    const auto& times = imputed.bases.front().times;

    std::vector<std::vector<double>> curves(M);
    detail::RunningMean full_mean;
    for (std::size_t m = 0; m < M; ++m) {
        curves[m] = basis_cif_values(imputed.bases[m], z);
        full_mean.add(curves[m]);
    }
    const GridWindow window(times, cfg.interval);
    const double root_n = std::sqrt(static_cast<double>(incomplete.size()));

    std::vector<double> sups(static_cast<std::size_t>(cfg.B));
    parallel_for(sups.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t b = idx + 1;
        const auto draw = replicate_subsample(cfg.seed, M, I, b);
        const auto g = detail::multipliers_for(hooks, cfg.seed, incomplete.size(), b);
        detail::RunningMean rep;
        std::vector<double> star;
        for (std::size_t m : draw.pi) {
            wb_cif_values(imputed.bases[m], g.g, z, star);
            rep.add(star);
        }
        sups[idx] = root_n * window.sup_abs_diff(rep.mean, full_mean.mean);
    });

    std::vector<double> center;
    if (mi.center_rule == CenterRule::FullMean) {
        center = full_mean.mean;
    } else {
        detail::RunningMean acc;
        for (std::size_t m : replicate_subsample(cfg.seed, M, I, 0).pi) acc.add(curves[m]);
        center = acc.mean;
    }
    auto band = make_band(BandMethod::WBMI, StepFunction(times, std::move(center), 0.0),
                          band_quantile(std::move(sups), cfg.alpha), incomplete.size(), cfg);
    band.M = mi.M;
    band.I = mi.I;
    return band;
}

/// Efron-bootstrap band around the IPCW estimator. Replicates whose refit
/// fails are dropped; more than 5% failures is an error.
inline BandResult bipcw_band(const Dataset& incomplete, std::span<const double> z, const BandConfig& cfg,
                             const ResamplingHooks& hooks = {})
{
    if (cfg.B < 1) throw Error(Errc::InvalidSize, "number of bootstrap replicates must be >= 1");
    const auto ctx = make_ipcw_context(incomplete);
    const auto fit = fit_mple_ipcw(ctx, cfg.fit);
    require_converged(fit);
    const auto center = cif(fit, z);
    const std::size_t n = incomplete.size();

    std::vector<double> sups(static_cast<std::size_t>(cfg.B));
    std::vector<int> ok(sups.size(), 0);
    parallel_for(sups.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t b = idx + 1;
        std::vector<std::size_t> rows;
        if (hooks.resample_indices) {
            rows = hooks.resample_indices(n, b);
        } else {
            Stream s(StreamKey(cfg.seed).with("boot").with(b));
            rows = efron_indices(n, s);
        }
        try {
            const auto boot_ctx = make_ipcw_context(resample_records(incomplete, rows));
            const auto boot_fit = fit_mple_ipcw(boot_ctx, cfg.fit);
            if (!boot_fit.converged) return;
            sups[idx] = sup_stat(cif(boot_fit, z), center, cfg.interval, n);
            ok[idx] = 1;
        } catch (const Error&) {
        }
    });
    std::vector<double> kept;
    for (std::size_t i = 0; i < sups.size(); ++i) {
        if (ok[i]) kept.push_back(sups[i]);
    }
    const int failures = cfg.B - static_cast<int>(kept.size());
    if (failures > 0.05 * cfg.B) {
        throw Error(Errc::TooManyFailedReplicates,
                    std::to_string(failures) + " of " + std::to_string(cfg.B) + " bootstrap refits failed");
    }
    auto band = make_band(BandMethod::BIPCW, center, band_quantile(std::move(kept), cfg.alpha), n, cfg);
    band.failures = failures;
    return band;
}

} // namespace crband
