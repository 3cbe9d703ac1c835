#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "crband/censoring.hpp"
#include "crband/data.hpp"
#include "crband/parallel.hpp"
#include "crband/rng.hpp"

namespace crband {

enum class ImputationMethod { KM, Cox, Uniform, Weibull };
enum class TailRule { LargestObservedTime, Horizon };

struct ImputationConfig {
    ImputationMethod method = ImputationMethod::KM;
    int M = 10000;
    std::uint64_t seed = 0;
    TailRule tail_rule = TailRule::LargestObservedTime;
    unsigned threads = 0;
};

inline double tail_value(const Dataset& dataset, TailRule rule)
{
    if (rule == TailRule::Horizon) return dataset.horizon;
    double largest = 0.0;
    for (const auto& r : dataset.records) largest = std::max(largest, r.time);
    return largest;
}

namespace detail {

/// First jump time after t0 at which curve(t) <= target, if any.
inline std::optional<double> first_jump_below(const StepFunction& curve, double t0, double target)
{
    const auto& jumps = curve.jump_times();
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t0);
    for (; it != jumps.end(); ++it) {
        if (curve.values()[static_cast<std::size_t>(it - jumps.begin())] <= target) return *it;
    }
    return std::nullopt;
}

} // namespace detail

/// Inverse-transform draw of a censoring time from G(t)/G(T) for t > T,
/// T = record.time: the smallest t > T with 1 - G(t)/G(T) >= u. Falls
/// back to `tail` when G never gets that low; the result always exceeds T.
inline double conditional_draw(const CensoringSurvival& g, const CompetingRisksRecord& record, double u, double tail)
{
    const double T = record.time;
    const double g0 = surv_eval(g, T, record);
    if (!(g0 > 0.0)) {
        throw Error(Errc::ZeroConditioningMass, "censoring survival is zero at the event time of id " + record.id);
    }
    const double target = (1.0 - u) * g0;
    const double above = std::nextafter(T, std::numeric_limits<double>::infinity());

    const std::optional<double> t = std::visit(
        [&](const auto& m) -> std::optional<double> {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, censoring::KaplanMeier>) {
                return detail::first_jump_below(m.curve, T, target);
            } else if constexpr (std::is_same_v<M, censoring::Cox>) {
                const double eta = detail::cox_linear_predictor(m, record.covariates);
                const auto& jumps = m.baseline_cumhaz.jump_times();
                auto it = std::upper_bound(jumps.begin(), jumps.end(), T);
                for (; it != jumps.end(); ++it) {
                    const auto j = static_cast<std::size_t>(it - jumps.begin());
                    if (std::exp(-std::exp(eta) * m.baseline_cumhaz.values()[j]) <= target) return *it;
                }
                return std::nullopt;
            } else if constexpr (std::is_same_v<M, censoring::Uniform>) {
                return m.c * (1.0 - target);
            } else if constexpr (std::is_same_v<M, censoring::Weibull>) {
                return m.scale * std::pow(-std::log(target), 1.0 / m.shape);
            } else {
                return m.times.at(record.id);
            }
        },
        g);
    if (t) return std::max(*t, above);
    return std::max(tail, above);
}

/// Imputed censoring times for the event records of `dataset`, in record
/// order, consuming one uniform per event record from `stream`.
inline std::vector<std::optional<double>> draw_censoring_times(const Dataset& dataset, const CensoringSurvival& g,
                                                               Stream& stream, double tail)
{
    std::vector<std::optional<double>> out(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& r = dataset.records[i];
        if (!r.is_event()) continue;
        out[i] = conditional_draw(g, r, stream.uniform(), tail);
    }
    return out;
}

/// One augmented (censoring-complete) copy of an incomplete dataset.
inline Dataset impute_once(const Dataset& dataset, const CensoringSurvival& g, Stream& stream,
                           TailRule tail_rule = TailRule::LargestObservedTime, int m = 1)
{
    const auto times = draw_censoring_times(dataset, g, stream, tail_value(dataset, tail_rule));
    Dataset out = dataset;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (times[i]) out.records[i].cens_time = times[i];
    }
    out.completeness = Completeness::Augmented;
    out.imputation_index = m;
    return out;
}

inline StreamKey imputation_key(std::uint64_t seed, int m)
{
    return StreamKey(seed).with("impute").with(static_cast<std::uint64_t>(m));
}

/// M augmented datasets; the m-th (1-based) uses stream (seed, "impute", m).
inline std::vector<Dataset> impute_many(const Dataset& dataset, const CensoringSurvival& g, const ImputationConfig& config)
{
    if (config.M < 1) throw Error(Errc::InvalidArgument, "number of imputations M must be >= 1");
    std::vector<Dataset> out(static_cast<std::size_t>(config.M));
    parallel_for(out.size(), config.threads, [&](std::size_t idx) {
        const int m = static_cast<int>(idx) + 1;
        Stream stream(imputation_key(config.seed, m));
        out[idx] = impute_once(dataset, g, stream, config.tail_rule, m);
    });
    return out;
}

} // namespace crband
