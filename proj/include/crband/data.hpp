#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "crband/error.hpp"

namespace crband {

/// One subject. `time` is the observed min(T, C); `status` is 0 for a
/// censoring and k >= 1 for an event of cause k. `cens_time` holds the
/// (known or imputed) censoring time of event subjects.
struct CompetingRisksRecord {
    std::string id;
    double time = 0.0;
    int status = 0;
    std::vector<double> covariates;
    std::optional<double> cens_time;

    bool is_event() const noexcept { return status >= 1; }
    bool is_censored() const noexcept { return status == 0; }

    /// Censoring time if known: the observed time for censored subjects.
    std::optional<double> known_censoring_time() const noexcept
    {
        if (status == 0) return time;
        return cens_time;
    }

    friend bool operator==(const CompetingRisksRecord&, const CompetingRisksRecord&) = default;
};

enum class Completeness { Incomplete, CensoringComplete, Augmented };

struct Dataset {
    std::vector<CompetingRisksRecord> records;
    Completeness completeness = Completeness::Incomplete;
    /// Imputation index m (1-based) when completeness == Augmented.
    int imputation_index = 0;
    double horizon = 0.0;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    std::size_t num_covariates() const noexcept { return records.empty() ? 0 : records.front().covariates.size(); }

    /// Censoring times are known for every event subject.
    bool has_censoring_times() const noexcept
    {
        return completeness == Completeness::CensoringComplete || completeness == Completeness::Augmented;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct BandInterval {
    double t1 = 0.0;
    double t2 = 0.0;
};

namespace detail {

inline bool record_order(const CompetingRisksRecord& a, const CompetingRisksRecord& b)
{
    if (a.time != b.time) return a.time < b.time;
    // events before censorings at tied times
    if (a.status != b.status) return a.status > b.status;
    return a.id < b.id;
}

} // namespace detail

/// Checks every record invariant and returns the dataset sorted by
/// (time, status descending, id). Idempotent.
inline Dataset validate(Dataset dataset)
{
    const std::size_t p = dataset.num_covariates();
    double max_time = 0.0;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const auto& r = dataset.records[i];
        const std::size_t row = i + 1;
        if (!std::isfinite(r.time)) throw Error(Errc::InvalidRecord, "non-finite time for id " + r.id, row);
        if (r.time < 0.0) throw Error(Errc::NegativeTime, "negative time for id " + r.id, row);
        if (r.status < 0) throw Error(Errc::InvalidRecord, "negative status for id " + r.id, row);
        if (r.covariates.size() != p) {
            throw Error(Errc::CovariateLengthMismatch, "id " + r.id + " has " + std::to_string(r.covariates.size()) +
                                                          " covariates, expected " + std::to_string(p), row);
        }
        for (double z : r.covariates) {
            if (!std::isfinite(z)) throw Error(Errc::InvalidRecord, "non-finite covariate for id " + r.id, row);
        }
        if (r.cens_time) {
            if (!std::isfinite(*r.cens_time) || *r.cens_time < r.time) {
                throw Error(Errc::InvalidRecord, "cens_time must be finite and >= time for id " + r.id, row);
            }
            if (r.status == 0 && *r.cens_time != r.time) {
                throw Error(Errc::InvalidRecord, "censored record with cens_time != time, id " + r.id, row);
            }
        }
        if (dataset.has_censoring_times() && r.is_event() && !r.cens_time) {
            throw Error(Errc::MissingCensoringTime, "event record without cens_time, id " + r.id, row);
        }
        max_time = std::max(max_time, r.time);
    }
    if (dataset.horizon <= 0.0) dataset.horizon = max_time;
    if (max_time > dataset.horizon) throw Error(Errc::InvalidRecord, "observed time beyond horizon");
    std::stable_sort(dataset.records.begin(), dataset.records.end(), detail::record_order);
    return dataset;
}

/// Sorted observed event times of `cause`.
inline std::vector<double> event_times(const Dataset& dataset, int cause)
{
    std::vector<double> out;
    for (const auto& r : dataset.records) {
        if (r.status == cause) out.push_back(r.time);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// ceil(p * n)-th order statistic (1-based) of sorted values.
inline double order_statistic_quantile(const std::vector<double>& sorted, double p)
{
    const auto n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

struct SingleSample {};
struct FixedInterval {
    double t1;
    double t2;
};
using IntervalRule = std::variant<SingleSample, FixedInterval>;

/// Time window of a band: decile rule on the observed cause-`cause` event
/// times, or a fixed pair clipped to [0, horizon].
inline BandInterval band_interval(const Dataset& dataset, int cause, const IntervalRule& rule)
{
    if (const auto* fixed = std::get_if<FixedInterval>(&rule)) {
        if (fixed->t1 > fixed->t2) throw Error(Errc::InvalidArgument, "interval requires t1 <= t2");
        return {std::clamp(fixed->t1, 0.0, dataset.horizon), std::clamp(fixed->t2, 0.0, dataset.horizon)};
    }
    const auto times = event_times(dataset, cause);
    if (times.size() < 2) {
        throw Error(Errc::TooFewEvents, "need at least 2 events of cause " + std::to_string(cause));
    }
    const double t1 = std::max(order_statistic_quantile(times, 0.1), times.front());
    const double t2 = order_statistic_quantile(times, 0.9);
    return {t1, t2};
}

} // namespace crband
