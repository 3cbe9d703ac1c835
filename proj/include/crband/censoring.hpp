#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "crband/data.hpp"
#include "crband/error.hpp"
#include "crband/newton.hpp"
#include "crband/partial_likelihood.hpp"
#include "crband/step_function.hpp"

namespace crband {

/// Censoring survival models G(t) = P(C > t).
namespace censoring {

struct KaplanMeier {
    StepFunction curve;
};

struct Cox {
    Eigen::VectorXd beta;
    StepFunction baseline_cumhaz;
};

struct Uniform {
    double c = 1.0;
};

struct Weibull {
    double shape = 1.0;
    double scale = 1.0;
};

/// Point mass at a known censoring time per subject id; G(t) = 1{t < C_id}.
/// Used to replay the true censoring times through the imputation path.
struct Known {
    std::map<std::string, double> times;
};

} // namespace censoring

using CensoringSurvival =
    std::variant<censoring::KaplanMeier, censoring::Cox, censoring::Uniform, censoring::Weibull, censoring::Known>;

/// Product-limit estimate of the censoring survival; status-0 records are
/// the events, observed events of any cause act as censorings of C.
inline StepFunction km_censoring_curve(const Dataset& dataset)
{
    if (dataset.empty()) throw Error(Errc::EmptyDataset, "cannot estimate censoring distribution of an empty dataset");
    std::vector<double> times;
    times.reserve(dataset.size());
    for (const auto& r : dataset.records) times.push_back(r.time);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<double> jumps, values;
    double surv = 1.0;
    std::size_t at_risk = dataset.size();
    for (std::size_t pos = 0; pos < order.size();) {
        const double u = times[order[pos]];
        std::size_t tied = 0, censored = 0;
        while (pos + tied < order.size() && times[order[pos + tied]] == u) {
            if (dataset.records[order[pos + tied]].status == 0) ++censored;
            ++tied;
        }
        if (censored > 0) {
            surv *= 1.0 - static_cast<double>(censored) / static_cast<double>(at_risk);
            jumps.push_back(u);
            values.push_back(surv);
        }
        at_risk -= tied;
        pos += tied;
    }
    return StepFunction(std::move(jumps), std::move(values), 1.0);
}

inline CensoringSurvival km_censoring(const Dataset& dataset)
{
    return censoring::KaplanMeier{km_censoring_curve(dataset)};
}

namespace detail {

inline RiskSetModel censoring_risk_model(const Dataset& dataset, bool drop_zero_columns)
{
    const std::size_t n = dataset.size();
    std::vector<std::vector<double>> z(n);
    std::vector<double> time(n);
    std::vector<bool> is_event(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = dataset.records[i].covariates;
        time[i] = dataset.records[i].time;
        is_event[i] = dataset.records[i].status == 0;
    }
    return make_risk_set_model(z, time, time, is_event, drop_zero_columns);
}

} // namespace detail

/// Cox proportional hazards model for the censoring times (Breslow ties),
/// with a Breslow baseline cumulative hazard.
inline CensoringSurvival cox_censoring(const Dataset& dataset, const NewtonOptions& opt = {})
{
    if (dataset.empty()) throw Error(Errc::EmptyDataset, "cannot fit censoring model to an empty dataset");
    const auto model = detail::censoring_risk_model(dataset, true);
    if (model.event_subject.empty()) throw Error(Errc::InvalidArgument, "Cox censoring model needs at least one censoring");
    auto fit = newton_maximize([&](const Eigen::VectorXd& b) { return evaluate(model, b); },
                               Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.q())), opt);
    if (!fit.converged) {
        throw Error(Errc::NonConvergence, "censoring Cox model did not converge in " + std::to_string(fit.iterations) + " iterations");
    }
    const auto ev = evaluate(model, fit.beta);
    const auto inc = breslow_increments(model, ev);
    std::vector<double> cum(inc.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < inc.size(); ++k) cum[k] = acc += inc[k];
    return censoring::Cox{to_full(model, fit.beta), StepFunction(model.times, std::move(cum), 0.0)};
}

/// Uniform(0, c) through (0, 1) and (t_anchor, km(t_anchor)), c clipped to
/// the horizon.
inline CensoringSurvival fit_uniform_from_km(const StepFunction& km, double t_anchor, double horizon)
{
    const double g = km(t_anchor);
    if (!(g < 1.0)) throw Error(Errc::DegenerateAnchor, "Kaplan-Meier estimate equals 1 at the anchor time");
    const double c = t_anchor / (1.0 - g);
    return censoring::Uniform{std::min(c, horizon)};
}

/// Weibull matching km at two anchor times.
inline CensoringSurvival fit_weibull_from_km(const StepFunction& km, double t_a, double t_b)
{
    const double ga = km(t_a), gb = km(t_b);
    if (!(t_a > 0.0 && t_b > 0.0 && t_a != t_b)) throw Error(Errc::InvalidArgument, "Weibull anchors must be distinct positive times");
    if (!(ga < 1.0 && gb < 1.0 && ga > 0.0 && gb > 0.0 && ga != gb)) {
        throw Error(Errc::DegenerateAnchor, "Kaplan-Meier values at the Weibull anchors must be distinct and inside (0,1)");
    }
    const double shape = (std::log(-std::log(gb)) - std::log(-std::log(ga))) / (std::log(t_b) - std::log(t_a));
    if (!(shape > 0.0)) throw Error(Errc::DegenerateAnchor, "anchors imply a non-positive Weibull shape");
    const double scale = t_a / std::pow(-std::log(ga), 1.0 / shape);
    return censoring::Weibull{shape, scale};
}

namespace detail {

inline double cox_linear_predictor(const censoring::Cox& m, std::span<const double> z)
{
    if (z.size() != static_cast<std::size_t>(m.beta.size())) {
        throw Error(Errc::MissingCovariates, "Cox censoring model needs a covariate vector of length " + std::to_string(m.beta.size()));
    }
    double eta = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) eta += m.beta[static_cast<Eigen::Index>(c)] * z[c];
    return eta;
}

} // namespace detail

/// G(t | z). `z` is required for the Cox variant only.
inline double surv_eval(const CensoringSurvival& g, double t, std::optional<std::span<const double>> z = std::nullopt)
{
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, censoring::KaplanMeier>) {
                return m.curve(t);
            } else if constexpr (std::is_same_v<M, censoring::Cox>) {
                if (!z) throw Error(Errc::MissingCovariates, "Cox censoring model evaluated without covariates");
                return std::exp(-std::exp(detail::cox_linear_predictor(m, *z)) * m.baseline_cumhaz(t));
            } else if constexpr (std::is_same_v<M, censoring::Uniform>) {
                return std::max(0.0, 1.0 - t / m.c);
            } else if constexpr (std::is_same_v<M, censoring::Weibull>) {
                return std::exp(-std::pow(t / m.scale, m.shape));
            } else {
                throw Error(Errc::InvalidArgument, "known-time censoring model is evaluated per record");
            }
        },
        g);
}

/// G(t) for a specific record (resolves Cox covariates and Known ids).
inline double surv_eval(const CensoringSurvival& g, double t, const CompetingRisksRecord& record)
{
    if (const auto* known = std::get_if<censoring::Known>(&g)) {
        const auto it = known->times.find(record.id);
        if (it == known->times.end()) throw Error(Errc::InvalidArgument, "no known censoring time for id " + record.id);
        return t < it->second ? 1.0 : 0.0;
    }
    return surv_eval(g, t, std::span<const double>(record.covariates));
}

inline std::string variant_name(const CensoringSurvival& g)
{
    constexpr const char* names[] = {"km", "cox", "uniform", "weibull", "known"};
    return names[g.index()];
}

} // namespace crband
