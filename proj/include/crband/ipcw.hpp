#pragma once

// Fine-Gray estimation from incomplete data with inverse probability of
// censoring weights. Weights use left limits of the censoring Kaplan-Meier
// curve, w_i(t) = G(t-)/G(T_i-) after a competing event at T_i, so that
// w_i(T_i) = 1 exactly.

#include <Eigen/Dense>

#include <limits>
#include <string>

#include "crband/censoring.hpp"
#include "crband/data.hpp"
#include "crband/finegray.hpp"

namespace crband {

struct IpcwContext {
    StepFunction g_hat;
    Dataset dataset;
};

inline IpcwContext make_ipcw_context(Dataset dataset)
{
    auto g = km_censoring_curve(dataset);
    return {std::move(g), std::move(dataset)};
}

/// r_i(t) = 1{C_i >= min(T_i, t)} from the observed data.
inline int vitality(const CompetingRisksRecord& r, double t)
{
    if (r.is_event()) return 1;
    return r.time >= t ? 1 : 0;
}

inline double ipcw_weight(const CompetingRisksRecord& r, const StepFunction& g_hat, double t)
{
    if (vitality(r, t) == 0) return 0.0;
    if (!r.is_event() || t <= r.time) {
        if (!(g_hat.left_limit(t) > 0.0)) throw Error(Errc::ZeroGhat, "censoring survival is zero at t for id " + r.id);
        return 1.0;
    }
    const double denom = g_hat.left_limit(r.time);
    if (!(denom > 0.0)) throw Error(Errc::ZeroGhat, "censoring survival is zero at the event time of id " + r.id);
    return g_hat.left_limit(t) / denom;
}

inline double ipcw_weight(const CompetingRisksRecord& r, const IpcwContext& ctx, double t)
{
    return ipcw_weight(r, ctx.g_hat, t);
}

/// Weighted risk sets: everyone is at risk up to their observed time with
/// weight 1; competing-event subjects then stay with weight G(u-)/G(T-).
inline RiskSetModel ipcw_risk_model(const IpcwContext& ctx, bool drop_zero_columns, int cause = 1)
{
    const auto& d = ctx.dataset;
    const std::size_t n = d.size();
    std::vector<std::vector<double>> z(n);
    std::vector<double> time(n);
    std::vector<bool> is_event(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = d.records[i].covariates;
        time[i] = d.records[i].time;
        is_event[i] = d.records[i].status == cause;
    }
    auto m = make_risk_set_model(z, time, time, is_event, drop_zero_columns);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = d.records[i];
        if (!r.is_event() || r.status == cause) continue;
        const double g = ctx.g_hat.left_limit(r.time);
        if (!(g > 0.0)) throw Error(Errc::ZeroGhat, "censoring survival is zero at the event time of id " + r.id);
        add_tail_subject(m, i, r.time, 1.0 / g);
    }
    for (std::size_t k = 0; k < m.num_buckets(); ++k) m.bucket_weight[k] = ctx.g_hat.left_limit(m.times[k]);
    return m;
}

/// Weighted score process evaluated at time t.
inline Eigen::VectorXd ipcw_score(const IpcwContext& ctx, double t, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = ipcw_risk_model(ctx, false, cause);
    if (m.event_subject.empty()) return Eigen::VectorXd::Zero(beta.size());
    try {
        return evaluate(m, detail::check_beta(ctx.dataset, beta), t, false).score;
    } catch (const Error& e) {
        if (e.code() == Errc::EmptyRiskSet) throw Error(Errc::ZeroWeightedRiskSet, e.what());
        throw;
    }
}

inline FineGrayFit fit_mple_ipcw(const IpcwContext& ctx, const FitOptions& opt = {})
{
    return detail::fit_risk_model(ipcw_risk_model(ctx, true, opt.cause), opt, LinearSolver::LU, "ipcw");
}

inline StepFunction breslow_ipcw(const IpcwContext& ctx, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = ipcw_risk_model(ctx, false, cause);
    if (m.event_subject.empty()) return StepFunction(0.0);
    const auto ev = evaluate(m, detail::check_beta(ctx.dataset, beta), std::numeric_limits<double>::infinity(), false);
    return detail::cumulate(m, breslow_increments(m, ev));
}

} // namespace crband
