#pragma once

// Fine-Gray estimation from censoring-complete data: subdistribution risk
// sets, maximum partial likelihood, Breslow baseline and the CIF.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "crband/data.hpp"
#include "crband/error.hpp"
#include "crband/newton.hpp"
#include "crband/partial_likelihood.hpp"
#include "crband/step_function.hpp"

namespace crband {

struct FineGrayFit {
    std::string method = "cc";
    Eigen::VectorXd beta;
    /// Observed information at beta (zero rows/columns for absent covariates).
    Eigen::MatrixXd information;
    StepFunction breslow;
    int iterations = 0;
    bool converged = false;
    double score_norm = 0.0;
    double loglik = 0.0;
    std::vector<Eigen::VectorXd> beta_path;
};

struct FitOptions {
    /// Starting value; empty means the zero vector.
    Eigen::VectorXd init;
    NewtonOptions newton;
    int cause = 1;
};

/// Time after which a censoring-complete record leaves the subdistribution
/// risk set: its own time for cause-`cause` events and censorings, the
/// censoring time for competing events.
inline double cc_exit_time(const CompetingRisksRecord& r, int cause = 1)
{
    if (r.status == 0 || r.status == cause) return r.time;
    if (!r.cens_time) throw Error(Errc::MissingCensoringTime, "competing event without censoring time, id " + r.id);
    return *r.cens_time;
}

/// Subdistribution at-risk indicator Y(t) for censoring-complete data.
inline bool cc_at_risk(const CompetingRisksRecord& r, double t, int cause = 1)
{
    return t <= cc_exit_time(r, cause);
}

enum class RiskSetKind {
    /// Competing-event subjects stay at risk until their censoring time.
    Subdistribution,
    /// Every subject leaves at its observed time (cause-specific Cox).
    Classical,
};

inline RiskSetModel cc_risk_model(const Dataset& dataset, bool drop_zero_columns, int cause = 1,
                                  RiskSetKind kind = RiskSetKind::Subdistribution)
{
    const std::size_t n = dataset.size();
    std::vector<std::vector<double>> z(n);
    std::vector<double> time(n), exit(n);
    std::vector<bool> is_event(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = dataset.records[i];
        z[i] = r.covariates;
        time[i] = r.time;
        exit[i] = kind == RiskSetKind::Subdistribution ? cc_exit_time(r, cause) : r.time;
        is_event[i] = r.status == cause;
    }
    return make_risk_set_model(z, time, exit, is_event, drop_zero_columns);
}

namespace detail {

inline void require_events(const RiskSetModel& m)
{
    if (m.event_subject.empty()) throw Error(Errc::NoCause1Events, "dataset has no events of the cause of interest");
}

inline Eigen::VectorXd check_beta(const Dataset& dataset, const Eigen::VectorXd& beta)
{
    if (static_cast<std::size_t>(beta.size()) != dataset.num_covariates()) {
        throw Error(Errc::CovariateLengthMismatch, "coefficient vector length does not match covariates");
    }
    return beta;
}

inline StepFunction cumulate(const RiskSetModel& m, const std::vector<double>& inc)
{
    std::vector<double> cum(inc.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < inc.size(); ++k) cum[k] = acc += inc[k];
    return StepFunction(m.times, std::move(cum), 0.0);
}

/// Shared fitting driver for the cc and ipcw estimators.
inline FineGrayFit fit_risk_model(const RiskSetModel& model, const FitOptions& opt, LinearSolver solver, std::string method)
{
    require_events(model);
    const Eigen::VectorXd init_full =
        opt.init.size() ? opt.init : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.full_dim));
    if (static_cast<std::size_t>(init_full.size()) != model.full_dim) {
        throw Error(Errc::CovariateLengthMismatch, "initial value length does not match covariates");
    }
    auto res = newton_maximize([&](const Eigen::VectorXd& b) { return evaluate(model, b); }, to_active(model, init_full),
                               opt.newton, solver);
    const auto ev = evaluate(model, res.beta);

    FineGrayFit fit;
    fit.method = std::move(method);
    fit.beta = to_full(model, res.beta);
    fit.information = to_full(model, ev.information);
    fit.breslow = cumulate(model, breslow_increments(model, ev));
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    fit.score_norm = res.score_norm;
    fit.loglik = ev.loglik;
    fit.beta_path.reserve(res.path.size());
    for (const auto& b : res.path) fit.beta_path.push_back(to_full(model, b));
    return fit;
}

} // namespace detail

inline double log_partial_likelihood(const Dataset& dataset, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = cc_risk_model(dataset, false, cause);
    detail::require_events(m);
    return evaluate(m, detail::check_beta(dataset, beta), std::numeric_limits<double>::infinity(), false).loglik;
}

inline Eigen::VectorXd score(const Dataset& dataset, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = cc_risk_model(dataset, false, cause);
    detail::require_events(m);
    return evaluate(m, detail::check_beta(dataset, beta), std::numeric_limits<double>::infinity(), false).score;
}

inline Eigen::MatrixXd information_matrix(const Dataset& dataset, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = cc_risk_model(dataset, false, cause);
    detail::require_events(m);
    return evaluate(m, detail::check_beta(dataset, beta)).information;
}

/// Maximum partial likelihood fit on censoring-complete data. Returns a fit
/// with converged == false on NonConvergence; throws SingularInformation.
inline FineGrayFit fit_mple(const Dataset& dataset, const FitOptions& opt = {},
                            RiskSetKind kind = RiskSetKind::Subdistribution)
{
    if (kind == RiskSetKind::Subdistribution && !dataset.has_censoring_times()) {
        for (const auto& r : dataset.records) {
            if (r.is_event() && r.status != opt.cause && !r.cens_time) {
                throw Error(Errc::MissingCensoringTime, "censoring-complete fit needs cens_time for id " + r.id);
            }
        }
    }
    return detail::fit_risk_model(cc_risk_model(dataset, true, opt.cause, kind), opt, LinearSolver::Cholesky,
                                  kind == RiskSetKind::Subdistribution ? "cc" : "cox");
}

inline void require_converged(const FineGrayFit& fit)
{
    if (!fit.converged) {
        throw Error(Errc::NonConvergence, fit.method + " fit did not converge after " + std::to_string(fit.iterations) +
                                              " iterations (score norm " + std::to_string(fit.score_norm) + ")");
    }
}

/// Breslow estimator of the cumulative baseline subdistribution hazard.
inline StepFunction breslow_cc(const Dataset& dataset, const Eigen::VectorXd& beta, int cause = 1)
{
    const auto m = cc_risk_model(dataset, false, cause);
    if (m.event_subject.empty()) return StepFunction(0.0);
    const auto ev = evaluate(m, detail::check_beta(dataset, beta), std::numeric_limits<double>::infinity(), false);
    return detail::cumulate(m, breslow_increments(m, ev));
}

inline double linear_predictor(const Eigen::VectorXd& beta, std::span<const double> z)
{
    if (z.size() != static_cast<std::size_t>(beta.size())) {
        throw Error(Errc::CovariateLengthMismatch, "covariate query length does not match coefficients");
    }
    double eta = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) eta += beta[static_cast<Eigen::Index>(c)] * z[c];
    return eta;
}

/// F(t | z) = 1 - exp(-exp(z'beta) A(t)).
inline StepFunction cif(const Eigen::VectorXd& beta, const StepFunction& breslow, std::span<const double> z)
{
    const double risk = std::exp(linear_predictor(beta, z));
    return breslow.transform([risk](double a) { return -std::expm1(-risk * a); });
}

inline StepFunction cif(const FineGrayFit& fit, std::span<const double> z)
{
    return cif(fit.beta, fit.breslow, z);
}

} // namespace crband
