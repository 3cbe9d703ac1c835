#pragma once

// Wild-bootstrap and Efron resampling, multiple-imputation combination
// rules, and the sup-statistic machinery behind the confidence bands.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crband/data.hpp"
#include "crband/error.hpp"
#include "crband/finegray.hpp"
#include "crband/partial_likelihood.hpp"
#include "crband/rng.hpp"
#include "crband/step_function.hpp"

namespace crband {

struct MultiplierVector {
    std::vector<double> g;

    std::size_t size() const noexcept { return g.size(); }
};

/// i.i.d. N(0,1) multipliers, one per subject.
inline MultiplierVector draw_multipliers(std::size_t n, Stream& stream)
{
    if (n == 0) throw Error(Errc::InvalidSize, "multiplier vector needs n >= 1");
    MultiplierVector out{std::vector<double>(n)};
    for (auto& v : out.g) v = stream.normal();
    return out;
}

/// Everything needed to turn multipliers into a wild-bootstrap CIF for one
/// fitted censoring-complete dataset, precomputed at the point estimate.
///
/// The bootstrap is the one-step multiplier linearization
///   U*   = sum_i G_i (Z_i - E(beta, T_i))           over cause-1 events i
///   beta* = beta + J^{-1} U*
///   A*(t) = A(t) + sum_{T_i <= t} G_i / S0(T_i) + b(t)'(beta* - beta)
///   b(t) = -sum_{T_i <= t} E(beta, T_i) / S0(T_i)
/// which is affine in the multipliers.
struct WildBootstrapBasis {
    Eigen::VectorXd beta;
    std::vector<double> times;
    std::vector<double> breslow;
    std::vector<std::size_t> event_subject;
    std::vector<std::size_t> event_bucket;
    /// p x E score residuals Z_i - E(beta, T_i).
    Eigen::MatrixXd residual;
    std::vector<double> inv_s0;
    /// p x K, b(t) at each event time.
    Eigen::MatrixXd drift;
    Eigen::MatrixXd jinv;
    std::size_t n = 0;
};

inline WildBootstrapBasis make_wb_basis(const RiskSetModel& model, const FineGrayFit& fit)
{
    WildBootstrapBasis basis;
    const Eigen::VectorXd beta_active = to_active(model, fit.beta);
    const auto ev = evaluate(model, beta_active);
    const auto q = static_cast<Eigen::Index>(model.q());
    const auto p = static_cast<Eigen::Index>(model.full_dim);
    const std::size_t E = model.event_subject.size();
    const std::size_t K = model.num_buckets();

    basis.beta = fit.beta;
    basis.times = model.times;
    basis.event_subject = model.event_subject;
    basis.event_bucket = model.event_bucket;
    basis.n = model.n();
    basis.jinv = to_full(model, invert_information(ev.information));

    Eigen::MatrixXd residual_active(q, static_cast<Eigen::Index>(E));
    basis.inv_s0.resize(E);
    for (std::size_t e = 0; e < E; ++e) {
        const auto k = static_cast<Eigen::Index>(model.event_bucket[e]);
        const auto i = static_cast<Eigen::Index>(model.event_subject[e]);
        residual_active.col(static_cast<Eigen::Index>(e)) = model.z.row(i).transpose() - ev.mean.col(k);
        basis.inv_s0[e] = 1.0 / ev.s0[static_cast<std::size_t>(k)];
    }
    basis.residual = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(E));
    for (std::size_t c = 0; c < model.active.size(); ++c) {
        basis.residual.row(static_cast<Eigen::Index>(model.active[c])) = residual_active.row(static_cast<Eigen::Index>(c));
    }

    basis.breslow.assign(K, 0.0);
    Eigen::MatrixXd drift_active = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(K));
    for (std::size_t e = 0; e < E; ++e) {
        const std::size_t k = model.event_bucket[e];
        basis.breslow[k] += basis.inv_s0[e];
        drift_active.col(static_cast<Eigen::Index>(k)) -= ev.mean.col(static_cast<Eigen::Index>(k)) * basis.inv_s0[e];
    }
    for (std::size_t k = 1; k < K; ++k) {
        basis.breslow[k] += basis.breslow[k - 1];
        drift_active.col(static_cast<Eigen::Index>(k)) += drift_active.col(static_cast<Eigen::Index>(k - 1));
    }
    basis.drift = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(K));
    for (std::size_t c = 0; c < model.active.size(); ++c) {
        basis.drift.row(static_cast<Eigen::Index>(model.active[c])) = drift_active.row(static_cast<Eigen::Index>(c));
    }
    return basis;
}

inline WildBootstrapBasis make_wb_basis(const FineGrayFit& fit, const Dataset& dataset, int cause = 1)
{
    return make_wb_basis(cc_risk_model(dataset, true, cause), fit);
}

struct WildBootstrapRefit {
    Eigen::VectorXd beta_star;
    StepFunction breslow_star;
};

/// beta* and A* at the basis event times for multiplier vector g.
inline void wb_perturb(const WildBootstrapBasis& basis, std::span<const double> g, Eigen::VectorXd& beta_star,
                       std::vector<double>& breslow_star)
{
    if (g.size() != basis.n) throw Error(Errc::InvalidSize, "multiplier vector length must equal the sample size");
    const std::size_t E = basis.event_subject.size();
    const std::size_t K = basis.times.size();
    Eigen::VectorXd ustar = Eigen::VectorXd::Zero(basis.beta.size());
    std::vector<double> martingale(K, 0.0);
    for (std::size_t e = 0; e < E; ++e) {
        const double ge = g[basis.event_subject[e]];
        ustar += ge * basis.residual.col(static_cast<Eigen::Index>(e));
        martingale[basis.event_bucket[e]] += ge * basis.inv_s0[e];
    }
    const Eigen::VectorXd delta = basis.jinv * ustar;
    beta_star = basis.beta + delta;
    breslow_star.resize(K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        acc += martingale[k];
        breslow_star[k] = basis.breslow[k] + acc + basis.drift.col(static_cast<Eigen::Index>(k)).dot(delta);
    }
}

inline WildBootstrapRefit wb_refit_cc(const WildBootstrapBasis& basis, const MultiplierVector& g)
{
    WildBootstrapRefit out;
    std::vector<double> a;
    wb_perturb(basis, g.g, out.beta_star, a);
    out.breslow_star = StepFunction(basis.times, std::move(a), 0.0);
    return out;
}

inline WildBootstrapRefit wb_refit_cc(const FineGrayFit& fit, const Dataset& dataset, const MultiplierVector& g)
{
    return wb_refit_cc(make_wb_basis(fit, dataset), g);
}

/// Point-estimate CIF values at the basis event times.
inline std::vector<double> basis_cif_values(const WildBootstrapBasis& basis, std::span<const double> z)
{
    const double risk = std::exp(linear_predictor(basis.beta, z));
    std::vector<double> out(basis.breslow.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = -std::expm1(-risk * basis.breslow[k]);
    return out;
}

/// Wild-bootstrap CIF values at the basis event times.
inline void wb_cif_values(const WildBootstrapBasis& basis, std::span<const double> g, std::span<const double> z,
                          std::vector<double>& out)
{
    Eigen::VectorXd beta_star;
    std::vector<double> a;
    wb_perturb(basis, g, beta_star, a);
    const double risk = std::exp(linear_predictor(beta_star, z));
    out.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = -std::expm1(-risk * a[k]);
}

/// sup over [t1,t2] of sqrt(n)|a - b|, attained at t1 or at a jump inside.
inline double sup_stat(const StepFunction& a, const StepFunction& b, const BandInterval& interval, std::size_t n)
{
    double sup = std::abs(a(interval.t1) - b(interval.t1));
    sup = std::max(sup, std::abs(a(interval.t2) - b(interval.t2)));
    for (double t : union_jump_times(a, b)) {
        if (t < interval.t1 || t > interval.t2) continue;
        sup = std::max(sup, std::abs(a(t) - b(t)));
    }
    return std::sqrt(static_cast<double>(n)) * sup;
}

/// Indices of a shared jump grid that matter for a sup over [t1,t2]: the
/// segment containing t1 (or -1 for the initial value) and every jump in
/// (t1, t2].
struct GridWindow {
    long first = -1;
    std::size_t begin = 0;
    std::size_t end = 0;

    GridWindow() = default;
    GridWindow(const std::vector<double>& times, const BandInterval& interval)
    {
        const auto up1 = std::upper_bound(times.begin(), times.end(), interval.t1);
        first = static_cast<long>(up1 - times.begin()) - 1;
        begin = static_cast<std::size_t>(up1 - times.begin());
        end = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), interval.t2) - times.begin());
        begin = std::min(begin, end);
    }

    /// sup |a - b| for value vectors on the grid whose initial values agree.
    double sup_abs_diff(std::span<const double> a, std::span<const double> b) const
    {
        double sup = 0.0;
        if (first >= 0) sup = std::abs(a[static_cast<std::size_t>(first)] - b[static_cast<std::size_t>(first)]);
        for (std::size_t k = begin; k < end; ++k) sup = std::max(sup, std::abs(a[k] - b[k]));
        return sup;
    }
};

/// ceil((1 - alpha) B)-th order statistic of the sup sample.
inline double band_quantile(std::vector<double> sups, double alpha)
{
    if (sups.empty()) throw Error(Errc::EmptySups, "no bootstrap sup statistics");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in (0,1)");
    const auto B = static_cast<double>(sups.size());
    auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * B - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sups.size());
    std::nth_element(sups.begin(), sups.begin() + static_cast<std::ptrdiff_t>(k - 1), sups.end());
    return sups[k - 1];
}

namespace detail {

/// Running mean; averaging identical values returns them unchanged.
struct RunningMean {
    std::vector<double> mean;
    std::size_t count = 0;

    void add(std::span<const double> v)
    {
        if (count == 0) mean.assign(v.begin(), v.end());
        ++count;
        if (count == 1) return;
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (v[k] - mean[k]) * inv;
    }
};

inline std::vector<double> values_on(const StepFunction& f, const std::vector<double>& grid)
{
    std::vector<double> out(grid.size() + 1);
    out[0] = f.initial_value();
    for (std::size_t k = 0; k < grid.size(); ++k) out[k + 1] = f(grid[k]);
    return out;
}

inline StepFunction mean_of(std::span<const StepFunction* const> curves)
{
    if (curves.empty()) throw Error(Errc::EmptyList, "cannot average an empty list of curves");
    const auto grid = union_jump_times(curves);
    RunningMean acc;
    for (const auto* c : curves) acc.add(values_on(*c, grid));
    const double initial = acc.mean.front();
    return StepFunction(grid, std::vector<double>(acc.mean.begin() + 1, acc.mean.end()), initial);
}

} // namespace detail

/// Pointwise mean of step functions on the union of their jump times.
inline StepFunction mi_pointwise_mean(std::span<const StepFunction> curves)
{
    std::vector<const StepFunction*> ptrs;
    ptrs.reserve(curves.size());
    for (const auto& c : curves) ptrs.push_back(&c);
    return detail::mean_of(ptrs);
}

/// I draws with replacement from {0, ..., M-1} (0-based dataset indices).
struct SubsampleDraw {
    std::vector<std::size_t> pi;
    std::size_t M = 0;

    std::size_t I() const noexcept { return pi.size(); }
    /// The I < M recommendation is violated.
    bool exceeds_pool() const noexcept { return pi.size() >= M; }
    /// X_{l,m}: 1 iff draw l selected dataset m.
    int indicator(std::size_t l, std::size_t m) const noexcept { return pi[l] == m ? 1 : 0; }
};

inline SubsampleDraw draw_subsample(std::size_t M, std::size_t I, Stream& stream)
{
    if (M < 1 || I < 1) throw Error(Errc::InvalidSize, "subsample draw needs M >= 1 and I >= 1");
    SubsampleDraw d{std::vector<std::size_t>(I), M};
    for (auto& v : d.pi) v = stream.index(M);
    return d;
}

/// Mean of the curves selected by the draw, with multiplicity.
inline StepFunction mi_center(std::span<const StepFunction> curves, const SubsampleDraw& draw)
{
    std::vector<const StepFunction*> ptrs;
    for (std::size_t m : draw.pi) ptrs.push_back(&curves[m]);
    return detail::mean_of(ptrs);
}

/// WB-MI replicate: average over the selected datasets of their wild
/// bootstrap CIFs, all driven by the same multiplier vector g.
inline StepFunction wb_mi_replicate(std::span<const WildBootstrapBasis> bases, const SubsampleDraw& draw,
                                    const MultiplierVector& g, std::span<const double> z)
{
    std::vector<StepFunction> curves;
    curves.reserve(draw.I());
    std::vector<double> vals;
    for (std::size_t m : draw.pi) {
        wb_cif_values(bases[m], g.g, z, vals);
        curves.emplace_back(bases[m].times, vals, 0.0);
    }
    return mi_pointwise_mean(curves);
}

inline StepFunction wb_mi_replicate(std::span<const FineGrayFit> aug_fits, std::span<const Dataset> aug_datasets,
                                    const SubsampleDraw& draw, const MultiplierVector& g, std::span<const double> z)
{
    std::vector<WildBootstrapBasis> bases;
    bases.reserve(aug_fits.size());
    for (std::size_t m = 0; m < aug_fits.size(); ++m) bases.push_back(make_wb_basis(aug_fits[m], aug_datasets[m]));
    return wb_mi_replicate(bases, draw, g, z);
}

/// Row indices of an Efron bootstrap sample.
inline std::vector<std::size_t> efron_indices(std::size_t n, Stream& stream)
{
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = stream.index(n);
    return idx;
}

inline Dataset resample_records(const Dataset& dataset, std::span<const std::size_t> indices)
{
    Dataset out;
    out.completeness = dataset.completeness;
    out.horizon = dataset.horizon;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(dataset.records[i]);
    return out;
}

/// n records drawn with replacement; the k-th copy of id x becomes "x#k".
inline Dataset efron_resample(const Dataset& dataset, Stream& stream)
{
    if (dataset.empty()) throw Error(Errc::EmptyDataset, "cannot resample an empty dataset");
    const auto idx = efron_indices(dataset.size(), stream);
    Dataset out = resample_records(dataset, idx);
    std::vector<int> copies(dataset.size(), 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.records[r].id += "#" + std::to_string(++copies[idx[r]]);
    }
    return validate(std::move(out));
}

} // namespace crband
