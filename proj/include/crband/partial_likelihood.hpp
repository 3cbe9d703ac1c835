#pragma once

// Cox-type partial likelihood over (possibly weighted) risk sets, shared by
// the censoring-complete and IPCW Fine-Gray estimators and by the Cox
// censoring model.
//
// Subject j contributes exp(z_j'beta) to the risk set at time u when
// u <= exit_j. IPCW models add a delayed part: subjects listed in `tail`
// keep contributing scale_j * exp(z_j'beta) * bucket_weight(u) at every
// event time u strictly after their own time. All sums are accumulated per
// distinct event time, so one evaluation costs O(n q^2 + K q^2).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "crband/error.hpp"

namespace crband {

struct RiskSetModel {
    /// n x q design restricted to the active (not identically zero) columns.
    Eigen::MatrixXd z;
    /// Column of the full covariate vector behind each active column.
    std::vector<std::size_t> active;
    std::size_t full_dim = 0;

    /// Distinct event times, ascending.
    std::vector<double> times;
    /// Event subjects in time order and the bucket (index into times) of each.
    std::vector<std::size_t> event_subject;
    std::vector<std::size_t> event_bucket;
    /// Last bucket k with times[k] <= exit_j, or -1.
    std::vector<long> exit_bucket;

    std::vector<std::size_t> tail_subject;
    /// First bucket strictly after the tail subject's own time.
    std::vector<std::size_t> tail_first_bucket;
    std::vector<double> tail_scale;
    /// Multiplier of the delayed part at each bucket.
    std::vector<double> bucket_weight;

    std::size_t n() const noexcept { return static_cast<std::size_t>(z.rows()); }
    std::size_t q() const noexcept { return static_cast<std::size_t>(z.cols()); }
    std::size_t num_buckets() const noexcept { return times.size(); }
};

struct RiskSetEval {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd information;
    /// S0 at each bucket (unnormalized, without the max-eta shift).
    std::vector<double> s0;
    /// S1/S0 at each bucket, q x K.
    Eigen::MatrixXd mean;
};

namespace detail {

inline std::vector<std::size_t> active_columns(const std::vector<std::vector<double>>& rows, std::size_t p, bool drop_zero)
{
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < p; ++c) {
        bool nonzero = !drop_zero;
        for (const auto& row : rows) {
            if (nonzero) break;
            nonzero = row[c] != 0.0;
        }
        if (nonzero) active.push_back(c);
    }
    return active;
}

} // namespace detail

/// Classical-exit risk-set model. `exit[j]` is the last time subject j is at
/// risk; `is_event[j]` marks the subjects whose own time `time[j]` is an event.
inline RiskSetModel make_risk_set_model(const std::vector<std::vector<double>>& covariates,
                                        const std::vector<double>& time, const std::vector<double>& exit,
                                        const std::vector<bool>& is_event, bool drop_zero_columns)
{
    RiskSetModel m;
    const std::size_t n = covariates.size();
    m.full_dim = n == 0 ? 0 : covariates.front().size();
    m.active = detail::active_columns(covariates, m.full_dim, drop_zero_columns);
    m.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.active.size()));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m.active.size(); ++c) {
            m.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = covariates[i][m.active[c]];
        }
    }

    std::vector<std::size_t> events;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_event[i]) events.push_back(i);
    }
    std::stable_sort(events.begin(), events.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
    for (std::size_t i : events) {
        if (m.times.empty() || m.times.back() != time[i]) m.times.push_back(time[i]);
        m.event_subject.push_back(i);
        m.event_bucket.push_back(m.times.size() - 1);
    }
    m.exit_bucket.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto it = std::upper_bound(m.times.begin(), m.times.end(), exit[j]);
        m.exit_bucket[j] = static_cast<long>(it - m.times.begin()) - 1;
    }
    m.bucket_weight.assign(m.times.size(), 1.0);
    return m;
}

/// Adds delayed contributions (IPCW competing events): subject j enters the
/// weighted sum at every bucket after `own_time`, scaled by `scale`.
inline void add_tail_subject(RiskSetModel& m, std::size_t j, double own_time, double scale)
{
    const auto it = std::upper_bound(m.times.begin(), m.times.end(), own_time);
    m.tail_subject.push_back(j);
    m.tail_first_bucket.push_back(static_cast<std::size_t>(it - m.times.begin()));
    m.tail_scale.push_back(scale);
}

/// Evaluates log partial likelihood, score and information at `beta`
/// (length q), using only events with time <= `upto`.
inline RiskSetEval evaluate(const RiskSetModel& m, const Eigen::VectorXd& beta,
                            double upto = std::numeric_limits<double>::infinity(), bool second_order = true)
{
    const std::size_t n = m.n();
    const auto q = static_cast<Eigen::Index>(m.q());
    const std::size_t K = m.num_buckets();

    RiskSetEval out;
    out.score = Eigen::VectorXd::Zero(q);
    out.information = Eigen::MatrixXd::Zero(q, q);
    out.s0.assign(K, 0.0);
    out.mean = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(K));
    if (K == 0) return out;

    const Eigen::VectorXd eta = q > 0 ? Eigen::VectorXd(m.z * beta) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const double shift = n > 0 ? eta.maxCoeff() : 0.0;

    // per-bucket accumulators: exit part (suffix sums) and tail part (prefix sums);
    // second moments are stored column-wise as vectorized q x q matrices
    const auto Kx = static_cast<Eigen::Index>(K);
    const Eigen::Index qq = second_order ? q * q : 0;
    std::vector<double> a0(K, 0.0), b0(K, 0.0);
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(q, Kx);
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(q, Kx);
    Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(qq, Kx);
    Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(qq, Kx);
    Eigen::VectorXd zj(q);

    auto accumulate = [&](std::vector<double>& s0, Eigen::MatrixXd& s1, Eigen::MatrixXd& s2, Eigen::Index k, double r) {
        s0[static_cast<std::size_t>(k)] += r;
        s1.col(k) += r * zj;
        if (second_order) {
            Eigen::Map<Eigen::MatrixXd>(s2.col(k).data(), q, q).noalias() += r * zj * zj.transpose();
        }
    };

    for (std::size_t j = 0; j < n; ++j) {
        const long k = m.exit_bucket[j];
        if (k < 0) continue;
        zj = m.z.row(static_cast<Eigen::Index>(j)).transpose();
        accumulate(a0, a1, a2, k, std::exp(eta[static_cast<Eigen::Index>(j)] - shift));
    }
    for (std::size_t t = 0; t < m.tail_subject.size(); ++t) {
        const std::size_t k = m.tail_first_bucket[t];
        if (k >= K) continue;
        const std::size_t j = m.tail_subject[t];
        zj = m.z.row(static_cast<Eigen::Index>(j)).transpose();
        accumulate(b0, b1, b2, static_cast<Eigen::Index>(k),
                   m.tail_scale[t] * std::exp(eta[static_cast<Eigen::Index>(j)] - shift));
    }
    for (Eigen::Index k = Kx - 1; k-- > 0;) {
        a0[static_cast<std::size_t>(k)] += a0[static_cast<std::size_t>(k + 1)];
        a1.col(k) += a1.col(k + 1);
        if (second_order) a2.col(k) += a2.col(k + 1);
    }
    for (Eigen::Index k = 1; k < Kx; ++k) {
        b0[static_cast<std::size_t>(k)] += b0[static_cast<std::size_t>(k - 1)];
        b1.col(k) += b1.col(k - 1);
        if (second_order) b2.col(k) += b2.col(k - 1);
    }

    // bucket covariance S2/S0 - mean mean', vectorized
    Eigen::MatrixXd cov(qq, Kx);
    for (std::size_t k = 0; k < K; ++k) {
        const double w = m.bucket_weight[k];
        const double s0 = a0[k] + w * b0[k];
        out.s0[k] = s0 * std::exp(shift);
        const auto kk = static_cast<Eigen::Index>(k);
        if (s0 > 0.0) {
            out.mean.col(kk) = (a1.col(kk) + w * b1.col(kk)) / s0;
            if (second_order) {
                cov.col(kk) = (a2.col(kk) + w * b2.col(kk)) / s0;
                Eigen::Map<Eigen::MatrixXd>(cov.col(kk).data(), q, q).noalias() -=
                    out.mean.col(kk) * out.mean.col(kk).transpose();
            }
        }
    }

    for (std::size_t e = 0; e < m.event_subject.size(); ++e) {
        const std::size_t i = m.event_subject[e];
        const std::size_t k = m.event_bucket[e];
        if (m.times[k] > upto) break;
        const double s0 = out.s0[k];
        if (!(s0 > 0.0)) throw Error(Errc::EmptyRiskSet, "empty risk set at event time " + std::to_string(m.times[k]));
        const auto kk = static_cast<Eigen::Index>(k);
        out.loglik += eta[static_cast<Eigen::Index>(i)] - std::log(s0);
        if (q > 0) {
            out.score += m.z.row(static_cast<Eigen::Index>(i)).transpose() - out.mean.col(kk);
            if (second_order) out.information += Eigen::Map<const Eigen::MatrixXd>(cov.col(kk).data(), q, q);
        }
    }
    return out;
}

/// Cumulative hazard increments d_k / S0_k at each distinct event time.
inline std::vector<double> breslow_increments(const RiskSetModel& m, const RiskSetEval& ev)
{
    std::vector<double> inc(m.num_buckets(), 0.0);
    for (std::size_t e = 0; e < m.event_subject.size(); ++e) {
        const std::size_t k = m.event_bucket[e];
        if (!(ev.s0[k] > 0.0)) throw Error(Errc::EmptyRiskSet, "empty risk set at event time " + std::to_string(m.times[k]));
        inc[k] += 1.0 / ev.s0[k];
    }
    return inc;
}

/// Restricts a full-length coefficient vector to the model's active columns.
inline Eigen::VectorXd to_active(const RiskSetModel& m, const Eigen::VectorXd& full)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(m.active.size()));
    for (std::size_t c = 0; c < m.active.size(); ++c) {
        out[static_cast<Eigen::Index>(c)] = full[static_cast<Eigen::Index>(m.active[c])];
    }
    return out;
}

inline Eigen::VectorXd to_full(const RiskSetModel& m, const Eigen::VectorXd& active)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.full_dim));
    for (std::size_t c = 0; c < m.active.size(); ++c) {
        out[static_cast<Eigen::Index>(m.active[c])] = active[static_cast<Eigen::Index>(c)];
    }
    return out;
}

inline Eigen::MatrixXd to_full(const RiskSetModel& m, const Eigen::MatrixXd& active)
{
    const auto p = static_cast<Eigen::Index>(m.full_dim);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t a = 0; a < m.active.size(); ++a) {
        for (std::size_t b = 0; b < m.active.size(); ++b) {
            out(static_cast<Eigen::Index>(m.active[a]), static_cast<Eigen::Index>(m.active[b])) =
                active(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    return out;
}

} // namespace crband
