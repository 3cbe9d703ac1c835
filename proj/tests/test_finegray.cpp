#include <gtest/gtest.h>

#include <cmath>

#include "crband/finegray.hpp"
#include "crband/rng.hpp"
#include "oracles.hpp"

using namespace crband;

namespace {

CompetingRisksRecord rec(std::string id, double t, int status, std::vector<double> z, std::optional<double> c = std::nullopt)
{
    return {std::move(id), t, status, std::move(z), c};
}

/// Cause-1 rows without a censoring time get C = T; it never enters the risk sets.
Dataset complete(std::vector<CompetingRisksRecord> recs)
{
    for (auto& r : recs) {
        if (r.status == 1 && !r.cens_time) r.cens_time = r.time;
    }
    Dataset d;
    d.completeness = Completeness::CensoringComplete;
    d.records = std::move(recs);
    return validate(d);
}

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out[k++] = x;
    return out;
}

std::vector<double> stdvec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Censoring-complete sample with p covariates and all three statuses.
Dataset random_complete(std::uint64_t seed, std::size_t n, std::size_t p)
{
    Stream s{StreamKey(seed)};
    std::vector<CompetingRisksRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(p);
        for (auto& x : z) x = s.normal();
        const double t = -std::log(s.uniform()) * 5.0;
        const double c = s.uniform() * 12.0;
        const int cause = s.uniform() < 0.6 ? 1 : 2;
        if (t <= c) {
            recs.push_back(rec("s" + std::to_string(i), t, cause, z, c));
        } else {
            recs.push_back(rec("s" + std::to_string(i), c, 0, z));
        }
    }
    return complete(std::move(recs));
}

Dataset six_subjects()
{
    return complete({rec("a", 1, 1, {0.3}), rec("b", 2, 2, {-0.5}, 5.0), rec("c", 3, 1, {-1.0}), rec("d", 4, 0, {0.8}),
                     rec("e", 5, 1, {0.1}), rec("f", 6, 0, {1.2})});
}

} // namespace

TEST(CcAtRisk, Cases)
{
    const auto e1 = rec("a", 3, 1, {0.0}, 9.0);
    EXPECT_TRUE(cc_at_risk(e1, 2.0));
    EXPECT_FALSE(cc_at_risk(e1, 4.0));
    const auto e2 = rec("b", 3, 2, {0.0}, 7.0);
    EXPECT_TRUE(cc_at_risk(e2, 5.0));
    EXPECT_FALSE(cc_at_risk(e2, 8.0));
    const auto c = rec("c", 4, 0, {0.0});
    EXPECT_FALSE(cc_at_risk(c, 5.0));
}

TEST(LogPartialLikelihood, ZeroCovariatesIsMinusLogRiskSetSizes)
{
    const auto d = complete({rec("a", 1, 1, {0.0}), rec("b", 2, 2, {0.0}, 6.0), rec("c", 3, 0, {0.0}), rec("d", 4, 1, {0.0}),
                             rec("e", 8, 0, {0.0})});
    // risk sets: at 1 all five, at 4 {b, d, e}
    const double expected = -std::log(5.0) - std::log(3.0);
    for (double b : {-2.0, 0.0, 3.0}) EXPECT_NEAR(log_partial_likelihood(d, vec({b})), expected, 1e-14);
}

TEST(LogPartialLikelihood, TwoSubjectClosedForm)
{
    const auto d = complete({rec("a", 1, 1, {1.0}), rec("b", 2, 0, {0.0})});
    for (double b : {-1.5, 0.0, 0.7, 2.0}) {
        EXPECT_NEAR(log_partial_likelihood(d, vec({b})), b - std::log(1.0 + std::exp(b)), 1e-14);
    }
    EXPECT_NEAR(score(d, vec({0.0}))[0], 1.0 - 0.5, 1e-15);
}

TEST(LogPartialLikelihood, MatchesOracleAndIsConcave)
{
    const auto d = random_complete(3, 25, 2);
    Stream s{StreamKey(1)};
    for (int k = 0; k < 20; ++k) {
        const Eigen::VectorXd a = vec({s.normal(), s.normal()});
        const Eigen::VectorXd b = vec({s.normal(), s.normal()});
        EXPECT_NEAR(log_partial_likelihood(d, a), oracle::loglik(d.records, stdvec(a)), 1e-10);
        const double mid = log_partial_likelihood(d, 0.5 * (a + b));
        EXPECT_GE(mid, 0.5 * (log_partial_likelihood(d, a) + log_partial_likelihood(d, b)) - 1e-12);
    }
}

TEST(NoCause1Events, Throws)
{
    const auto d = complete({rec("a", 1, 2, {0.0}, 3.0), rec("b", 2, 0, {1.0})});
    try {
        log_partial_likelihood(d, vec({0.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NoCause1Events);
    }
}

TEST(Score, MatchesFiniteDifference)
{
    const auto d = random_complete(5, 30, 3);
    const Eigen::VectorXd beta = vec({0.3, -0.2, 0.5});
    const auto u = score(d, beta);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < 3; ++k) {
        Eigen::VectorXd up = beta, dn = beta;
        up[k] += h;
        dn[k] -= h;
        const double fd = (log_partial_likelihood(d, up) - log_partial_likelihood(d, dn)) / (2 * h);
        EXPECT_LE(std::abs(u[k] - fd), 1e-6 * std::max(1.0, std::abs(u[k])));
    }
}

TEST(Information, MatchesFiniteDifferenceOfScore)
{
    const auto d = random_complete(6, 30, 3);
    const Eigen::VectorXd beta = vec({-0.1, 0.4, 0.2});
    const auto info = information_matrix(d, beta);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < 3; ++k) {
        Eigen::VectorXd up = beta, dn = beta;
        up[k] += h;
        dn[k] -= h;
        const Eigen::VectorXd col = -(score(d, up) - score(d, dn)) / (2 * h);
        for (Eigen::Index r = 0; r < 3; ++r) {
            EXPECT_LE(std::abs(info(r, k) - col[r]), 1e-5 * std::max(1.0, std::abs(info(r, k))));
        }
    }
    EXPECT_LE((info - info.transpose()).norm(), 1e-12);
}

TEST(FitMple, ZeroCovariatesConvergeImmediately)
{
    const auto d = complete({rec("a", 1, 1, {0.0, 0.0}), rec("b", 2, 2, {0.0, 0.0}, 6.0), rec("c", 3, 0, {0.0, 0.0}),
                             rec("d", 4, 1, {0.0, 0.0})});
    const auto fit = fit_mple(d);
    EXPECT_TRUE(fit.converged);
    EXPECT_EQ(fit.iterations, 1);
    EXPECT_EQ(fit.beta, Eigen::VectorXd::Zero(2));
}

TEST(FitMple, MatchesGridSearch)
{
    const auto d = six_subjects();
    const auto fit = fit_mple(d);
    ASSERT_TRUE(fit.converged);
    const double best = oracle::grid_argmax([&](double b) { return oracle::loglik(d.records, {b}); }, -10.0, 10.0, 1e-5);
    EXPECT_NEAR(fit.beta[0], best, 1e-4);
}

TEST(FitMple, SeparatedCovariateDoesNotConverge)
{
    const auto d = complete({rec("a", 1, 1, {1.0}), rec("b", 2, 1, {1.0}), rec("c", 3, 1, {1.0}), rec("d", 4, 0, {0.0}),
                             rec("e", 5, 0, {0.0}), rec("f", 6, 0, {0.0})});
    const auto fit = fit_mple(d);
    EXPECT_FALSE(fit.converged);
    ASSERT_GE(fit.beta_path.size(), 3u);
    for (std::size_t k = 1; k < fit.beta_path.size(); ++k) EXPECT_GT(fit.beta_path[k][0], fit.beta_path[k - 1][0]);
    // the oracle likelihood keeps increasing along the path as well
    EXPECT_GT(oracle::loglik(d.records, {20.0}), oracle::loglik(d.records, {10.0}));
    EXPECT_THROW(require_converged(fit), Error);
}

TEST(FitMple, LoglikNondecreasingAlongPath)
{
    const auto d = random_complete(9, 40, 3);
    const auto fit = fit_mple(d);
    ASSERT_TRUE(fit.converged);
    double prev = -1e300;
    for (const auto& b : fit.beta_path) {
        const double l = log_partial_likelihood(d, b);
        EXPECT_GE(l, prev - 1e-12);
        prev = l;
    }
    EXPECT_LE(score(d, fit.beta).lpNorm<Eigen::Infinity>(), 1e-8 * (1.0 + fit.beta.lpNorm<Eigen::Infinity>()));
}

TEST(FitMple, NoCompetingEventsEqualsClassicalCox)
{
    Dataset d = random_complete(10, 40, 2);
    for (auto& r : d.records) {
        if (r.status == 2) r.status = 1;
    }
    const auto fg = fit_mple(d);
    const auto cox = fit_mple(d, {}, RiskSetKind::Classical);
    EXPECT_LE((fg.beta - cox.beta).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(FitMple, MissingCensoringTime)
{
    Dataset d;
    d.records = {rec("a", 1, 1, {0.0}), rec("b", 2, 2, {1.0})};
    d = validate(d);
    try {
        fit_mple(d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingCensoringTime);
    }
}

TEST(Breslow, HandSums)
{
    const auto d = complete({rec("a", 1, 1, {0.0}), rec("b", 1.5, 0, {0.0}), rec("c", 2, 1, {0.0}), rec("d", 3, 0, {0.0})});
    const auto a = breslow_cc(d, vec({0.0}));
    ASSERT_EQ(a.jump_times(), (std::vector<double>{1.0, 2.0}));
    EXPECT_DOUBLE_EQ(a(1.0), 0.25);
    EXPECT_DOUBLE_EQ(a(2.0), 0.75);
    EXPECT_EQ(a.initial_value(), 0.0);
}

TEST(Breslow, TiedEventsShareDenominator)
{
    const auto d = complete({rec("a", 1, 1, {0.0}), rec("b", 1, 1, {0.0}), rec("c", 2, 0, {0.0})});
    EXPECT_DOUBLE_EQ(breslow_cc(d, vec({0.0}))(1.0), 2.0 / 3.0);
}

TEST(Breslow, NoCause1EventsIsZero)
{
    const auto d = complete({rec("a", 1, 2, {0.0}, 3.0), rec("b", 2, 0, {1.0})});
    const auto a = breslow_cc(d, vec({0.3}));
    EXPECT_EQ(a.size(), 0u);
    EXPECT_EQ(a(100.0), 0.0);
}

TEST(Breslow, InterceptShiftScalesIncrements)
{
    auto d = random_complete(12, 20, 2);
    for (auto& r : d.records) r.covariates[1] = 1.0;
    const auto a0 = breslow_cc(d, vec({0.4, 0.0}));
    const auto a1 = breslow_cc(d, vec({0.4, std::log(3.0)}));
    ASSERT_EQ(a0.jump_times(), a1.jump_times());
    for (std::size_t k = 0; k < a0.size(); ++k) EXPECT_NEAR(a1.values()[k], a0.values()[k] / 3.0, 1e-14);
}

TEST(Breslow, JumpsOnlyAtCause1Times)
{
    const auto d = random_complete(13, 30, 1);
    const auto a = breslow_cc(d, vec({0.2}));
    EXPECT_EQ(a.jump_times(), event_times(d, 1));
}

TEST(Cif, TransformOfBreslow)
{
    EXPECT_EQ(cif(vec({0.5}), StepFunction(0.0), std::vector<double>{1.0})(10.0), 0.0);
    const StepFunction a({1.0}, {std::log(2.0)}, 0.0);
    EXPECT_NEAR(cif(vec({0.0}), a, std::vector<double>{3.0})(1.0), 0.5, 1e-15);
}

TEST(Cif, RecomputedAtPaperCovariate)
{
    const auto d = random_complete(14, 60, 3);
    const auto fit = fit_mple(d);
    ASSERT_TRUE(fit.converged);
    const std::vector<double> z0{-2.0 / 3.0, 0.0, 1.0};
    const auto f = cif(fit, z0);
    const double risk = std::exp(fit.beta[0] * z0[0] + fit.beta[1] * z0[1] + fit.beta[2] * z0[2]);
    double prev = 0.0;
    for (double t : fit.breslow.jump_times()) {
        EXPECT_NEAR(f(t), 1.0 - std::exp(-risk * fit.breslow(t)), 1e-14);
        EXPECT_GE(f(t), prev);
        EXPECT_LT(f(t), 1.0);
        prev = f(t);
    }
}
