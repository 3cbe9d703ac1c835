#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crband/error.hpp"

namespace crband {

struct NewtonOptions {
    double tol = 1e-8;
    int max_iter = 100;
    int max_halvings = 30;
};

enum class LinearSolver { Cholesky, LU };

struct NewtonResult {
    Eigen::VectorXd beta;
    double objective = 0.0;
    double score_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Accepted iterates, starting with the initial value.
    std::vector<Eigen::VectorXd> path;
};

namespace detail {

inline std::optional<Eigen::MatrixXd> solve_information(const Eigen::MatrixXd& info, const Eigen::MatrixXd& rhs,
                                                        LinearSolver solver)
{
    constexpr double min_rcond = 1e-12;
    if (info.rows() == 0) return Eigen::MatrixXd(0, rhs.cols());
    if (!info.allFinite()) return std::nullopt;
    if (solver == LinearSolver::Cholesky) {
        const Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() != Eigen::Success || !(llt.rcond() > min_rcond)) return std::nullopt;
        return Eigen::MatrixXd(llt.solve(rhs));
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(info);
    if (!(lu.rcond() > min_rcond)) return std::nullopt;
    return Eigen::MatrixXd(lu.solve(rhs));
}

} // namespace detail

/// Inverse of an information matrix; throws SingularInformation.
inline Eigen::MatrixXd invert_information(const Eigen::MatrixXd& info, LinearSolver solver = LinearSolver::Cholesky)
{
    auto inv = detail::solve_information(info, Eigen::MatrixXd::Identity(info.rows(), info.cols()), solver);
    if (!inv) throw Error(Errc::SingularInformation, "information matrix is singular");
    return std::move(*inv);
}

/// Newton-Raphson maximization with step-halving.
///
/// `eval(beta)` returns an object with `loglik`, `score` and `information`
/// (negative Hessian). Converged iff sup|score| <= tol (1 + |beta|_inf) and
/// the Newton step satisfies sup|step| <= sqrt(tol) (1 + |beta|_inf).
/// Throws SingularInformation when the information is singular at `init`;
/// later singularity ends the iteration unconverged.
template <class Eval>
NewtonResult newton_maximize(Eval&& eval, Eigen::VectorXd init, const NewtonOptions& opt,
                             LinearSolver solver = LinearSolver::Cholesky)
{
    NewtonResult res;
    res.beta = std::move(init);
    res.path.push_back(res.beta);
    auto cur = eval(res.beta);

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        res.iterations = iter;
        res.objective = cur.loglik;
        res.score_norm = cur.score.size() ? cur.score.template lpNorm<Eigen::Infinity>() : 0.0;
        if (!std::isfinite(cur.loglik) || !cur.score.allFinite()) return res;

        const double scale = 1.0 + (res.beta.size() ? res.beta.template lpNorm<Eigen::Infinity>() : 0.0);
        if (res.beta.size() == 0) {
            res.converged = true;
            return res;
        }
        const auto solved = detail::solve_information(cur.information, cur.score, solver);
        if (!solved) {
            // past the start a vanishing information means a diverging path
            if (iter > 1) return res;
            throw Error(Errc::SingularInformation, "information matrix is singular at the initial value");
        }
        const Eigen::VectorXd step = solved->col(0);
        const double step_norm = step.template lpNorm<Eigen::Infinity>();
        if (res.score_norm <= opt.tol * scale && step_norm <= std::sqrt(opt.tol) * scale) {
            res.converged = true;
            return res;
        }

        // gains below rounding noise of the objective count as ties
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cur.loglik));
        double s = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, s *= 0.5) {
            Eigen::VectorXd cand = res.beta + s * step;
            auto next = eval(cand);
            if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - slack) {
                res.beta = std::move(cand);
                cur = std::move(next);
                accepted = true;
                break;
            }
        }
        if (!accepted) return res;
        res.path.push_back(res.beta);
    }
    res.objective = cur.loglik;
    res.score_norm = cur.score.template lpNorm<Eigen::Infinity>();
    return res;
}

} // namespace crband
