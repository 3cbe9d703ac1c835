#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crband/error.hpp"

namespace crband {

/// Right-continuous piecewise-constant function on [0, inf).
///
/// Takes `initial_value` on [0, jump_times[0]) and `values[j]` on
/// [jump_times[j], jump_times[j+1]); the last value extends to infinity.
class StepFunction {
public:
    StepFunction() = default;

    explicit StepFunction(double initial_value) : initial_(initial_value) {}

    StepFunction(std::vector<double> jump_times, std::vector<double> values, double initial_value)
        : jumps_(std::move(jump_times)), values_(std::move(values)), initial_(initial_value)
    {
        if (jumps_.size() != values_.size()) {
            throw Error(Errc::InvalidArgument, "step function needs one value per jump time");
        }
        for (std::size_t j = 1; j < jumps_.size(); ++j) {
            if (!(jumps_[j - 1] < jumps_[j])) {
                throw Error(Errc::InvalidArgument, "step function jump times must be strictly increasing");
            }
        }
    }

    const std::vector<double>& jump_times() const noexcept { return jumps_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double initial_value() const noexcept { return initial_; }
    std::size_t size() const noexcept { return jumps_.size(); }

    double operator()(double t) const noexcept
    {
        const auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t);
        if (it == jumps_.begin()) return initial_;
        return values_[static_cast<std::size_t>(it - jumps_.begin()) - 1];
    }

    /// Limit from the left, f(t-).
    double left_limit(double t) const noexcept
    {
        const auto it = std::lower_bound(jumps_.begin(), jumps_.end(), t);
        if (it == jumps_.begin()) return initial_;
        return values_[static_cast<std::size_t>(it - jumps_.begin()) - 1];
    }

    double final_value() const noexcept { return values_.empty() ? initial_ : values_.back(); }

    template <class F>
    StepFunction transform(F&& f) const
    {
        std::vector<double> v(values_.size());
        std::transform(values_.begin(), values_.end(), v.begin(), f);
        return StepFunction(jumps_, std::move(v), f(initial_));
    }

private:
    std::vector<double> jumps_;
    std::vector<double> values_;
    double initial_ = 0.0;
};

inline double step_eval(const StepFunction& f, double t) { return f(t); }

/// Sorted union of the jump times of several step functions.
inline std::vector<double> union_jump_times(std::span<const StepFunction* const> fs)
{
    std::vector<double> out;
    for (const auto* f : fs) out.insert(out.end(), f->jump_times().begin(), f->jump_times().end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::vector<double> union_jump_times(const StepFunction& a, const StepFunction& b)
{
    const StepFunction* fs[] = {&a, &b};
    return union_jump_times(std::span<const StepFunction* const>(fs));
}

} // namespace crband
