#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crband {

enum class Errc {
    MissingCensoringTime,
    NegativeTime,
    CovariateLengthMismatch,
    InvalidRecord,
    TooFewEvents,
    EmptyDataset,
    SingularInformation,
    NonConvergence,
    DegenerateAnchor,
    MissingCovariates,
    ZeroConditioningMass,
    NoCause1Events,
    EmptyRiskSet,
    ZeroGhat,
    ZeroWeightedRiskSet,
    InvalidSize,
    EmptySups,
    EmptyList,
    ImputationFailed,
    FitFailed,
    TooManyFailedReplicates,
    UnsupportedGenerator,
    CalibrationFailed,
    InvalidArgument,
    Io,
    Parse,
};

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
        case Errc::MissingCensoringTime: return "MissingCensoringTime";
        case Errc::NegativeTime: return "NegativeTime";
        case Errc::CovariateLengthMismatch: return "CovariateLengthMismatch";
        case Errc::InvalidRecord: return "InvalidRecord";
        case Errc::TooFewEvents: return "TooFewEvents";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::SingularInformation: return "SingularInformation";
        case Errc::NonConvergence: return "NonConvergence";
        case Errc::DegenerateAnchor: return "DegenerateAnchor";
        case Errc::MissingCovariates: return "MissingCovariates";
        case Errc::ZeroConditioningMass: return "ZeroConditioningMass";
        case Errc::NoCause1Events: return "NoCause1Events";
        case Errc::EmptyRiskSet: return "EmptyRiskSet";
        case Errc::ZeroGhat: return "ZeroGhat";
        case Errc::ZeroWeightedRiskSet: return "ZeroWeightedRiskSet";
        case Errc::InvalidSize: return "InvalidSize";
        case Errc::EmptySups: return "EmptySups";
        case Errc::EmptyList: return "EmptyList";
        case Errc::ImputationFailed: return "ImputationFailed";
        case Errc::FitFailed: return "FitFailed";
        case Errc::TooManyFailedReplicates: return "TooManyFailedReplicates";
        case Errc::UnsupportedGenerator: return "UnsupportedGenerator";
        case Errc::CalibrationFailed: return "CalibrationFailed";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::Io: return "Io";
        case Errc::Parse: return "Parse";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code. `row` is the 1-based data row
/// (header excluded) when the failure traces back to an input record.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what +
                             (row ? " (row " + std::to_string(*row) + ")" : std::string())),
          code_(code), row_(row)
    {}

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> row() const noexcept { return row_; }

private:
    Errc code_;
    std::optional<std::size_t> row_;
};

} // namespace crband
