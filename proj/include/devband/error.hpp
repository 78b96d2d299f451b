#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace devband {

enum class ErrorCode {
    NonPositive,
    InfeasibleDiameter,
    InfeasibleWidth,
    DegenerateDiameter,
    BadSampleCount,
    DegenerateEdge,
    TooFewPoints,
    NotClosed,
    SingularDensity,
    ZeroWidth,
    UndefinedRuling,
    LineSearchFailed,
    LostTopology,
    Precondition,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonPositive: return "NonPositive";
        case ErrorCode::InfeasibleDiameter: return "InfeasibleDiameter";
        case ErrorCode::InfeasibleWidth: return "InfeasibleWidth";
        case ErrorCode::DegenerateDiameter: return "DegenerateDiameter";
        case ErrorCode::BadSampleCount: return "BadSampleCount";
        case ErrorCode::DegenerateEdge: return "DegenerateEdge";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::NotClosed: return "NotClosed";
        case ErrorCode::SingularDensity: return "SingularDensity";
        case ErrorCode::ZeroWidth: return "ZeroWidth";
        case ErrorCode::UndefinedRuling: return "UndefinedRuling";
        case ErrorCode::LineSearchFailed: return "LineSearchFailed";
        case ErrorCode::LostTopology: return "LostTopology";
        case ErrorCode::Precondition: return "Precondition";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

// Every failure in the library is reported through this exception; `code`
// identifies the contract that was violated and `index` optionally names the
// offending sample/vertex.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what, std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), m_code(code), m_index(index) {}

    ErrorCode code() const noexcept { return m_code; }
    std::optional<std::size_t> index() const noexcept { return m_index; }

private:
    ErrorCode m_code;
    std::optional<std::size_t> m_index;
};

} // namespace devband
