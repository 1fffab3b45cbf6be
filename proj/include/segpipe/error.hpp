#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segpipe {

enum class Errc {
    DegeneratePolygon,
    InvalidDimensions,
    DimensionMismatch,
    EmptyMask,
    MalformedLine,
    NoMatch,
    InvalidPattern,
    InvalidRatios,
    TooFewPatients,
    MissingBrain,
    SizeMismatch,
    ShapeMismatch,
    UnknownClass,
    InvalidInput,
    ZeroMatrix,
    NotTwoDimensional,
    DivergedLoss,
    UnknownImage,
    MalformedJson,
    IoFailure,
    InvariantViolation,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

    Errc code() const noexcept { return code_; }
    // Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

}  // namespace segpipe
