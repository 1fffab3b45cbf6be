#include "segpipe/error.hpp"

namespace segpipe {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::DegeneratePolygon: return "DegeneratePolygon";
        case Errc::InvalidDimensions: return "InvalidDimensions";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::EmptyMask: return "EmptyMask";
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::NoMatch: return "NoMatch";
        case Errc::InvalidPattern: return "InvalidPattern";
        case Errc::InvalidRatios: return "InvalidRatios";
        case Errc::TooFewPatients: return "TooFewPatients";
        case Errc::MissingBrain: return "MissingBrain";
        case Errc::SizeMismatch: return "SizeMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::UnknownClass: return "UnknownClass";
        case Errc::InvalidInput: return "InvalidInput";
        case Errc::ZeroMatrix: return "ZeroMatrix";
        case Errc::NotTwoDimensional: return "NotTwoDimensional";
        case Errc::DivergedLoss: return "DivergedLoss";
        case Errc::UnknownImage: return "UnknownImage";
        case Errc::MalformedJson: return "MalformedJson";
        case Errc::IoFailure: return "IoFailure";
        case Errc::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

}  // namespace segpipe
