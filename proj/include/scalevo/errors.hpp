#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scalevo {

enum class ErrorKind {
    InvalidInput,
    DegenerateGeometry,
    PointAtInfinity,
    LowParallax,
    InvalidPlane,
    DegenerateSample,
    FitFailure,
    DegenerateMotion,
    PureRotation,
    SelectionFailure,
    InvalidGround,
    FilterDegenerate,
    NoRatio,
    Parse,
    Alignment,
    Config,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every recoverable failure in the library. The kind is
/// stable and meant for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace scalevo
