#pragma once

#include <stdexcept>
#include <string>

namespace rdp {

// Base class for every error raised by the library. Each subclass maps to one
// failure family so callers (and the CLI exit codes) can branch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A parameter is outside its domain (negative variance, rho > 1, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Mismatched dimensions, unknown labels, frame index out of range.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A matrix that must be PSD is not, beyond tolerance.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

// The constraint system of a frame program has no solution.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& constraint, const std::string& detail)
        : Error("infeasible: " + constraint + " (" + detail + ")"), constraint_(constraint) {}

    [[nodiscard]] const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

// Both solver paths failed. Carries the best distortion seen on the grid.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double best_distortion)
        : Error(what), best_distortion_(best_distortion) {}

    [[nodiscard]] double best_distortion() const noexcept { return best_distortion_; }

private:
    double best_distortion_;
};

// Asymptotic formula requested outside the regime it was derived for.
class RegimeError : public Error {
public:
    using Error::Error;
};

// Hand-derived program not available for the requested (kind, frame).
class NotImplementedError : public Error {
public:
    using Error::Error;
};

// Wraps a frame-level error raised while solving a horizon.
class FrameError : public Error {
public:
    FrameError(int frame, const std::string& what)
        : Error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}

    [[nodiscard]] int frame() const noexcept { return frame_; }

private:
    int frame_;
};

}  // namespace rdp
