#pragma once

#include <stdexcept>
#include <string>

namespace silsm {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid numeric parameter (eps <= 0, negative weight, empty ground truth, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Caller violated the interaction protocol (round order, empty region, ...).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Out-of-order round index; kept separate so the service can answer 409.
class RoundOrderError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// phi(P_i) == 0 exactly: the sign rule cannot decide.
class AmbiguityError : public ProtocolError {
public:
    AmbiguityError(const std::string& what, int x, int y) : ProtocolError(what), x_(x), y_(y) {}
    int x() const { return x_; }
    int y() const { return y_; }

private:
    int x_;
    int y_;
};

/// Evolution produced a non-finite value or exceeded the blowup bound.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

/// Input bytes or files could not be decoded.
class DecodeError : public Error {
public:
    using Error::Error;
};

}  // namespace silsm
