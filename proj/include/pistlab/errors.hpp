#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pistlab {

/// Base of every error raised by the library. `code()` is a stable,
/// machine-readable identifier (e.g. "SyntaxError") printed by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, std::string expected)
        : Error("SyntaxError", "syntax error at position " + std::to_string(position) +
                                   ": expected " + expected),
          position_(position),
          expected_(std::move(expected)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(std::string name)
        : Error("UnknownVariable", "unknown variable '" + name + "'"), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class DivisionByZero : public Error {
public:
    DivisionByZero() : Error("DivisionByZero", "division by zero") {}
};

class MissingBinding : public Error {
public:
    explicit MissingBinding(std::string name)
        : Error("MissingBinding", "no value bound for variable '" + name + "'"),
          name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class SingularForm : public Error {
public:
    explicit SingularForm(double det)
        : Error("SingularForm",
                "symplectic form is degenerate at point (|det| = " + std::to_string(det) + ")"),
          det_(det) {}

    double det() const noexcept { return det_; }

private:
    double det_;
};

class NonFiniteState : public Error {
public:
    explicit NonFiniteState(long long step)
        : Error("NonFiniteState", "non-finite state at step " + std::to_string(step)),
          step_(step) {}

    long long step() const noexcept { return step_; }

private:
    long long step_;
};

class FixedPointDivergence : public Error {
public:
    explicit FixedPointDivergence(long long step)
        : Error("FixedPointDivergence",
                "implicit midpoint fixed-point iteration did not converge at step " +
                    std::to_string(step)),
          step_(step) {}

    long long step() const noexcept { return step_; }

private:
    long long step_;
};

class TooShort : public Error {
public:
    TooShort(std::size_t have, std::size_t need)
        : Error("TooShort", "trajectory has " + std::to_string(have) +
                                " recorded points, need at least " + std::to_string(need)) {}
};

/// Invalid model, chart or configuration content. `key` is the dotted
/// location of the offending entry ("model.H", "chart.k").
class SchemaError : public Error {
public:
    SchemaError(std::string key, std::string reason)
        : Error("SchemaError", key + ": " + reason), key_(std::move(key)), reason_(std::move(reason)) {}

    const std::string& key() const noexcept { return key_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string key_;
    std::string reason_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

}  // namespace pistlab
