#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nbres {

/// Base class for every error raised by the toolkit. `exit_code()` is the
/// process status the command-line front end reports for this failure class.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class InvalidInput : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class InvalidParameter : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }
    int exit_code() const noexcept override { return 2; }

private:
    std::string source_;
    std::size_t line_ = 0;
};

class NoResonance : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class IllPosedFit : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class EmptySelection : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class NonPhysical : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class Underdetermined : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class NoRegrowthSignal : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Mesh cannot resolve a layer; `layer()` names the offending region.
class ResolutionError : public InvalidInput {
public:
    ResolutionError(std::string layer, const std::string& what)
        : InvalidInput(what), layer_(std::move(layer)) {}
    const std::string& layer() const noexcept { return layer_; }

private:
    std::string layer_;
};

class NonlinearRegime : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class IllConditioned : public Error {
public:
    IllConditioned(double condition_estimate, const std::string& what)
        : Error(what), condition_(condition_estimate) {}
    double condition_estimate() const noexcept { return condition_; }
    int exit_code() const noexcept override { return 4; }

private:
    double condition_;
};

/// Iterative solver hit its iteration cap; carries the best parameters seen.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best)
        : Error(what), best_(std::move(best)) {}
    const std::vector<double>& best_so_far() const noexcept { return best_; }
    int exit_code() const noexcept override { return 4; }

private:
    std::vector<double> best_;
};

class DependencyError : public Error {
public:
    DependencyError(std::string stage, const std::string& what)
        : Error(what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept override { return 5; }

private:
    std::string stage_;
};

}  // namespace nbres
