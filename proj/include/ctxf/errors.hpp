#pragma once

#include <stdexcept>
#include <string>

namespace ctxf {

// Base for everything this library throws on contract violations.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes incompatible; message names both shapes.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite ones are required (NaN loss, NaN softmax input).
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// API preconditions: empty history, non-scalar loss, mismatched lengths.
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Object used in an invalid lifecycle state (double backward without reset).
struct StateError : Error {
    explicit StateError(const std::string& msg) : Error(msg) {}
};

// Bad or inconsistent configuration (unknown key, d_att not divisible by heads).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Token id outside the configured vocabulary.
struct VocabError : Error {
    explicit VocabError(const std::string& msg) : Error(msg) {}
};

// A verification oracle cannot run (non-deterministic objective).
struct OracleError : Error {
    explicit OracleError(const std::string& msg) : Error(msg) {}
};

}  // namespace ctxf
