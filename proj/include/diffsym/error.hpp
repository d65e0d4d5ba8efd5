#pragma once

#include <stdexcept>
#include <string>

namespace diffsym {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the parser; pos is a 0-based offset into the input string.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t pos)
        : Error(what + " (at offset " + std::to_string(pos) + ")"), pos(pos) {}
    std::size_t pos;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(const std::string& name)
        : Error("unknown variable '" + name + "'"), name(name) {}
    std::string name;
};

// Numeric evaluation left the domain of a partial function (log of a
// nonpositive number, fractional power of a negative base, division by zero).
class EvaluationDomainError : public Error {
public:
    explicit EvaluationDomainError(const std::string& what) : Error(what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// An operation required a standard diffusor in good form and got something else.
class NotStandard : public Error {
public:
    explicit NotStandard(const std::string& what) : Error(what) {}
};

class MissingInverse : public Error {
public:
    explicit MissingInverse(const std::string& what) : Error(what) {}
};

class NotPSD : public Error {
public:
    NotPSD(const std::string& what, double min_eigenvalue)
        : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
          min_eigenvalue(min_eigenvalue) {}
    double min_eigenvalue;
};

// The determining equations produced a term whose coefficient functions fall
// outside the span certifiable from the ansatz basis; carries the term text.
class BasisNotClosed : public Error {
public:
    explicit BasisNotClosed(const std::string& term)
        : Error("determining equations not closed over ansatz basis; offending term: " + term),
          term(term) {}
    std::string term;
};

// SDE-level operations compare against a theory stated for autonomous
// coefficients only.
class NonAutonomous : public Error {
public:
    explicit NonAutonomous(const std::string& what) : Error(what) {}
};

class NonMonotoneTimeChange : public Error {
public:
    explicit NonMonotoneTimeChange(const std::string& what) : Error(what) {}
};

class NumericBlowup : public Error {
public:
    explicit NumericBlowup(const std::string& what) : Error(what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace diffsym
