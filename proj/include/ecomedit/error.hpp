#pragma once

#include <stdexcept>
#include <string>

namespace ecomedit {

// Root of every exception thrown by the library. Subsystems derive their own
// kinds so callers can catch narrowly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CatalogError : public Error {
public:
    using Error::Error;
};

class DuplicateProductError : public CatalogError {
public:
    explicit DuplicateProductError(std::string id)
        : CatalogError("duplicate product_id: " + id), product_id_(std::move(id)) {}
    const std::string& product_id() const noexcept { return product_id_; }

private:
    std::string product_id_;
};

class SampleSizeError : public CatalogError {
public:
    using CatalogError::CatalogError;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class VerdictParseError : public ParseError {
public:
    using ParseError::ParseError;
};

class DegenerateCorrectionError : public Error {
public:
    using Error::Error;
};

class FormatVersionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class OptimizationError : public Error {
public:
    OptimizationError(const std::string& what, int step) : Error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

class ConditioningError : public Error {
public:
    using Error::Error;
};

class DeltaStateError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace ecomedit
