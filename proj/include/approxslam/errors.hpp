#pragma once

#include <stdexcept>
#include <string>

namespace approxslam {

/// Input violates an operation's precondition (bad dimensions, camera inside geometry, ...).
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed scene/trajectory/config document.
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingFileError : public DatasetError {
public:
    explicit MissingFileError(const std::string& path) : DatasetError("missing file: " + path) {}
};

class MalformedHeaderError : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class DimensionMismatchError : public DatasetError {
public:
    using DatasetError::DatasetError;
};

/// Trajectory lengths differ, or a trajectory file does not parse.
class TrajectoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An output file or directory could not be written.
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Correlation is undefined because one of the inputs has zero variance.
class UndefinedCorrelationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace approxslam
