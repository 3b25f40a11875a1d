#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unrec {

// Input file/schema problems (missing columns, malformed header).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A single unparseable CSV row; carries the 1-based line number.
class RowError : public std::runtime_error {
public:
    RowError(const std::string& msg, std::size_t line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Internal bookkeeping contradiction, e.g. deleting an interaction that is
// not present in an index.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values in an iterative solve; carries the iteration index.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& msg, int iteration)
        : std::runtime_error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

// Training diverged; carries the epoch index.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& msg, int epoch)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

// Loading a checkpoint whose vocabulary hash does not match the live corpus.
class VocabMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace unrec
