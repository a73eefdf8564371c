#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace foval {

// Base class for every error raised by the toolkit. Subclasses exist so call
// sites and tests can catch specific failure conditions by type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- dataset ----

class IoFailure : public Error {
public:
    explicit IoFailure(const std::string& what) : Error("io failure: " + what) {}
};

class MissingColumn : public Error {
public:
    explicit MissingColumn(const std::string& column)
        : Error("missing column '" + column + "' in CSV header"), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class NonNumericCell : public Error {
public:
    NonNumericCell(std::int64_t line, const std::string& column)
        : Error("non-numeric cell at line " + std::to_string(line) + ", column '" + column + "'"),
          line_(line),
          column_(column) {}
    std::int64_t line() const { return line_; }
    const std::string& column() const { return column_; }

private:
    std::int64_t line_;
    std::string column_;
};

class ZeroDirectionVector : public Error {
public:
    explicit ZeroDirectionVector(std::int64_t where)
        : Error("zero-magnitude gaze direction at row/frame " + std::to_string(where)), where_(where) {}
    std::int64_t where() const { return where_; }

private:
    std::int64_t where_;
};

// ---- preprocess ----

class TooFewFrames : public Error {
public:
    TooFewFrames(std::size_t got, std::size_t need)
        : Error("too few frames: got " + std::to_string(got) + ", need at least " + std::to_string(need)) {}
};

class TooFewSubjects : public Error {
public:
    explicit TooFewSubjects(std::size_t got)
        : Error("too few subjects: got " + std::to_string(got) + ", need at least 2") {}
};

class DegenerateRange : public Error {
public:
    explicit DegenerateRange(const std::string& what) : Error("degenerate range: " + what) {}
};

class SubjectTooShort : public Error {
public:
    SubjectTooShort(const std::string& subject, std::size_t frames, std::size_t need)
        : Error("subject '" + subject + "' has " + std::to_string(frames) + " frames, needs more than " +
                std::to_string(need) + " to form a sequence"),
          subject_(subject) {}
    const std::string& subject() const { return subject_; }

private:
    std::string subject_;
};

// ---- nn ----

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

class InsufficientBatch : public Error {
public:
    explicit InsufficientBatch(const std::string& what) : Error("insufficient batch: " + what) {}
};

// ---- eval ----

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : Error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& what) : Error("empty input: " + what) {}
};

// ---- train / config ----

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("invalid config: " + what) {}
};

class DivergedLoss : public Error {
public:
    DivergedLoss(const std::string& fold, int epoch)
        : Error("non-finite loss in fold '" + fold + "' at epoch " + std::to_string(epoch)) {}
};

} // namespace foval
