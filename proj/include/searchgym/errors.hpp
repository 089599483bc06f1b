#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace searchgym {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input record. `line()` is 1-based, 0 when not line-oriented.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& detail)
        : Error(line == 0 ? detail : "line " + std::to_string(line) + ": " + detail), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::string id)
        : Error("duplicate id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class DanglingReferenceError : public Error {
public:
    explicit DanglingReferenceError(std::string doc_id)
        : Error("dangling reference to doc_id: " + doc_id), doc_id_(std::move(doc_id)) {}
    const std::string& doc_id() const noexcept { return doc_id_; }

private:
    std::string doc_id_;
};

class InsufficientPoolError : public Error {
public:
    InsufficientPoolError(int hop_count, std::size_t needed, std::size_t available)
        : Error("insufficient pool for " + std::to_string(hop_count) + "-hop class: need " +
                std::to_string(needed) + ", have " + std::to_string(available)),
          hop_count_(hop_count) {}
    int hop_count() const noexcept { return hop_count_; }

private:
    int hop_count_;
};

class RemoteUnavailableError : public Error {
public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
public:
    DimensionMismatchError(std::size_t expected, std::size_t actual)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(actual)) {}
};

class ZeroVectorError : public Error {
public:
    ZeroVectorError() : Error("cosine undefined for zero vector") {}
};

class EmptyCorpusError : public Error {
public:
    EmptyCorpusError() : Error("corpus is empty") {}
};

class EmptyQueryError : public Error {
public:
    EmptyQueryError() : Error("query is empty") {}
};

class InvalidConfigError : public Error {
public:
    using Error::Error;
};

class InvalidWeightsError : public Error {
public:
    using Error::Error;
};

class PolicyError : public Error {
public:
    using Error::Error;
};

}  // namespace searchgym
