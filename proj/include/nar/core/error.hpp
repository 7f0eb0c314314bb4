#pragma once

#include <stdexcept>
#include <string>

namespace nar {

enum class ErrorKind {
    invalid_argument,
    shape,
    schema,
    format,
    io,
    generation_failure,
    config,
    dependency,
    divergence,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for failures caused by user input (bad config, paths, files) rather than bugs.
    bool is_user_error() const noexcept {
        switch (kind_) {
            case ErrorKind::invalid_argument:
            case ErrorKind::format:
            case ErrorKind::io:
            case ErrorKind::config:
            case ErrorKind::dependency:
            case ErrorKind::schema:
                return true;
            default:
                return false;
        }
    }

private:
    ErrorKind kind_;
};

#define NAR_DEFINE_ERROR(Name, Kind)                                             \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    }

NAR_DEFINE_ERROR(InvalidArgument, invalid_argument);
NAR_DEFINE_ERROR(ShapeError, shape);
NAR_DEFINE_ERROR(SchemaError, schema);
NAR_DEFINE_ERROR(FormatError, format);
NAR_DEFINE_ERROR(IoError, io);
NAR_DEFINE_ERROR(GenerationFailure, generation_failure);
NAR_DEFINE_ERROR(ConfigError, config);
NAR_DEFINE_ERROR(DivergenceError, divergence);

#undef NAR_DEFINE_ERROR

/// A required upstream artifact is missing; `remedy` is the command that produces it.
class DependencyError : public Error {
public:
    DependencyError(const std::string& what, std::string remedy)
        : Error(ErrorKind::dependency, what + "\n  produce it with: " + remedy), remedy_(std::move(remedy)) {}

    const std::string& remedy() const noexcept { return remedy_; }

private:
    std::string remedy_;
};

}  // namespace nar
