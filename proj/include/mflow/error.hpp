#pragma once

#include <stdexcept>
#include <string>

namespace mflow {

/// Broad failure classes. The CLI maps them onto exit statuses.
enum class ErrorKind {
    invalid_argument,  ///< precondition violated by the caller
    schema,            ///< scenario file does not validate
    simulation,        ///< non-finite state, blow-up, infeasible projection
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what)
        : Error(ErrorKind::invalid_argument, what) {}
};

/// Schema violation; `path` is a JSON-pointer-like location of the offending field.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(ErrorKind::schema, path + ": " + what), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what)
        : Error(ErrorKind::simulation, what) {}
};

inline void require(bool condition, const std::string& what) {
    if (!condition) throw InvalidArgument(what);
}

}  // namespace mflow
