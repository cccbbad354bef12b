#pragma once

#include <stdexcept>
#include <string>

namespace logan {

enum class ErrorKind {
    Contract,
    Numeric,
    Config,
    AdapterFormat,
    LayoutIncomplete,
    Parse,
    Reference,
    Corruption,
    Version,
    Execution,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Schema violation in an edit script; `pointer` is a JSON pointer into the
// offending document ("" for the root).
class ParseError : public Error {
public:
    ParseError(std::string pointer, const std::string& message)
        : Error(ErrorKind::Parse, (pointer.empty() ? std::string("/") : pointer) + ": " + message),
          pointer_(std::move(pointer)) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

class ReferenceError : public Error {
public:
    ReferenceError(std::string object_id, const std::string& message)
        : Error(ErrorKind::Reference, message), object_id_(std::move(object_id)) {}

    const std::string& object_id() const noexcept { return object_id_; }

private:
    std::string object_id_;
};

class LayoutIncompleteError : public Error {
public:
    // component: "ceiling", "floor-left" or "floor-right"
    LayoutIncompleteError(std::string component, const std::string& message)
        : Error(ErrorKind::LayoutIncomplete, message), component_(std::move(component)) {}

    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

class CorruptionError : public Error {
public:
    CorruptionError(std::string asset_id, const std::string& message)
        : Error(ErrorKind::Corruption, message), asset_id_(std::move(asset_id)) {}

    const std::string& asset_id() const noexcept { return asset_id_; }

private:
    std::string asset_id_;
};

// Thrown when executing a layer of an edit plan fails.
class ExecutionError : public Error {
public:
    ExecutionError(int layer, std::string object_id, const std::string& message)
        : Error(ErrorKind::Execution, message), layer_(layer), object_id_(std::move(object_id)) {}

    int layer() const noexcept { return layer_; }
    const std::string& object_id() const noexcept { return object_id_; }

private:
    int layer_;
    std::string object_id_;
};

[[noreturn]] inline void contract_error(const std::string& message) {
    throw Error(ErrorKind::Contract, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) contract_error(message);
}

} // namespace logan
