#pragma once

#include <stdexcept>
#include <string>

namespace fpforge {

// Parameter and dimension violations on entry.
struct BadParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct BadDimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Data-dependent failures detected mid-operation.
struct DegenerateCloud : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySections : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotVisible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wraps a failure raised by an external quality hook; keeps the hook's name.
struct HookError : std::runtime_error {
    std::string hook;
    HookError(std::string hook_name, const std::string& what)
        : std::runtime_error("quality hook '" + hook_name + "': " + what),
          hook(std::move(hook_name)) {}
};

} // namespace fpforge
