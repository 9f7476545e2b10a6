#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aide {

/// Base of every error raised by the library. `kind()` is a stable tag the CLI
/// maps onto exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { argument, data, runtime };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& what) : Error(Kind::argument, what) {}
};

struct DecodeError : Error {
    DecodeError(std::size_t offset, const std::string& what)
        : Error(Kind::data, "decode error at byte " + std::to_string(offset) + ": " + what),
          offset(offset) {}
    std::size_t offset;
};

struct UnsupportedFormatError : Error {
    explicit UnsupportedFormatError(const std::string& what) : Error(Kind::data, what) {}
};

struct InsufficientPatchesError : Error {
    InsufficientPatchesError(std::size_t have, std::size_t need)
        : Error(Kind::data, "insufficient patches: have " + std::to_string(have) + ", need " +
                                std::to_string(need)),
          have(have), need(need) {}
    std::size_t have;
    std::size_t need;
};

struct EmptyGridError : Error {
    EmptyGridError(std::size_t width, std::size_t height, std::size_t n)
        : Error(Kind::data, "image " + std::to_string(width) + "x" + std::to_string(height) +
                                " has no complete " + std::to_string(n) + "x" + std::to_string(n) +
                                " patch") {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error(Kind::data, what) {}
};

struct CorruptCheckpointError : Error {
    explicit CorruptCheckpointError(const std::string& what)
        : Error(Kind::data, "corrupt checkpoint: " + what) {}
};

struct UnknownIdError : Error {
    explicit UnknownIdError(const std::string& id) : Error(Kind::data, "unknown id: " + id), id(id) {}
    std::string id;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(Kind::data, "configuration: " + what) {}
};

struct LayoutError : Error {
    explicit LayoutError(const std::string& what) : Error(Kind::data, "layout: " + what) {}
};

struct UndefinedMetricError : Error {
    explicit UndefinedMetricError(const std::string& what) : Error(Kind::data, what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error(Kind::runtime, what) {}
};

struct OptimizerError : Error {
    explicit OptimizerError(const std::string& what) : Error(Kind::runtime, what) {}
};

}  // namespace aide
