#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qsep {

/// Malformed or corrupt input file; carries the byte offset when known.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what, std::optional<std::uint64_t> offset = std::nullopt)
        : std::runtime_error(offset ? what + " (at byte offset " + std::to_string(*offset) + ")" : what),
          offset_(offset) {}

    std::optional<std::uint64_t> offset() const noexcept { return offset_; }

private:
    std::optional<std::uint64_t> offset_;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qsep
