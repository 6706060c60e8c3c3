#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ntklab {

// Raised when a spec, config or argument fails a precondition.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what)
      : std::invalid_argument(what) {}
};

// Raised by file readers; carries the byte offset the parse failed at so
// callers can point at the exact spot in a corrupt file.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, std::uint64_t byte_offset)
      : std::runtime_error(what + " (byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}

  std::uint64_t offset = 0;
};

}  // namespace ntklab
