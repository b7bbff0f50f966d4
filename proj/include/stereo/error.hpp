// Error types shared across the library.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stereo {

// A caller violated an interface contract (shape mismatch, bad parameter).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input is structurally fine but too degenerate to operate on
// (empty mask, image smaller than a stencil).
struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed serialized data. Carries the byte offset of the problem.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

// Recognized container but unsupported variant (bit depth, color type).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stereo
