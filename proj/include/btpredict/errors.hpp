#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace btp {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text (dag files, replay logs, tree strings).
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line_number)
      : Error(what + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
  explicit ParseError(const std::string& what) : Error(what), line(0) {}
  std::size_t line;
};

// Structural problems in a tech dag or references into it
// (cycles, dangling prerequisites, unknown building names/ids).
struct DagError : Error {
  using Error::Error;
};

// enumerate_build_trees hit its configured size cap.
struct EnumerationLimitError : Error {
  using Error::Error;
};

// Model file problems: bad version, checksum mismatch, dag mismatch.
struct ModelIoError : Error {
  using Error::Error;
};

// No tree in the model domain can coexist with the observation.
// Signals an out-of-distribution query; callers decide how to degrade.
struct NoCompatibleTreeError : Error {
  using Error::Error;
};

}  // namespace btp
