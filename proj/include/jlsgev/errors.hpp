#pragma once

#include <stdexcept>
#include <string>

namespace jlsgev {

// Invalid parameters, configs, or data that fail contract checks.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// File and parse failures. Messages carry the offending path/line.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Sampler could not produce a usable posterior (init repair exhausted,
// non-finite target throughout).
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace jlsgev
