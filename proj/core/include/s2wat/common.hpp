#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2wat {

/// Tensor extents, outermost first. Data is row-major, last index fastest.
using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Extent/rank mismatches between operands.
struct ShapeError : Error {
  using Error::Error;
};

/// Window geometry that does not tile the patch grid.
struct GeometryError : Error {
  using Error::Error;
};

/// Invalid module configuration (e.g. bias handed to a strip branch).
struct ConfigError : Error {
  using Error::Error;
};

/// Reflection padding that the input is too small to support.
struct PadError : Error {
  using Error::Error;
};

/// Unreadable, corrupt or mismatched external data (files, datasets).
struct DataError : Error {
  using Error::Error;
};

/// Non-finite values or failed numeric invariants.
struct NumericError : Error {
  using Error::Error;
};

/// Bad command-line arguments or config keys.
struct UsageError : Error {
  using Error::Error;
};

}  // namespace s2wat
