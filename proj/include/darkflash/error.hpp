#pragma once

#include <stdexcept>
#include <string>

namespace darkflash {

// Contract violations on in-memory arguments. The CLI maps these, together
// with format_error, to exit code 2.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class domain_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Settings outside a camera envelope or a value outside its declared range.
class range_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or inconsistent on-disk data: PGM/PFM payloads, JSON headers,
// manifests, grids, incomplete metering results.
class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate systems, failed convergence. Exit code 3.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace darkflash
