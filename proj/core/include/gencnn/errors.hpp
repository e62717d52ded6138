#pragma once

#include <stdexcept>
#include <string>

namespace gencnn {

/// File access or on-disk format problem; the CLI maps this to exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gencnn
