// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace seedlm {

/// Error categories. The numeric values double as CLI process exit codes.
enum class errc : int {
  io = 2,                ///< file missing, unreadable, or unwritable
  shape_mismatch = 3,    ///< declared shape disagrees with the data
  invalid_config = 4,    ///< block configuration violates its invariants
  non_finite_input = 5,  ///< NaN or infinity in tensor data
  bad_format = 6,        ///< malformed or corrupted container
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace seedlm
