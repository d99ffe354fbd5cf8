#pragma once
// Shared helpers for the unit tests.

#include <cstring>
#include <functional>
#include <optional>

#include "mfj/common.hpp"

namespace mfj_test {

// Runs fn and reports the library error code it threw, if any.
inline std::optional<mfj::Errc> thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const mfj::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace mfj_test
