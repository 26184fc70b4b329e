#pragma once

#include <stdexcept>
#include <string>

namespace robusteval {

enum class Errc {
  invalid_argument,
  io,
  bad_magic,
  bad_header,
  truncated_payload,
  shape_mismatch,
  non_finite,
  geometry_mismatch,
  empty_input,
  empty_intersection,
  duplicate_id,
  no_successful_samples,
  budget_violation,
  divergence,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_header: return "bad_header";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::geometry_mismatch: return "geometry_mismatch";
    case Errc::empty_input: return "empty_input";
    case Errc::empty_intersection: return "empty_intersection";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::no_successful_samples: return "no_successful_samples";
    case Errc::budget_violation: return "budget_violation";
    case Errc::divergence: return "divergence";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable code so the
// CLI can map validation problems to exit status 2.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace robusteval
