#pragma once

#include <stdexcept>
#include <string>

namespace afc {

// Domain error carrying a stable, machine-readable name such as
// "grid-too-coarse" or "capacity-infeasible". The CLI prints the name and
// exits with status 1.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message);

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* kGridTooCoarse = "grid-too-coarse";
inline constexpr const char* kCombExceedsSpan = "comb-exceeds-span";
inline constexpr const char* kDomain = "domain-error";
inline constexpr const char* kNoSolution = "no-solution-in-bounds";
inline constexpr const char* kNonConvergence = "non-convergence";
inline constexpr const char* kBadBounds = "invalid-bounds";
inline constexpr const char* kCapacityInfeasible = "capacity-infeasible";
inline constexpr const char* kBandwidthTooSmall = "bandwidth-too-small";
inline constexpr const char* kGridMismatch = "grid-mismatch";
inline constexpr const char* kOverlappingWindows = "overlapping-windows";
inline constexpr const char* kWindowOutOfRange = "window-out-of-range";
inline constexpr const char* kZeroReference = "zero-reference";
inline constexpr const char* kUnsortedTimes = "unsorted-times";
inline constexpr const char* kSequenceInvalid = "sequence-invariant-violation";
inline constexpr const char* kFitFailure = "fit-failure";
inline constexpr const char* kDegenerateData = "degenerate-data";
inline constexpr const char* kParse = "parse-error";
inline constexpr const char* kValidation = "validation-error";
inline constexpr const char* kIo = "io-error";
}  // namespace errc

}  // namespace afc
