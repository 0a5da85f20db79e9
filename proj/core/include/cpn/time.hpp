#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>

namespace cpn {

/// Simulated clock value. Held as integer nanoseconds so that event ordering
/// and equality are exact; never derived from wall-clock time.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_ns(std::int64_t ns) {
    SimTime t;
    t.ns_ = ns;
    return t;
  }
  static SimTime from_seconds(double seconds);
  static constexpr SimTime zero() { return {}; }
  static constexpr SimTime infinite() {
    return from_ns(std::numeric_limits<std::int64_t>::max());
  }

  constexpr std::int64_t ns() const { return ns_; }
  double seconds() const;
  constexpr bool is_infinite() const {
    return ns_ == std::numeric_limits<std::int64_t>::max();
  }

  constexpr auto operator<=>(const SimTime&) const = default;

  /// Saturates at infinite().
  SimTime operator+(SimTime rhs) const;
  SimTime operator-(SimTime rhs) const;
  SimTime& operator+=(SimTime rhs) { return *this = *this + rhs; }

 private:
  std::int64_t ns_ = 0;
};

/// Seconds with 9 decimal places, the fixed textual form used by every CSV.
std::string format_seconds(SimTime t);
std::string format_seconds(double seconds);

}  // namespace cpn
