#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ope {

// Counter-mode generator built on the splitmix64 finalizer. Every draw is
// value(key, counter), so streams are stateless functions of their key and
// replay identically regardless of platform or thread count.
//
// Stream layout used throughout the library:
//   key = derive_key(seed, {replication, purpose[, extra...]})
// with purpose constants from rng_purpose below. Distinct (replication,
// purpose) pairs give independent streams.
std::uint64_t mix64(std::uint64_t z) noexcept;

namespace rng_purpose {
inline constexpr std::uint64_t kContext = 1;
inline constexpr std::uint64_t kArm = 2;
inline constexpr std::uint64_t kReward = 3;
inline constexpr std::uint64_t kInitOrder = 4;
inline constexpr std::uint64_t kTargetRollout = 5;
inline constexpr std::uint64_t kTable = 6;
}  // namespace rng_purpose

class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) noexcept : key_(key) {}

  static std::uint64_t derive_key(std::uint64_t seed,
                                  std::span<const std::uint64_t> path) noexcept;
  static StreamRng substream(std::uint64_t seed, std::uint64_t replication,
                             std::uint64_t purpose) noexcept;

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(++counter_)); }

  // Uniform on the open interval (0, 1); usable with inverse-CDF transforms.
  double next_unit() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via the inverse CDF, so replay does not depend on the
  // platform's transcendental-function implementations beyond exp/log/erfc.
  double next_normal() noexcept;

  // Uniform index in [0, n). n must be positive.
  int next_index(int n) noexcept;

  // Draws an index from a discrete distribution given by nonnegative weights
  // summing to ~1; walks cumulative mass in index order.
  int next_categorical(std::span<const double> probs) noexcept;

  std::vector<int> shuffled_indices(int n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ope
