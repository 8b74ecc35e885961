#include "ope/rng.hpp"

#include "ope/stats.hpp"

namespace ope {

std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t StreamRng::derive_key(std::uint64_t seed,
                                    std::span<const std::uint64_t> path) noexcept {
  std::uint64_t key = mix64(seed);
  for (std::uint64_t component : path) {
    key = mix64(key ^ mix64(component));
  }
  return key;
}

StreamRng StreamRng::substream(std::uint64_t seed, std::uint64_t replication,
                               std::uint64_t purpose) noexcept {
  const std::uint64_t path[2] = {replication, purpose};
  return StreamRng(derive_key(seed, path));
}

double StreamRng::next_normal() noexcept { return normal_quantile(next_unit()); }

int StreamRng::next_index(int n) noexcept {
  double u = next_unit();
  int idx = static_cast<int>(u * static_cast<double>(n));
  return idx < n ? idx : n - 1;
}

int StreamRng::next_categorical(std::span<const double> probs) noexcept {
  double u = next_unit();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::vector<int> StreamRng::shuffled_indices(int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = next_index(i + 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

}  // namespace ope
