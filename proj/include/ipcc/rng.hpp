#pragma once

// Counter-based random streams (Philox4x32-10) with hierarchical splitting:
// a stream is identified by a root seed plus a path of integers
// (e.g. scenario -> replication -> purpose), so every draw is a pure
// function of its identity regardless of thread scheduling.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace ipcc {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

  // Independent child stream; the parent is unaffected.
  RandomStream child(std::uint64_t id) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  // Index drawn from cumulative (unnormalised, nondecreasing) weights.
  std::size_t pick(const std::vector<double>& cumulative);

 private:
  RandomStream(std::uint64_t key, int);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  PhiloxBlock buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace ipcc
