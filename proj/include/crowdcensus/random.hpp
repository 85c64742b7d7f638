#pragma once

#include <cstdint>

namespace crowdcensus {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream seed for item `index` of a run seeded with `base`, so
/// parallel work produces the same numbers as serial work.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t s = base ^ (index * 0xd1b54a32d192ed03ULL);
  splitmix64(s);
  return splitmix64(s);
}

}  // namespace crowdcensus
