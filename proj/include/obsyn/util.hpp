#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace obsyn {

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

/// Runs fn(i) for i in [0, n) across nthreads workers. Work items write to
/// disjoint indexed slots, so results are identical for any thread count.
void parallel_for(std::size_t n, unsigned nthreads,
                  const std::function<void(std::size_t)>& fn);

} // namespace obsyn
