#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace conceptscope {

using Rng = std::mt19937_64;

// Derives an independent seed for a named substream ("data", "train", ...).
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
    return Rng(substream_seed(root, name));
}

std::size_t uniform_index(Rng & rng, std::size_t n);

// k distinct indices from [0, n), in sampling order.
std::vector<std::size_t> sample_without_replacement(Rng & rng, std::size_t n, std::size_t k);

template <typename T>
void shuffle_in_place(Rng & rng, std::vector<T> & v) {
    // Fisher-Yates with uniform_index so the order only depends on the engine.
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
    }
}

} // namespace conceptscope
