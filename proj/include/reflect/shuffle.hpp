#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace reflect {

// mt19937_64 with its own bounded draw and Fisher-Yates walk, identical across standard libraries.
class StableRng {
  public:
    explicit StableRng(std::uint64_t seed) : engine_(seed) {}

    // Uniform integer in [0, bound). `bound` must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace reflect
