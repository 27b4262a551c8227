#ifndef RPML_RNG_HPP_
#define RPML_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace rpml {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded generator with derivable substreams. Every draw goes through the
// helpers below rather than <random> distributions, whose output is not
// pinned down by the standard; this keeps results identical across
// toolchains and independent of evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    // Independent stream for (seed, stream); used to make parallel or
    // per-item generation order-independent.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(seed ^ splitmix64(stream + 0x51ed2701a4d5e6f3ULL)));
    }

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n); Lemire multiply-shift, bias < 2^-64
    int next_index(int n) {
        const unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * static_cast<std::uint64_t>(n);
        return static_cast<int>(m >> 64);
    }

    // standard normal via Box-Muller
    double next_gaussian() {
        const double u1 = 1.0 - next_double(); // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = next_index(i + 1);
            std::swap(v[i], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace rpml

#endif // RPML_RNG_HPP_
