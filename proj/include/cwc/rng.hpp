#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cwc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

/// Derives an independent seed for a named sub-stream (and optional index) of
/// a master seed, so every subsystem draws from its own reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
	std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
	for (unsigned char c : stream) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return splitmix64(splitmix64(master ^ h) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
	return Rng(derive_seed(master, stream, index));
}

// The standard distributions are implementation-defined; these are not, so
// seeded runs reproduce across standard libraries.

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) {
	return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
	return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller.
inline double gaussian(Rng& rng) {
	double u1 = uniform01(rng);
	while (u1 <= 0.0)
		u1 = uniform01(rng);
	const double u2 = uniform01(rng);
	return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Uniform integer in [0, count).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t count) {
	return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(count)) % count;
}

} // namespace cwc
