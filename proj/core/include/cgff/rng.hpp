#pragma once

// Counter-based random numbers. Every Gaussian coefficient is a pure
// function of (seed, stream, ordinal), so spectral bands are independent
// sub-streams and results never depend on worker count or call order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace cgff {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Sub-streams keyed under the same seed.
enum class Stream : std::uint32_t {
  spectral_coefficients = 0,
  dgff_modes = 1,
  auxiliary = 2,
};

/// Standard normal for (seed, stream, ordinal), by Box-Muller on two 53-bit
/// uniforms in (0,1) taken from one Philox block (cosine branch only).
double standard_normal(std::uint64_t seed, Stream stream, std::uint64_t ordinal) noexcept;

/// Uniform in (0,1) for (seed, stream, ordinal).
double uniform_open(std::uint64_t seed, Stream stream, std::uint64_t ordinal) noexcept;

/// Fills out[i] = standard_normal(seed, stream, first + i).
void fill_standard_normals(std::uint64_t seed, Stream stream, std::uint64_t first,
                           std::span<double> out) noexcept;

/// Seed of the i-th Monte Carlo replicate under a run seed (splitmix64 mix).
std::uint64_t replicate_seed(std::uint64_t run_seed, std::uint64_t index) noexcept;

}  // namespace cgff
