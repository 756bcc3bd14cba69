#pragma once

// Sampling of the cut-off Gaussian Free Field
//
//   phi_L = sum_{0 < lambda_n <= L} xi_n / sqrt(lambda_n) * psi_n,
//
// its split into spectral bands, the discrete GFF on a lattice box, and the
// Cameron-Martin shift used for importance sampling.
//
// xi_n is drawn from the counter RNG keyed by (seed, n) where n is the
// ordinal of the eigenpair in the SpectralBasis order. A band (lo, hi]
// therefore always reuses the same coefficients as the full field.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cgff/grid.hpp"
#include "cgff/spectra.hpp"

namespace cgff {

/// Eigenvalue band (lower, upper]; lower >= 0.
struct SpectralBand {
  double lower = 0.0;
  double upper = 0.0;
};

/// Smallest power-of-two resolution whose grid resolves every frequency with
/// eigenvalue <= L without aliasing (|k| < N/2 on the torus, m < N on the
/// rectangle).
int nyquist_resolution(const SurfaceModel& model, double L);

/// Throws if `resolution` is not a power of two or under-resolves the band,
/// naming the smallest acceptable resolution.
void require_resolution(const SurfaceModel& model, double L, int resolution);

/// Fast trigonometric synthesis/analysis on a fixed grid: periodic real FFT
/// on the torus, type-I sine transform on the rectangle. Immutable after
/// construction; synthesize/analyze may be called concurrently.
class SpectralSynthesizer {
 public:
  SpectralSynthesizer(const SurfaceModel& model, int resolution);
  ~SpectralSynthesizer();
  SpectralSynthesizer(SpectralSynthesizer&&) noexcept;
  SpectralSynthesizer& operator=(SpectralSynthesizer&&) noexcept;
  SpectralSynthesizer(const SpectralSynthesizer&) = delete;
  SpectralSynthesizer& operator=(const SpectralSynthesizer&) = delete;

  const GridGeometry& geometry() const noexcept;

  /// Grid values of sum_n amplitudes[n] * psi_n.
  Grid synthesize(std::span<const EigenPair> pairs, std::span<const double> amplitudes) const;

  /// Point-quadrature inner products <psi_n, f> (cell area times the nodal
  /// sum), exact for trigonometric polynomials resolved by the grid.
  std::vector<double> analyze(std::span<const EigenPair> pairs, const Grid& f) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One realization of a band-limited Gaussian field on a grid.
struct FieldSample {
  SpectralBand band;
  std::uint64_t seed = 0;
  Grid grid;
  /// Ordinal (in the SpectralBasis order) of the first eigenpair of the band.
  std::size_t first_ordinal = 0;
  /// xi_n for the band's eigenpairs in basis order; empty unless retained.
  std::vector<double> coefficients;

  const SurfaceModel& model() const noexcept { return grid.geometry().model(); }
  int resolution() const noexcept { return grid.geometry().resolution(); }
};

/// Reusable sampler for one (model, band, resolution). Thread-safe.
class CgffSampler {
 public:
  CgffSampler(const SurfaceModel& model, SpectralBand band, int resolution);
  CgffSampler(std::shared_ptr<const SpectralBasis> basis, SpectralBand band, int resolution);

  const SpectralBasis& basis() const noexcept { return *basis_; }
  std::shared_ptr<const SpectralBasis> shared_basis() const noexcept { return basis_; }
  const SpectralSynthesizer& synthesizer() const noexcept { return synth_; }
  SpectralBand band() const noexcept { return band_; }
  std::size_t first() const noexcept { return first_; }
  std::size_t last() const noexcept { return last_; }
  std::size_t size() const noexcept { return last_ - first_; }
  std::span<const EigenPair> band_pairs() const noexcept;

  FieldSample sample(std::uint64_t seed, bool retain_coefficients = true) const;

  /// Synthesizes sum_n coefficients[n] / sqrt(lambda_n) * psi_n over the band.
  Grid synthesize(std::span<const double> coefficients) const;

  /// Fills xi for the band from the counter RNG.
  void draw_coefficients(std::uint64_t seed, std::span<double> xi) const;

 private:
  std::shared_ptr<const SpectralBasis> basis_;
  SpectralBand band_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  SpectralSynthesizer synth_;
};

FieldSample sample_cgff(const SurfaceModel& model, double L, std::uint64_t seed, int resolution);

struct TwoScaleSample {
  FieldSample low;   ///< band (0, L^alpha]
  FieldSample high;  ///< band (L^alpha, L]
};

TwoScaleSample sample_two_scale(const SurfaceModel& model, double L, double alpha,
                                std::uint64_t seed, int resolution);

/// Discrete GFF on the box {0..N-1}^2 with zero boundary values, covariance
/// the inverse of the unit-conductance 4-neighbour Dirichlet Laplacian.
struct DgffSample {
  int N = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  ///< N*N, row-major, value(i,j) = values[j*N+i]

  double at(int i, int j) const noexcept { return values[std::size_t(j) * N + i]; }
};

class DgffSampler {
 public:
  explicit DgffSampler(int N);
  ~DgffSampler();
  DgffSampler(DgffSampler&&) noexcept;
  DgffSampler& operator=(DgffSampler&&) noexcept;

  int size() const noexcept { return N_; }
  std::size_t mode_count() const noexcept { return std::size_t(N_ - 2) * (N_ - 2); }

  /// Field from (N-2)^2 mode coefficients ordered (a, b) -> (b-1)*(N-2) + (a-1).
  std::vector<double> synthesize(std::span<const double> modes) const;
  DgffSample sample(std::uint64_t seed) const;

 private:
  struct Impl;
  int N_;
  std::unique_ptr<Impl> impl_;
};

DgffSample sample_dgff(int N, std::uint64_t seed);

/// h = sum_n c_n psi_n / sqrt(lambda_n) over a sampler's band, with its grid.
struct ShiftDirection {
  std::vector<double> coefficients;
  Grid grid;
};

ShiftDirection make_shift_direction(const CgffSampler& sampler, std::vector<double> coefficients);

struct ShiftedSample {
  FieldSample sample;
  double log_weight = 0.0;
};

/// sample + t*h, with log density ratio -t*sum c_n xi_n - t^2 |c|^2 / 2 so
/// that E[w * F(shifted)] = E[F(original)].
ShiftedSample shift_field(const FieldSample& sample, const ShiftDirection& h, double t);

/// Convenience overload that synthesizes h itself.
ShiftedSample shift_field(const FieldSample& sample, std::span<const double> h_coefficients, double t);

}  // namespace cgff
