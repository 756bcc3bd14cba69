#pragma once

// Monte Carlo estimators for the supremum and hole-probability asymptotics of
// the CGFF, the lattice-box embedding used for the log-correlated comparison,
// and statistics of the low-frequency band.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cgff/capacity.hpp"
#include "cgff/field.hpp"
#include "cgff/spectra.hpp"

namespace cgff {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// sqrt(2/pi), the leading supremum constant.
double sup_constant() noexcept;

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided 95% Wilson score interval for hits out of n.
ConfidenceInterval wilson_interval(std::size_t hits, std::size_t n, double z = 1.959963984540054);

enum class EstimatorMethod { plain, importance };

std::string to_string(EstimatorMethod m);

struct TailEstimate {
  std::string event;
  double L = 0.0;
  std::size_t samples = 0;
  double estimate = 0.0;
  ConfidenceInterval ci;
  double standard_error = 0.0;
  /// ln(estimate) / ln(sqrt(L))^2; NaN when the estimate is 0.
  double log_rescaled = kNaN;
  EstimatorMethod method = EstimatorMethod::plain;
  std::size_t hits = 0;
  /// Importance: (sum Y)^2 / sum Y^2 over the weighted indicators Y.
  double effective_sample_size = kNaN;
  /// Importance: sample mean of the likelihood ratio and its standard error.
  double weight_mean = kNaN;
  double weight_standard_error = kNaN;
  /// Plain with no hits: the interval is one-sided [0, upper].
  bool one_sided = false;
  /// Plain with no hits: importance sampling is needed at this L.
  bool use_importance = false;
  /// Importance with ESS below the floor: relative error floored at 1/sqrt(ESS).
  bool ess_floor_applied = false;
  /// Supremum runs: median of sup / ln sqrt(L) and of sup.
  double median_sup_ratio = kNaN;
  double median_sup = kNaN;
  int resolution = 0;
};

struct MonteCarloOptions {
  int threads = 1;
  /// 0 selects the default for the estimator.
  int resolution = 0;
};

/// P(max over grid nodes of phi_L > threshold), plain Monte Carlo over
/// replicate seeds derived from `seed`.
TailEstimate estimate_sup_tail(const SurfaceModel& model, double L, double threshold, std::size_t n,
                               std::uint64_t seed, const MonteCarloOptions& options = {});

/// Per-replicate grid maxima (as used by estimate_sup_tail).
std::vector<double> sample_suprema(const SurfaceModel& model, double L, std::size_t n, std::uint64_t seed,
                                   const MonteCarloOptions& options = {}, bool minima = false);

/// Smallest resolution accepted for hole runs: 4x the Nyquist resolution.
int hole_resolution(const SurfaceModel& model, double L);

/// c_n = sqrt(lambda_n) <h, psi_n> over the sampler's band: the coordinates
/// of the projection of h onto U_L in the basis psi_n / sqrt(lambda_n).
std::vector<double> project_to_band(const CgffSampler& sampler, const Grid& h);

struct HoleOptions {
  EstimatorMethod method = EstimatorMethod::plain;
  int threads = 1;
  /// Importance shift direction on the mask grid; if absent the capacity
  /// minimizer of the mask is computed.
  std::optional<Grid> shift;
  /// Shift magnitude; NaN selects sqrt(2/pi) ln sqrt(L).
  double t = kNaN;
  SolverOptions capacity;
};

/// P(phi_L > 0 at every D node of the mask). The mask grid is the sampling
/// grid and must be at least hole_resolution(model, L).
TailEstimate estimate_hole_probability(const SurfaceModel& model, double L, const DomainMask& mask,
                                       std::size_t n, std::uint64_t seed, const HoleOptions& options = {});

struct LatticePoint {
  int x = 0;
  int y = 0;
};

struct RatioCheck {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t pairs_checked = 0;
  bool exhaustive = false;
};

/// x -> origin + (delta / sqrt(L)) x on the box {0..M-1}^2, M = floor(L^((1-alpha)/2)).
struct BoxEmbedding {
  SurfaceModel model;
  double delta = 0.0;
  double alpha = 0.0;
  double L = 0.0;
  int side = 0;
  Point origin;
  double spacing = 0.0;
  RatioCheck check;

  Point map(LatticePoint x) const;
};

/// Builds the embedding and verifies delta/2 <= sqrt(L) d(i(x),i(y)) / |x-y| <= 2 delta,
/// exhaustively for side <= 64 and on 10^4 random pairs beyond. The default
/// origin centres the box in the fundamental domain.
BoxEmbedding embed_box(const SurfaceModel& model, double delta, double alpha, double L,
                       std::optional<Point> origin = std::nullopt, std::uint64_t check_seed = 0);

struct LogCorrelationRow {
  LatticePoint x;
  LatticePoint y;
  double lattice_distance = 0.0;
  double covariance = 0.0;
  double predicted = 0.0;  ///< ((1-alpha)/2pi) ln sqrt(L) - (1/2pi) ln+|x-y|
  double residual = 0.0;   ///< |covariance - predicted|
  /// alpha = 0 only: |2pi cov - ln sqrt(L) + ln+|x-y||; NaN otherwise.
  double rescaled_residual = kNaN;
};

struct LogCorrelationReport {
  std::vector<LogCorrelationRow> rows;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double max_rescaled_residual = kNaN;
};

/// Exact band covariance of the (L^alpha, L] field (alpha = 0: the full
/// field) at embedded lattice pairs, compared with the log-correlated form.
LogCorrelationReport check_log_correlated(const SurfaceModel& model, double L, double alpha,
                                          const BoxEmbedding& embedding,
                                          const std::vector<std::pair<LatticePoint, LatticePoint>>& pairs);

/// `count` lattice pairs drawn uniformly from the embedding's box (the
/// first pair is always a diagonal pair x = y).
std::vector<std::pair<LatticePoint, LatticePoint>> random_lattice_pairs(const BoxEmbedding& embedding,
                                                                        std::size_t count,
                                                                        std::uint64_t seed);

/// Cell area of D nodes where the low band lies below (sqrt(2/pi) - eta) ln sqrt(L).
double low_point_area(const FieldSample& low, const DomainMask& mask, double eta, double L);

/// max |phi(p) - phi(q)| over grid nodes with d(p,q) <= delta L^(-alpha/2).
/// Rejects grids with spacing above L^(-alpha/2) / 2.
double modulus_of_continuity(const FieldSample& low, double delta, double alpha, double L);

/// Least-squares slope and intercept of y against x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

}  // namespace cgff
