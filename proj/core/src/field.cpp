#include "cgff/field.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "cgff/error.hpp"
#include "cgff/rng.hpp"
#include "fftw_support.hpp"

namespace cgff {

namespace detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

namespace {

using detail::fftw_array;
using detail::FftwPlan;

const SurfaceModel& validated_model(const SpectralBasis& basis, SpectralBand band, int resolution);

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(std::int64_t n) {
  std::int64_t p = 1;
  while (p < n) p <<= 1;
  if (p > (std::int64_t{1} << 30)) throw Error("field-engine", "required resolution overflows");
  return static_cast<int>(p);
}

// Smallest admissible node count per axis (before rounding to a power of two).
std::int64_t minimum_resolution(const SurfaceModel& model, double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw Error("field-engine", "cutoff L must be finite and > 0");
  const std::int64_t kx = snapped_floor(std::sqrt(L) / model.wavenumber_x());
  const std::int64_t ky = snapped_floor(std::sqrt(L) / model.wavenumber_y());
  const std::int64_t k = std::max(kx, ky);
  return model.has_boundary() ? k + 1 : 2 * k + 1;
}

}  // namespace

int nyquist_resolution(const SurfaceModel& model, double L) {
  return next_power_of_two(std::max<std::int64_t>(2, minimum_resolution(model, L)));
}

void require_resolution(const SurfaceModel& model, double L, int resolution) {
  const int suggestion = nyquist_resolution(model, L);
  if (!is_power_of_two(resolution) || resolution < 2) {
    throw Error("field-engine", "resolution " + std::to_string(resolution) +
                                    " is not a power of two >= 2; use " + std::to_string(suggestion));
  }
  if (resolution < minimum_resolution(model, L)) {
    throw Error("field-engine", "resolution " + std::to_string(resolution) +
                                    " aliases frequencies of the band up to L=" + std::to_string(L) +
                                    "; use resolution >= " + std::to_string(suggestion));
  }
}

// ---------------------------------------------------------------------------
// SpectralSynthesizer

struct SpectralSynthesizer::Impl {
  GridGeometry geometry;
  int n0 = 0;  // transform rows (y)
  int n1 = 0;  // transform columns (x)
  std::size_t spectrum_size = 0;
  std::size_t signal_size = 0;
  FftwPlan backward;
  FftwPlan forward;

  explicit Impl(const GridGeometry& g) : geometry(g) {
    const int N = g.resolution();
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (g.periodic()) {
      n0 = N;
      n1 = N;
      spectrum_size = std::size_t(n0) * (n1 / 2 + 1);
      signal_size = std::size_t(n0) * n1;
      auto spec = fftw_array<fftw_complex>(spectrum_size);
      auto sig = fftw_array<double>(signal_size);
      backward = FftwPlan(fftw_plan_dft_c2r_2d(n0, n1, spec.get(), sig.get(), FFTW_ESTIMATE));
      forward = FftwPlan(fftw_plan_dft_r2c_2d(n0, n1, sig.get(), spec.get(), FFTW_ESTIMATE));
    } else {
      n0 = N - 1;
      n1 = N - 1;
      spectrum_size = std::size_t(n0) * n1;
      signal_size = spectrum_size;
      auto a = fftw_array<double>(spectrum_size);
      auto b = fftw_array<double>(signal_size);
      backward = FftwPlan(
          fftw_plan_r2r_2d(n0, n1, a.get(), b.get(), FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE));
    }
    if (backward.get() == nullptr || (g.periodic() && forward.get() == nullptr)) {
      throw Error("field-engine", "FFTW planning failed");
    }
  }

  void check_pair(const EigenPair& p) const {
    const int N = geometry.resolution();
    const bool ok = geometry.periodic() ? (2 * std::abs(p.k1) < N && 2 * std::abs(p.k2) < N)
                                        : (p.k1 >= 1 && p.k2 >= 1 && p.k1 < N && p.k2 < N);
    if (!ok) {
      throw Error("field-engine", "eigenpair (" + std::to_string(p.k1) + "," + std::to_string(p.k2) +
                                      ") is not resolved at resolution " + std::to_string(N));
    }
  }
};

SpectralSynthesizer::SpectralSynthesizer(const SurfaceModel& model, int resolution)
    : impl_(std::make_unique<Impl>(GridGeometry(model, resolution))) {}

SpectralSynthesizer::~SpectralSynthesizer() = default;
SpectralSynthesizer::SpectralSynthesizer(SpectralSynthesizer&&) noexcept = default;
SpectralSynthesizer& SpectralSynthesizer::operator=(SpectralSynthesizer&&) noexcept = default;

const GridGeometry& SpectralSynthesizer::geometry() const noexcept { return impl_->geometry; }

Grid SpectralSynthesizer::synthesize(std::span<const EigenPair> pairs,
                                     std::span<const double> amplitudes) const {
  if (pairs.size() != amplitudes.size()) {
    throw Error("field-engine", "amplitude count does not match eigenpair count");
  }
  const Impl& m = *impl_;
  Grid out(m.geometry);
  if (pairs.empty()) return out;

  if (m.geometry.periodic()) {
    const int N = m.n0;
    const int half = m.n1 / 2 + 1;
    auto spec = fftw_array<fftw_complex>(m.spectrum_size);
    auto sig = fftw_array<double>(m.signal_size);
    auto* X = reinterpret_cast<std::complex<double>*>(spec.get());
    std::fill(X, X + m.spectrum_size, std::complex<double>{});
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      const EigenPair& p = pairs[n];
      m.check_pair(p);
      const double a = p.norm * amplitudes[n];
      const std::complex<double> c =
          p.parity == Parity::cosine ? std::complex<double>(a, 0.0) : std::complex<double>(0.0, -a);
      const int row = ((p.k2 % N) + N) % N;
      X[std::size_t(row) * half + p.k1] += 0.5 * c;
      if (p.k1 == 0) X[std::size_t((N - row) % N) * half] += 0.5 * std::conj(c);
    }
    fftw_execute_dft_c2r(m.backward.get(), spec.get(), sig.get());
    std::copy(sig.get(), sig.get() + m.signal_size, out.values().begin());
    return out;
  }

  const int n = m.n1;
  auto X = fftw_array<double>(m.spectrum_size);
  auto Y = fftw_array<double>(m.signal_size);
  std::fill(X.get(), X.get() + m.spectrum_size, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const EigenPair& p = pairs[k];
    m.check_pair(p);
    X[std::size_t(p.k2 - 1) * n + (p.k1 - 1)] += 0.25 * p.norm * amplitudes[k];
  }
  fftw_execute_r2r(m.backward.get(), X.get(), Y.get());
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) out.at(i, j) = Y[std::size_t(j - 1) * n + (i - 1)];
  }
  return out;
}

std::vector<double> SpectralSynthesizer::analyze(std::span<const EigenPair> pairs, const Grid& f) const {
  const Impl& m = *impl_;
  if (!(f.geometry() == m.geometry)) throw Error("field-engine", "grid does not match synthesizer");
  std::vector<double> out(pairs.size());
  if (pairs.empty()) return out;
  const double w = m.geometry.cell_area();

  if (m.geometry.periodic()) {
    const int N = m.n0;
    const int half = m.n1 / 2 + 1;
    auto sig = fftw_array<double>(m.signal_size);
    auto spec = fftw_array<fftw_complex>(m.spectrum_size);
    std::copy(f.values().begin(), f.values().end(), sig.get());
    fftw_execute_dft_r2c(m.forward.get(), sig.get(), spec.get());
    const auto* F = reinterpret_cast<const std::complex<double>*>(spec.get());
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      const EigenPair& p = pairs[n];
      m.check_pair(p);
      const int row = ((p.k2 % N) + N) % N;
      const std::complex<double> v = F[std::size_t(row) * half + p.k1];
      out[n] = w * p.norm * (p.parity == Parity::cosine ? v.real() : -v.imag());
    }
    return out;
  }

  const int n = m.n1;
  auto X = fftw_array<double>(m.signal_size);
  auto Y = fftw_array<double>(m.spectrum_size);
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) X[std::size_t(j - 1) * n + (i - 1)] = f.at(i, j);
  }
  fftw_execute_r2r(m.backward.get(), X.get(), Y.get());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const EigenPair& p = pairs[k];
    m.check_pair(p);
    out[k] = w * p.norm * 0.25 * Y[std::size_t(p.k2 - 1) * n + (p.k1 - 1)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// CgffSampler

namespace {

const SurfaceModel& validated_model(const SpectralBasis& basis, SpectralBand band, int resolution) {
  if (!(band.lower >= 0.0) || !(band.upper > band.lower)) {
    throw Error("field-engine", "band must satisfy 0 <= lower < upper");
  }
  if (basis.cutoff() < band.upper) throw Error("field-engine", "basis cutoff is below the band's upper edge");
  require_resolution(basis.model(), band.upper, resolution);
  return basis.model();
}

}  // namespace

CgffSampler::CgffSampler(const SurfaceModel& model, SpectralBand band, int resolution)
    : CgffSampler(std::make_shared<const SpectralBasis>(enumerate_eigenpairs(model, band.upper)), band,
                  resolution) {}

CgffSampler::CgffSampler(std::shared_ptr<const SpectralBasis> basis, SpectralBand band, int resolution)
    : basis_(std::move(basis)),
      band_(band),
      synth_(validated_model(*basis_, band, resolution), resolution) {
  first_ = basis_->count_at_most(band.lower);
  last_ = basis_->count_at_most(band.upper);
}

std::span<const EigenPair> CgffSampler::band_pairs() const noexcept {
  return basis_->pairs().subspan(first_, last_ - first_);
}

void CgffSampler::draw_coefficients(std::uint64_t seed, std::span<double> xi) const {
  if (xi.size() != size()) throw Error("field-engine", "coefficient buffer has the wrong length");
  fill_standard_normals(seed, Stream::spectral_coefficients, first_, xi);
}

Grid CgffSampler::synthesize(std::span<const double> coefficients) const {
  if (coefficients.size() != size()) {
    throw Error("field-engine", "coefficient vector length " + std::to_string(coefficients.size()) +
                                    " does not match band size " + std::to_string(size()));
  }
  const auto pairs = band_pairs();
  std::vector<double> amp(pairs.size());
  for (std::size_t n = 0; n < pairs.size(); ++n) amp[n] = coefficients[n] / std::sqrt(pairs[n].lambda);
  return synth_.synthesize(pairs, amp);
}

FieldSample CgffSampler::sample(std::uint64_t seed, bool retain_coefficients) const {
  std::vector<double> xi(size());
  draw_coefficients(seed, xi);
  Grid g = synthesize(xi);
  FieldSample s{band_, seed, std::move(g), first_, {}};
  if (retain_coefficients) s.coefficients = std::move(xi);
  return s;
}

FieldSample sample_cgff(const SurfaceModel& model, double L, std::uint64_t seed, int resolution) {
  return CgffSampler(model, {0.0, L}, resolution).sample(seed);
}

TwoScaleSample sample_two_scale(const SurfaceModel& model, double L, double alpha, std::uint64_t seed,
                                int resolution) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("field-engine", "alpha must lie in (0,1)");
  if (!(L > 1.0)) throw Error("field-engine", "two-scale split needs L > 1");
  auto basis = std::make_shared<const SpectralBasis>(enumerate_eigenpairs(model, L));
  const double split = std::pow(L, alpha);
  CgffSampler low(basis, {0.0, split}, resolution);
  CgffSampler high(basis, {split, L}, resolution);
  return {low.sample(seed), high.sample(seed)};
}

// ---------------------------------------------------------------------------
// DGFF

struct DgffSampler::Impl {
  int n = 0;
  std::vector<double> scale;  // (2/(n+1)) / (4 sqrt(mu)) per mode
  FftwPlan plan;
};

DgffSampler::DgffSampler(int N) : N_(N), impl_(std::make_unique<Impl>()) {
  if (N < 3) throw Error("field-engine", "DGFF box size must be >= 3 (got " + std::to_string(N) + ")");
  const int n = N - 2;
  impl_->n = n;
  impl_->scale.resize(std::size_t(n) * n);
  const double pi = std::numbers::pi;
  for (int b = 1; b <= n; ++b) {
    for (int a = 1; a <= n; ++a) {
      const double mu = 4.0 - 2.0 * std::cos(pi * a / (n + 1)) - 2.0 * std::cos(pi * b / (n + 1));
      impl_->scale[std::size_t(b - 1) * n + (a - 1)] = (2.0 / (n + 1)) / (4.0 * std::sqrt(mu));
    }
  }
  auto x = fftw_array<double>(std::size_t(n) * n);
  auto y = fftw_array<double>(std::size_t(n) * n);
  std::lock_guard lock(detail::fftw_planner_mutex());
  impl_->plan =
      FftwPlan(fftw_plan_r2r_2d(n, n, x.get(), y.get(), FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE));
  if (impl_->plan.get() == nullptr) throw Error("field-engine", "FFTW planning failed");
}

DgffSampler::~DgffSampler() = default;
DgffSampler::DgffSampler(DgffSampler&&) noexcept = default;
DgffSampler& DgffSampler::operator=(DgffSampler&&) noexcept = default;

std::vector<double> DgffSampler::synthesize(std::span<const double> modes) const {
  if (modes.size() != mode_count()) throw Error("field-engine", "DGFF mode vector has the wrong length");
  const int n = impl_->n;
  const std::size_t m = mode_count();
  auto x = fftw_array<double>(m);
  auto y = fftw_array<double>(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = modes[k] * impl_->scale[k];
  fftw_execute_r2r(impl_->plan.get(), x.get(), y.get());
  std::vector<double> values(std::size_t(N_) * N_, 0.0);
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) values[std::size_t(j) * N_ + i] = y[std::size_t(j - 1) * n + (i - 1)];
  }
  return values;
}

DgffSample DgffSampler::sample(std::uint64_t seed) const {
  std::vector<double> xi(mode_count());
  fill_standard_normals(seed, Stream::dgff_modes, 0, xi);
  return {N_, seed, synthesize(xi)};
}

DgffSample sample_dgff(int N, std::uint64_t seed) { return DgffSampler(N).sample(seed); }

// ---------------------------------------------------------------------------
// Cameron-Martin shift

ShiftDirection make_shift_direction(const CgffSampler& sampler, std::vector<double> coefficients) {
  Grid g = sampler.synthesize(coefficients);
  return {std::move(coefficients), std::move(g)};
}

ShiftedSample shift_field(const FieldSample& sample, const ShiftDirection& h, double t) {
  if (!std::isfinite(t)) throw Error("field-engine", "shift magnitude must be finite");
  if (sample.coefficients.empty() && !h.coefficients.empty()) {
    throw Error("field-engine", "sample was drawn without retained coefficients");
  }
  if (h.coefficients.size() != sample.coefficients.size()) {
    throw Error("field-engine", "shift has " + std::to_string(h.coefficients.size()) +
                                    " coefficients but the band has " +
                                    std::to_string(sample.coefficients.size()));
  }
  if (!(h.grid.geometry() == sample.grid.geometry())) {
    throw Error("field-engine", "shift direction grid does not match the sample grid");
  }
  ShiftedSample out{sample, 0.0};
  double dot = 0.0;
  double norm2 = 0.0;
  for (std::size_t n = 0; n < h.coefficients.size(); ++n) {
    const double c = h.coefficients[n];
    dot += c * sample.coefficients[n];
    norm2 += c * c;
    out.sample.coefficients[n] += t * c;
  }
  auto dst = out.sample.grid.values();
  const auto src = h.grid.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += t * src[i];
  out.log_weight = -t * dot - 0.5 * t * t * norm2;
  return out;
}

ShiftedSample shift_field(const FieldSample& sample, std::span<const double> h_coefficients, double t) {
  const CgffSampler sampler(sample.model(), sample.band, sample.resolution());
  return shift_field(sample, make_shift_direction(sampler, {h_coefficients.begin(), h_coefficients.end()}),
                     t);
}

}  // namespace cgff
