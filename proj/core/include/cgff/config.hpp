#pragma once

// Plain-text run configuration (key=value lines, '#' comments) and the
// dispatcher that runs one configured experiment.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgff/capacity.hpp"
#include "cgff/error.hpp"
#include "cgff/experiments.hpp"
#include "cgff/spectra.hpp"

namespace cgff {

enum class Subcommand { sample, kernel, capacity, sup_tail, hole, embed_check };

std::string to_string(Subcommand s);

struct ConfigDiagnostic {
  int line = 0;  ///< 1-based; 0 for whole-file problems
  std::string key;
  std::string message;
};

/// All problems found in a config, reported together.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigDiagnostic> diagnostics);
  const std::vector<ConfigDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<ConfigDiagnostic> diagnostics_;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::sample;
  SurfaceModel model = SurfaceModel::torus();
  std::vector<double> L_grid;  ///< `L` yields a single entry
  std::optional<double> alpha;
  /// Shapes in relative units (x by side_x, y by side_y, radii by the smaller side).
  std::vector<Shape> mask;
  std::vector<Shape> outer;  ///< nodes outside are held at zero (rectangle)
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  int resolution = 0;  ///< 0: subcommand default
  EstimatorMethod method = EstimatorMethod::plain;
  double threshold = 0.0;
  std::size_t pairs = 200;
  double delta = 0.3;
  double tol = 1e-8;
  int max_sweeps = 100000;
  std::string output = "cgff";
  /// Results CSV; empty selects <out>/<subcommand>_results.csv.
  std::string results;
  /// key=value lines after defaults and overrides, sorted by key.
  std::string canonical;

  double L() const { return L_grid.front(); }
  std::uint64_t hash() const noexcept;
};

/// Parses and validates; throws ConfigError listing every problem.
RunConfig parse_config(std::string_view text);

/// Converts relative shapes to absolute coordinates on the model.
std::vector<Shape> absolute_shapes(const SurfaceModel& model, const std::vector<Shape>& relative);

struct RunContext {
  int threads = 1;
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed_override;
};

/// Applies the seed override (refreshing the canonical text and hash).
RunConfig with_seed(RunConfig config, std::uint64_t seed);

/// Runs the configured subcommand, writes its artifacts under out_dir and
/// prints one summary line to `log`. Returns the process exit status.
int run(const RunConfig& config, const RunContext& context, std::ostream& log);

}  // namespace cgff
