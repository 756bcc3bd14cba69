#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "cgff/config.hpp"
#include "cgff/io.hpp"

using namespace cgff;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("CGFF_TEST_TMP");
  fs::path p = fs::path(base ? base : fs::temp_directory_path().string()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    out.push_back(l);
  }
  return out;
}

std::vector<ConfigDiagnostic> diagnostics_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.diagnostics();
  }
  return {};
}

bool has_message(const std::vector<ConfigDiagnostic>& d, std::string_view key, std::string_view needle) {
  for (const auto& x : d) {
    if (x.key == key && x.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

int run_quiet(const RunConfig& c, const fs::path& dir) {
  RunContext ctx;
  ctx.out_dir = dir;
  std::ostringstream log;
  return run(c, ctx, log);
}

}  // namespace

TEST_CASE("minimal sample config takes the defaults") {
  const RunConfig c = parse_config("subcommand = sample\nmodel = torus\nL = 100\n");
  CHECK(c.subcommand == Subcommand::sample);
  CHECK(c.model.side_x() == doctest::Approx(2 * kPi));
  CHECK(c.L() == 100.0);
  CHECK(c.resolution == nyquist_resolution(c.model, 100.0));
  CHECK(c.seed == 0);
  CHECK(c.canonical.find("seed=0") != std::string::npos);
  CHECK_FALSE(c.alpha.has_value());
}

TEST_CASE("comments, whitespace and sides") {
  const RunConfig c = parse_config(
      "# leading comment\n  subcommand=capacity  \nmodel = dirichlet-rectangle # inline\nsides = 2, 3\n"
      "mask = disk cx=0.5 cy=0.5 r=0.1\n");
  CHECK(c.model.side_x() == 2.0);
  CHECK(c.model.side_y() == 3.0);
  CHECK(c.resolution == 256);
  REQUIRE(c.mask.size() == 1);
}

TEST_CASE("alpha outside (0,1) is rejected with its range") {
  const auto d = diagnostics_of("subcommand = sample\nmodel = torus\nL = 100\nalpha = 1.5\n");
  REQUIRE(!d.empty());
  CHECK(has_message(d, "alpha", "(0,1)"));
  CHECK(d[0].line == 4);
}

TEST_CASE("all problems are reported together with line numbers") {
  const auto d = diagnostics_of(
      "subcommand = sample\nmodel = torus\nL = 100\nbogus = 1\nL = 200\nseed\nresolution = 12\n");
  CHECK(has_message(d, "bogus", "unknown"));
  CHECK(has_message(d, "L", "duplicate"));
  bool missing_eq = false;
  for (const auto& x : d) missing_eq |= x.line == 6;
  CHECK(missing_eq);
  CHECK(d.size() >= 3);
  try {
    parse_config("subcommand = sample\nmodel = torus\nL = 100\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("keys that do not apply to the subcommand are errors") {
  const auto d = diagnostics_of("subcommand = sample\nmodel = torus\nL = 100\nmask = disk cx=0.5 cy=0.5 r=0.1\n");
  CHECK(has_message(d, "mask", ""));
  CHECK(!diagnostics_of("model = torus\nL = 100\n").empty());
  CHECK(!diagnostics_of("subcommand = nope\nmodel = torus\n").empty());
}

TEST_CASE("under-resolved sample grids name the minimum resolution") {
  const auto d = diagnostics_of("subcommand = sample\nmodel = torus\nL = 100\nresolution = 16\n");
  REQUIRE(!d.empty());
  CHECK(has_message(d, "resolution", std::to_string(nyquist_resolution(SurfaceModel::torus(), 100.0))));
}

TEST_CASE("parser is total on random input") {
  std::mt19937_64 rng(42);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz_=#.,-+ 0123456789\n\t\r";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 200);
  const std::vector<std::string> keys{"subcommand", "model", "L", "alpha", "mask", "seed", "sides", "resolution"};
  for (int it = 0; it < 2000; ++it) {
    std::string text;
    if (it % 2) {
      for (int k = 0; k < 6; ++k) text += keys[pick(rng) % keys.size()] + " = " + std::to_string(pick(rng)) + "\n";
    }
    const int n = len(rng);
    for (int k = 0; k < n; ++k) text += alphabet[pick(rng)];
    try {
      parse_config(text);
    } catch (const ConfigError&) {
    }
  }
  CHECK(true);
}

TEST_CASE("mask area matches the disk area within one cell layer") {
  const RunConfig c = parse_config(
      "subcommand = capacity\nmodel = torus\nmask = disk cx=0.5 cy=0.5 r=0.1\nresolution = 256\n");
  const auto shapes = absolute_shapes(c.model, c.mask);
  const GridGeometry g(c.model, c.resolution);
  const DomainMask mask = DomainMask::from_shapes(g, shapes);
  const double r = 0.1 * 2 * kPi;
  CHECK(std::abs(mask.area() - kPi * r * r) <= 2 * kPi * r * g.hx());
}

TEST_CASE("canonical text and hash") {
  const RunConfig a = parse_config("subcommand = sample\nmodel = torus\nL = 100\nseed = 5\n");
  const RunConfig b = parse_config("seed=5\nL=100\nmodel=torus\nsubcommand=sample\n");
  CHECK(a.canonical == b.canonical);
  CHECK(a.hash() == b.hash());
  const RunConfig c = with_seed(a, 6);
  CHECK(c.seed == 6);
  CHECK(c.hash() != a.hash());
  CHECK(c.canonical.find("seed=6") != std::string::npos);
}

TEST_CASE("CSV quoting") {
  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("a,b") == "\"a,b\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_quote("two\nlines") == "\"two\nlines\"");
  std::ostringstream out;
  write_csv_row(out, {"x", "1,2", ""});
  CHECK(out.str() == "x,\"1,2\",\r\n");
}

TEST_CASE("appending keeps one header and rejects a mismatched one") {
  const fs::path dir = scratch("append");
  const fs::path p = dir / "r.csv";
  append_csv_row(p, {"a", "b"}, {"1", "2"});
  append_csv_row(p, {"a", "b"}, {"3", "4"});
  CHECK(slurp(p) == "a,b\r\n1,2\r\n3,4\r\n");
  CHECK_THROWS_AS(append_csv_row(p, {"a", "c"}, {"5", "6"}), Error);
}

TEST_CASE("doubles format round-trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, double(int(i % 40) - 20));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("field binary round trip and PGM header") {
  const FieldSample s = sample_cgff(SurfaceModel::torus(), 25.0, 7, 16);
  const FieldHeader h = make_header(s, "abc");
  std::stringstream buf;
  write_field_binary(buf, h, s.grid.values());
  const FieldFile f = read_field_binary(buf);
  CHECK(f.header.model == h.model);
  CHECK(f.header.seed == 7);
  CHECK(f.header.nx == 16);
  CHECK(f.header.band_upper == 25.0);
  CHECK(f.header.config_hash == "abc");
  REQUIRE(f.values.size() == s.grid.values().size());
  for (std::size_t k = 0; k < f.values.size(); ++k) CHECK(f.values[k] == s.grid.values()[k]);
  std::stringstream bad("CGFF-FIELD 9\nEND\n");
  CHECK_THROWS_AS(read_field_binary(bad), Error);

  std::ostringstream pgm;
  write_pgm16(pgm, s.grid);
  const std::string text = pgm.str();
  CHECK(text.rfind("P5\n", 0) == 0);
  CHECK(text.find("\n16 16\n65535\n") != std::string::npos);
}

TEST_CASE("sample run writes the field artifacts and a results row") {
  const fs::path dir = scratch("sample");
  const RunConfig c = parse_config("subcommand = sample\nmodel = torus\nL = 100\nalpha = 0.5\noutput = f\n");
  CHECK(run_quiet(c, dir) == 0);
  for (const char* name : {"f.field", "f.pgm", "f_low.field", "f_low.pgm", "f_high.field", "f_high.pgm"}) {
    CHECK(fs::exists(dir / name));
  }
  const auto rows = lines(slurp(dir / "sample_results.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rfind("build_tag,config_hash,subcommand,model,side_x,side_y", 0) == 0);
  const FieldFile full = read_field_binary(dir / "f.field");
  const FieldFile low = read_field_binary(dir / "f_low.field");
  const FieldFile high = read_field_binary(dir / "f_high.field");
  for (std::size_t k = 0; k < full.values.size(); ++k) {
    CHECK(full.values[k] == doctest::Approx(low.values[k] + high.values[k]).epsilon(1e-12));
  }
}

TEST_CASE("kernel run writes one residual row per pair and L") {
  const fs::path dir = scratch("kernel");
  const RunConfig c =
      parse_config("subcommand = kernel\nmodel = torus\nL_grid = 100, 1000\npairs = 15\noutput = k\n");
  CHECK(run_quiet(c, dir) == 0);
  const auto rows = lines(slurp(dir / "k_residuals.csv"));
  CHECK(rows.size() == 1 + 2 * 15);
  CHECK(rows[0] == "L,p,q,d_g,G_L,predicted,residual,in_range");
}

TEST_CASE("importance hole run records the effective sample size") {
  const fs::path dir = scratch("hole");
  const RunConfig c = parse_config(
      "subcommand = hole\nmodel = torus\nL = 25\nmask = disk cx=0.5 cy=0.5 r=0.05\nsamples = 200\n"
      "method = importance\n");
  CHECK(run_quiet(c, dir) == 0);
  const auto rows = lines(slurp(dir / "hole_results.csv"));
  REQUIRE(rows.size() == 2);
  std::vector<std::string> head, row;
  {
    std::istringstream a(rows[0]), b(rows[1]);
    for (std::string x; std::getline(a, x, ',');) head.push_back(x);
    for (std::string x; std::getline(b, x, ',');) row.push_back(x);
  }
  const auto it = std::find(head.begin(), head.end(), "effective_sample_size");
  REQUIRE(it != head.end());
  const std::size_t col = std::size_t(it - head.begin());
  REQUIRE(col < row.size());
  CHECK(std::isfinite(std::stod(row[col])));
}

TEST_CASE("runs are byte-reproducible") {
  const std::string text = "subcommand = sample\nmodel = dirichlet-rectangle\nL = 200\nseed = 11\noutput = r\n";
  const fs::path a = scratch("repro_a");
  const fs::path b = scratch("repro_b");
  CHECK(run_quiet(parse_config(text), a) == 0);
  CHECK(run_quiet(parse_config(text), b) == 0);
  CHECK(slurp(a / "r.field") == slurp(b / "r.field"));
  CHECK(slurp(a / "r.pgm") == slurp(b / "r.pgm"));
  CHECK(slurp(a / "sample_results.csv") == slurp(b / "sample_results.csv"));
}
