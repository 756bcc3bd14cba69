#include "cgff/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "cgff/build_info.hpp"
#include "cgff/field.hpp"
#include "cgff/io.hpp"
#include "cgff/kernel.hpp"
#include "cgff/rng.hpp"

namespace cgff {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

const std::map<std::string, Subcommand>& subcommands() {
  static const std::map<std::string, Subcommand> m = {
      {"sample", Subcommand::sample},     {"kernel", Subcommand::kernel},
      {"capacity", Subcommand::capacity}, {"sup-tail", Subcommand::sup_tail},
      {"hole", Subcommand::hole},         {"embed-check", Subcommand::embed_check}};
  return m;
}

const std::set<std::string>& common_keys() {
  static const std::set<std::string> k = {"subcommand", "model", "sides", "seed", "output", "results"};
  return k;
}

const std::set<std::string>& keys_for(Subcommand s) {
  static const std::map<Subcommand, std::set<std::string>> k = {
      {Subcommand::sample, {"L", "alpha", "resolution"}},
      {Subcommand::kernel, {"L", "L_grid", "pairs"}},
      {Subcommand::capacity, {"mask", "outer", "resolution", "tol", "max_sweeps"}},
      {Subcommand::sup_tail, {"L", "threshold", "samples", "resolution"}},
      {Subcommand::hole, {"L", "mask", "samples", "method", "resolution", "tol", "max_sweeps"}},
      {Subcommand::embed_check, {"L", "alpha", "delta", "pairs"}}};
  return k.at(s);
}

bool known_key(const std::string& key) {
  if (common_keys().count(key)) return true;
  for (const auto& [name, s] : subcommands()) {
    if (keys_for(s).count(key)) return true;
  }
  return false;
}

struct Entry {
  int line;
  std::string value;
};

class Parser {
 public:
  explicit Parser(std::string_view text) { scan(text); }

  RunConfig parse();

 private:
  void scan(std::string_view text);
  void error(int line, const std::string& key, const std::string& msg) { diags_.push_back({line, key, msg}); }
  void error(const std::string& key, const std::string& msg) {
    const auto it = entries_.find(key);
    error(it == entries_.end() ? 0 : it->second.line, key, msg);
  }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<double> real(const std::string& key);
  std::optional<std::uint64_t> uint(const std::string& key);
  std::optional<std::vector<Shape>> shapes(const std::string& key);

  std::map<std::string, Entry> entries_;
  std::vector<ConfigDiagnostic> diags_;
};

void Parser::scan(std::string_view text) {
  int lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      error(lineno, "", "expected key=value");
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      error(lineno, "", "missing key before '='");
      continue;
    }
    if (!known_key(key)) {
      error(lineno, key, "unknown key");
      continue;
    }
    if (value.empty()) {
      error(lineno, key, "empty value");
      continue;
    }
    if (auto it = entries_.find(key); it != entries_.end()) {
      error(lineno, key, "duplicate key (first set on line " + std::to_string(it->second.line) + ")");
      continue;
    }
    entries_[key] = {lineno, value};
  }
}

std::optional<double> Parser::real(const std::string& key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  auto v = parse_real(it->second.value);
  if (!v) error(key, "expected a finite real number, got '" + it->second.value + "'");
  return v;
}

std::optional<std::uint64_t> Parser::uint(const std::string& key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  auto v = parse_uint(it->second.value);
  if (!v) error(key, "expected a non-negative integer, got '" + it->second.value + "'");
  return v;
}

std::optional<std::vector<Shape>> Parser::shapes(const std::string& key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  std::vector<Shape> out;
  bool ok = true;
  for (std::string_view prim : split(it->second.value, ';')) {
    const auto tokens = split_ws(prim);
    if (tokens.empty()) {
      error(key, "empty shape in union");
      ok = false;
      continue;
    }
    std::map<std::string, double> params;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto eq = tokens[t].find('=');
      const auto v = eq == std::string_view::npos ? std::nullopt : parse_real(tokens[t].substr(eq + 1));
      if (!v) {
        error(key, "malformed shape parameter '" + std::string(tokens[t]) + "'");
        ok = false;
        continue;
      }
      params[std::string(tokens[t].substr(0, eq))] = *v;
    }
    auto take = [&](const std::vector<std::string>& names) -> std::optional<std::vector<double>> {
      std::vector<double> vals;
      for (const auto& n : names) {
        if (!params.count(n)) {
          error(key, std::string(tokens[0]) + " needs parameter '" + n + "'");
          return std::nullopt;
        }
        vals.push_back(params[n]);
      }
      if (params.size() != names.size()) {
        error(key, std::string(tokens[0]) + " has unexpected parameters");
        return std::nullopt;
      }
      return vals;
    };
    if (tokens[0] == "disk") {
      if (auto v = take({"cx", "cy", "r"})) {
        if (!((*v)[2] > 0.0)) {
          error(key, "disk radius must be > 0");
          ok = false;
        } else {
          out.push_back(Disk{(*v)[0], (*v)[1], (*v)[2]});
        }
      } else {
        ok = false;
      }
    } else if (tokens[0] == "rect") {
      if (auto v = take({"x0", "y0", "x1", "y1"})) {
        if (!((*v)[0] < (*v)[2] && (*v)[1] < (*v)[3])) {
          error(key, "rect needs x0 < x1 and y0 < y1");
          ok = false;
        } else {
          out.push_back(Rect{(*v)[0], (*v)[1], (*v)[2], (*v)[3]});
        }
      } else {
        ok = false;
      }
    } else {
      error(key, "unknown shape '" + std::string(tokens[0]) + "' (expected disk or rect)");
      ok = false;
    }
  }
  if (!ok) return std::nullopt;
  return out;
}

bool power_of_two(std::uint64_t n) { return n >= 2 && (n & (n - 1)) == 0; }

RunConfig Parser::parse() {
  RunConfig c;
  bool have_sub = false;
  if (!has("subcommand")) {
    error(0, "subcommand", "missing required key 'subcommand'");
  } else {
    const auto it = subcommands().find(entries_["subcommand"].value);
    if (it == subcommands().end()) {
      error("subcommand", "unknown subcommand '" + entries_["subcommand"].value +
                              "' (expected sample, kernel, capacity, sup-tail, hole or embed-check)");
    } else {
      c.subcommand = it->second;
      have_sub = true;
    }
  }
  if (have_sub) {
    for (const auto& [key, e] : entries_) {
      if (!common_keys().count(key) && !keys_for(c.subcommand).count(key)) {
        error(e.line, key, "key is not used by subcommand '" + to_string(c.subcommand) + "'");
      }
    }
  }

  // Model.
  bool model_ok = false;
  if (!has("model")) {
    error(0, "model", "missing required key 'model'");
  } else {
    const std::string& m = entries_["model"].value;
    std::optional<std::pair<double, double>> sides;
    if (has("sides")) {
      const auto parts = split(entries_["sides"].value, ',');
      const auto a = parts.size() == 2 ? parse_real(parts[0]) : std::nullopt;
      const auto b = parts.size() == 2 ? parse_real(parts[1]) : std::nullopt;
      if (!a || !b || !(*a > 0.0) || !(*b > 0.0)) {
        error("sides", "expected two positive reals 'a,b'");
      } else {
        sides = std::make_pair(*a, *b);
      }
    }
    if (m == "torus") {
      c.model = sides ? SurfaceModel::torus(sides->first, sides->second) : SurfaceModel::torus();
      model_ok = true;
    } else if (m == "dirichlet-rectangle") {
      c.model = sides ? SurfaceModel::dirichlet_rectangle(sides->first, sides->second)
                      : SurfaceModel::dirichlet_rectangle();
      model_ok = true;
    } else {
      error("model", "unknown model '" + m + "' (expected torus or dirichlet-rectangle)");
    }
    if (has("sides") && !sides) model_ok = false;
  }

  // Scalars.
  if (auto v = real("L")) {
    if (*v > 0.0) c.L_grid = {*v};
    else error("L", "L must be > 0");
  }
  if (has("L_grid")) {
    if (has("L")) error("L_grid", "give either L or L_grid, not both");
    std::vector<double> grid;
    bool ok = true;
    for (auto part : split(entries_["L_grid"].value, ',')) {
      const auto v = parse_real(part);
      if (!v || !(*v > 0.0)) {
        error("L_grid", "entries must be positive reals, got '" + std::string(part) + "'");
        ok = false;
      } else {
        grid.push_back(*v);
      }
    }
    if (ok) c.L_grid = grid;
  }
  if (auto v = real("alpha")) {
    if (have_sub && c.subcommand == Subcommand::embed_check) {
      if (!(*v >= 0.0 && *v < 1.0)) error("alpha", "alpha must lie in [0,1) for embed-check");
      else c.alpha = *v;
    } else if (!(*v > 0.0 && *v < 1.0)) {
      error("alpha", "alpha must lie in (0,1), got " + entries_["alpha"].value);
    } else {
      c.alpha = *v;
    }
  }
  if (auto v = uint("seed")) c.seed = *v;
  if (auto v = uint("samples")) {
    if (*v == 0) error("samples", "samples must be > 0");
    c.samples = *v;
  }
  if (auto v = uint("resolution")) {
    if (*v < 2 || *v > (1u << 16)) error("resolution", "resolution must lie in [2, 65536]");
    else c.resolution = int(*v);
  }
  if (has("method")) {
    const std::string& m = entries_["method"].value;
    if (m == "plain") c.method = EstimatorMethod::plain;
    else if (m == "importance") c.method = EstimatorMethod::importance;
    else error("method", "method must be plain or importance");
  }
  if (auto v = real("threshold")) c.threshold = *v;
  if (auto v = uint("pairs")) {
    if (*v == 0) error("pairs", "pairs must be > 0");
    c.pairs = *v;
  }
  if (auto v = real("delta")) {
    if (!(*v > 0.0 && *v < 1.0 / (2.0 * std::numbers::sqrt2))) error("delta", "delta must lie in (0, 1/(2 sqrt 2))");
    c.delta = *v;
  }
  if (auto v = real("tol")) {
    if (!(*v > 0.0)) error("tol", "tol must be > 0");
    c.tol = *v;
  }
  if (auto v = uint("max_sweeps")) {
    if (*v == 0 || *v > 100000000) error("max_sweeps", "max_sweeps must lie in [1, 1e8]");
    else c.max_sweeps = int(*v);
  }
  if (has("output")) {
    const std::string& o = entries_["output"].value;
    const bool ok = std::all_of(o.begin(), o.end(), [](char ch) {
      return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    });
    if (!ok) error("output", "output must be a plain file stem ([A-Za-z0-9_.-])");
    c.output = o;
  }
  if (has("results")) c.results = entries_["results"].value;
  if (auto s = shapes("mask")) c.mask = *s;
  if (auto s = shapes("outer")) c.outer = *s;

  // Per-subcommand requirements.
  if (have_sub) {
    const Subcommand s = c.subcommand;
    auto require = [&](const std::string& key) {
      if (!has(key)) error(0, key, "missing required key '" + key + "' for subcommand '" + to_string(s) + "'");
    };
    if (s == Subcommand::kernel) {
      if (!has("L") && !has("L_grid")) error(0, "L", "kernel needs L or L_grid");
    } else if (s != Subcommand::capacity) {
      require("L");
    }
    if (s == Subcommand::capacity || s == Subcommand::hole) require("mask");
    if (s == Subcommand::sup_tail) require("threshold");
    if (s == Subcommand::embed_check && !c.alpha && !has("alpha")) c.alpha = 0.0;
    if (s == Subcommand::sup_tail && c.samples == 0 && !has("samples")) c.samples = 200;
    if (s == Subcommand::hole && c.samples == 0 && !has("samples")) c.samples = 10000;
    if (s == Subcommand::sup_tail && has("samples") && c.samples < 100) {
      error("samples", "sup-tail needs samples >= 100");
    }
    if (s == Subcommand::capacity && c.resolution == 0) c.resolution = 256;

    if (model_ok && !c.L_grid.empty() && diags_.empty()) {
      const double L = *std::max_element(c.L_grid.begin(), c.L_grid.end());
      if (s == Subcommand::sample || s == Subcommand::sup_tail) {
        const int nyq = nyquist_resolution(c.model, L);
        if (c.resolution == 0) c.resolution = nyq;
        else if (!power_of_two(std::uint64_t(c.resolution)) || c.resolution < nyq) {
          error("resolution", "resolution must be a power of two >= " + std::to_string(nyq) + " for L=" +
                                  format_double(L));
        }
      }
      if (s == Subcommand::hole) {
        const int hr = hole_resolution(c.model, L);
        if (c.resolution == 0) c.resolution = hr;
        else if (!power_of_two(std::uint64_t(c.resolution)) || c.resolution < hr) {
          error("resolution", "hole runs need a power-of-two resolution >= " + std::to_string(hr));
        }
      }
      if (s == Subcommand::embed_check) {
        try {
          (void)embed_box(c.model, c.delta, c.alpha.value_or(0.0), L);
        } catch (const Error& e) {
          error(0, "delta", e.what());
        }
      }
    }
    if (model_ok && diags_.empty() && (s == Subcommand::capacity || s == Subcommand::hole)) {
      if (!c.outer.empty() && c.model.kind() == SurfaceKind::torus) {
        error("outer", "outer regions are only supported on the dirichlet-rectangle model");
      } else {
        try {
          const GridGeometry g(c.model, c.resolution);
          DomainMask mask = DomainMask::from_shapes(g, absolute_shapes(c.model, c.mask));
          if (!c.outer.empty()) mask = mask.with_exterior_outside(absolute_shapes(c.model, c.outer));
          mask.validate_for_capacity();
        } catch (const Error& e) {
          error("mask", e.what());
        }
      }
    }
  }

  if (!diags_.empty()) throw ConfigError(diags_);

  if (!has("seed")) entries_["seed"] = {0, "0"};
  for (const auto& [key, e] : entries_) c.canonical += key + "=" + e.value + "\n";
  return c;
}

}  // namespace

std::string to_string(Subcommand s) {
  for (const auto& [name, v] : subcommands()) {
    if (v == s) return name;
  }
  return "?";
}

ConfigError::ConfigError(std::vector<ConfigDiagnostic> diagnostics)
    : Error("cli-io", [&] {
        std::string msg = "invalid configuration:";
        for (const auto& d : diagnostics) {
          msg += "\n  ";
          msg += d.line > 0 ? "line " + std::to_string(d.line) : std::string("config");
          if (!d.key.empty()) msg += " [" + d.key + "]";
          msg += ": " + d.message;
        }
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

std::uint64_t RunConfig::hash() const noexcept { return fnv1a64(canonical); }

RunConfig parse_config(std::string_view text) { return Parser(text).parse(); }

std::vector<Shape> absolute_shapes(const SurfaceModel& model, const std::vector<Shape>& relative) {
  const double a = model.side_x();
  const double b = model.side_y();
  const double r = std::min(a, b);
  std::vector<Shape> out;
  for (const auto& s : relative) {
    if (const auto* d = std::get_if<Disk>(&s)) {
      out.push_back(Disk{d->cx * a, d->cy * b, d->r * r});
    } else {
      const auto& q = std::get<Rect>(s);
      out.push_back(Rect{q.x0 * a, q.y0 * b, q.x1 * a, q.y1 * b});
    }
  }
  return out;
}

RunConfig with_seed(RunConfig config, std::uint64_t seed) {
  config.seed = seed;
  std::string canon;
  std::istringstream in(config.canonical);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("seed=", 0) == 0) line = "seed=" + std::to_string(seed);
    canon += line + "\n";
  }
  config.canonical = canon;
  return config;
}

// ---------------------------------------------------------------------------
// run

namespace {

std::vector<std::string> common_header() {
  return {"build_tag", "config_hash", "subcommand", "model", "side_x", "side_y"};
}

std::vector<std::string> common_fields(const RunConfig& c) {
  return {build_tag(), hex64(c.hash()), to_string(c.subcommand), c.model.name(),
          format_double(c.model.side_x()), format_double(c.model.side_y())};
}

std::filesystem::path results_path(const RunConfig& c, const RunContext& ctx) {
  if (!c.results.empty()) {
    const std::filesystem::path p(c.results);
    return p.is_absolute() ? p : ctx.out_dir / p;
  }
  return ctx.out_dir / (to_string(c.subcommand) + "_results.csv");
}

void append(const RunConfig& c, const RunContext& ctx, std::vector<std::string> header,
            std::vector<std::string> fields) {
  auto h = common_header();
  auto f = common_fields(c);
  h.insert(h.end(), header.begin(), header.end());
  f.insert(f.end(), fields.begin(), fields.end());
  append_csv_row(results_path(c, ctx), h, f);
}

std::string mask_text(const std::vector<Shape>& shapes) {
  std::string out;
  for (const auto& s : shapes) {
    if (!out.empty()) out += "; ";
    if (const auto* d = std::get_if<Disk>(&s)) {
      out += "disk cx=" + format_double(d->cx) + " cy=" + format_double(d->cy) + " r=" + format_double(d->r);
    } else {
      const auto& r = std::get<Rect>(s);
      out += "rect x0=" + format_double(r.x0) + " y0=" + format_double(r.y0) + " x1=" + format_double(r.x1) +
             " y1=" + format_double(r.y1);
    }
  }
  return out;
}

std::string point_text(Point p) { return format_double(p.x) + " " + format_double(p.y); }

void write_field(const RunConfig& c, const RunContext& ctx, const FieldSample& s, const std::string& stem) {
  const FieldHeader h = make_header(s, hex64(c.hash()));
  write_field_binary(ctx.out_dir / (stem + ".field"), h, s.grid.values());
  write_pgm16(ctx.out_dir / (stem + ".pgm"), s.grid);
}

int run_sample(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  const double L = c.L();
  const FieldSample full = sample_cgff(c.model, L, c.seed, c.resolution);
  write_field(c, ctx, full, c.output);
  std::string extra;
  if (c.alpha) {
    const TwoScaleSample two = sample_two_scale(c.model, L, *c.alpha, c.seed, c.resolution);
    write_field(c, ctx, two.low, c.output + "_low");
    write_field(c, ctx, two.high, c.output + "_high");
    extra = " (+ low/high bands)";
  }
  append(c, ctx, {"L", "alpha", "seed", "resolution", "eigenpairs", "min", "max", "mean", "field"},
         {format_double(L), c.alpha ? format_double(*c.alpha) : "", std::to_string(c.seed),
          std::to_string(c.resolution), std::to_string(full.coefficients.size()), format_double(full.grid.min()),
          format_double(full.grid.max()), format_double(full.grid.mean()), c.output + ".field"});
  log << "sample " << c.model.name() << " L=" << format_double(L) << " seed=" << c.seed
      << " resolution=" << c.resolution << " min=" << format_double(full.grid.min())
      << " max=" << format_double(full.grid.max()) << " -> " << (ctx.out_dir / (c.output + ".field")).string()
      << extra << "\n";
  return 0;
}

std::vector<PointPair> kernel_pairs(const SurfaceModel& model, std::size_t count, std::uint64_t seed) {
  const double r = model.in_range_radius();
  std::uint64_t ord = 0;
  auto u = [&] { return uniform_open(seed, Stream::auxiliary, ord++); };
  std::vector<PointPair> pairs;
  while (pairs.size() < count) {
    Point p{u() * model.side_x(), u() * model.side_y()};
    if (model.has_boundary()) {
      p = {r + u() * (model.side_x() - 2 * r), r + u() * (model.side_y() - 2 * r)};
    }
    const double rho = pairs.empty() ? 0.0 : u() * r;
    const double theta = 2.0 * std::numbers::pi * u();
    Point q{p.x + rho * std::cos(theta), p.y + rho * std::sin(theta)};
    if (!model.has_boundary()) q = model.reduce(q);
    else if (!model.contains(q)) continue;
    pairs.push_back({p, q});
  }
  return pairs;
}

int run_kernel(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  const auto pairs = kernel_pairs(c.model, c.pairs, c.seed);
  const ResidualReport rep = asymptotic_residual(c.model, c.L_grid, pairs);
  const auto path = ctx.out_dir / (c.output + "_residuals.csv");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cli-io", "cannot open " + path.string());
  write_csv_row(out, {"L", "p", "q", "d_g", "G_L", "predicted", "residual", "in_range"});
  for (const auto& r : rep.rows) {
    write_csv_row(out, {format_double(r.L), point_text(r.p), point_text(r.q), format_double(r.distance),
                        format_double(r.covariance), format_double(r.predicted), format_double(r.residual),
                        r.in_range ? "1" : "0"});
  }
  if (!out) throw Error("cli-io", "failed writing " + path.string());
  std::string Ls;
  for (double L : c.L_grid) Ls += (Ls.empty() ? "" : " ") + format_double(L);
  append(c, ctx, {"L_grid", "pairs", "in_range", "max_abs_residual", "mean_abs_residual", "report"},
         {Ls, std::to_string(pairs.size()), std::to_string(rep.in_range_count), format_double(rep.max_abs),
          format_double(rep.mean_abs), path.filename().string()});
  log << "kernel " << c.model.name() << " L_grid=" << Ls << " rows=" << rep.rows.size()
      << " max|rho|=" << format_double(rep.max_abs) << " -> " << path.string() << "\n";
  return 0;
}

DomainMask build_mask(const RunConfig& c) {
  const GridGeometry g(c.model, c.resolution);
  DomainMask mask = DomainMask::from_shapes(g, absolute_shapes(c.model, c.mask));
  if (!c.outer.empty()) mask = mask.with_exterior_outside(absolute_shapes(c.model, c.outer));
  return mask;
}

SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.tol = c.tol;
  o.max_sweeps = c.max_sweeps;
  return o;
}

int run_capacity(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  const DomainMask mask = build_mask(c);
  const CapacityResult r = solve_capacity(mask, solver_options(c));
  FieldHeader h;
  h.model = c.model.name();
  h.side_x = c.model.side_x();
  h.side_y = c.model.side_y();
  h.seed = c.seed;
  h.resolution = c.resolution;
  h.nx = mask.geometry().nx();
  h.ny = mask.geometry().ny();
  h.config_hash = hex64(c.hash());
  write_field_binary(ctx.out_dir / (c.output + "_h.field"), h, r.minimizer.values());
  append(c, ctx, {"mask", "outer", "grid", "primal", "dual", "gap", "iterations", "residual", "tau", "tol"},
         {mask_text(c.mask), mask_text(c.outer), std::to_string(c.resolution), format_double(r.primal),
          format_double(r.dual), format_double(r.gap), std::to_string(r.sweeps), format_double(r.residual),
          format_double(r.tau), format_double(c.tol)});
  log << "capacity " << c.model.name() << " grid=" << c.resolution << " primal=" << format_double(r.primal)
      << " dual=" << format_double(r.dual) << " gap=" << format_double(r.gap) << " sweeps=" << r.sweeps << "\n";
  return 0;
}

std::vector<std::string> tail_header() {
  return {"L",        "seed",           "samples",        "resolution",          "method",
          "event",    "mask",           "threshold",      "estimate",            "ci_lower",
          "ci_upper", "standard_error", "log_rescaled",   "hits",                "effective_sample_size",
          "weight_mean", "weight_standard_error", "one_sided", "use_importance", "ess_floor_applied",
          "median_sup", "median_sup_ratio"};
}

std::vector<std::string> tail_fields(const RunConfig& c, const TailEstimate& t, const std::string& mask,
                                     const std::string& threshold) {
  auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  return {format_double(t.L),
          std::to_string(c.seed),
          std::to_string(t.samples),
          std::to_string(t.resolution),
          to_string(t.method),
          t.event,
          mask,
          threshold,
          format_double(t.estimate),
          format_double(t.ci.lower),
          format_double(t.ci.upper),
          format_double(t.standard_error),
          format_double(t.log_rescaled),
          std::to_string(t.hits),
          format_double(t.effective_sample_size),
          format_double(t.weight_mean),
          format_double(t.weight_standard_error),
          b(t.one_sided),
          b(t.use_importance),
          b(t.ess_floor_applied),
          format_double(t.median_sup),
          format_double(t.median_sup_ratio)};
}

int run_sup_tail(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  MonteCarloOptions o;
  o.threads = ctx.threads;
  o.resolution = c.resolution;
  const TailEstimate t = estimate_sup_tail(c.model, c.L(), c.threshold, c.samples, c.seed, o);
  append(c, ctx, tail_header(), tail_fields(c, t, "", format_double(c.threshold)));
  log << "sup-tail " << c.model.name() << " L=" << format_double(c.L()) << " p=" << format_double(t.estimate)
      << " CI=[" << format_double(t.ci.lower) << ", " << format_double(t.ci.upper)
      << "] median sup/ln sqrt(L)=" << format_double(t.median_sup_ratio) << "\n";
  return 0;
}

int run_hole(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  const DomainMask mask = build_mask(c);
  HoleOptions o;
  o.method = c.method;
  o.threads = ctx.threads;
  o.capacity = solver_options(c);
  const TailEstimate t = estimate_hole_probability(c.model, c.L(), mask, c.samples, c.seed, o);
  append(c, ctx, tail_header(), tail_fields(c, t, mask_text(c.mask), ""));
  log << "hole " << c.model.name() << " L=" << format_double(c.L()) << " method=" << to_string(t.method)
      << " p=" << format_double(t.estimate) << " CI=[" << format_double(t.ci.lower) << ", "
      << format_double(t.ci.upper) << "] ESS=" << format_double(t.effective_sample_size)
      << (t.use_importance ? " (no hits: use importance)" : "") << "\n";
  return 0;
}

int run_embed_check(const RunConfig& c, const RunContext& ctx, std::ostream& log) {
  const double alpha = c.alpha.value_or(0.0);
  const BoxEmbedding e = embed_box(c.model, c.delta, alpha, c.L(), std::nullopt, c.seed);
  const auto pairs = random_lattice_pairs(e, c.pairs, c.seed);
  const LogCorrelationReport rep = check_log_correlated(c.model, c.L(), alpha, e, pairs);
  const auto path = ctx.out_dir / (c.output + "_logcorr.csv");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cli-io", "cannot open " + path.string());
  write_csv_row(out, {"x", "y", "lattice_distance", "covariance", "predicted", "residual", "rescaled_residual"});
  for (const auto& r : rep.rows) {
    write_csv_row(out, {std::to_string(r.x.x) + " " + std::to_string(r.x.y),
                        std::to_string(r.y.x) + " " + std::to_string(r.y.y), format_double(r.lattice_distance),
                        format_double(r.covariance), format_double(r.predicted), format_double(r.residual),
                        format_double(r.rescaled_residual)});
  }
  if (!out) throw Error("cli-io", "failed writing " + path.string());
  append(c, ctx,
         {"L", "alpha", "delta", "box_side", "ratio_min", "ratio_max", "ratio_pairs", "exhaustive", "pairs",
          "max_residual", "mean_residual", "max_rescaled_residual"},
         {format_double(c.L()), format_double(alpha), format_double(c.delta), std::to_string(e.side),
          format_double(e.check.min_ratio), format_double(e.check.max_ratio), std::to_string(e.check.pairs_checked),
          e.check.exhaustive ? "1" : "0", std::to_string(rep.rows.size()), format_double(rep.max_residual),
          format_double(rep.mean_residual), format_double(rep.max_rescaled_residual)});
  log << "embed-check " << c.model.name() << " L=" << format_double(c.L()) << " alpha=" << format_double(alpha)
      << " side=" << e.side << " ratio=[" << format_double(e.check.min_ratio) << ", "
      << format_double(e.check.max_ratio) << "] max residual=" << format_double(rep.max_residual) << "\n";
  return 0;
}

}  // namespace

int run(const RunConfig& config, const RunContext& context, std::ostream& log) {
  const RunConfig c = context.seed_override ? with_seed(config, *context.seed_override) : config;
  std::filesystem::create_directories(context.out_dir);
  switch (c.subcommand) {
    case Subcommand::sample: return run_sample(c, context, log);
    case Subcommand::kernel: return run_kernel(c, context, log);
    case Subcommand::capacity: return run_capacity(c, context, log);
    case Subcommand::sup_tail: return run_sup_tail(c, context, log);
    case Subcommand::hole: return run_hole(c, context, log);
    case Subcommand::embed_check: return run_embed_check(c, context, log);
  }
  return 1;
}

}  // namespace cgff
