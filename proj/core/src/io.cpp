#include "cgff/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cgff/error.hpp"

namespace cgff {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string csv_quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << csv_quote(fields[i]);
  }
  out << "\r\n";
}

void append_csv_row(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::string>& fields) {
  if (header.size() != fields.size()) throw Error("cli-io", "CSV row does not match its header");
  std::ostringstream head;
  write_csv_row(head, header);
  bool fresh = true;
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string first;
      std::getline(in, first);
      if (!first.empty()) {
        fresh = false;
        if (first + "\n" != head.str()) {
          throw Error("cli-io", "results file " + path.string() + " has a different header");
        }
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cli-io", "cannot open " + path.string() + " for writing");
  if (fresh) out << head.str();
  write_csv_row(out, fields);
  if (!out) throw Error("cli-io", "failed writing " + path.string());
}

FieldHeader make_header(const FieldSample& sample, std::string config_hash) {
  const GridGeometry& g = sample.grid.geometry();
  FieldHeader h;
  h.model = g.model().name();
  h.side_x = g.model().side_x();
  h.side_y = g.model().side_y();
  h.band_lower = sample.band.lower;
  h.band_upper = sample.band.upper;
  h.seed = sample.seed;
  h.resolution = g.resolution();
  h.nx = g.nx();
  h.ny = g.ny();
  h.config_hash = std::move(config_hash);
  return h;
}

void write_field_binary(std::ostream& out, const FieldHeader& h, std::span<const double> values) {
  if (values.size() != std::size_t(h.nx) * std::size_t(h.ny)) {
    throw Error("cli-io", "field value count does not match the header");
  }
  out << "CGFF-FIELD 1\n"
      << "model " << h.model << "\n"
      << "sides " << format_double(h.side_x) << " " << format_double(h.side_y) << "\n"
      << "band " << format_double(h.band_lower) << " " << format_double(h.band_upper) << "\n"
      << "seed " << h.seed << "\n"
      << "resolution " << h.resolution << "\n"
      << "nodes " << h.nx << " " << h.ny << "\n"
      << "config_hash " << (h.config_hash.empty() ? "-" : h.config_hash) << "\n"
      << "END\n";
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw Error("cli-io", "failed writing field binary");
}

void write_field_binary(const std::filesystem::path& path, const FieldHeader& h, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cli-io", "cannot open " + path.string() + " for writing");
  write_field_binary(out, h, values);
}

FieldFile read_field_binary(std::istream& in) {
  FieldFile f;
  std::string line;
  if (!std::getline(in, line) || line != "CGFF-FIELD 1") throw Error("cli-io", "not a CGFF field file");
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "END") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "model") ls >> f.header.model;
    else if (key == "sides") ls >> f.header.side_x >> f.header.side_y;
    else if (key == "band") ls >> f.header.band_lower >> f.header.band_upper;
    else if (key == "seed") ls >> f.header.seed;
    else if (key == "resolution") ls >> f.header.resolution;
    else if (key == "nodes") ls >> f.header.nx >> f.header.ny;
    else if (key == "config_hash") {
      ls >> f.header.config_hash;
      if (f.header.config_hash == "-") f.header.config_hash.clear();
    } else {
      throw Error("cli-io", "unknown field header key '" + key + "'");
    }
    if (ls.fail()) throw Error("cli-io", "malformed field header line '" + line + "'");
  }
  if (!ended) throw Error("cli-io", "field header is not terminated by END");
  if (f.header.nx <= 0 || f.header.ny <= 0) throw Error("cli-io", "field header has no node counts");
  const std::size_t n = std::size_t(f.header.nx) * std::size_t(f.header.ny);
  f.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error("cli-io", "field binary is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[b]) << (8 * b);
    f.values[k] = std::bit_cast<double>(bits);
  }
  return f;
}

FieldFile read_field_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cli-io", "cannot open " + path.string());
  return read_field_binary(in);
}

void write_pgm16(std::ostream& out, const Grid& grid) {
  const GridGeometry& g = grid.geometry();
  const double lo = grid.min();
  const double hi = grid.max();
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n# value = " << format_double(lo) << " + " << format_double(span) << " * pixel / 65535\n"
      << g.nx() << " " << g.ny() << "\n65535\n";
  for (int j = g.ny() - 1; j >= 0; --j) {
    for (int i = 0; i < g.nx(); ++i) {
      const double t = std::clamp((grid.at(i, j) - lo) / span, 0.0, 1.0);
      const auto p = static_cast<std::uint16_t>(std::lround(t * 65535.0));
      const char bytes[2] = {static_cast<char>(p >> 8), static_cast<char>(p & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw Error("cli-io", "failed writing PGM");
}

void write_pgm16(const std::filesystem::path& path, const Grid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cli-io", "cannot open " + path.string() + " for writing");
  write_pgm16(out, grid);
}

}  // namespace cgff
