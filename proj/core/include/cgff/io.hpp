#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cgff/field.hpp"
#include "cgff/grid.hpp"

namespace cgff {

/// Shortest round-trip-safe text: 17 significant digits.
std::string format_double(double v);

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t v);

/// RFC-4180 field quoting (quotes only when needed).
std::string csv_quote(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Appends one row, writing the header first when the file is new or empty.
/// Throws if an existing header differs.
void append_csv_row(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::string>& fields);

/// Metadata stored in the field binary header.
struct FieldHeader {
  std::string model;
  double side_x = 0.0;
  double side_y = 0.0;
  double band_lower = 0.0;
  double band_upper = 0.0;
  std::uint64_t seed = 0;
  int resolution = 0;
  int nx = 0;
  int ny = 0;
  std::string config_hash;
};

FieldHeader make_header(const FieldSample& sample, std::string config_hash = {});

/// Text header ("CGFF-FIELD 1", key value lines, "END") followed by nx*ny
/// little-endian IEEE-754 doubles in row-major order (rows along y).
void write_field_binary(std::ostream& out, const FieldHeader& header, std::span<const double> values);
void write_field_binary(const std::filesystem::path& path, const FieldHeader& header,
                        std::span<const double> values);

struct FieldFile {
  FieldHeader header;
  std::vector<double> values;
};

FieldFile read_field_binary(std::istream& in);
FieldFile read_field_binary(const std::filesystem::path& path);

/// Binary PGM (P5), 16-bit big-endian samples, top row = largest y. The
/// affine map value = min + (max - min) * pixel / 65535 is stored in a
/// header comment.
void write_pgm16(std::ostream& out, const Grid& grid);
void write_pgm16(const std::filesystem::path& path, const Grid& grid);

}  // namespace cgff
