#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "condkl/grid.hpp"
#include "condkl/kernel_gp.hpp"

namespace condkl {

/// Shortest round-trip decimal with 17 significant digits.
std::string format_double(double v);

/// Columns x1,x2,value; one row per node in x1-fastest order.
std::string field_csv(const StructuredGrid& grid, const Vector& field);

/// Columns x1,x2 then one column per named field.
std::string fields_csv(const StructuredGrid& grid, const std::vector<std::string>& names,
                       const std::vector<const Vector*>& fields);

/// Parses a field written by field_csv and checks its coordinates against the grid.
Vector parse_field_csv(const std::string& text, const StructuredGrid& grid);

std::string observations_csv(const ObservationSet& obs);
ObservationSet parse_observations_csv(const std::string& text);

/// Generic table; every cell is pre-formatted.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace condkl
