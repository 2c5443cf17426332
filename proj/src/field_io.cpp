#include "condkl/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "condkl/error.hpp"

namespace condkl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string field_csv(const StructuredGrid& grid, const Vector& field) {
  return fields_csv(grid, {"value"}, {&field});
}

std::string fields_csv(const StructuredGrid& grid, const std::vector<std::string>& names,
                       const std::vector<const Vector*>& fields) {
  if (names.size() != fields.size()) throw InvalidArgument("fields_csv: names and fields differ in count");
  for (const Vector* f : fields)
    if (f->size() != grid.size()) throw InvalidArgument("fields_csv: field does not match the grid");
  std::string out = "x1,x2";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (Index i = 0; i < grid.size(); ++i) {
    const Point p = grid.node(i);
    out += format_double(p.x1) + "," + format_double(p.x2);
    for (const Vector* f : fields) out += "," + format_double((*f)[i]);
    out += "\n";
  }
  return out;
}

namespace {

std::vector<std::vector<double>> parse_numeric_csv(const std::string& text, const std::string& header,
                                                   std::size_t columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw InvalidArgument("CSV header '" + line + "' differs from '" + header + "'");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw InvalidArgument("CSV line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      row.push_back(v);
    }
    if (row.size() != columns)
      throw InvalidArgument("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                            " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Vector parse_field_csv(const std::string& text, const StructuredGrid& grid) {
  const auto rows = parse_numeric_csv(text, "x1,x2,value", 3);
  if (static_cast<Index>(rows.size()) != grid.size())
    throw InvalidArgument("field CSV has " + std::to_string(rows.size()) + " rows, grid has " +
                          std::to_string(grid.size()) + " nodes");
  Vector out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const Point p = grid.node(i);
    if (std::abs(r[0] - p.x1) > 1e-9 || std::abs(r[1] - p.x2) > 1e-9)
      throw InvalidArgument("field CSV row " + std::to_string(i + 2) + " does not match the grid node");
    out[i] = r[2];
  }
  return out;
}

std::string observations_csv(const ObservationSet& obs) {
  std::string out = "x1,x2,value\n";
  for (Index i = 0; i < obs.size(); ++i) {
    const Point& p = obs.locations()[static_cast<std::size_t>(i)];
    out += format_double(p.x1) + "," + format_double(p.x2) + "," + format_double(obs.values()[i]) + "\n";
  }
  return out;
}

ObservationSet parse_observations_csv(const std::string& text) {
  const auto rows = parse_numeric_csv(text, "x1,x2,value", 3);
  PointList pts;
  Vector vals(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pts.push_back({rows[i][0], rows[i][1]});
    vals[static_cast<Index>(i)] = rows[i][2];
  }
  return ObservationSet(std::move(pts), std::move(vals));
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace condkl
