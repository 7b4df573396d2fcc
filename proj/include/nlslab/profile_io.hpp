#pragma once

// Profile persistence.
//
// Text: one line per node, "r Re(u) Im(u)", full double precision.
// Binary snapshot (native endianness):
//   int32 N, int32 J, float64 h, then 2(J+1) float64 values Re u_0, Im u_0, ...
//   optionally followed by a text trailer "#meta <text>\n", ignored by readers.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "nlslab/error.hpp"
#include "nlslab/field.hpp"

namespace nlslab {

inline void write_profile_text(const RadialProfile& u, std::ostream& os) {
  char buf[96];
  for (std::size_t j = 0; j < u.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", u.grid().r()[j], u[j].real(), u[j].imag());
    os << buf;
  }
}

inline void write_profile_text(const RadialProfile& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_profile_text(u, os);
}

/// Reads the text format onto a grid that must match the file's node count
/// and spacing.
inline RadialProfile read_profile_text(const std::string& path, const GridPtr& grid) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open profile '" + path + "'");
  std::vector<cplx> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double r, re, im;
    if (!(ls >> r >> re >> im)) throw Error(path + ":" + std::to_string(lineno) + ": expected 'r re im'");
    if (v.size() < grid->size() && std::abs(r - grid->r()[v.size()]) > 1e-9 * (1.0 + r))
      throw Error(path + ":" + std::to_string(lineno) + ": radius does not match the grid");
    v.emplace_back(re, im);
  }
  if (v.size() != grid->size())
    throw Error(path + ": has " + std::to_string(v.size()) + " nodes, grid has " + std::to_string(grid->size()));
  return RadialProfile(grid, std::move(v));
}

inline void write_profile_binary(const RadialProfile& u, const std::string& path, const std::string& trailer = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  const std::int32_t N = u.grid().N();
  const std::int32_t J = u.grid().J();
  const double h = u.grid().h();
  os.write(reinterpret_cast<const char*>(&N), sizeof N);
  os.write(reinterpret_cast<const char*>(&J), sizeof J);
  os.write(reinterpret_cast<const char*>(&h), sizeof h);
  os.write(reinterpret_cast<const char*>(u.values().data()), static_cast<std::streamsize>(u.size() * sizeof(cplx)));
  if (!trailer.empty()) os << "#meta " << trailer << "\n";
  if (!os) throw Error("short write to '" + path + "'");
}

/// Reads a binary snapshot, reconstructing its grid.
inline RadialProfile read_profile_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open profile '" + path + "'");
  std::int32_t N = 0, J = 0;
  double h = 0.0;
  is.read(reinterpret_cast<char*>(&N), sizeof N);
  is.read(reinterpret_cast<char*>(&J), sizeof J);
  is.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!is || N < 1 || J < 2 || !(h > 0.0)) throw Error("'" + path + "' is not a profile snapshot");
  std::vector<cplx> v(static_cast<std::size_t>(J) + 1);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(cplx)));
  if (!is) throw Error("'" + path + "' is truncated");
  return RadialProfile(make_grid_with_spacing(N, h, J), std::move(v));
}

/// Trailer text of a binary snapshot, empty if none.
inline std::string read_profile_trailer(const std::string& path) {
  const auto u = read_profile_binary(path);
  std::ifstream is(path, std::ios::binary);
  is.seekg(static_cast<std::streamoff>(2 * sizeof(std::int32_t) + sizeof(double) + u.size() * sizeof(cplx)));
  std::string line;
  if (!std::getline(is, line) || line.rfind("#meta ", 0) != 0) return "";
  return line.substr(6);
}

}  // namespace nlslab
