#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fmcf/surface_mesh.hpp"

namespace fmcf {

struct NamedField {
  std::string name;
  Eigen::VectorXd values;  // length N (scalar) or 3N (vector, component-blocked)
};

namespace detail {
inline std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

// Plain-text mesh format: "N n_elements k" header, then N coordinate lines,
// then n_elements connectivity lines.
inline void write_mesh(const std::string& path, const SurfaceMesh& mesh, const PositionVector& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << mesh.n_nodes << ' ' << mesh.n_elements() << ' ' << mesh.degree << '\n';
  for (int j = 0; j < mesh.n_nodes; ++j) {
    const Eigen::Vector3d p = node_of(x, mesh.n_nodes, j);
    out << detail::full_precision(p[0]) << ' ' << detail::full_precision(p[1]) << ' '
        << detail::full_precision(p[2]) << '\n';
  }
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    for (int i = 0; i < mesh.nloc(); ++i) out << el[i] << (i + 1 < mesh.nloc() ? ' ' : '\n');
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::pair<SurfaceMesh, PositionVector> read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SurfaceMesh mesh;
  int nel = 0;
  if (!(in >> mesh.n_nodes >> nel >> mesh.degree)) throw std::runtime_error("bad mesh header in " + path);
  if (mesh.degree != 1 && mesh.degree != 2) throw std::runtime_error("bad mesh degree in " + path);
  PositionVector x(3 * mesh.n_nodes);
  for (int j = 0; j < mesh.n_nodes; ++j) {
    Eigen::Vector3d p;
    if (!(in >> p[0] >> p[1] >> p[2])) throw std::runtime_error("truncated mesh nodes in " + path);
    set_node(x, mesh.n_nodes, j, p);
  }
  mesh.conn.resize(static_cast<std::size_t>(nel) * mesh.nloc());
  for (int i = 0; i < nel * mesh.nloc(); ++i) {
    if (!(in >> mesh.conn[i])) throw std::runtime_error("truncated mesh connectivity in " + path);
    if (mesh.conn[i] < 0 || mesh.conn[i] >= mesh.n_nodes)
      throw std::runtime_error("node index out of range in " + path);
  }
  return {std::move(mesh), std::move(x)};
}

// Legacy ASCII VTK unstructured grid. Quadratic elements are emitted as
// 6-node quadratic triangles (VTK cell type 22, mid-edge order 01,12,20).
inline void write_vtk(const std::string& path, const SurfaceMesh& mesh, const PositionVector& x,
                      const std::vector<NamedField>& fields = {}) {
  for (const auto& f : fields)
    if (f.values.size() != mesh.n_nodes && f.values.size() != 3 * mesh.n_nodes)
      throw std::invalid_argument("field '" + f.name + "' length must be N or 3N");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const int N = mesh.n_nodes, nloc = mesh.nloc();
  out << "# vtk DataFile Version 3.0\nfmcf surface\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << N << " double\n";
  for (int j = 0; j < N; ++j) {
    const Eigen::Vector3d p = node_of(x, N, j);
    out << detail::full_precision(p[0]) << ' ' << detail::full_precision(p[1]) << ' '
        << detail::full_precision(p[2]) << '\n';
  }
  out << "CELLS " << mesh.n_elements() << ' ' << mesh.n_elements() * (nloc + 1) << '\n';
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int* el = mesh.element(e);
    out << nloc;
    if (nloc == 3) {
      out << ' ' << el[0] << ' ' << el[1] << ' ' << el[2];
    } else {
      // ours: mids opposite vertices (12,20,01); VTK wants (01,12,20)
      out << ' ' << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[5] << ' ' << el[3] << ' '
          << el[4];
    }
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.n_elements() << '\n';
  for (int e = 0; e < mesh.n_elements(); ++e) out << (nloc == 3 ? 5 : 22) << '\n';

  if (!fields.empty()) {
    out << "POINT_DATA " << N << '\n';
    for (const auto& f : fields) {
      if (f.values.size() == N) {
        out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
        for (int j = 0; j < N; ++j) out << detail::full_precision(f.values[j]) << '\n';
      } else {
        out << "VECTORS " << f.name << " double\n";
        for (int j = 0; j < N; ++j)
          out << detail::full_precision(f.values[j]) << ' '
              << detail::full_precision(f.values[N + j]) << ' '
              << detail::full_precision(f.values[2 * N + j]) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fmcf
