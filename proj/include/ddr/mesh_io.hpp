// Mesh file format "ddrmesh-v1": JSON with vertices and per-cell oriented
// boundary lists. 0-cells reference vertex indices; ids are 0-based and dense
// per dimension, implied by order of appearance in the flat cell list.

#pragma once

#include <ddr/mesh.hpp>

#include <json.hpp>

#include <fstream>

namespace ddr {

inline nlohmann::json mesh_to_json(const PolytopalMesh & m)
{
  nlohmann::json j;
  j["version"] = "ddrmesh-v1";
  j["ambient_dim"] = m.ambient_dim;
  auto & verts = j["vertices"] = nlohmann::json::array();
  for (int v = 0; v < m.vertex_coords.cols(); v++) {
    nlohmann::json p = nlohmann::json::array();
    for (int i = 0; i < m.ambient_dim; i++) p.push_back(m.vertex_coords(i, v));
    verts.push_back(p);
  }
  auto & cells = j["cells"] = nlohmann::json::array();
  for (int d = 0; d <= m.ambient_dim; d++) {
    for (const auto & c : m.cells[d]) {
      nlohmann::json jc;
      jc["dim"] = d;
      auto & bl = jc["boundary"] = nlohmann::json::array();
      if (d == 0) {
        bl.push_back({c.vertex_ids[0], 1});
      } else {
        for (const auto & [i, s] : c.boundary) bl.push_back({i, s});
      }
      cells.push_back(jc);
    }
  }
  return j;
}

inline void save_mesh(const PolytopalMesh & m, const std::string & path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << mesh_to_json(m).dump(1) << "\n";
}

/// Load and fully validate a ddrmesh-v1 file. File orientation signs must agree
/// with the geometric convention up to a global flip per cell; inconsistent signs
/// raise a MeshValidationError naming the offending pair.
inline PolytopalMesh load_mesh_json(const nlohmann::json & j)
{
  if (!j.contains("version") || j["version"] != "ddrmesh-v1") throw MeshValidationError("mesh file: missing or unsupported version (expected ddrmesh-v1)");
  if (!j.contains("ambient_dim") || !j.contains("vertices") || !j.contains("cells")) throw MeshValidationError("mesh file: missing required field");
  int n = j["ambient_dim"].get<int>();
  if (n < 1 || n > 3) throw MeshValidationError("mesh file: ambient_dim must be 1, 2 or 3");
  const auto & verts = j["vertices"];
  MatrixXd V(n, verts.size());
  for (std::size_t v = 0; v < verts.size(); v++) {
    if (static_cast<int>(verts[v].size()) != n) throw MeshValidationError("mesh file: vertex " + std::to_string(v) + " has wrong coordinate count");
    for (int i = 0; i < n; i++) V(i, v) = verts[v][i].get<double>();
  }
  std::vector<std::vector<std::vector<int>>> bnd(n + 1);
  std::vector<std::vector<std::vector<std::pair<int, int>>>> signed_bnd(n + 1);
  std::vector<int> count(n + 1, 0);
  for (const auto & jc : j["cells"]) {
    int d = jc["dim"].get<int>();
    if (d < 0 || d > n) throw MeshValidationError("mesh file: cell dimension out of range");
    std::vector<int> ids;
    std::vector<std::pair<int, int>> sb;
    for (const auto & e : jc["boundary"]) {
      int id = e[0].get<int>(), s = e[1].get<int>();
      if (s != 1 && s != -1) throw MeshValidationError("mesh file: orientation signs must be +-1");
      ids.push_back(id);
      sb.emplace_back(id, s);
    }
    if (d == 0) {
      if (ids.size() != 1 || ids[0] != count[0]) throw MeshValidationError("mesh file: 0-cells must reference vertex indices in order");
    } else {
      int limit = count[d - 1];
      for (int id : ids) {
        if (id < 0 || id >= limit) throw MeshValidationError("mesh file: cell of dim " + std::to_string(d) + " references unknown subcell " + std::to_string(id));
      }
      bnd[d].push_back(ids);
      signed_bnd[d].push_back(sb);
    }
    count[d]++;
  }
  if (count[0] != static_cast<int>(verts.size())) throw MeshValidationError("mesh file: 0-cell count does not match vertex count");
  PolytopalMesh m = PolytopalMesh::build(n, V, bnd);
  // compare file signs against the geometric convention
  for (int d = 1; d <= n; d++) {
    for (auto & c : m.cells[d]) {
      const auto & file_signs = signed_bnd[d][c.id];
      bool all_match = true, all_flip = true;
      for (std::size_t l = 0; l < c.boundary.size(); l++) {
        if (file_signs[l].second == c.boundary[l].second) {
          all_flip = false;
        } else {
          all_match = false;
        }
      }
      if (all_match) continue;
      if (all_flip && c.boundary.size() > 0) {
        // consistently reversed cell: flip its frame orientation and its signs
        c.chart.frame.col(c.dim - 1) = -c.chart.frame.col(c.dim - 1);
        for (auto & [i, s] : c.boundary) s = -s;
        c.chunks = m.subdivide(c);
        continue;
      }
      // inconsistent: locate an offending (cell, d-2 subcell) pair for the diagnostic
      std::string where = "cell (dim " + std::to_string(d) + ", id " + std::to_string(c.id) + ")";
      for (std::size_t l = 0; l < c.boundary.size(); l++) {
        if (file_signs[l].second != c.boundary[l].second) {
          where += ", facet id " + std::to_string(c.boundary[l].first);
          break;
        }
      }
      throw MeshValidationError("orientation inconsistency at " + where + ": file signs do not define a valid relative orientation");
    }
  }
  std::string bb = m.check_boundary_of_boundary();
  if (!bb.empty()) throw MeshValidationError(bb);
  return m;
}

inline PolytopalMesh load_mesh(const std::string & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return load_mesh_json(j);
}

} // namespace ddr
