// Mesh generators: cartesian grids, simplicial (Kuhn) grids, a 2D square annulus,
// and random interior-vertex distortion.

#pragma once

#include <ddr/mesh.hpp>

namespace ddr {

namespace detail {

  /// Incremental builder deduplicating cells by their sorted vertex sets
  struct LatticeBuilder
  {
    int ambient_dim;
    std::vector<VectorXd> vertices;
    std::map<std::vector<double>, int> vertex_index;
    std::vector<std::map<std::vector<int>, int>> cell_index; // per dim >= 1
    std::vector<std::vector<std::vector<int>>> boundaries;   // per dim >= 1

    explicit LatticeBuilder(int n) : ambient_dim(n), cell_index(n + 1), boundaries(n + 1) {}

    int add_vertex(const VectorXd & x)
    {
      std::vector<double> key(x.data(), x.data() + x.size());
      auto it = vertex_index.find(key);
      if (it != vertex_index.end()) return it->second;
      int id = static_cast<int>(vertices.size());
      vertices.push_back(x);
      vertex_index[key] = id;
      return id;
    }

    int add_cell(int d, std::vector<int> vertset, const std::vector<int> & facet_ids)
    {
      std::sort(vertset.begin(), vertset.end());
      auto it = cell_index[d].find(vertset);
      if (it != cell_index[d].end()) return it->second;
      int id = static_cast<int>(boundaries[d].size());
      boundaries[d].push_back(facet_ids);
      cell_index[d][vertset] = id;
      return id;
    }

    int add_edge(int v0, int v1) { return add_cell(1, {v0, v1}, {v0, v1}); }

    /// Add a d-simplex given by vertex ids, recursively adding its faces
    int add_simplex(const std::vector<int> & vs)
    {
      int d = static_cast<int>(vs.size()) - 1;
      if (d == 0) return vs[0];
      std::vector<int> facets;
      for (int skip = 0; skip <= d; skip++) {
        std::vector<int> sub;
        for (int i = 0; i <= d; i++) {
          if (i != skip) sub.push_back(vs[i]);
        }
        facets.push_back(add_simplex(sub));
      }
      std::vector<int> key = vs;
      return add_cell(d, key, facets);
    }

    /// Add a polygon given by its vertex loop (2-cell)
    int add_polygon(const std::vector<int> & loop)
    {
      int m = static_cast<int>(loop.size());
      std::vector<int> edges;
      for (int i = 0; i < m; i++) edges.push_back(add_edge(loop[i], loop[(i + 1) % m]));
      return add_cell(2, loop, edges);
    }

    PolytopalMesh build() const
    {
      MatrixXd V(ambient_dim, vertices.size());
      for (std::size_t i = 0; i < vertices.size(); i++) V.col(i) = vertices[i];
      std::vector<std::vector<std::vector<int>>> bnd(ambient_dim + 1);
      for (int d = 1; d <= ambient_dim; d++) bnd[d] = boundaries[d];
      return PolytopalMesh::build(ambient_dim, V, bnd);
    }
  };

} // namespace detail

/// Cartesian grid of [0,1]^n with the given number of divisions per axis
inline PolytopalMesh cartesian_grid(int n, const std::vector<int> & divisions)
{
  if (n < 1 || n > 3 || static_cast<int>(divisions.size()) != n) throw std::invalid_argument("cartesian_grid: bad parameters");
  for (int d : divisions) {
    if (d < 1) throw std::invalid_argument("cartesian_grid: divisions must be >= 1");
  }
  detail::LatticeBuilder b(n);
  auto vid = [&](const std::vector<int> & idx) {
    VectorXd x(n);
    for (int i = 0; i < n; i++) x[i] = static_cast<double>(idx[i]) / divisions[i];
    return b.add_vertex(x);
  };
  if (n == 1) {
    for (int i = 0; i < divisions[0]; i++) b.add_edge(vid({i}), vid({i + 1}));
  } else if (n == 2) {
    for (int i = 0; i < divisions[0]; i++) {
      for (int j = 0; j < divisions[1]; j++) {
        b.add_polygon({vid({i, j}), vid({i + 1, j}), vid({i + 1, j + 1}), vid({i, j + 1})});
      }
    }
  } else {
    for (int i = 0; i < divisions[0]; i++) {
      for (int j = 0; j < divisions[1]; j++) {
        for (int k = 0; k < divisions[2]; k++) {
          int v000 = vid({i, j, k}), v100 = vid({i + 1, j, k}), v010 = vid({i, j + 1, k}), v110 = vid({i + 1, j + 1, k});
          int v001 = vid({i, j, k + 1}), v101 = vid({i + 1, j, k + 1}), v011 = vid({i, j + 1, k + 1}), v111 = vid({i + 1, j + 1, k + 1});
          std::vector<int> faces = {
            b.add_polygon({v000, v100, v110, v010}), // bottom
            b.add_polygon({v001, v101, v111, v011}), // top
            b.add_polygon({v000, v100, v101, v001}), // front
            b.add_polygon({v010, v110, v111, v011}), // back
            b.add_polygon({v000, v010, v011, v001}), // left
            b.add_polygon({v100, v110, v111, v101})  // right
          };
          b.add_cell(3, {v000, v100, v010, v110, v001, v101, v011, v111}, faces);
        }
      }
    }
  }
  return b.build();
}

/// Simplicial (Kuhn) grid of [0,1]^n: each grid box is split into n! simplices
inline PolytopalMesh simplicial_grid(int n, const std::vector<int> & divisions)
{
  if (n < 1 || n > 3 || static_cast<int>(divisions.size()) != n) throw std::invalid_argument("simplicial_grid: bad parameters");
  for (int d : divisions) {
    if (d < 1) throw std::invalid_argument("simplicial_grid: divisions must be >= 1");
  }
  detail::LatticeBuilder b(n);
  auto vid = [&](const std::vector<int> & idx) {
    VectorXd x(n);
    for (int i = 0; i < n; i++) x[i] = static_cast<double>(idx[i]) / divisions[i];
    return b.add_vertex(x);
  };
  std::vector<std::vector<int>> perms;
  {
    std::vector<int> p(n);
    for (int i = 0; i < n; i++) p[i] = i;
    do {
      perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  }
  std::vector<int> idx(n, 0);
  std::function<void(int)> rec = [&](int pos) {
    if (pos == n) {
      for (const auto & perm : perms) {
        std::vector<int> vs;
        std::vector<int> cur = idx;
        vs.push_back(vid(cur));
        for (int s = 0; s < n; s++) {
          cur[perm[s]] += 1;
          vs.push_back(vid(cur));
        }
        b.add_simplex(vs);
      }
      return;
    }
    for (idx[pos] = 0; idx[pos] < divisions[pos]; idx[pos]++) rec(pos + 1);
    idx[pos] = 0;
  };
  rec(0);
  return b.build();
}

/// Square with a centered square hole: outer grid N x N minus an M x M block
/// (N - M even, 1 <= M <= N - 2); Betti numbers (1, 1, 0).
inline PolytopalMesh annulus_2d(int outer_divisions, int hole_divisions)
{
  int N = outer_divisions, M = hole_divisions;
  if (N < 3 || M < 1 || M > N - 2 || (N - M) % 2 != 0) throw std::invalid_argument("annulus_2d: need N >= 3, 1 <= M <= N-2, N-M even");
  int lo = (N - M) / 2, hi = lo + M;
  detail::LatticeBuilder b(2);
  auto vid = [&](int i, int j) {
    VectorXd x(2);
    x << static_cast<double>(i) / N, static_cast<double>(j) / N;
    return b.add_vertex(x);
  };
  for (int i = 0; i < N; i++) {
    for (int j = 0; j < N; j++) {
      if (i >= lo && i < hi && j >= lo && j < hi) continue; // hole
      b.add_polygon({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return b.build();
}

/// Random perturbation of interior vertices; magnitude must stay below
/// 0.3 x (minimum edge length). Cells must remain valid polytopes (in particular
/// planar); 3D face planarity restricts this generator to simplicial meshes there.
inline PolytopalMesh distort(const PolytopalMesh & m, double magnitude, std::uint64_t seed)
{
  double min_edge = std::numeric_limits<double>::max();
  for (const auto & e : m.cells[1]) min_edge = std::min(min_edge, e.measure);
  if (!(magnitude >= 0) || magnitude >= 0.3 * min_edge) throw std::invalid_argument("distort: magnitude must be in [0, 0.3 x min edge)");
  int n = m.ambient_dim;
  // boundary vertices: those on a facet bounding exactly one top cell
  std::vector<int> facet_count(m.cells[n - 1].size(), 0);
  for (const auto & c : m.cells[n]) {
    for (const auto & [j, s] : c.boundary) facet_count[j]++;
  }
  std::vector<char> on_boundary(m.cells[0].size(), 0);
  for (std::size_t j = 0; j < facet_count.size(); j++) {
    if (facet_count[j] == 1) {
      for (int v : m.cells[n - 1][j].vertex_ids) on_boundary[v] = 1;
    }
  }
  Rng rng(seed);
  MatrixXd V = m.vertex_coords;
  for (int v = 0; v < V.cols(); v++) {
    if (on_boundary[v]) continue;
    for (int i = 0; i < n; i++) V(i, v) += rng.uniform(-magnitude, magnitude);
  }
  std::vector<std::vector<std::vector<int>>> bnd(n + 1);
  for (int d = 1; d <= n; d++) {
    bnd[d].resize(m.cells[d].size());
    for (const auto & c : m.cells[d]) {
      for (const auto & [j, s] : c.boundary) bnd[d][c.id].push_back(j);
    }
  }
  return PolytopalMesh::build(n, V, bnd);
}

} // namespace ddr
