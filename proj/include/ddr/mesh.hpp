// Polytopal mesh as a CW complex in ambient dimension n <= 3: cells of all
// dimensions with oriented boundary incidence, subcell lattices, per-cell
// frames/centers/diameters, and simplicial subdivision for quadrature.

#pragma once

#include <ddr/polynomial.hpp>

#include <set>
#include <sstream>

namespace ddr {

/// Local chart of a cell: scaled frame coordinates y = Q^T (x - center) / h
struct Chart
{
  int dim = 0;
  VectorXd center; ///< ambient point x_f
  MatrixXd frame;  ///< ambient_dim x dim, orthonormal columns; column order fixes the orientation
  double h = 1.;   ///< diameter h_f

  VectorXd to_chart(const VectorXd & x) const
  {
    if (dim == 0) return VectorXd(0);
    return frame.transpose() * (x - center) / h;
  }
  VectorXd from_chart(const VectorXd & y) const
  {
    if (dim == 0) return center;
    return center + h * (frame * y);
  }
};

/// Hodge star of the physical form underlying a chart representation.
/// Pulling back through the scaled chart turns the star of a k-form on a
/// d-cell into h^{d-2k} times the flat chart star.
inline PolyForm star_chart(const Chart & chart, const PolyForm & p)
{
  PolyForm out = star_poly(p);
  out.c *= std::pow(chart.h, chart.dim - 2 * p.degree);
  return out;
}

inline PolyForm star_chart_inv(const Chart & chart, const PolyForm & p)
{
  PolyForm out = star_chart(chart, p);
  if ((p.degree * (chart.dim - p.degree)) % 2 != 0) out.c = -out.c;
  return out;
}

/// Map expressing the chart coordinates of `outer` as an affine function of the
/// chart coordinates of `inner` (inner must lie in the affine hull of outer).
inline AffineMap chart_map(const Chart & outer, const Chart & inner)
{
  AffineMap m;
  m.shift = outer.dim == 0 ? VectorXd(0) : VectorXd(outer.frame.transpose() * (inner.center - outer.center) / outer.h);
  m.linear = (inner.h / outer.h) * (outer.frame.transpose() * inner.frame);
  return m;
}

/// Nondegenerate d-simplex used to tile a cell for quadrature
struct SimplexChunk
{
  int parent = -1;       ///< parent cell id (within its dimension)
  int dim = 0;
  MatrixXd vertices;     ///< ambient_dim x (dim+1)
  int orientation = +1;  ///< sign of the chart determinant (normalized to +1 at construction)
  double measure = 0.;   ///< d-dimensional measure
};

struct Cell
{
  int id = -1;
  int dim = 0;
  std::vector<std::pair<int, int>> boundary; ///< (subcell id of dim-1, relative orientation)
  std::vector<int> vertex_ids;               ///< sorted ids of 0-subcells
  Chart chart;
  double measure = 0.;
  std::vector<SimplexChunk> chunks;
  std::vector<std::vector<int>> sub;         ///< sub[d'] = sorted ids of d'-subcells, d' in [0, dim]
};

struct MeshValidationError : std::runtime_error
{
  explicit MeshValidationError(const std::string & msg) : std::runtime_error(msg) {}
};

class PolytopalMesh
{
public:
  int ambient_dim = 0;
  MatrixXd vertex_coords;              ///< ambient_dim x n_vertices
  std::vector<std::vector<Cell>> cells; ///< cells[d] = d-cells

  int n_cells(int d) const { return (d >= 0 && d < static_cast<int>(cells.size())) ? static_cast<int>(cells[d].size()) : 0; }
  const Cell & cell(int d, int i) const { return cells[d][i]; }
  Cell & cell(int d, int i) { return cells[d][i]; }

  double mesh_size() const
  {
    double h = 0.;
    for (const auto & c : cells[ambient_dim]) h = std::max(h, c.chart.h);
    return h;
  }

  /// Subcells of (d,i) of dimension dsub
  const std::vector<int> & subcells(int d, int i, int dsub) const
  {
    if (dsub < 0 || dsub > d) throw std::out_of_range("subcells: dimension out of range");
    return cells[d][i].sub[dsub];
  }

  /// Relative orientation of a facet; throws if fsub is not a boundary facet
  int relative_orientation(int d, int i, int fsub) const
  {
    for (const auto & [j, s] : cells[d][i].boundary) {
      if (j == fsub) return s;
    }
    throw std::out_of_range("relative_orientation: not a boundary facet");
  }

  /// For every cell f and every (d-2)-subcell g: sum over facets f' of
  /// eps_{ff'} eps_{f'g} must vanish. Returns a diagnostic naming the first
  /// offending pair, or the empty string.
  std::string check_boundary_of_boundary() const
  {
    for (int d = 2; d <= ambient_dim; d++) {
      for (const auto & f : cells[d]) {
        std::map<int, int> acc;
        for (const auto & [j, s] : f.boundary) {
          for (const auto & [g, t] : cells[d - 1][j].boundary) acc[g] += s * t;
        }
        for (const auto & [g, v] : acc) {
          if (v != 0) {
            std::ostringstream os;
            os << "boundary-of-boundary violation at cell (dim " << d << ", id " << f.id
               << ") and subcell (dim " << d - 2 << ", id " << g << ")";
            return os.str();
          }
        }
      }
    }
    return {};
  }

  // -- construction ----------------------------------------------------------

  /// Build a mesh from vertices and per-dimension boundary id lists (without signs);
  /// frames, orientations and all derived data are computed and validated here.
  static PolytopalMesh build(int ambient_dim,
                             const MatrixXd & vertices,
                             const std::vector<std::vector<std::vector<int>>> & boundaries)
  {
    PolytopalMesh m;
    m.ambient_dim = ambient_dim;
    m.vertex_coords = vertices;
    m.cells.resize(ambient_dim + 1);
    int nv = static_cast<int>(vertices.cols());
    for (int v = 0; v < nv; v++) {
      Cell c;
      c.id = v;
      c.dim = 0;
      c.vertex_ids = {v};
      c.chart.dim = 0;
      c.chart.center = vertices.col(v);
      c.chart.frame = MatrixXd::Zero(ambient_dim, 0);
      c.chart.h = 1.;
      c.measure = 1.;
      c.sub = {{v}};
      m.cells[0].push_back(std::move(c));
    }
    for (int d = 1; d <= ambient_dim; d++) {
      int nc = static_cast<int>(boundaries[d].size());
      for (int i = 0; i < nc; i++) {
        Cell c;
        c.id = i;
        c.dim = d;
        for (int j : boundaries[d][i]) c.boundary.emplace_back(j, 0);
        m.cells[d].push_back(std::move(c));
      }
    }
    m.finalize();
    return m;
  }

  /// Recompute lattice, geometry, orientations, subdivisions; validate invariants.
  void finalize()
  {
    // subcell lattice and vertex lists, by increasing dimension
    for (int d = 1; d <= ambient_dim; d++) {
      for (auto & c : cells[d]) {
        c.sub.assign(d + 1, {});
        std::vector<std::set<int>> acc(d);
        for (const auto & [j, s] : c.boundary) {
          acc[d - 1].insert(j);
          for (int dd = 0; dd < d - 1; dd++) {
            for (int g : cells[d - 1][j].sub[dd]) acc[dd].insert(g);
          }
        }
        for (int dd = 0; dd < d; dd++) c.sub[dd].assign(acc[dd].begin(), acc[dd].end());
        c.sub[d] = {c.id};
        c.vertex_ids = c.sub[0];
        if (c.vertex_ids.size() < static_cast<std::size_t>(d + 1)) {
          throw MeshValidationError("cell (dim " + std::to_string(d) + ", id " + std::to_string(c.id) + ") has too few vertices");
        }
      }
    }
    // geometry
    for (int d = 1; d <= ambient_dim; d++) {
      for (auto & c : cells[d]) compute_chart(c);
    }
    // orientations from frames
    for (int d = 1; d <= ambient_dim; d++) {
      for (auto & c : cells[d]) {
        for (auto & [j, s] : c.boundary) s = geometric_orientation(c, cells[d - 1][j]);
      }
    }
    std::string bb = check_boundary_of_boundary();
    if (!bb.empty()) throw MeshValidationError(bb);
    // subdivision and measures
    for (int d = 1; d <= ambient_dim; d++) {
      for (auto & c : cells[d]) {
        c.chunks = subdivide(c);
        c.measure = 0.;
        for (const auto & s : c.chunks) c.measure += s.measure;
      }
    }
    // every d-cell (d<n) bounds some (d+1)-cell
    for (int d = 0; d < ambient_dim; d++) {
      std::vector<char> used(cells[d].size(), 0);
      for (const auto & c : cells[d + 1]) {
        for (const auto & [j, s] : c.boundary) used[j] = 1;
      }
      for (std::size_t i = 0; i < used.size(); i++) {
        if (!used[i]) {
          throw MeshValidationError("dangling cell: (dim " + std::to_string(d) + ", id " + std::to_string(i)
                                    + ") is not on the boundary of any (dim " + std::to_string(d + 1) + ")-cell");
        }
      }
    }
  }

  /// Simplicial subdivision by coning boundary chunks to the cell center.
  /// Edges contribute a single segment; higher cells cone each boundary simplex.
  std::vector<SimplexChunk> subdivide(const Cell & c) const
  {
    std::vector<SimplexChunk> out;
    if (c.dim == 0) {
      SimplexChunk s;
      s.parent = c.id;
      s.dim = 0;
      s.vertices = c.chart.center;
      s.measure = 1.;
      out.push_back(std::move(s));
      return out;
    }
    if (c.dim == 1) {
      SimplexChunk s;
      s.parent = c.id;
      s.dim = 1;
      s.vertices.resize(ambient_dim, 2);
      // order along the frame direction
      VectorXd a = vertex_coords.col(c.vertex_ids[0]), b = vertex_coords.col(c.vertex_ids[1]);
      if (c.chart.frame.col(0).dot(b - a) < 0) std::swap(a, b);
      s.vertices.col(0) = a;
      s.vertices.col(1) = b;
      s.measure = (b - a).norm();
      out.push_back(std::move(s));
      return out;
    }
    for (const auto & [j, sgn] : c.boundary) {
      const Cell & facet = cells[c.dim - 1][j];
      for (const auto & fs : facet.chunks) {
        SimplexChunk s;
        s.parent = c.id;
        s.dim = c.dim;
        s.vertices.resize(ambient_dim, c.dim + 1);
        s.vertices.col(0) = c.chart.center;
        s.vertices.rightCols(c.dim) = fs.vertices;
        MatrixXd E(c.dim, c.dim);
        for (int k = 1; k <= c.dim; k++) {
          E.col(k - 1) = c.chart.frame.transpose() * (s.vertices.col(k) - s.vertices.col(0));
        }
        double det = E.determinant();
        double vol = std::abs(det) / factorial(c.dim);
        if (vol <= 1e-14 * std::pow(c.chart.h, c.dim)) {
          throw MeshValidationError("degenerate cone in cell (dim " + std::to_string(c.dim) + ", id "
                                    + std::to_string(c.id) + "): center coplanar with a facet chunk");
        }
        if (det < 0) {
          // normalize to positive chart orientation
          s.vertices.col(1).swap(s.vertices.col(2));
        }
        s.orientation = +1;
        s.measure = vol;
        out.push_back(std::move(s));
      }
    }
    return out;
  }

private:
  static double factorial(int n)
  {
    double r = 1.;
    for (int i = 2; i <= n; i++) r *= i;
    return r;
  }

  void compute_chart(Cell & c) const
  {
    int d = c.dim;
    int np = static_cast<int>(c.vertex_ids.size());
    VectorXd center = VectorXd::Zero(ambient_dim);
    for (int v : c.vertex_ids) center += vertex_coords.col(v);
    center /= np;
    double h = 0.;
    for (int a = 0; a < np; a++) {
      for (int b = a + 1; b < np; b++) {
        h = std::max(h, (vertex_coords.col(c.vertex_ids[a]) - vertex_coords.col(c.vertex_ids[b])).norm());
      }
    }
    MatrixXd offsets(ambient_dim, np);
    for (int a = 0; a < np; a++) offsets.col(a) = vertex_coords.col(c.vertex_ids[a]) - center;
    Eigen::JacobiSVD<MatrixXd> svd(offsets, Eigen::ComputeThinU);
    if (svd.singularValues().size() < d || svd.singularValues()[d - 1] <= 1e-12 * h) {
      throw MeshValidationError("cell (dim " + std::to_string(d) + ", id " + std::to_string(c.id)
                                + ") has degenerate affine hull");
    }
    MatrixXd frame = svd.matrixU().leftCols(d);
    // vertices must lie in the affine hull
    MatrixXd resid = offsets - frame * (frame.transpose() * offsets);
    if (resid.lpNorm<Eigen::Infinity>() > 1e-9 * h) {
      throw MeshValidationError("cell (dim " + std::to_string(d) + ", id " + std::to_string(c.id)
                                + ") has vertices off its affine hull (non-planar cell)");
    }
    // deterministic column signs
    for (int k = 0; k < d; k++) {
      int imax = 0;
      frame.col(k).cwiseAbs().maxCoeff(&imax);
      if (frame(imax, k) < 0) frame.col(k) = -frame.col(k);
    }
    if (d == ambient_dim && frame.determinant() < 0) frame.col(d - 1) = -frame.col(d - 1);
    c.chart.dim = d;
    c.chart.center = center;
    c.chart.frame = frame;
    c.chart.h = h;
  }

  /// Orientation of facet relative to cell: outward normal first.
  /// The facet frame completed by the outward normal must match the cell frame sign.
  int geometric_orientation(const Cell & c, const Cell & facet) const
  {
    int d = c.dim;
    // outward direction: component of (facet center - cell center) orthogonal to the facet hull
    VectorXd w = facet.chart.center - c.chart.center;
    w = c.chart.frame * (c.chart.frame.transpose() * w); // restrict to the cell hull
    if (facet.dim > 0) w -= facet.chart.frame * (facet.chart.frame.transpose() * w);
    double nw = w.norm();
    if (nw <= 1e-12 * c.chart.h) {
      throw MeshValidationError("cannot orient facet (dim " + std::to_string(facet.dim) + ", id "
                                + std::to_string(facet.id) + ") of cell id " + std::to_string(c.id)
                                + ": center projection degenerate");
    }
    w /= nw;
    MatrixXd B(d, d);
    B.col(0) = c.chart.frame.transpose() * w;
    for (int k = 0; k < d - 1; k++) B.col(k + 1) = c.chart.frame.transpose() * facet.chart.frame.col(k);
    double det = B.determinant();
    return (det > 0) ? +1 : -1;
  }
};

} // namespace ddr
