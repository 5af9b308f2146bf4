// The DDR space X^k_{r,h}: per-cell trimmed polynomial components with global
// indexing, interpolators, recursively constructed local discrete exterior
// derivatives and potentials, the global discrete exterior derivative, and the
// stabilized discrete L2 products.

#pragma once

#include <ddr/local_spaces.hpp>

#include <Eigen/Sparse>

namespace ddr {

using SparseMat = Eigen::SparseMatrix<double>;

/// Ordered local degrees of freedom of a cell: components on all subcells of
/// dimension k..dim, dimensions ascending, ids ascending within a dimension.
struct LocalMap
{
  std::vector<std::tuple<int, int, int, int>> entries; ///< (dim, id, local offset, size)
  int total = 0;
  std::map<std::pair<int, int>, int> slot; ///< (dim, id) -> index into entries
};

class DdrSpace
{
public:
  /// Builds component spaces and all local operators (ascending cell dimension;
  /// cells of equal dimension in parallel).
  DdrSpace(SpaceCache & cache, int k, int r, unsigned threads = 0)
    : m_cache(cache), m_mesh(cache.mesh()), m_k(k), m_r(r)
  {
    int n = m_mesh.ambient_dim;
    m_components.resize(n + 1);
    m_offsets.resize(n + 1);
    int offset = 0;
    for (int d = k; d <= n; d++) {
      int nc = m_mesh.n_cells(d);
      m_components[d].resize(nc);
      m_offsets[d].resize(nc);
      for (int i = 0; i < nc; i++) {
        m_components[d][i] = m_cache.get(d, i, SpaceTag::Trimmed, r, d - k);
        m_offsets[d][i] = offset;
        offset += m_components[d][i]->dim();
      }
    }
    m_dim = offset;
    // local maps
    m_local.resize(n + 1);
    for (int d = k; d <= n; d++) {
      m_local[d].resize(m_mesh.n_cells(d));
      for (int i = 0; i < m_mesh.n_cells(d); i++) m_local[d][i] = build_local_map(d, i);
    }
    // operators by ascending dimension (boundary potentials feed the next level)
    m_pot.resize(n + 1);
    m_der.resize(n + 1);
    m_imp.resize(n + 1);
    for (int d = k; d <= n; d++) {
      int nc = m_mesh.n_cells(d);
      m_pot[d].resize(nc);
      m_der[d].resize(nc);
      m_imp[d].resize(nc);
      parallel_for(nc, [&](std::size_t i) { build_cell_operators(d, static_cast<int>(i)); }, threads);
    }
    // discrete L2 product pieces on top cells
    m_prod.resize(m_mesh.n_cells(n));
    m_stab.resize(m_mesh.n_cells(n));
    m_stab_factor.resize(m_mesh.n_cells(n));
    parallel_for(m_mesh.n_cells(n), [&](std::size_t i) { build_product(static_cast<int>(i)); }, threads);
  }

  int k() const { return m_k; }
  int r() const { return m_r; }
  int dim() const { return m_dim; }
  const PolytopalMesh & mesh() const { return m_mesh; }
  SpaceCache & cache() const { return m_cache; }

  const SubspaceBasis & component(int d, int i) const { return *m_components[d][i]; }
  int comp_dim(int d, int i) const { return m_components[d][i]->dim(); }
  int comp_offset(int d, int i) const { return m_offsets[d][i]; }
  const LocalMap & local_map(int d, int i) const { return m_local[d][i]; }

  /// Potential matrix on cell (d,i): rows = monomial basis of P_r Lambda^k, cols = local dofs
  const MatrixXd & potential_matrix(int d, int i) const { return m_pot[d][i]; }
  /// Derivative matrix on cell (d,i), d >= k+1: rows = monomial basis of P_r Lambda^{k+1}
  const MatrixXd & derivative_matrix(int d, int i) const { return m_der[d][i]; }
  /// Improved potential matrix (k = 0 only): rows = monomial basis of P_{r+1} Lambda^0
  const MatrixXd & improved_potential_matrix(int d, int i) const { return m_imp[d][i]; }

  VectorXd gather(int d, int i, const VectorXd & global) const
  {
    const LocalMap & lm = m_local[d][i];
    VectorXd out(lm.total);
    for (const auto & [dd, id, off, sz] : lm.entries) out.segment(off, sz) = global.segment(m_offsets[dd][id], sz);
    return out;
  }

  void scatter_add(int d, int i, const VectorXd & local, VectorXd & global) const
  {
    const LocalMap & lm = m_local[d][i];
    for (const auto & [dd, id, off, sz] : lm.entries) global.segment(m_offsets[dd][id], sz) += local.segment(off, sz);
  }

  PolyForm potential(int d, int i, const VectorXd & local) const
  {
    PolyForm p(d, m_k, m_r);
    VectorXd flat = m_pot[d][i] * local;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  PolyForm local_derivative(int d, int i, const VectorXd & local) const
  {
    PolyForm p(d, m_k + 1, m_r);
    VectorXd flat = m_der[d][i] * local;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  PolyForm improved_potential(int d, int i, const VectorXd & local) const
  {
    if (m_k != 0) throw std::logic_error("improved_potential: only defined for k = 0");
    PolyForm p(d, 0, m_r + 1);
    VectorXd flat = m_imp[d][i] * local;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  // -- interpolation ---------------------------------------------------------

  /// Component of the interpolate on a single cell: trimmed projection of the
  /// (physical) star of the trace of the field
  VectorXd interpolate_component(int d, int i, const FormField & f, int quad_degree) const
  {
    const Cell & c = m_mesh.cells[d][i];
    double factor = std::pow(c.chart.h, d - 2 * m_k);
    auto fn = [&](const VectorXd & y) {
      AltForm tr = chart_trace(c, f, y);
      AltForm st = hodge_star(tr);
      st.coeffs *= factor;
      return st;
    };
    return l2_project_fn(m_cache, *m_components[d][i], fn, quad_degree);
  }

  VectorXd interpolate(const FormField & f, int quad_degree) const
  {
    if (f.degree != m_k || f.dim != m_mesh.ambient_dim) throw std::invalid_argument("interpolate: field degree mismatch");
    VectorXd out(m_dim);
    for (int d = m_k; d <= m_mesh.ambient_dim; d++) {
      for (int i = 0; i < m_mesh.n_cells(d); i++) {
        out.segment(m_offsets[d][i], comp_dim(d, i)) = interpolate_component(d, i, f, quad_degree);
      }
    }
    return out;
  }

  VectorXd interpolate_local(int d, int i, const FormField & f, int quad_degree) const
  {
    const LocalMap & lm = m_local[d][i];
    VectorXd out(lm.total);
    for (const auto & [dd, id, off, sz] : lm.entries) out.segment(off, sz) = interpolate_component(dd, id, f, quad_degree);
    return out;
  }

  /// Exact interpolation of a polynomial k-form given on the chart of cell (d,i):
  /// local dof vector over the cell and its subcells
  VectorXd interpolate_poly_local(int d, int i, const PolyForm & omega) const
  {
    const LocalMap & lm = m_local[d][i];
    const Cell & f = m_mesh.cells[d][i];
    VectorXd out(lm.total);
    for (const auto & [dd, id, off, sz] : lm.entries) {
      const Cell & sub = m_mesh.cells[dd][id];
      PolyForm tr = (dd == d && id == i) ? omega : pullback(omega, chart_map(f.chart, sub.chart));
      out.segment(off, sz) = l2_project(m_cache, *m_components[dd][id], star_chart(sub.chart, tr));
    }
    return out;
  }

  // -- global discrete exterior derivative -----------------------------------

  /// Sparse matrix of the global discrete exterior derivative into `next` (= X^{k+1})
  SparseMat global_d_matrix(const DdrSpace & next) const
  {
    if (next.k() != m_k + 1 || next.r() != m_r) throw std::invalid_argument("global_d_matrix: incompatible target space");
    std::vector<Eigen::Triplet<double>> trip;
    int n = m_mesh.ambient_dim;
    for (int d = m_k + 1; d <= n; d++) {
      for (int i = 0; i < m_mesh.n_cells(d); i++) {
        const Cell & c = m_mesh.cells[d][i];
        const SubspaceBasis & Tn = next.component(d, i);
        if (Tn.dim() == 0) continue;
        MatrixXd mass = m_cache.monomial_form_mass(d, i, d - m_k - 1, m_r);
        double hfac = std::pow(c.chart.h, d - 2 * (m_k + 1));
        MatrixXd comp = Tn.columns.transpose() * mass * (hfac * (star_flat(d, m_k + 1, m_r) * m_der[d][i]));
        const LocalMap & lm = m_local[d][i];
        for (const auto & [dd, id, off, sz] : lm.entries) {
          for (int rr = 0; rr < comp.rows(); rr++) {
            for (int cc = 0; cc < sz; cc++) {
              double v = comp(rr, off + cc);
              if (v != 0.) trip.emplace_back(next.comp_offset(d, i) + rr, m_offsets[dd][id] + cc, v);
            }
          }
        }
      }
    }
    SparseMat D(next.dim(), m_dim);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
  }

  // -- discrete L2 product ----------------------------------------------------

  /// Local product matrix on the i-th top cell (consistency + stabilization)
  const MatrixXd & local_product_matrix(int i) const { return m_prod[i]; }
  /// Stabilization part only
  const MatrixXd & local_stab_matrix(int i) const { return m_stab[i]; }

  double l2_product(const VectorXd & a, const VectorXd & b) const
  {
    int n = m_mesh.ambient_dim;
    double val = 0.;
    for (int i = 0; i < m_mesh.n_cells(n); i++) {
      VectorXd la = gather(n, i, a), lb = gather(n, i, b);
      val += la.dot(m_prod[i] * lb);
    }
    return val;
  }

  /// Stabilization seminorm, evaluated through the whitened trace-difference
  /// factors (cancellation-free: exactly zero input vectors give ~1e-13 values
  /// instead of the sqrt(eps) floor of the assembled quadratic form)
  double stab_seminorm(const VectorXd & a) const
  {
    int n = m_mesh.ambient_dim;
    double val = 0.;
    for (int i = 0; i < m_mesh.n_cells(n); i++) {
      VectorXd la = gather(n, i, a);
      val += (m_stab_factor[i] * la).squaredNorm();
    }
    return std::sqrt(val);
  }

  SparseMat product_matrix() const
  {
    std::vector<Eigen::Triplet<double>> trip;
    int n = m_mesh.ambient_dim;
    for (int i = 0; i < m_mesh.n_cells(n); i++) {
      const LocalMap & lm = m_local[n][i];
      for (const auto & [da, ia, offa, sza] : lm.entries) {
        for (const auto & [db, ib, offb, szb] : lm.entries) {
          for (int ra = 0; ra < sza; ra++) {
            for (int rb = 0; rb < szb; rb++) {
              double v = m_prod[i](offa + ra, offb + rb);
              if (v != 0.) trip.emplace_back(m_offsets[da][ia] + ra, m_offsets[db][ib] + rb, v);
            }
          }
        }
      }
    }
    SparseMat M(m_dim, m_dim);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  }

private:
  LocalMap build_local_map(int d, int i) const
  {
    LocalMap lm;
    const Cell & c = m_mesh.cells[d][i];
    for (int dd = m_k; dd <= d; dd++) {
      for (int id : c.sub[dd]) {
        int sz = m_components[dd][id]->dim();
        lm.slot[{dd, id}] = static_cast<int>(lm.entries.size());
        lm.entries.emplace_back(dd, id, lm.total, sz);
        lm.total += sz;
      }
    }
    return lm;
  }

  /// Columns of the local operator of a subcell scattered into the cell's local dofs
  MatrixXd lift_to_cell(int d, int i, int dsub, int isub, const MatrixXd & op) const
  {
    const LocalMap & lm = m_local[d][i];
    const LocalMap & ls = m_local[dsub][isub];
    MatrixXd out = MatrixXd::Zero(op.rows(), lm.total);
    for (const auto & [dd, id, off, sz] : ls.entries) {
      auto it = lm.slot.find({dd, id});
      int pos = std::get<2>(lm.entries[it->second]);
      out.middleCols(pos, sz) = op.middleCols(off, sz);
    }
    return out;
  }

  void build_cell_operators(int d, int i)
  {
    const Cell & c = m_mesh.cells[d][i];
    const SubspaceBasis & T = *m_components[d][i];
    const LocalMap & lm = m_local[d][i];
    int k = m_k, r = m_r;
    if (d == k) {
      // potential is the star-inverse of the component itself (a 0-form, so no sign)
      m_pot[d][i] = std::pow(c.chart.h, d) * (star_flat(d, 0, r) * T.columns);
      if (k == 0) {
        if (d == 0) {
          m_imp[d][i] = m_pot[d][i]; // a value; P_{r+1} and P_r coincide on points
        } else {
          m_imp[d][i] = embed_poly_rows(m_pot[d][i], d, 0, r, r + 1);
        }
      }
      return;
    }

    // ---- discrete exterior derivative -------------------------------------
    int N = poly_dim(d, r) * alt_dim(d, k + 1);
    const MatrixXd & S = m_cache.scalar_mass(d, i, r);
    const MatrixXd & Mu = star_flat(d, k + 1, r); // test forms mu_j as columns
    MatrixXd dMu = d_flat(d, d - k - 1, r, r) * Mu;
    MatrixXd Wk = m_cache.wedge_pair(d, i, k, r, r);
    double sinv = ((k * (d - k)) % 2 ? -1. : 1.) * std::pow(c.chart.h, 2 * k - d);
    MatrixXd U = sinv * (star_flat(d, d - k, r) * T.columns); // star^{-1}_phys of the component basis
    double sgn = ((k + 1) % 2 == 0) ? 1. : -1.;               // (-1)^{k+1}
    MatrixXd rhs = MatrixXd::Zero(N, lm.total);
    {
      MatrixXd own = sgn * (dMu.transpose() * (Wk.transpose() * U));
      int pos = std::get<2>(lm.entries[lm.slot.at({d, i})]);
      rhs.middleCols(pos, T.dim()) += own;
    }
    for (const auto & [j, eps] : c.boundary) {
      MatrixXd TrMu = m_cache.trace_matrix(d, i, d - 1, j, d - k - 1, r) * Mu;
      MatrixXd Wb = m_cache.wedge_pair(d - 1, j, k, r, r);
      MatrixXd contrib = eps * (TrMu.transpose() * (Wb.transpose() * m_pot[d - 1][j]));
      rhs += lift_to_cell(d, i, d - 1, j, contrib);
    }
    // Gram of the monomial basis against its star-test realization: I (x) S
    Eigen::LLT<MatrixXd> llt(S);
    MatrixXd der(N, lm.total);
    int nm = poly_dim(d, r);
    for (int a = 0; a < alt_dim(d, k + 1); a++) {
      der.middleRows(a * nm, nm) = llt.solve(rhs.middleRows(a * nm, nm));
    }
    m_der[d][i] = der;

    // ---- potential ----------------------------------------------------------
    auto Kmu = m_cache.get(d, i, SpaceTag::Koszul, r + 1, d - k - 1);
    auto Knu = m_cache.get(d, i, SpaceTag::Koszul, r, d - k);
    int Np = poly_dim(d, r) * alt_dim(d, k);
    MatrixXd A(Np, Np);
    MatrixXd B = MatrixXd::Zero(Np, lm.total);
    MatrixXd dKmu = d_flat(d, d - k - 1, r + 1, r) * Kmu->columns;
    A.topRows(Kmu->dim()) = sgn * (Wk * dKmu).transpose();
    A.bottomRows(Knu->dim()) = sgn * (Wk * Knu->columns).transpose();
    // rhs for mu tests: int d omega ^ mu - boundary potentials
    if (Kmu->dim() > 0) {
      MatrixXd Wp = m_cache.wedge_pair(d, i, k + 1, r, r + 1);
      B.topRows(Kmu->dim()) += Kmu->columns.transpose() * (Wp.transpose() * m_der[d][i]);
      for (const auto & [j, eps] : c.boundary) {
        MatrixXd TrK = m_cache.trace_matrix(d, i, d - 1, j, d - k - 1, r + 1) * Kmu->columns;
        MatrixXd Wb = m_cache.wedge_pair(d - 1, j, k, r, r + 1);
        MatrixXd contrib = -eps * (TrK.transpose() * (Wb.transpose() * m_pot[d - 1][j]));
        B.topRows(Kmu->dim()) += lift_to_cell(d, i, d - 1, j, contrib);
      }
    }
    // rhs for nu tests: the component itself
    if (Knu->dim() > 0) {
      MatrixXd own = sgn * (Knu->columns.transpose() * (Wk.transpose() * U));
      int pos = std::get<2>(lm.entries[lm.slot.at({d, i})]);
      MatrixXd rows = MatrixXd::Zero(Knu->dim(), lm.total);
      rows.middleCols(pos, T.dim()) = own;
      B.bottomRows(Knu->dim()) = rows;
    }
    m_pot[d][i] = guarded_solve(A, B, "potential system on cell dim " + std::to_string(d) + " id " + std::to_string(i));

    // ---- improved potential for k = 0 --------------------------------------
    if (k == 0) {
      auto Kmu2 = m_cache.get(d, i, SpaceTag::Koszul, r + 2, d - 1);
      MatrixXd dKmu2 = d_flat(d, d - 1, r + 2, r + 1) * Kmu2->columns;
      MatrixXd W0 = m_cache.wedge_pair(d, i, 0, r + 1, r + 1);
      MatrixXd Ai = -(W0 * dKmu2).transpose();
      MatrixXd Bi = MatrixXd::Zero(Kmu2->dim(), lm.total);
      MatrixXd W1 = m_cache.wedge_pair(d, i, 1, r, r + 2);
      Bi = Kmu2->columns.transpose() * (W1.transpose() * m_der[d][i]);
      for (const auto & [j, eps] : c.boundary) {
        MatrixXd TrK = m_cache.trace_matrix(d, i, d - 1, j, d - 1, r + 2) * Kmu2->columns;
        MatrixXd Wb = m_cache.wedge_pair(d - 1, j, 0, r + 1, r + 2);
        MatrixXd contrib = -eps * (TrK.transpose() * (Wb.transpose() * m_imp[d - 1][j]));
        Bi += lift_to_cell(d, i, d - 1, j, contrib);
      }
      m_imp[d][i] = guarded_solve(Ai, Bi, "improved potential on cell dim " + std::to_string(d) + " id " + std::to_string(i));
    }
  }

  static MatrixXd embed_poly_rows(const MatrixXd & M, int d, int l, int r_from, int r_to)
  {
    int nm_from = poly_dim(d, r_from), nm_to = poly_dim(d, r_to), na = alt_dim(d, l);
    MatrixXd out = MatrixXd::Zero(nm_to * na, M.cols());
    for (int a = 0; a < na; a++) out.middleRows(a * nm_to, nm_from) = M.middleRows(a * nm_from, nm_from);
    return out;
  }

  MatrixXd guarded_solve(const MatrixXd & A, const MatrixXd & B, const std::string & context)
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
    double cond = (diag.size() && diag.minCoeff() > 0.) ? diag.maxCoeff() / diag.minCoeff()
                                                        : std::numeric_limits<double>::infinity();
    if (cond > 1e12) throw ConditioningError(context + ": condition ~ " + std::to_string(cond));
    return qr.solve(B);
  }

  void build_product(int i)
  {
    int n = m_mesh.ambient_dim;
    if (m_k > n) return;
    const Cell & c = m_mesh.cells[n][i];
    const LocalMap & lm = m_local[n][i];
    MatrixXd massk = m_cache.monomial_form_mass(n, i, m_k, m_r);
    MatrixXd P = m_pot[n][i];
    MatrixXd consistency = P.transpose() * massk * P;
    // whitened trace-difference factors: stab = factor^T factor
    int nrows = 0;
    for (int dp = m_k; dp <= n - 1; dp++) {
      for (int id : c.sub[dp]) nrows += poly_dim(dp, m_r) * alt_dim(dp, m_k);
    }
    MatrixXd factor(nrows, lm.total);
    int at = 0;
    for (int dp = m_k; dp <= n - 1; dp++) {
      double weight = std::pow(c.chart.h, n - dp);
      for (int id : c.sub[dp]) {
        MatrixXd diff = m_cache.trace_matrix(n, i, dp, id, m_k, m_r) * P
                        - lift_to_cell(n, i, dp, id, m_pot[dp][id]);
        MatrixXd msub = m_cache.monomial_form_mass(dp, id, m_k, m_r);
        Eigen::LLT<MatrixXd> llt(msub);
        int nr = static_cast<int>(msub.rows());
        factor.middleRows(at, nr) = std::sqrt(weight) * (MatrixXd(llt.matrixU()) * diff);
        at += nr;
      }
    }
    m_stab_factor[i] = factor;
    m_stab[i] = factor.transpose() * factor;
    m_prod[i] = consistency + m_stab[i];
  }

  SpaceCache & m_cache;
  const PolytopalMesh & m_mesh;
  int m_k, m_r, m_dim = 0;
  std::vector<std::vector<std::shared_ptr<const SubspaceBasis>>> m_components;
  std::vector<std::vector<int>> m_offsets;
  std::vector<std::vector<LocalMap>> m_local;
  std::vector<std::vector<MatrixXd>> m_pot, m_der, m_imp;
  std::vector<MatrixXd> m_prod, m_stab, m_stab_factor;
};

} // namespace ddr
