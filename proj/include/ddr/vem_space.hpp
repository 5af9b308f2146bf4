// The VEM-inspired space V^k_{r,h}: Koszul-pair components carrying traces and
// exterior derivatives, its interpolator, local/global discrete exterior
// derivatives, discrete potentials valued in trimmed spaces of degree r+1, and
// the reduction/extension maps to the lowest-order DDR complex.

#pragma once

#include <ddr/ddr_maps.hpp>

namespace ddr {

class VemSpace
{
public:
  VemSpace(SpaceCache & cache, int k, int r, unsigned threads = 0)
    : m_cache(cache), m_mesh(cache.mesh()), m_k(k), m_r(r)
  {
    int n = m_mesh.ambient_dim;
    m_comp.resize(n + 1);
    m_offsets.resize(n + 1);
    int offset = 0;
    for (int d = k; d <= n; d++) {
      int nc = m_mesh.n_cells(d);
      m_comp[d].resize(nc);
      m_offsets[d].resize(nc);
      for (int i = 0; i < nc; i++) {
        if (d == k) {
          m_comp[d][i] = {m_cache.get(d, i, SpaceTag::Full, r, 0), nullptr};
        } else if (d == k + 1) {
          m_comp[d][i] = {m_cache.get(d, i, SpaceTag::Koszul, r + 1, 1), m_cache.get(d, i, SpaceTag::Koszul, r, 0)};
        } else {
          m_comp[d][i] = {m_cache.get(d, i, SpaceTag::Koszul, r + 1, d - k), m_cache.get(d, i, SpaceTag::Koszul, r + 1, d - k - 1)};
        }
        m_offsets[d][i] = {offset, offset + slot_dim(d, i, 0)};
        offset += slot_dim(d, i, 0) + slot_dim(d, i, 1);
      }
    }
    m_dim = offset;
    m_local.resize(n + 1);
    for (int d = k; d <= n; d++) {
      m_local[d].resize(m_mesh.n_cells(d));
      for (int i = 0; i < m_mesh.n_cells(d); i++) m_local[d][i] = build_local_map(d, i);
    }
    m_der1.resize(m_mesh.n_cells(std::min(k + 1, n)));
    if (k + 1 <= n) {
      parallel_for(m_mesh.n_cells(k + 1), [&](std::size_t i) { build_derivative(static_cast<int>(i)); }, threads);
    }
    m_pot.resize(n + 1);
    for (int d = k; d <= n; d++) {
      m_pot[d].resize(m_mesh.n_cells(d));
      parallel_for(m_mesh.n_cells(d), [&](std::size_t i) { build_potential(d, static_cast<int>(i)); }, threads);
    }
  }

  int k() const { return m_k; }
  int r() const { return m_r; }
  int dim() const { return m_dim; }
  const PolytopalMesh & mesh() const { return m_mesh; }
  SpaceCache & cache() const { return m_cache; }

  const SubspaceBasis & component(int d, int i, int slot) const { return *m_comp[d][i][slot]; }
  int slot_dim(int d, int i, int slot) const { return m_comp[d][i][slot] ? m_comp[d][i][slot]->dim() : 0; }
  int slot_offset(int d, int i, int slot) const { return slot == 0 ? m_offsets[d][i].first : m_offsets[d][i].second; }
  const LocalMap & local_map(int d, int i) const { return m_local[d][i]; }

  VectorXd gather(int d, int i, const VectorXd & global) const
  {
    const LocalMap & lm = m_local[d][i];
    VectorXd out(lm.total);
    for (const auto & [dd, id, off, sz] : lm.entries) {
      out.segment(off, sz) = global.segment(m_offsets[dd][id].first, sz);
    }
    return out;
  }

  /// Potential matrix: rows = monomial basis of P_{r+1} Lambda^k (the trimmed
  /// potential embedded), cols = local dofs
  const MatrixXd & potential_matrix(int d, int i) const { return m_pot[d][i]; }

  PolyForm potential(int d, int i, const VectorXd & local) const
  {
    PolyForm p(d, m_k, m_r + 1);
    VectorXd flat = m_pot[d][i] * local;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  /// Discrete exterior derivative on a (k+1)-cell: a top-degree form of degree r
  const MatrixXd & derivative_matrix_k1(int i) const { return m_der1[i]; }

  PolyForm local_derivative_k1(int i, const VectorXd & local) const
  {
    PolyForm p(m_k + 1, m_k + 1, m_r);
    VectorXd flat = m_der1[i] * local;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  // -- interpolation ---------------------------------------------------------

  VectorXd interpolate_component(int d, int i, const FormField & f, int slot, int quad_degree) const
  {
    const Cell & c = m_mesh.cells[d][i];
    if (!m_comp[d][i][slot]) return VectorXd(0);
    if (slot == 0) {
      double factor = std::pow(c.chart.h, d - 2 * m_k);
      auto fn = [&](const VectorXd & y) {
        AltForm st = hodge_star(chart_trace(c, f, y));
        st.coeffs *= factor;
        return st;
      };
      return l2_project_fn(m_cache, *m_comp[d][i][slot], fn, quad_degree);
    }
    if (!f.has_derivative()) throw std::invalid_argument("vem interpolate: field has no derivative evaluator");
    FormField df;
    df.dim = f.dim;
    df.degree = f.degree + 1;
    df.value = f.derivative;
    double factor = std::pow(c.chart.h, d - 2 * (m_k + 1));
    auto fn = [&](const VectorXd & y) {
      AltForm st = hodge_star(chart_trace(c, df, y));
      st.coeffs *= factor;
      return st;
    };
    return l2_project_fn(m_cache, *m_comp[d][i][slot], fn, quad_degree);
  }

  VectorXd interpolate(const FormField & f, int quad_degree) const
  {
    VectorXd out(m_dim);
    for (int d = m_k; d <= m_mesh.ambient_dim; d++) {
      for (int i = 0; i < m_mesh.n_cells(d); i++) {
        for (int slot = 0; slot <= 1; slot++) {
          if (slot_dim(d, i, slot) > 0) {
            out.segment(slot_offset(d, i, slot), slot_dim(d, i, slot)) = interpolate_component(d, i, f, slot, quad_degree);
          }
        }
      }
    }
    return out;
  }

  /// Exact interpolation of a polynomial k-form on the chart of cell (d,i)
  VectorXd interpolate_poly_local(int d, int i, const PolyForm & omega) const
  {
    const LocalMap & lm = m_local[d][i];
    const Cell & f = m_mesh.cells[d][i];
    VectorXd out(lm.total);
    for (const auto & [key, idx] : lm.slot) {
      auto [dd, id] = key;
      (void)idx;
      const Cell & sub = m_mesh.cells[dd][id];
      PolyForm tr = (dd == d && id == i) ? omega : pullback(omega, chart_map(f.chart, sub.chart));
      if (slot_dim(dd, id, 0) > 0) {
        int off = local_offset(d, i, dd, id, 0);
        out.segment(off, slot_dim(dd, id, 0)) = l2_project(m_cache, *m_comp[dd][id][0], star_chart(sub.chart, tr));
      }
      if (slot_dim(dd, id, 1) > 0) {
        int off = local_offset(d, i, dd, id, 1);
        PolyForm dtr = exterior_derivative(tr);
        out.segment(off, slot_dim(dd, id, 1)) = l2_project(m_cache, *m_comp[dd][id][1], star_chart(sub.chart, dtr));
      }
    }
    return out;
  }

  /// Offset of a slot of a subcell inside the local dof vector of cell (d,i)
  int local_offset(int d, int i, int dsub, int isub, int slot) const
  {
    const LocalMap & lm = m_local[d][i];
    int at = lm.slot.at({dsub, isub});
    int off = std::get<2>(lm.entries[at]);
    return slot == 0 ? off : off + slot_dim(dsub, isub, 0);
  }

  // -- global discrete exterior derivative -----------------------------------

  SparseMat global_d_matrix(const VemSpace & next) const
  {
    if (next.k() != m_k + 1 || next.r() != m_r) throw std::invalid_argument("vem global_d_matrix: incompatible target space");
    std::vector<Eigen::Triplet<double>> trip;
    int n = m_mesh.ambient_dim;
    // (k+1)-cells: star of the local derivative, exactly in P_r Lambda^0
    for (int i = 0; i < m_mesh.n_cells(m_k + 1); i++) {
      const Cell & c = m_mesh.cells[m_k + 1][i];
      const SubspaceBasis & B = next.component(m_k + 1, i, 0);
      int dd = m_k + 1;
      double hfac = std::pow(c.chart.h, dd - 2 * (m_k + 1)); // = h^{-dd}... star of a top form
      MatrixXd starD = hfac * (star_flat(dd, m_k + 1, m_r) * m_der1[i]);
      // coefficients in the orthonormal basis of P_r Lambda^0
      MatrixXd mass = m_cache.monomial_form_mass(dd, i, 0, m_r);
      MatrixXd comp = B.columns.transpose() * mass * starD;
      const LocalMap & lm = m_local[dd][i];
      for (const auto & [d0, i0, off, sz] : lm.entries) {
        for (int rr = 0; rr < comp.rows(); rr++) {
          for (int cc = 0; cc < sz; cc++) {
            double v = comp(rr, off + cc);
            if (v != 0.) trip.emplace_back(next.slot_offset(dd, i, 0) + rr, m_offsets[d0][i0].first + cc, v);
          }
        }
      }
    }
    // higher cells: the derivative component moves to the first slot, second slot zero
    for (int d = m_k + 2; d <= n; d++) {
      for (int i = 0; i < m_mesh.n_cells(d); i++) {
        int sz = slot_dim(d, i, 1);
        for (int c0 = 0; c0 < sz; c0++) trip.emplace_back(next.slot_offset(d, i, 0) + c0, slot_offset(d, i, 1) + c0, 1.);
      }
    }
    SparseMat D(next.dim(), m_dim);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
  }

  /// Local restriction of the global derivative on cell (d,i), as a matrix
  /// into the local dofs of `next` on the same cell
  MatrixXd global_d_local(const VemSpace & next, int d, int i) const
  {
    const LocalMap & lnext = next.local_map(d, i);
    const LocalMap & lm = m_local[d][i];
    MatrixXd out = MatrixXd::Zero(lnext.total, lm.total);
    for (const auto & [key, idx] : lnext.slot) {
      auto [dd, id] = key;
      (void)idx;
      if (dd == m_k + 1) {
        const Cell & c = m_mesh.cells[dd][id];
        double hfac = std::pow(c.chart.h, dd - 2 * (m_k + 1));
        MatrixXd starD = hfac * (star_flat(dd, m_k + 1, m_r) * m_der1[id]);
        MatrixXd mass = m_cache.monomial_form_mass(dd, id, 0, m_r);
        MatrixXd comp = next.component(dd, id, 0).columns.transpose() * mass * starD;
        // scatter the sub-local columns into the cell-local columns
        const LocalMap & lsub = m_local[dd][id];
        int rowoff = next.local_offset(d, i, dd, id, 0);
        for (const auto & [d0, i0, off0, sz0] : lsub.entries) {
          int pos = std::get<2>(lm.entries[lm.slot.at({d0, i0})]);
          out.block(rowoff, pos, comp.rows(), sz0) = comp.middleCols(off0, sz0);
        }
      } else if (dd >= m_k + 2) {
        int sz = slot_dim(dd, id, 1);
        int rowoff = next.local_offset(d, i, dd, id, 0);
        int coloff = local_offset(d, i, dd, id, 1);
        out.block(rowoff, coloff, sz, sz) = MatrixXd::Identity(sz, sz);
      }
    }
    return out;
  }

  /// Discrete exterior derivative on cells of dimension >= k+2, via the
  /// potential of the next space applied to the restricted global derivative
  PolyForm local_derivative_high(const VemSpace & next, int d, int i, const VectorXd & local) const
  {
    VectorXd dloc = global_d_local(next, d, i) * local;
    return next.potential(d, i, dloc);
  }

private:
  LocalMap build_local_map(int d, int i) const
  {
    LocalMap lm;
    const Cell & c = m_mesh.cells[d][i];
    for (int dd = m_k; dd <= d; dd++) {
      for (int id : c.sub[dd]) {
        int sz = slot_dim(dd, id, 0) + slot_dim(dd, id, 1);
        lm.slot[{dd, id}] = static_cast<int>(lm.entries.size());
        lm.entries.emplace_back(dd, id, lm.total, sz);
        lm.total += sz;
      }
    }
    return lm;
  }

  void build_derivative(int i)
  {
    int d = m_k + 1, r = m_r;
    const Cell & c = m_mesh.cells[d][i];
    const LocalMap & lm = m_local[d][i];
    // tests mu + nu spanning P_r Lambda^0: constants and K_r^0
    auto Knu = m_cache.get(d, i, SpaceTag::Koszul, r, 0);
    int N = poly_dim(d, r);
    MatrixXd W = m_cache.wedge_pair(d, i, d, r, r); // top-form rows, 0-form cols
    MatrixXd A(N, N);
    MatrixXd ones = MatrixXd::Zero(N, 1);
    ones(0, 0) = 1.; // constant 1 in the monomial basis
    A.topRows(1) = (W * ones).transpose();
    if (Knu->dim() > 0) A.bottomRows(Knu->dim()) = (W * Knu->columns).transpose();
    MatrixXd B = MatrixXd::Zero(N, lm.total);
    // boundary term against the constant test
    for (int j : c.sub[m_k]) {
      const Cell & fp = m_mesh.cells[m_k][j];
      int eps = 0;
      for (const auto & [jj, ee] : c.boundary) {
        if (jj == j) eps = ee;
      }
      // star^{-1} of the 0-form component on the k-cell is a top k-form there
      const SubspaceBasis & B0 = component(m_k, j, 0);
      double hfac = std::pow(fp.chart.h, m_k);
      MatrixXd P0 = hfac * (star_flat(m_k, 0, r) * B0.columns); // star^{-1}_phys
      // integrate against the (constant) trace of mu = 1
      MatrixXd Wb = m_cache.wedge_pair(m_k, j, m_k, r, 0);
      MatrixXd row = (P0.transpose() * Wb * MatrixXd::Ones(1, 1)).transpose(); // 1 x dim
      int off = local_offset(d, i, m_k, j, 0);
      B.block(0, off, 1, B0.dim()) += eps * row;
    }
    // volume term against nu
    if (Knu->dim() > 0) {
      const SubspaceBasis & B1 = component(d, i, 1); // K_r^0 component D_{omega,f}
      double hfac = std::pow(c.chart.h, d); // star^{-1}_phys on 0-forms
      MatrixXd SD = hfac * (star_flat(d, 0, r) * B1.columns); // top d-forms
      MatrixXd Wdt = m_cache.wedge_pair(d, i, d, r, r);
      MatrixXd rows = (Knu->columns.transpose() * Wdt.transpose() * SD);
      int off = local_offset(d, i, d, i, 1);
      B.block(1, off, Knu->dim(), B1.dim()) = rows;
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    m_der1[i] = qr.solve(B);
  }

  void build_potential(int d, int i)
  {
    int k = m_k, r = m_r;
    const Cell & c = m_mesh.cells[d][i];
    const LocalMap & lm = m_local[d][i];
    if (d == k) {
      const SubspaceBasis & B0 = component(d, i, 0);
      MatrixXd P = std::pow(c.chart.h, d) * (star_flat(d, 0, r) * B0.columns);
      m_pot[d][i] = embed_rows(P, d, k, r, r + 1);
      return;
    }
    double sgn = ((k + 1) % 2 == 0) ? 1. : -1.;
    auto Kmu = m_cache.get(d, i, SpaceTag::Koszul, r + 1, d - k - 1);
    auto Knu = m_cache.get(d, i, SpaceTag::Koszul, r + 1, d - k);
    auto Ttrim = m_cache.get(d, i, SpaceTag::Trimmed, r + 1, k);
    int N = Ttrim->dim();
    int mrows = Kmu->dim() + Knu->dim();
    MatrixXd Wk = m_cache.wedge_pair(d, i, k, r + 1, r + 1);
    MatrixXd A(mrows, N);
    MatrixXd dKmu = d_flat(d, d - k - 1, r + 1, r + 1) * Kmu->columns;
    A.topRows(Kmu->dim()) = sgn * (Wk * dKmu).transpose() * Ttrim->columns;
    A.bottomRows(Knu->dim()) = sgn * (Wk * Knu->columns).transpose() * Ttrim->columns;
    MatrixXd B = MatrixXd::Zero(mrows, lm.total);
    // star^{-1} Dtilde ^ mu
    if (Kmu->dim() > 0) {
      if (d == k + 1) {
        // Dtilde = star d_{r,f} omega: star^{-1} star d = d
        MatrixXd Wp = m_cache.wedge_pair(d, i, k + 1, r, r + 1);
        B.topRows(Kmu->dim()) = Kmu->columns.transpose() * (Wp.transpose() * m_der1[i]);
      } else {
        const SubspaceBasis & B1 = component(d, i, 1); // K_{r+1}^{d-k-1}
        double sinv = (((d - k - 1) * (k + 1)) % 2 ? -1. : 1.) * std::pow(c.chart.h, 2 * (k + 1) - d);
        MatrixXd SD = sinv * (star_flat(d, d - k - 1, r + 1) * B1.columns); // (k+1)-forms
        MatrixXd Wp = m_cache.wedge_pair(d, i, k + 1, r + 1, r + 1);
        MatrixXd rows = Kmu->columns.transpose() * (Wp.transpose() * SD);
        int off = local_offset(d, i, d, i, 1);
        B.block(0, off, Kmu->dim(), B1.dim()) += rows;
      }
      // boundary potentials
      for (const auto & [j, eps] : c.boundary) {
        MatrixXd TrK = m_cache.trace_matrix(d, i, d - 1, j, d - k - 1, r + 1) * Kmu->columns;
        MatrixXd Wb = m_cache.wedge_pair(d - 1, j, k, r + 1, r + 1);
        MatrixXd contrib = -eps * (TrK.transpose() * (Wb.transpose() * m_pot[d - 1][j]));
        // scatter facet-local columns into cell-local columns
        const LocalMap & ls = m_local[d - 1][j];
        for (const auto & [d0, i0, off0, sz0] : ls.entries) {
          int pos = std::get<2>(lm.entries[lm.slot.at({d0, i0})]);
          B.block(0, pos, Kmu->dim(), sz0) += contrib.middleCols(off0, sz0);
        }
      }
    }
    // star^{-1} omega_f ^ nu
    if (Knu->dim() > 0) {
      const SubspaceBasis & B0 = component(d, i, 0); // K_{r+1}^{d-k}
      double sinv = (((d - k) * k) % 2 ? -1. : 1.) * std::pow(c.chart.h, 2 * k - d);
      MatrixXd U = sinv * (star_flat(d, d - k, r + 1) * B0.columns);
      MatrixXd rows = sgn * (Knu->columns.transpose() * (Wk.transpose() * U));
      int off = local_offset(d, i, d, i, 0);
      B.block(Kmu->dim(), off, Knu->dim(), B0.dim()) = rows;
    }

    // The moment conditions above only span P_{r+1}^- of the complementary
    // degree, which is smaller than the unknown trimmed space for k < d/2.
    // The remaining directions are fixed by least-squares matching of the
    // facet traces against the already-built boundary potentials, with the
    // moment conditions enforced exactly.
    MatrixXd Arows = A;
    Eigen::FullPivLU<MatrixXd> lu(Arows);
    lu.setThreshold(1e-12);
    int q = N - static_cast<int>(lu.rank());
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Arows);
    MatrixXd c0 = cod.solve(B); // minimum-norm particular solution
    MatrixXd coeffs = c0;
    if (q > 0) {
      MatrixXd kernel = lu.kernel(); // N x q basis of the constraint kernel
      // stack facet-trace least squares rows (whitened by the facet mass)
      int trows = 0;
      for (const auto & [j, eps] : c.boundary) trows += poly_dim(d - 1, r + 1) * alt_dim(d - 1, k);
      MatrixXd Tb(trows, N);
      MatrixXd tb = MatrixXd::Zero(trows, lm.total);
      int at = 0;
      for (const auto & [j, eps] : c.boundary) {
        int nr = poly_dim(d - 1, r + 1) * alt_dim(d - 1, k);
        MatrixXd mass = m_cache.monomial_form_mass(d - 1, j, k, r + 1);
        Eigen::LLT<MatrixXd> llt(mass);
        MatrixXd Tr = m_cache.trace_matrix(d, i, d - 1, j, k, r + 1);
        Tb.middleRows(at, nr) = llt.matrixU() * (Tr * Ttrim->columns);
        MatrixXd Pw = llt.matrixU() * m_pot[d - 1][j];
        const LocalMap & ls = m_local[d - 1][j];
        for (const auto & [d0, i0, off0, sz0] : ls.entries) {
          int pos = std::get<2>(lm.entries[lm.slot.at({d0, i0})]);
          tb.block(at, pos, nr, sz0) += Pw.middleCols(off0, sz0);
        }
        at += nr;
      }
      MatrixXd TK = Tb * kernel;
      Eigen::ColPivHouseholderQR<MatrixXd> qrk(TK);
      if (qrk.rank() < q) {
        throw ConditioningError("vem potential completion rank-deficient on cell dim " + std::to_string(d)
                                + " id " + std::to_string(i));
      }
      MatrixXd z = qrk.solve(tb - Tb * c0);
      coeffs = c0 + kernel * z;
    }
    m_pot[d][i] = Ttrim->columns * coeffs;
  }

  static MatrixXd embed_rows(const MatrixXd & M, int d, int l, int r_from, int r_to)
  {
    int nm_from = poly_dim(d, r_from), nm_to = poly_dim(d, r_to), na = alt_dim(d, l);
    MatrixXd out = MatrixXd::Zero(nm_to * na, M.cols());
    for (int a = 0; a < na; a++) out.middleRows(a * nm_to, nm_from) = M.middleRows(a * nm_from, nm_from);
    return out;
  }

  SpaceCache & m_cache;
  const PolytopalMesh & m_mesh;
  int m_k, m_r, m_dim = 0;
  std::vector<std::vector<std::array<std::shared_ptr<const SubspaceBasis>, 2>>> m_comp;
  std::vector<std::vector<std::pair<int, int>>> m_offsets;
  std::vector<std::vector<LocalMap>> m_local;
  std::vector<MatrixXd> m_der1;
  std::vector<std::vector<MatrixXd>> m_pot;
};

class VemComplex
{
public:
  VemComplex(SpaceCache & cache, int r, unsigned threads = 0) : m_r(r)
  {
    int n = cache.mesh().ambient_dim;
    for (int k = 0; k <= n; k++) m_spaces.push_back(std::make_unique<VemSpace>(cache, k, r, threads));
    for (int k = 0; k < n; k++) m_d.push_back(m_spaces[k]->global_d_matrix(*m_spaces[k + 1]));
  }

  int r() const { return m_r; }
  int n() const { return static_cast<int>(m_spaces.size()) - 1; }
  const VemSpace & space(int k) const { return *m_spaces[k]; }
  const SparseMat & d_matrix(int k) const { return m_d[k]; }

private:
  int m_r;
  std::vector<std::unique_ptr<VemSpace>> m_spaces;
  std::vector<SparseMat> m_d;
};

/// Reduction V^k_r -> X^k_0: averages of the 0-form components on k-cells
inline SparseMat vem_reduction_matrix(const VemSpace & V, const DdrSpace & X0)
{
  if (X0.r() != 0 || X0.k() != V.k()) throw std::invalid_argument("vem_reduction_matrix: target must be DDR at degree 0");
  SpaceCache & cache = V.cache();
  int k = V.k();
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < V.mesh().n_cells(k); i++) {
    const SubspaceBasis & Bv = V.component(k, i, 0);
    const SubspaceBasis & B0 = X0.component(k, i);
    for (int j = 0; j < Bv.dim(); j++) {
      VectorXd c = l2_project(cache, B0, Bv.element(j));
      for (int rr = 0; rr < c.size(); rr++) {
        if (c[rr] != 0.) trip.emplace_back(X0.comp_offset(k, i) + rr, V.slot_offset(k, i, 0) + j, c[rr]);
      }
    }
  }
  SparseMat R(X0.dim(), V.dim());
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

/// Extension X^k_0 -> V^k_r built from the DDR0 potentials and derivatives
inline SparseMat vem_extension_matrix(const VemSpace & V, const DdrSpace & X0)
{
  if (X0.r() != 0 || X0.k() != V.k()) throw std::invalid_argument("vem_extension_matrix: source must be DDR at degree 0");
  SpaceCache & cache = V.cache();
  const PolytopalMesh & mesh = V.mesh();
  int k = V.k(), n = mesh.ambient_dim;
  std::vector<Eigen::Triplet<double>> trip;
  auto scatter = [&](int row0, const MatrixXd & comp, int d, int i) {
    const LocalMap & l0 = X0.local_map(d, i);
    for (const auto & [d0, i0, off0, sz0] : l0.entries) {
      for (int rr = 0; rr < comp.rows(); rr++) {
        for (int cc = 0; cc < sz0; cc++) {
          double v = comp(rr, off0 + cc);
          if (v != 0.) trip.emplace_back(row0 + rr, X0.comp_offset(d0, i0) + cc, v);
        }
      }
    }
  };
  for (int i = 0; i < mesh.n_cells(k); i++) {
    // eta_f itself, embedded into P_r Lambda^0
    const SubspaceBasis & Bv = V.component(k, i, 0);
    const SubspaceBasis & B0 = X0.component(k, i);
    MatrixXd comp(Bv.dim(), B0.dim());
    for (int j = 0; j < B0.dim(); j++) comp.col(j) = l2_project(cache, Bv, B0.element(j));
    MatrixXd lifted = MatrixXd::Zero(Bv.dim(), X0.local_map(k, i).total);
    int pos = std::get<2>(X0.local_map(k, i).entries[X0.local_map(k, i).slot.at({k, i})]);
    lifted.middleCols(pos, B0.dim()) = comp;
    scatter(V.slot_offset(k, i, 0), lifted, k, i);
  }
  for (int d = k + 1; d <= n; d++) {
    for (int i = 0; i < mesh.n_cells(d); i++) {
      const Cell & c = mesh.cells[d][i];
      // slot 0: projection of star P^0 eta on the Koszul space
      {
        const SubspaceBasis & Bv = V.component(d, i, 0);
        if (Bv.dim() > 0) {
          double hfac = std::pow(c.chart.h, d - 2 * k);
          MatrixXd starP = hfac * (star_flat(d, k, 0) * X0.potential_matrix(d, i));
          MatrixXd mass = cache.monomial_form_mass(d, i, d - k, Bv.enclosing_deg);
          MatrixXd starP_embedded = MatrixXd::Zero(mass.rows(), starP.cols());
          int nm0 = poly_dim(d, 0), nmr = poly_dim(d, Bv.enclosing_deg);
          for (int a = 0; a < alt_dim(d, d - k); a++) starP_embedded.middleRows(a * nmr, nm0) = starP.middleRows(a * nm0, nm0);
          MatrixXd comp = Bv.columns.transpose() * mass * starP_embedded;
          scatter(V.slot_offset(d, i, 0), comp, d, i);
        }
      }
      // slot 1: projection of star d^0 eta
      {
        const SubspaceBasis & Bv = V.component(d, i, 1);
        if (Bv.dim() > 0) {
          double hfac = std::pow(c.chart.h, d - 2 * (k + 1));
          MatrixXd starD = hfac * (star_flat(d, k + 1, 0) * X0.derivative_matrix(d, i));
          MatrixXd mass = cache.monomial_form_mass(d, i, d - k - 1, Bv.enclosing_deg);
          MatrixXd starD_embedded = MatrixXd::Zero(mass.rows(), starD.cols());
          int nm0 = poly_dim(d, 0), nmr = poly_dim(d, Bv.enclosing_deg);
          for (int a = 0; a < alt_dim(d, d - k - 1); a++) starD_embedded.middleRows(a * nmr, nm0) = starD.middleRows(a * nm0, nm0);
          MatrixXd comp = Bv.columns.transpose() * mass * starD_embedded;
          scatter(V.slot_offset(d, i, 1), comp, d, i);
        }
      }
    }
  }
  SparseMat E(V.dim(), X0.dim());
  E.setFromTriplets(trip.begin(), trip.end());
  return E;
}

/// Explicit preimage in the flat VEM subspace: for eta with zero k-cell averages
/// and vanishing discrete derivative, omega has components (0, pi^K eta) on
/// k-cells of the lower space and (0, eta) above
inline VectorXd vem_flat_preimage(const VemSpace & Vkm1, const VemSpace & Vk, const VectorXd & eta, double kernel_tol = 1e-9)
{
  SpaceCache & cache = Vk.cache();
  const PolytopalMesh & mesh = Vk.mesh();
  int k = Vk.k(), n = mesh.ambient_dim;
  if (k < 1 || Vkm1.k() != k - 1) throw std::invalid_argument("vem_flat_preimage: spaces must have consecutive form degrees with k >= 1");
  double scale = 1. + eta.lpNorm<Eigen::Infinity>();
  // flat subspace: zero average of the star-inverse of k-cell components
  for (int i = 0; i < mesh.n_cells(k); i++) {
    const Cell & c = mesh.cells[k][i];
    PolyForm p = Vk.component(k, i, 0).combine(eta.segment(Vk.slot_offset(k, i, 0), Vk.slot_dim(k, i, 0)));
    if (std::abs(integrate_top(c, star_chart(c.chart, p))) > kernel_tol * scale) {
      throw FlatPreimageError("vem_flat_preimage: input not in the flat subspace (cell " + std::to_string(i) + ")");
    }
  }
  // kernel: all derivative components vanish, and the local derivative on
  // (k+1)-cells is zero
  for (int d = k + 1; d <= n; d++) {
    for (int i = 0; i < mesh.n_cells(d); i++) {
      int sz = Vk.slot_dim(d, i, 1);
      if (sz > 0 && eta.segment(Vk.slot_offset(d, i, 1), sz).lpNorm<Eigen::Infinity>() > kernel_tol * scale) {
        throw FlatPreimageError("vem_flat_preimage: input not in the kernel (derivative component nonzero)");
      }
    }
  }
  if (k + 1 <= n) {
    for (int i = 0; i < mesh.n_cells(k + 1); i++) {
      PolyForm dk1 = Vk.local_derivative_k1(i, Vk.gather(k + 1, i, eta));
      if (dk1.norm() > kernel_tol * scale) {
        throw FlatPreimageError("vem_flat_preimage: input not in the kernel (nonzero derivative on a (k+1)-cell)");
      }
    }
  }
  VectorXd omega = VectorXd::Zero(Vkm1.dim());
  // on k-cells of the lower space (its (k-1)+1 cells): second slot = pi^K_{r,0} eta_f
  for (int i = 0; i < mesh.n_cells(k); i++) {
    PolyForm p = Vk.component(k, i, 0).combine(eta.segment(Vk.slot_offset(k, i, 0), Vk.slot_dim(k, i, 0)));
    const SubspaceBasis & Btarget = Vkm1.component(k, i, 1); // K_r^0
    omega.segment(Vkm1.slot_offset(k, i, 1), Btarget.dim()) = l2_project(cache, Btarget, p);
  }
  // above: the second slot carries eta's first component verbatim (same Koszul space)
  for (int d = k + 1; d <= n; d++) {
    for (int i = 0; i < mesh.n_cells(d); i++) {
      int sz = Vk.slot_dim(d, i, 0);
      omega.segment(Vkm1.slot_offset(d, i, 1), Vkm1.slot_dim(d, i, 1)) = eta.segment(Vk.slot_offset(d, i, 0), sz);
    }
  }
  return omega;
}

} // namespace ddr
