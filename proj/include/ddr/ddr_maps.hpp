// The DDR complex bundle (spaces of all form degrees at a fixed polynomial
// degree with their global derivative matrices), the reduction/extension
// cochain maps to the lowest-order complex, and the constructive preimage in
// the flat subspace used by the cohomology argument.

#pragma once

#include <ddr/ddr_space.hpp>

namespace ddr {

class DdrComplex
{
public:
  DdrComplex(SpaceCache & cache, int r, unsigned threads = 0) : m_r(r)
  {
    int n = cache.mesh().ambient_dim;
    for (int k = 0; k <= n; k++) m_spaces.push_back(std::make_unique<DdrSpace>(cache, k, r, threads));
    for (int k = 0; k < n; k++) m_d.push_back(m_spaces[k]->global_d_matrix(*m_spaces[k + 1]));
  }

  int r() const { return m_r; }
  int n() const { return static_cast<int>(m_spaces.size()) - 1; }
  const DdrSpace & space(int k) const { return *m_spaces[k]; }
  /// Global derivative matrix X^k -> X^{k+1}, 0 <= k <= n-1
  const SparseMat & d_matrix(int k) const { return m_d[k]; }

private:
  int m_r;
  std::vector<std::unique_ptr<DdrSpace>> m_spaces;
  std::vector<SparseMat> m_d;
};

/// Reduction X^k_r -> X^k_0: L2 projection of k-cell components onto constants
inline SparseMat reduction_matrix(const DdrSpace & Xr, const DdrSpace & X0)
{
  if (X0.r() != 0 || X0.k() != Xr.k()) throw std::invalid_argument("reduction_matrix: target must be the degree-0 space of the same form degree");
  SpaceCache & cache = Xr.cache();
  int k = Xr.k();
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < Xr.mesh().n_cells(k); i++) {
    const SubspaceBasis & Br = Xr.component(k, i);
    const SubspaceBasis & B0 = X0.component(k, i);
    for (int j = 0; j < Br.dim(); j++) {
      VectorXd c = l2_project(cache, B0, Br.element(j));
      for (int rr = 0; rr < c.size(); rr++) {
        if (c[rr] != 0.) trip.emplace_back(X0.comp_offset(k, i) + rr, Xr.comp_offset(k, i) + j, c[rr]);
      }
    }
  }
  SparseMat R(X0.dim(), Xr.dim());
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

/// Extension X^k_0 -> X^k_r, defined by induction on the cell dimension
inline SparseMat extension_matrix(const DdrSpace & Xr, const DdrSpace & X0)
{
  if (X0.r() != 0 || X0.k() != Xr.k()) throw std::invalid_argument("extension_matrix: source must be the degree-0 space of the same form degree");
  SpaceCache & cache = Xr.cache();
  const PolytopalMesh & mesh = Xr.mesh();
  int k = Xr.k(), r = Xr.r(), n = mesh.ambient_dim;
  double sgn = ((k + 1) % 2 == 0) ? 1. : -1.;

  // per-cell component matrices: comp_r(f) x X0-local dofs of f
  std::vector<std::vector<MatrixXd>> Ecomp(n + 1);
  // the extension on the whole boundary lattice of f, rows = Xr local dofs of f
  auto local_extension = [&](int d, int i) {
    const LocalMap & lr = Xr.local_map(d, i);
    const LocalMap & l0 = X0.local_map(d, i);
    MatrixXd E = MatrixXd::Zero(lr.total, l0.total);
    for (const auto & [dd, id, off, sz] : lr.entries) {
      const LocalMap & lsub0 = X0.local_map(dd, id);
      // columns of Ecomp[dd][id] live on X0-local dofs of (dd,id); lift to those of (d,i)
      for (const auto & [d0, i0, off0, sz0] : lsub0.entries) {
        if (sz0 == 0) continue;
        int pos = std::get<2>(l0.entries[l0.slot.at({d0, i0})]);
        E.block(off, pos, sz, sz0) = Ecomp[dd][id].middleCols(off0, sz0);
      }
    }
    return E;
  };

  for (int d = k; d <= n; d++) {
    Ecomp[d].resize(mesh.n_cells(d));
    for (int i = 0; i < mesh.n_cells(d); i++) {
      const LocalMap & l0 = X0.local_map(d, i);
      const SubspaceBasis & T = Xr.component(d, i);
      if (d == k) {
        // the constant component embeds exactly
        const SubspaceBasis & B0 = X0.component(k, i);
        MatrixXd E(T.dim(), l0.total);
        int pos = std::get<2>(l0.entries[l0.slot.at({k, i})]);
        for (int j = 0; j < B0.dim(); j++) E.col(pos + j) = l2_project(cache, T, B0.element(j));
        Ecomp[d][i] = E;
        continue;
      }
      const Cell & c = mesh.cells[d][i];
      auto Kmu = cache.get(d, i, SpaceTag::Koszul, r, d - k - 1);
      auto Knu = cache.get(d, i, SpaceTag::Koszul, r, d - k);
      int N = T.dim();
      MatrixXd Wk = cache.wedge_pair(d, i, k, r, r);
      double sinv = ((k * (d - k)) % 2 ? -1. : 1.) * std::pow(c.chart.h, 2 * k - d);
      MatrixXd U = sinv * (star_flat(d, d - k, r) * T.columns);
      MatrixXd A(N, N);
      MatrixXd dKmu = d_flat(d, d - k - 1, r, r) * Kmu->columns;
      A.topRows(Kmu->dim()) = sgn * (U.transpose() * Wk * dKmu).transpose();
      A.bottomRows(Knu->dim()) = sgn * (U.transpose() * Wk * Knu->columns).transpose();
      MatrixXd B = MatrixXd::Zero(N, l0.total);
      // d^k_{0,f} eta ^ mu
      if (Kmu->dim() > 0) {
        MatrixXd W1 = cache.wedge_pair(d, i, k + 1, 0, r);
        B.topRows(Kmu->dim()) = Kmu->columns.transpose() * (W1.transpose() * X0.derivative_matrix(d, i));
        // boundary: extended potentials of the subcells
        for (const auto & [j, eps] : c.boundary) {
          MatrixXd TrK = cache.trace_matrix(d, i, d - 1, j, d - k - 1, r) * Kmu->columns;
          MatrixXd Wb = cache.wedge_pair(d - 1, j, k, r, r);
          MatrixXd PE = Xr.potential_matrix(d - 1, j) * local_extension(d - 1, j);
          MatrixXd contrib = -eps * (TrK.transpose() * (Wb.transpose() * PE));
          // scatter X0-local columns of the facet into those of the cell
          const LocalMap & lsub0 = X0.local_map(d - 1, j);
          for (const auto & [d0, i0, off0, sz0] : lsub0.entries) {
            if (sz0 == 0) continue;
            int pos = std::get<2>(l0.entries[l0.slot.at({d0, i0})]);
            B.topRows(Kmu->dim()).middleCols(pos, sz0) += contrib.middleCols(off0, sz0);
          }
        }
      }
      // P^k_{0,f} eta ^ nu
      if (Knu->dim() > 0) {
        MatrixXd W0 = cache.wedge_pair(d, i, k, 0, r);
        MatrixXd rows = sgn * (Knu->columns.transpose() * (W0.transpose() * X0.potential_matrix(d, i)));
        B.bottomRows(Knu->dim()) = rows;
      }
      Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
      Ecomp[d][i] = qr.solve(B);
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int d = k; d <= n; d++) {
    for (int i = 0; i < mesh.n_cells(d); i++) {
      const LocalMap & l0 = X0.local_map(d, i);
      for (const auto & [d0, i0, off0, sz0] : l0.entries) {
        for (int rr = 0; rr < Ecomp[d][i].rows(); rr++) {
          for (int cc = 0; cc < sz0; cc++) {
            double v = Ecomp[d][i](rr, off0 + cc);
            if (v != 0.) trip.emplace_back(Xr.comp_offset(d, i) + rr, X0.comp_offset(d0, i0) + cc, v);
          }
        }
      }
    }
  }
  SparseMat E(Xr.dim(), X0.dim());
  E.setFromTriplets(trip.begin(), trip.end());
  return E;
}

/// Integral over a k-cell of the (star-inverse of the) component: the quantity
/// whose vanishing defines the flat subspace
inline double component_average(const DdrSpace & X, int i, const VectorXd & global)
{
  int k = X.k();
  const Cell & c = X.mesh().cells[k][i];
  VectorXd comp = global.segment(X.comp_offset(k, i), X.comp_dim(k, i));
  PolyForm p = X.component(k, i).combine(comp);
  return integrate_top(c, star_chart(c.chart, p)); // star = star^{-1} on 0-forms
}

struct FlatPreimageError : std::runtime_error
{
  explicit FlatPreimageError(const std::string & msg) : std::runtime_error(msg) {}
};

/// Constructive preimage: given eta in the flat subspace of X^k with D eta = 0,
/// build omega in the flat subspace of X^{k-1} with D omega = eta. The free
/// Koszul component of each cell is set to zero.
inline VectorXd flat_preimage(const DdrSpace & Xkm1, const DdrSpace & Xk, const VectorXd & eta, double kernel_tol = 1e-9,
                              const SparseMat * Dk = nullptr)
{
  SpaceCache & cache = Xk.cache();
  const PolytopalMesh & mesh = Xk.mesh();
  int k = Xk.k(), r = Xk.r(), n = mesh.ambient_dim;
  if (k < 1 || Xkm1.k() != k - 1) throw std::invalid_argument("flat_preimage: spaces must have consecutive form degrees with k >= 1");
  double scale = 1. + eta.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < mesh.n_cells(k); i++) {
    if (std::abs(component_average(Xk, i, eta)) > kernel_tol * scale) {
      throw FlatPreimageError("flat_preimage: input not in the flat subspace (cell " + std::to_string(i) + ")");
    }
  }
  if (Dk != nullptr && ((*Dk) * eta).lpNorm<Eigen::Infinity>() > kernel_tol * scale) {
    throw FlatPreimageError("flat_preimage: input not in the kernel of the discrete exterior derivative");
  }
  VectorXd omega = VectorXd::Zero(Xkm1.dim());
  double sk = (k % 2 == 0) ? 1. : -1.; // (-1)^k
  for (int d = k; d <= n; d++) {
    for (int i = 0; i < mesh.n_cells(d); i++) {
      const Cell & c = mesh.cells[d][i];
      auto K = cache.get(d, i, SpaceTag::Koszul, r, d - k);
      if (K->dim() == 0) continue;
      const SubspaceBasis & T = Xkm1.component(d, i);
      // unknown: coefficients z over d(K_r^{d-k}); omega_f = sum z_j d kappa_j
      MatrixXd dK = d_flat(d, d - k, r, r) * K->columns;
      double sinv = (((k - 1) * (d - k + 1)) % 2 ? -1. : 1.) * std::pow(c.chart.h, 2 * (k - 1) - d);
      MatrixXd UdK = sinv * (star_flat(d, d - k + 1, r) * dK); // star^{-1}_phys of the candidates
      MatrixXd Wkm1 = cache.wedge_pair(d, i, k - 1, r, r);
      MatrixXd A = sk * (UdK.transpose() * Wkm1 * dK).transpose();
      // rhs: int P^k eta ^ mu - boundary
      VectorXd letak = Xk.gather(d, i, eta);
      PolyForm Peta = Xk.potential(d, i, letak);
      VectorXd rhs(K->dim());
      MatrixXd Wkk = cache.wedge_pair(d, i, k, r, r);
      VectorXd PetaFlat = flatten(Peta, r);
      rhs = K->columns.transpose() * (Wkk.transpose() * PetaFlat);
      for (const auto & [j, eps] : c.boundary) {
        if (d - 1 < k - 1) continue;
        MatrixXd TrK = cache.trace_matrix(d, i, d - 1, j, d - k, r) * K->columns;
        VectorXd lom = Xkm1.gather(d - 1, j, omega);
        VectorXd Pom = Xkm1.potential_matrix(d - 1, j) * lom;
        MatrixXd Wb = cache.wedge_pair(d - 1, j, k - 1, r, r);
        rhs -= eps * (TrK.transpose() * (Wb.transpose() * Pom));
      }
      Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
      VectorXd z = qr.solve(rhs);
      PolyForm omega_f(d, d - k + 1, r);
      VectorXd flat = dK * z;
      omega_f.c = Eigen::Map<const MatrixXd>(flat.data(), omega_f.c.rows(), omega_f.c.cols());
      omega.segment(Xkm1.comp_offset(d, i), T.dim()) = l2_project(cache, T, omega_f);
    }
  }
  return omega;
}

} // namespace ddr
