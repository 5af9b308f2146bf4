// Cohomology verification: exact Betti numbers of the mesh CW complex by
// fraction-free rational rank computation, numerical ranks of the discrete
// derivative matrices with spectral-gap reporting, the complex-property
// residual, and the de Rham map intertwining check for the lowest-order space.

#pragma once

#include <ddr/ddr_maps.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <iomanip>
#include <ostream>

namespace ddr {

/// Global derivative matrices of a discrete complex with space dimensions
struct ComplexMatrices
{
  std::string provenance; ///< "DDR_r" | "VEM_r" | "CW"
  std::vector<int> dims;  ///< N_0 ... N_n
  std::vector<SparseMat> D; ///< D^0 ... D^{n-1}
};

/// Exact rank over the rationals by fraction-free (Bareiss) elimination
inline int exact_rank(const std::vector<std::vector<long long>> & M)
{
  using Int = boost::multiprecision::cpp_int;
  int rows = static_cast<int>(M.size());
  if (rows == 0) return 0;
  int cols = static_cast<int>(M[0].size());
  std::vector<std::vector<Int>> A(rows, std::vector<Int>(cols));
  for (int i = 0; i < rows; i++) {
    for (int j = 0; j < cols; j++) A[i][j] = M[i][j];
  }
  Int prev = 1;
  int rank = 0;
  for (int col = 0; col < cols && rank < rows; col++) {
    int pivot = -1;
    for (int i = rank; i < rows; i++) {
      if (A[i][col] != 0) {
        pivot = i;
        break;
      }
    }
    if (pivot < 0) continue;
    std::swap(A[rank], A[pivot]);
    for (int i = rank + 1; i < rows; i++) {
      for (int j = col + 1; j < cols; j++) {
        A[i][j] = (A[rank][col] * A[i][j] - A[i][col] * A[rank][j]) / prev;
      }
      A[i][col] = 0;
    }
    prev = A[rank][col];
    rank++;
  }
  return rank;
}

/// Signed incidence matrix of d-cells against (d-1)-cells
inline std::vector<std::vector<long long>> incidence_matrix(const PolytopalMesh & m, int d)
{
  std::vector<std::vector<long long>> M(m.n_cells(d - 1), std::vector<long long>(m.n_cells(d), 0));
  for (const auto & c : m.cells[d]) {
    for (const auto & [j, s] : c.boundary) M[j][c.id] = s;
  }
  return M;
}

/// Betti numbers from exact ranks of the incidence matrices
inline std::vector<int> betti_numbers(const PolytopalMesh & m)
{
  int n = m.ambient_dim;
  std::vector<int> rank_bd(n + 2, 0); // rank of partial_d, d = 0..n+1 (0 at both ends)
  for (int d = 1; d <= n; d++) rank_bd[d] = exact_rank(incidence_matrix(m, d));
  std::vector<int> b(n + 1);
  for (int k = 0; k <= n; k++) b[k] = m.n_cells(k) - rank_bd[k] - rank_bd[k + 1];
  return b;
}

/// CW cochain complex of the mesh (transpose incidence with signs)
inline ComplexMatrices cw_complex(const PolytopalMesh & m)
{
  ComplexMatrices C;
  C.provenance = "CW";
  int n = m.ambient_dim;
  for (int k = 0; k <= n; k++) C.dims.push_back(m.n_cells(k));
  for (int k = 0; k < n; k++) {
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto & c : m.cells[k + 1]) {
      for (const auto & [j, s] : c.boundary) trip.emplace_back(c.id, j, static_cast<double>(s));
    }
    SparseMat D(m.n_cells(k + 1), m.n_cells(k));
    D.setFromTriplets(trip.begin(), trip.end());
    C.D.push_back(D);
  }
  return C;
}

inline ComplexMatrices ddr_complex_matrices(const DdrComplex & C)
{
  ComplexMatrices out;
  out.provenance = "DDR_" + std::to_string(C.r());
  for (int k = 0; k <= C.n(); k++) out.dims.push_back(C.space(k).dim());
  for (int k = 0; k < C.n(); k++) out.D.push_back(C.d_matrix(k));
  return out;
}

/// Normalized max-norm residual of D^{k+1} D^k over all k
inline double verify_complex(const ComplexMatrices & C)
{
  auto mnorm = [](const SparseMat & M) {
    double v = 0.;
    for (int k = 0; k < M.outerSize(); ++k) {
      for (SparseMat::InnerIterator it(M, k); it; ++it) v = std::max(v, std::abs(it.value()));
    }
    return v;
  };
  double worst = 0.;
  for (std::size_t k = 0; k + 1 < C.D.size(); k++) {
    SparseMat DD = C.D[k + 1] * C.D[k];
    double scale = std::max(1., mnorm(C.D[k + 1]) * mnorm(C.D[k]));
    worst = std::max(worst, mnorm(DD) / scale);
  }
  return worst;
}

struct CohomologyReport
{
  std::string provenance;
  std::vector<int> space_dims;
  std::vector<int> rank_d;          ///< rank D^k, k = 0..n-1
  std::vector<int> cohomology_dims; ///< per degree k = 0..n
  std::vector<int> betti;
  std::vector<double> sv_gap;       ///< spectral gap at the rank cutoff of D^k (inf if full drop)
  double complex_residual = 0.;
  bool match = false;
  bool rank_ambiguous = false;
};

/// Numerical rank of a sparse matrix by dense SVD with relative threshold
/// tol * sigma_max; also reports the gap sigma_rank / sigma_{rank+1}
inline std::pair<int, double> numerical_rank(const SparseMat & M, double tol)
{
  if (M.rows() == 0 || M.cols() == 0) return {0, std::numeric_limits<double>::infinity()};
  MatrixXd A = MatrixXd(M);
  Eigen::BDCSVD<MatrixXd> svd(A);
  const VectorXd & sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.) return {0, std::numeric_limits<double>::infinity()};
  int rank = 0;
  while (rank < sv.size() && sv[rank] > tol * sv[0]) rank++;
  double gap = std::numeric_limits<double>::infinity();
  if (rank > 0 && rank < sv.size() && sv[rank] > 0.) gap = sv[rank - 1] / sv[rank];
  return {rank, gap};
}

inline CohomologyReport cohomology_dims(const ComplexMatrices & C, const PolytopalMesh & mesh, double tol = 1e-8)
{
  CohomologyReport rep;
  rep.provenance = C.provenance;
  rep.space_dims = C.dims;
  rep.betti = betti_numbers(mesh);
  rep.complex_residual = verify_complex(C);
  int n = static_cast<int>(C.dims.size()) - 1;
  rep.rank_d.resize(n, 0);
  rep.sv_gap.resize(n, std::numeric_limits<double>::infinity());
  for (int k = 0; k < n; k++) {
    auto [rank, gap] = numerical_rank(C.D[k], tol);
    rep.rank_d[k] = rank;
    rep.sv_gap[k] = gap;
    if (std::isfinite(gap) && gap < 10.) rep.rank_ambiguous = true;
  }
  rep.cohomology_dims.resize(n + 1);
  for (int k = 0; k <= n; k++) {
    int rk = (k < n) ? rep.rank_d[k] : 0;
    int rkm1 = (k > 0) ? rep.rank_d[k - 1] : 0;
    rep.cohomology_dims[k] = C.dims[k] - rk - rkm1;
  }
  rep.match = (rep.cohomology_dims == rep.betti);
  return rep;
}

/// The de Rham map on the lowest-order space: cell f -> integral over f of the
/// reconstructed potential. Checks that it intertwines the DDR0 derivative with
/// the CW coboundary; returns the worst relative residual.
inline double de_rham_map_check(const DdrComplex & C0, unsigned trials = 5, std::uint64_t seed = 42)
{
  if (C0.r() != 0) throw std::invalid_argument("de_rham_map_check: requires the degree-0 complex");
  const PolytopalMesh & mesh = C0.space(0).mesh();
  int n = mesh.ambient_dim;
  Rng rng(seed);
  double worst = 0.;
  for (int k = 0; k < n; k++) {
    const DdrSpace & Xk = C0.space(k);
    const DdrSpace & Xk1 = C0.space(k + 1);
    for (unsigned t = 0; t < trials; t++) {
      VectorXd omega = rng.vector(Xk.dim());
      VectorXd img = C0.d_matrix(k) * omega;
      // de Rham map of omega and of its derivative
      VectorXd phi(mesh.n_cells(k)), dphi(mesh.n_cells(k + 1));
      for (int i = 0; i < mesh.n_cells(k); i++) {
        const Cell & c = mesh.cells[k][i];
        PolyForm pot = Xk.potential(k, i, omega.segment(Xk.comp_offset(k, i), Xk.comp_dim(k, i)));
        phi[i] = integrate_top(c, pot);
      }
      for (int i = 0; i < mesh.n_cells(k + 1); i++) {
        const Cell & c = mesh.cells[k + 1][i];
        PolyForm pot = Xk1.potential(k + 1, i, Xk1.gather(k + 1, i, img));
        dphi[i] = integrate_top(c, pot);
      }
      for (int i = 0; i < mesh.n_cells(k + 1); i++) {
        double bsum = 0.;
        for (const auto & [j, s] : mesh.cells[k + 1][i].boundary) bsum += s * phi[j];
        worst = std::max(worst, std::abs(dphi[i] - bsum) / (1. + std::abs(bsum)));
      }
    }
  }
  return worst;
}

/// Sparse triplet text export: header "rows cols nnz", then one "row col value" per line
inline void write_triplets(std::ostream & os, const SparseMat & M)
{
  os << M.rows() << " " << M.cols() << " " << M.nonZeros() << "\n";
  os << std::setprecision(17);
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(M, k); it; ++it) os << it.row() << " " << it.col() << " " << it.value() << "\n";
  }
}

inline void print_report(std::ostream & os, const CohomologyReport & rep)
{
  os << "complex " << rep.provenance << "\n";
  os << std::left << std::setw(10) << "degree" << std::setw(10) << "dim" << std::setw(12) << "cohomology"
     << std::setw(8) << "betti" << std::setw(14) << "sv gap" << "\n";
  for (std::size_t k = 0; k < rep.cohomology_dims.size(); k++) {
    os << std::left << std::setw(10) << k << std::setw(10) << rep.space_dims[k] << std::setw(12)
       << rep.cohomology_dims[k] << std::setw(8) << rep.betti[k] << std::setw(14);
    if (k < rep.sv_gap.size()) {
      os << rep.sv_gap[k];
    } else {
      os << "-";
    }
    os << "\n";
  }
  os << "complex residual " << rep.complex_residual << ", match " << (rep.match ? "true" : "false") << "\n";
}

} // namespace ddr
