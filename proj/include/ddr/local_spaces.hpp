// Per-cell polynomial subspaces: full P_r Lambda^l, Koszul complement K_r^l,
// image dP_{r+1}Lambda^{l-1}, and trimmed P_r^- Lambda^l, all as explicitly
// orthonormalized coefficient bases with a shared cache, plus L2 projections
// and the Koszul-pair decompositions.

#pragma once

#include <ddr/quadrature.hpp>

namespace ddr {

enum class SpaceTag
{
  Full,
  Koszul,
  ImageD,
  Trimmed
};

struct ConditioningError : std::runtime_error
{
  explicit ConditioningError(const std::string & msg) : std::runtime_error(msg) {}
};

/// Basis of a polynomial subspace on a cell. Columns express basis elements in
/// the monomial-form basis of P_R Lambda^l (R = enclosing_deg), flattened
/// column-major (alternating component major). Columns are orthonormal for the
/// physical L2 product of the cell.
struct SubspaceBasis
{
  int cell_dim = 0;
  int cell_id = -1;
  int form_degree = 0;
  int r = 0;
  SpaceTag tag = SpaceTag::Full;
  int enclosing_deg = 0;
  MatrixXd columns;
  double cond = 1.;

  int dim() const { return static_cast<int>(columns.cols()); }
  int ambient_rows() const { return static_cast<int>(columns.rows()); }

  PolyForm element(int j) const
  {
    PolyForm p(cell_dim, form_degree, enclosing_deg);
    p.c = Eigen::Map<const MatrixXd>(columns.col(j).data(), p.c.rows(), p.c.cols());
    return p;
  }

  PolyForm combine(const VectorXd & coeffs) const
  {
    PolyForm p(cell_dim, form_degree, enclosing_deg);
    if (dim() == 0) return p;
    VectorXd flat = columns * coeffs;
    p.c = Eigen::Map<const MatrixXd>(flat.data(), p.c.rows(), p.c.cols());
    return p;
  }

  std::vector<PolyForm> elements() const
  {
    std::vector<PolyForm> out;
    out.reserve(dim());
    for (int j = 0; j < dim(); j++) out.push_back(element(j));
    return out;
  }
};

inline VectorXd flatten(const PolyForm & p, int enclosing_deg)
{
  PolyForm q = p.embedded(enclosing_deg);
  return Eigen::Map<const VectorXd>(q.c.data(), q.c.size());
}

/// Shared per-mesh cache of subspace bases and scalar monomial mass matrices
class SpaceCache
{
public:
  explicit SpaceCache(const PolytopalMesh & mesh) : m_mesh(mesh) {}

  const PolytopalMesh & mesh() const { return m_mesh; }

  /// Chart integrals of monomial products over the cell, int m_i m_j dy (no scaling factor)
  const MatrixXd & scalar_mass(int d, int cell_id, int deg)
  {
    std::lock_guard<std::mutex> lock(m_mutex);
    auto key = std::make_tuple(d, cell_id, deg);
    auto it = m_scalar_mass.find(key);
    if (it != m_scalar_mass.end()) return it->second;
    const Cell & c = m_mesh.cells[d][cell_id];
    MatrixXd M;
    if (d == 0) {
      M = MatrixXd::Ones(1, 1);
    } else {
      ChartQuadrature q = chart_quadrature(c, 2 * deg);
      MatrixXd V = monomial_values(d, deg, q.points);
      M = V.transpose() * q.weights.asDiagonal() * V;
    }
    return m_scalar_mass.emplace(key, std::move(M)).first->second;
  }

  /// Physical mass matrix factor for l-forms of degree deg on a cell: h^{d-2l} (I_alt (x) S)
  MatrixXd monomial_form_mass(int d, int cell_id, int l, int deg)
  {
    const MatrixXd & S = scalar_mass(d, cell_id, deg);
    const Cell & c = m_mesh.cells[d][cell_id];
    int na = alt_dim(d, l), nm = static_cast<int>(S.rows());
    MatrixXd M = MatrixXd::Zero(na * nm, na * nm);
    double factor = std::pow(c.chart.h, d - 2 * l);
    for (int a = 0; a < na; a++) M.block(a * nm, a * nm, nm, nm) = factor * S;
    return M;
  }

  /// Pairing matrix W with (a_flat)^T W (b_flat) = int over the cell of a ^ b,
  /// for a in P_{r1} Lambda^{l1}, b in P_{r2} Lambda^{l2}, l1 + l2 = d
  MatrixXd wedge_pair(int d, int cell_id, int l1, int r1, int r2)
  {
    int l2 = d - l1;
    const MatrixXd & S = scalar_mass(d, cell_id, std::max(r1, r2));
    int nm1 = poly_dim(d, r1), nm2 = poly_dim(d, r2);
    int na1 = alt_dim(d, l1), na2 = alt_dim(d, l2);
    MatrixXd W = MatrixXd::Zero(nm1 * na1, nm2 * na2);
    const auto & tb = detail::wedge_table(d, l1, l2);
    for (int a = 0; a < na1; a++) {
      for (int b = 0; b < na2; b++) {
        if (tb.sign(a, b) != 0) {
          W.block(a * nm1, b * nm2, nm1, nm2) = tb.sign(a, b) * S.topLeftCorner(nm1, nm2);
        }
      }
    }
    return W;
  }

  /// Flattened trace (pullback) matrix from P_r Lambda^l on cell (d,i) to the
  /// same space on its subcell (dsub, isub), in the subcell's chart
  const MatrixXd & trace_matrix(int d, int i, int dsub, int isub, int l, int r)
  {
    std::lock_guard<std::mutex> lock(m_mutex);
    auto key = std::make_tuple(d, i, dsub, isub, l, r);
    auto it = m_traces.find(key);
    if (it != m_traces.end()) return it->second;
    const Cell & outer = m_mesh.cells[d][i];
    const Cell & inner = m_mesh.cells[dsub][isub];
    AffineMap map = chart_map(outer.chart, inner.chart);
    int nm = poly_dim(d, r), na = alt_dim(d, l);
    int nm_s = poly_dim(dsub, r), na_s = alt_dim(dsub, l);
    MatrixXd T = MatrixXd::Zero(nm_s * na_s, nm * na);
    for (int m = 0; m < nm; m++) {
      for (int a = 0; a < na; a++) {
        PolyForm b(d, l, r);
        b.c(m, a) = 1.;
        PolyForm tr = pullback(b, map);
        if (tr.c.size()) T.col(a * nm + m) = Eigen::Map<const VectorXd>(tr.c.data(), tr.c.size());
      }
    }
    return m_traces.emplace(key, std::move(T)).first->second;
  }

  std::shared_ptr<const SubspaceBasis> get(int d, int cell_id, SpaceTag tag, int r, int l)
  {
    {
      std::lock_guard<std::mutex> lock(m_mutex);
      auto it = m_bases.find(std::make_tuple(d, cell_id, tag, r, l));
      if (it != m_bases.end()) return it->second;
    }
    auto basis = std::make_shared<SubspaceBasis>(build(d, cell_id, tag, r, l));
    std::lock_guard<std::mutex> lock(m_mutex);
    return m_bases.emplace(std::make_tuple(d, cell_id, tag, r, l), std::move(basis)).first->second;
  }

private:
  SubspaceBasis build(int d, int cell_id, SpaceTag tag, int r, int l);

  const PolytopalMesh & m_mesh;
  std::mutex m_mutex;
  std::map<std::tuple<int, int, int>, MatrixXd> m_scalar_mass;
  std::map<std::tuple<int, int, int, int, int, int>, MatrixXd> m_traces;
  std::map<std::tuple<int, int, SpaceTag, int, int>, std::shared_ptr<const SubspaceBasis>> m_bases;
};

namespace detail {

  /// Rank-revealing L2 orthonormalization of raw coefficient columns.
  /// Relative singular value cutoff 1e-10, matching the exact rank deficiencies
  /// of Koszul images in floating point.
  inline SubspaceBasis orthonormalize(const Cell & c, int l, int enclosing_deg, const MatrixXd & raw,
                                      const MatrixXd & mass, double cutoff = 1e-10)
  {
    SubspaceBasis out;
    out.cell_dim = c.dim;
    out.cell_id = c.id;
    out.form_degree = l;
    out.enclosing_deg = enclosing_deg;
    if (raw.cols() == 0 || raw.rows() == 0) {
      out.columns = MatrixXd::Zero(mass.rows(), 0);
      return out;
    }
    Eigen::LLT<MatrixXd> llt(mass);
    if (llt.info() != Eigen::Success) throw ConditioningError("orthonormalize: mass matrix not SPD on cell " + std::to_string(c.id));
    MatrixXd Y = llt.matrixU() * raw; // U = L^T
    Eigen::JacobiSVD<MatrixXd> svd(Y, Eigen::ComputeThinU);
    double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.;
    int rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()[rank] > cutoff * smax) rank++;
    MatrixXd U = svd.matrixU().leftCols(rank);
    out.columns = llt.matrixU().solve(U);
    out.cond = (rank > 0) ? smax / svd.singularValues()[rank - 1] : 1.;
    return out;
  }

} // namespace detail

inline SubspaceBasis SpaceCache::build(int d, int cell_id, SpaceTag tag, int r, int l)
{
  const Cell & c = m_mesh.cells[d][cell_id];
  int nm = poly_dim(d, std::max(r, 0)), na = alt_dim(d, l);
  int N = nm * na;
  auto finish = [&](SubspaceBasis b) {
    b.r = r;
    b.tag = tag;
    return b;
  };
  if (r < 0 || l < 0 || l > d) {
    SubspaceBasis b;
    b.cell_dim = d;
    b.cell_id = cell_id;
    b.form_degree = l;
    b.enclosing_deg = std::max(r, 0);
    b.columns = MatrixXd::Zero(std::max(N, 0), 0);
    return finish(b);
  }
  MatrixXd mass = monomial_form_mass(d, cell_id, l, r);
  switch (tag) {
  case SpaceTag::Full: {
    // identity columns orthonormalized (keeps a well-conditioned representation)
    SubspaceBasis b = detail::orthonormalize(c, l, r, MatrixXd::Identity(N, N), mass);
    b.cell_id = cell_id;
    return finish(b);
  }
  case SpaceTag::Koszul: {
    // K_r^l = kappa P_{r-1} Lambda^{l+1}; trivial when r = 0, l = d or l = -1
    if (r == 0 || l == d || l < 0) {
      SubspaceBasis b;
      b.cell_dim = d;
      b.cell_id = cell_id;
      b.form_degree = l;
      b.enclosing_deg = r;
      b.columns = MatrixXd::Zero(N, 0);
      return finish(b);
    }
    auto gen = poly_form_basis(d, r - 1, l + 1);
    MatrixXd raw(N, gen.size());
    for (std::size_t j = 0; j < gen.size(); j++) raw.col(j) = flatten(koszul(gen[j]), r);
    SubspaceBasis b = detail::orthonormalize(c, l, r, raw, mass);
    b.cell_id = cell_id;
    return finish(b);
  }
  case SpaceTag::ImageD: {
    // d P_r Lambda^{l-1} inside P_{r-1} Lambda^l, embedded in degree r for convenience
    if (l < 1) {
      SubspaceBasis b;
      b.cell_dim = d;
      b.cell_id = cell_id;
      b.form_degree = l;
      b.enclosing_deg = r;
      b.columns = MatrixXd::Zero(N, 0);
      return finish(b);
    }
    auto gen = poly_form_basis(d, r, l - 1);
    MatrixXd raw(N, gen.size());
    for (std::size_t j = 0; j < gen.size(); j++) raw.col(j) = flatten(exterior_derivative(gen[j]), r);
    SubspaceBasis b = detail::orthonormalize(c, l, r, raw, mass);
    b.cell_id = cell_id;
    return finish(b);
  }
  case SpaceTag::Trimmed: {
    if (l == 0) {
      SubspaceBasis b = detail::orthonormalize(c, l, r, MatrixXd::Identity(N, N), mass);
      b.cell_id = cell_id;
      return finish(b);
    }
    auto gend = poly_form_basis(d, r, l - 1);
    auto genk = poly_form_basis(d, r - 1, l + 1);
    MatrixXd raw(N, gend.size() + genk.size());
    for (std::size_t j = 0; j < gend.size(); j++) raw.col(j) = flatten(exterior_derivative(gend[j]), r);
    for (std::size_t j = 0; j < genk.size(); j++) raw.col(gend.size() + j) = flatten(koszul(genk[j]), r);
    SubspaceBasis b = detail::orthonormalize(c, l, r, raw, mass);
    b.cell_id = cell_id;
    return finish(b);
  }
  }
  throw std::logic_error("SpaceCache::build: unknown tag");
}

/// L2-orthogonal projection of a polynomial form onto the subspace (coefficients
/// in the orthonormal basis): c_j = (b_j, p)_physical
inline VectorXd l2_project(SpaceCache & cache, const SubspaceBasis & B, const PolyForm & p)
{
  if (B.dim() == 0) return VectorXd(0);
  int deg = std::max(B.enclosing_deg, p.pdeg);
  MatrixXd mass = cache.monomial_form_mass(B.cell_dim, B.cell_id, B.form_degree, deg);
  VectorXd pf = flatten(p, deg);
  MatrixXd cols = MatrixXd::Zero(mass.rows(), B.dim());
  if (deg == B.enclosing_deg) {
    cols = B.columns;
  } else {
    // re-embed columns into the larger monomial basis
    int nm_small = poly_dim(B.cell_dim, B.enclosing_deg), nm_big = poly_dim(B.cell_dim, deg);
    int na = alt_dim(B.cell_dim, B.form_degree);
    for (int a = 0; a < na; a++) cols.middleRows(a * nm_big, nm_small) = B.columns.middleRows(a * nm_small, nm_small);
  }
  return cols.transpose() * (mass * pf);
}

/// L2 projection of a chart-valued function given by an evaluatory -> AltForm
inline VectorXd l2_project_fn(SpaceCache & cache, const SubspaceBasis & B,
                              const std::function<AltForm(const VectorXd &)> & fn, int quad_degree)
{
  if (B.dim() == 0) return VectorXd(0);
  const Cell & c = cache.mesh().cells[B.cell_dim][B.cell_id];
  if (c.dim == 0) {
    AltForm v = fn(VectorXd(0));
    VectorXd out(B.dim());
    for (int j = 0; j < B.dim(); j++) out[j] = B.columns(0, j) * v.coeffs[0];
    return out;
  }
  ChartQuadrature q = chart_quadrature(c, quad_degree);
  MatrixXd V = monomial_values(c.dim, B.enclosing_deg, q.points);
  int na = alt_dim(c.dim, B.form_degree), nm = static_cast<int>(V.cols());
  MatrixXd F(static_cast<int>(q.weights.size()), na);
  for (int i = 0; i < q.weights.size(); i++) F.row(i) = fn(q.points.col(i)).coeffs.transpose();
  double factor = std::pow(c.chart.h, c.dim - 2 * B.form_degree);
  VectorXd out = VectorXd::Zero(B.dim());
  for (int a = 0; a < na; a++) {
    VectorXd rhs = V.transpose() * (q.weights.cwiseProduct(F.col(a))); // (m_i, F_a)
    out += B.columns.middleRows(a * nm, nm).transpose() * rhs * factor;
  }
  return out;
}

/// Decomposition omega = d mu + nu with (mu, nu) in K_{r+1}^{l-1} x K_r^l
struct KoszulDecomposition
{
  PolyForm mu;
  PolyForm nu;
  double residual = 0.;
};

namespace detail {

  inline KoszulDecomposition solve_pair(int d, int cell_id, const PolyForm & omega,
                                        const SubspaceBasis & K1, const SubspaceBasis & K2, int r)
  {
    int N = poly_dim(d, r) * alt_dim(d, omega.degree);
    MatrixXd A(N, K1.dim() + K2.dim());
    for (int j = 0; j < K1.dim(); j++) A.col(j) = flatten(exterior_derivative(K1.element(j)), r);
    for (int j = 0; j < K2.dim(); j++) A.col(K1.dim() + j) = flatten(K2.element(j), r);
    VectorXd b = flatten(omega, r);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    double cond = 0.;
    if (A.cols() > 0) {
      VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
      cond = (diag.minCoeff() > 0) ? diag.maxCoeff() / diag.minCoeff() : std::numeric_limits<double>::infinity();
    }
    if (cond > 1e12) {
      throw ConditioningError("koszul decomposition ill-conditioned on cell " + std::to_string(cell_id)
                              + " (cond ~ " + std::to_string(cond) + ")");
    }
    VectorXd x = qr.solve(b);
    KoszulDecomposition out;
    out.mu = K1.combine(x.head(K1.dim()));
    out.nu = K2.combine(x.tail(K2.dim()));
    out.residual = (A * x - b).norm();
    return out;
  }

} // namespace detail

/// omega in P_r Lambda^l -> (mu, nu) in K_{r+1}^{l-1} x K_r^l with d mu + nu = omega
inline KoszulDecomposition decompose(SpaceCache & cache, int d, int cell_id, int r, const PolyForm & omega)
{
  if (omega.degree < 1) throw std::invalid_argument("decompose: form degree must be >= 1");
  auto K1 = cache.get(d, cell_id, SpaceTag::Koszul, r + 1, omega.degree - 1);
  auto K2 = cache.get(d, cell_id, SpaceTag::Koszul, r, omega.degree);
  return detail::solve_pair(d, cell_id, omega, *K1, *K2, r);
}

/// omega in P_r^- Lambda^l -> (mu, nu) in K_r^{l-1} x K_r^l with d mu + nu = omega
inline KoszulDecomposition trimmed_decompose(SpaceCache & cache, int d, int cell_id, int r, const PolyForm & omega)
{
  if (omega.degree < 1) throw std::invalid_argument("trimmed_decompose: form degree must be >= 1");
  auto K1 = cache.get(d, cell_id, SpaceTag::Koszul, r, omega.degree - 1);
  auto K2 = cache.get(d, cell_id, SpaceTag::Koszul, r, omega.degree);
  return detail::solve_pair(d, cell_id, omega, *K1, *K2, r);
}

} // namespace ddr
