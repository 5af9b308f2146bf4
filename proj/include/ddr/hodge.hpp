// Mixed Hodge Laplacian on trivial-topology meshes: assembly from the DDR
// L2 products and global derivatives, direct solve (with mean constraint at
// k = 0), manufactured solutions satisfying the natural boundary conditions,
// error norms, the adjoint consistency functional, and an inf-sup diagnostic.

#pragma once

#include <ddr/cohomology.hpp>
#include <ddr/fields.hpp>

#include <chrono>

namespace ddr {

/// u_sigma = A_sigma prod_{i in sigma} sin(pi x_i) prod_{i not in sigma} cos(pi x_i):
/// satisfies tr(star u) = 0 and tr(star du) = 0 on the boundary of the unit box.
inline CoeffForm boundary_compatible_trig(int n, int k)
{
  CoeffForm w;
  w.dim = n;
  w.degree = k;
  auto basis = alt_basis(n, k);
  for (std::size_t a = 0; a < basis.size(); a++) {
    VectorXd freq = VectorXd::Ones(n), phase(n);
    std::vector<char> in(n, 0);
    for (int x : basis[a].axes) in[x] = 1;
    for (int i = 0; i < n; i++) phase[i] = in[i] ? 0. : M_PI / 2.; // sin inside, cos outside
    w.coeffs.push_back(trig_scalar(n, freq, phase, 1. + 0.4 * a));
  }
  return w;
}

/// Boundary-compatible polynomial k-forms of total degree <= deg on the unit
/// box; trivial (zero) when no such nonzero polynomial exists at this degree.
inline CoeffForm boundary_compatible_poly(int n, int k, int deg)
{
  CoeffForm w;
  w.dim = n;
  w.degree = k;
  auto basis = alt_basis(n, k);
  auto zero_scalar = []() {
    ScalarField f;
    f.value = [](const VectorXd &) { return 0.; };
    f.gradient = [](const VectorXd & x) { return VectorXd(VectorXd::Zero(x.size())); };
    f.hessian = [](const VectorXd & x) { return MatrixXd(MatrixXd::Zero(x.size(), x.size())); };
    return f;
  };
  auto poly1d = [n](int var, const std::vector<double> & coef) {
    // univariate polynomial in x_var as a PolyForm-backed scalar
    PolyForm p(n, 0, static_cast<int>(coef.size()) - 1);
    const auto & tb = detail::monomials(n, p.pdeg);
    for (std::size_t e = 0; e < coef.size(); e++) {
      std::vector<int> alpha(n, 0);
      alpha[var] = static_cast<int>(e);
      p.c(tb.lookup.at(alpha), 0) = coef[e];
    }
    return polynomial_scalar(p);
  };
  if (k == 0) {
    // constants are excluded (the discrete problem pins them to zero mean)
    if (deg >= 3) {
      // sum_i (3 x_i^2 - 2 x_i^3): gradient vanishes on the matching faces
      ScalarField total;
      std::vector<ScalarField> parts;
      for (int i = 0; i < n; i++) parts.push_back(poly1d(i, {0., 0., 3., -2.}));
      total.value = [parts](const VectorXd & x) {
        double v = 0.;
        for (const auto & p : parts) v += p.value(x);
        return v;
      };
      total.gradient = [parts](const VectorXd & x) {
        VectorXd g = VectorXd::Zero(x.size());
        for (const auto & p : parts) g += p.gradient(x);
        return g;
      };
      total.hessian = [parts](const VectorXd & x) {
        MatrixXd h = MatrixXd::Zero(x.size(), x.size());
        for (const auto & p : parts) h += p.hessian(x);
        return h;
      };
      w.coeffs.push_back(total);
    } else {
      w.coeffs.push_back(zero_scalar());
    }
    return w;
  }
  if (k == 1 && deg >= 3) {
    // u_i = x_i(1-x_i)(1+x_i), a function of x_i alone: curl-free, compatible
    for (std::size_t a = 0; a < basis.size(); a++) {
      int i = basis[a].axes[0];
      w.coeffs.push_back(poly1d(i, {0., 1., 0., -1.})); // x - x^3 = x(1-x)(1+x)
    }
    return w;
  }
  // otherwise only the zero form is available at this degree
  for (std::size_t a = 0; a < basis.size(); a++) w.coeffs.push_back(zero_scalar());
  return w;
}

/// Manufactured data: u, sigma = delta u, their derivatives, and the source
struct Manufactured
{
  int n = 0, k = 0;
  FormField u, sigma, du, dsigma, g;
  bool zero = false;
};

inline Manufactured manufactured_from(const CoeffForm & u)
{
  Manufactured m;
  m.n = u.dim;
  m.k = u.degree;
  int n = u.dim, k = u.degree;
  m.u = make_field(u);
  CoeffForm du = (k < n) ? d_coeff(u) : CoeffForm{n, n + 1, {}};
  CoeffForm sigma, dsigma, deltadu;
  if (k >= 1) {
    sigma = delta_coeff(u);
    m.sigma = make_field(sigma);
    dsigma = d_coeff(sigma);
  }
  if (k < n) {
    m.du = make_field(du);
    deltadu = delta_coeff(du);
  } else {
    m.du = FormField::zero(n, n + 1);
  }
  if (k >= 1) m.dsigma = make_field(dsigma);
  // g = d sigma + delta d u
  FormField g;
  g.dim = n;
  g.degree = k;
  auto sig_d = (k >= 1) ? coeff_evaluator(dsigma) : std::function<AltForm(const VectorXd &)>();
  auto ddu = (k < n) ? coeff_evaluator(deltadu) : std::function<AltForm(const VectorXd &)>();
  g.value = [n, k, sig_d, ddu](const VectorXd & x) {
    AltForm v(n, k);
    if (sig_d) v = v + sig_d(x);
    if (ddu) v = v + ddu(x);
    return v;
  };
  m.g = g;
  return m;
}

struct HodgeErrors
{
  double err_sigma = 0., err_dsigma = 0., err_u = 0., err_du = 0.;
  double stab_sigma = 0., stab_dsigma = 0., stab_u = 0., stab_du = 0.;

  double total() const
  {
    return err_sigma + err_dsigma + err_u + err_du + stab_sigma + stab_dsigma + stab_u + stab_du;
  }
};

class HodgeLaplacian
{
public:
  HodgeLaplacian(SpaceCache & cache, int k, int r, unsigned threads = 0)
    : m_cache(cache), m_mesh(cache.mesh()), m_k(k), m_r(r)
  {
    int n = m_mesh.ambient_dim;
    std::vector<int> betti = betti_numbers(m_mesh);
    bool trivial = betti[0] == 1;
    for (int b = 1; b <= n; b++) trivial = trivial && betti[b] == 0;
    if (!trivial) {
      throw std::invalid_argument("HodgeLaplacian: mesh has non-trivial topology; harmonic-form "
                                  "constraints are not implemented");
    }
    if (k >= 1) m_Xkm1 = std::make_unique<DdrSpace>(cache, k - 1, r, threads);
    m_Xk = std::make_unique<DdrSpace>(cache, k, r, threads);
    if (k < n) m_Xk1 = std::make_unique<DdrSpace>(cache, k + 1, r, threads);
    if (k >= 1) m_Dkm1 = m_Xkm1->global_d_matrix(*m_Xk);
    if (k < n) m_Dk = m_Xk->global_d_matrix(*m_Xk1);
    m_Mk = m_Xk->product_matrix();
    if (k >= 1) m_Mkm1 = m_Xkm1->product_matrix();
    if (k < n) m_Mk1 = m_Xk1->product_matrix();
  }

  const DdrSpace & Xk() const { return *m_Xk; }
  const DdrSpace & Xkm1() const { return *m_Xkm1; }
  int n_sigma() const { return m_k >= 1 ? m_Xkm1->dim() : 0; }
  int n_u() const { return m_Xk->dim(); }

  /// Symmetric saddle-point matrix (the first block row is negated)
  SparseMat assemble() const
  {
    int ns = n_sigma(), nu = n_u();
    int extra = (m_k == 0) ? 1 : 0; // mean constraint multiplier
    std::vector<Eigen::Triplet<double>> trip;
    auto add_block = [&](int r0, int c0, const SparseMat & M, double scale) {
      for (int kk = 0; kk < M.outerSize(); ++kk) {
        for (SparseMat::InnerIterator it(M, kk); it; ++it) trip.emplace_back(r0 + it.row(), c0 + it.col(), scale * it.value());
      }
    };
    SparseMat K;
    if (m_k < m_mesh.ambient_dim) K = SparseMat(m_Dk.transpose() * m_Mk1 * m_Dk);
    if (m_k >= 1) {
      SparseMat C = SparseMat(m_Dkm1.transpose() * m_Mk); // sigma-test coupling
      add_block(0, 0, m_Mkm1, -1.);
      add_block(0, ns, C, 1.);
      add_block(ns, 0, SparseMat(C.transpose()), 1.);
      if (K.size() > 0) add_block(ns, ns, K, 1.);
    } else {
      add_block(0, 0, K, 1.);
      VectorXd ones = m_Xk->interpolate(constant_one_field(), 2 * m_r + 4);
      VectorXd c = m_Mk * ones;
      for (int i = 0; i < nu; i++) {
        if (c[i] != 0.) {
          trip.emplace_back(i, nu, c[i]);
          trip.emplace_back(nu, i, c[i]);
        }
      }
    }
    SparseMat A(ns + nu + extra, ns + nu + extra);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
  }

  /// Right-hand side; when interpolate_source is false the lower-regularity
  /// variant (integral of g against the star of the potential) is used
  VectorXd rhs(const FormField & g, int quad_degree, bool interpolate_source = true) const
  {
    int ns = n_sigma(), nu = n_u();
    int extra = (m_k == 0) ? 1 : 0;
    VectorXd b = VectorXd::Zero(ns + nu + extra);
    if (interpolate_source) {
      VectorXd ig = m_Xk->interpolate(g, quad_degree);
      b.segment(ns, nu) = m_Mk * ig;
    } else {
      int n = m_mesh.ambient_dim;
      VectorXd acc = VectorXd::Zero(nu);
      for (int i = 0; i < m_mesh.n_cells(n); i++) {
        const Cell & c = m_mesh.cells[n][i];
        // integral of g ^ star(potential basis)
        ChartQuadrature q = chart_quadrature(c, quad_degree);
        MatrixXd V = monomial_values(n, m_r, q.points);
        int na = alt_dim(n, m_k), nm = static_cast<int>(V.cols());
        VectorXd w = VectorXd::Zero(na * nm);
        double factor = std::pow(c.chart.h, n - 2 * m_k);
        for (int qq = 0; qq < q.weights.size(); qq++) {
          AltForm tr = chart_trace(c, g, q.points.col(qq));
          for (int a = 0; a < na; a++) w.segment(a * nm, nm) += (factor * q.weights[qq] * tr.coeffs[a]) * V.row(qq).transpose();
        }
        VectorXd local = m_Xk->potential_matrix(n, i).transpose() * w;
        VectorXd glob = VectorXd::Zero(nu);
        m_Xk->scatter_add(n, i, local, glob);
        acc += glob;
      }
      b.segment(ns, nu) = acc;
    }
    return b;
  }

  struct Solution
  {
    VectorXd sigma, u;
    double residual = 0.;
    double solve_seconds = 0.;
  };

  Solution solve(const SparseMat & A, const VectorXd & b) const
  {
    auto t0 = std::chrono::steady_clock::now();
    Eigen::SparseLU<SparseMat> lu(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("HodgeLaplacian: factorization failed");
    VectorXd x = lu.solve(b);
    // a few refinement steps recover digits lost in ill-conditioned saddle systems
    for (int it = 0; it < 3; it++) {
      VectorXd res = b - A * x;
      if (res.norm() <= 1e-14 * std::max(1., b.norm())) break;
      x += lu.solve(res);
    }
    Solution sol;
    sol.residual = (A * x - b).norm() / std::max(1e-300, b.norm());
    if (sol.residual > 1e-8) throw std::runtime_error("HodgeLaplacian: solver residual too large");
    int ns = n_sigma(), nu = n_u();
    sol.sigma = x.head(ns);
    sol.u = x.segment(ns, nu);
    sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  /// L2 error of a field against the potential reconstruction of a discrete form
  double potential_error(const DdrSpace & X, const VectorXd & v, const FormField & f, int quad_degree) const
  {
    int n = m_mesh.ambient_dim;
    double acc = 0.;
    for (int i = 0; i < m_mesh.n_cells(n); i++) {
      const Cell & c = m_mesh.cells[n][i];
      PolyForm pot = X.potential(n, i, X.gather(n, i, v));
      ChartQuadrature q = chart_quadrature(c, quad_degree);
      MatrixXd pv = evaluate_many(pot, q.points);
      double factor = std::pow(c.chart.h, n - 2 * X.k());
      for (int qq = 0; qq < q.weights.size(); qq++) {
        AltForm tr = chart_trace(c, f, q.points.col(qq));
        acc += factor * q.weights[qq] * (tr.coeffs - pv.row(qq).transpose()).squaredNorm();
      }
    }
    return std::sqrt(std::max(acc, 0.));
  }

  /// Same against the piecewise local discrete exterior derivative
  double derivative_error(const DdrSpace & X, const VectorXd & v, const FormField & df, int quad_degree) const
  {
    int n = m_mesh.ambient_dim;
    double acc = 0.;
    for (int i = 0; i < m_mesh.n_cells(n); i++) {
      const Cell & c = m_mesh.cells[n][i];
      PolyForm der = X.local_derivative(n, i, X.gather(n, i, v));
      ChartQuadrature q = chart_quadrature(c, quad_degree);
      MatrixXd pv = evaluate_many(der, q.points);
      double factor = std::pow(c.chart.h, n - 2 * (X.k() + 1));
      for (int qq = 0; qq < q.weights.size(); qq++) {
        AltForm tr = chart_trace(c, df, q.points.col(qq));
        acc += factor * q.weights[qq] * (tr.coeffs - pv.row(qq).transpose()).squaredNorm();
      }
    }
    return std::sqrt(std::max(acc, 0.));
  }

  HodgeErrors errors(const Manufactured & mf, const Solution & sol, int quad_degree) const
  {
    HodgeErrors e;
    int n = m_mesh.ambient_dim;
    if (m_k >= 1) {
      e.err_sigma = potential_error(*m_Xkm1, sol.sigma, mf.sigma, quad_degree);
      e.err_dsigma = derivative_error(*m_Xkm1, sol.sigma, mf.dsigma, quad_degree);
      e.stab_sigma = m_Xkm1->stab_seminorm(sol.sigma);
      e.stab_dsigma = m_Xk->stab_seminorm(m_Dkm1 * sol.sigma);
    }
    e.err_u = potential_error(*m_Xk, sol.u, mf.u, quad_degree);
    e.stab_u = m_Xk->stab_seminorm(sol.u);
    if (m_k < n) {
      e.err_du = derivative_error(*m_Xk, sol.u, mf.du, quad_degree);
      e.stab_du = m_Xk1->stab_seminorm(m_Dk * sol.u);
    }
    return e;
  }

  /// Adjoint consistency functional for a smooth (l+1)-form with codifferential
  double adjoint_error_functional(const DdrSpace & Xl, const DdrSpace & Xl1, const SparseMat & Dl,
                                  const SparseMat & Ml, const SparseMat & Ml1, const FormField & omega,
                                  const VectorXd & mu, int quad_degree) const
  {
    if (!omega.has_codifferential()) throw std::invalid_argument("adjoint_error_functional: field needs a codifferential evaluator");
    FormField dom;
    dom.dim = omega.dim;
    dom.degree = omega.degree - 1;
    dom.value = omega.codifferential;
    VectorXd ido = Xl.interpolate(dom, quad_degree);
    VectorXd io = Xl1.interpolate(omega, quad_degree);
    return ido.dot(Ml * mu) - io.dot(Ml1 * (Dl * mu));
  }

  const SparseMat & Dk() const { return m_Dk; }
  const SparseMat & Dkm1() const { return m_Dkm1; }
  const SparseMat & Mk() const { return m_Mk; }
  const SparseMat & Mkm1() const { return m_Mkm1; }
  const SparseMat & Mk1() const { return m_Mk1; }

  FormField constant_one_field() const
  {
    int n = m_mesh.ambient_dim, k = m_k;
    FormField f;
    f.dim = n;
    f.degree = k;
    f.value = [n, k](const VectorXd &) {
      AltForm w(n, k);
      w.coeffs[0] = 1.;
      return w;
    };
    return f;
  }

private:
  SpaceCache & m_cache;
  const PolytopalMesh & m_mesh;
  int m_k, m_r;
  std::unique_ptr<DdrSpace> m_Xkm1, m_Xk, m_Xk1;
  SparseMat m_Dkm1, m_Dk, m_Mkm1, m_Mk, m_Mk1;
};

/// Smallest singular value of the saddle bilinear form in the discrete
/// energy geometry (dense; intended for small diagnostic runs)
inline double infsup_sigma_min(const HodgeLaplacian & H, const SparseMat & A_with_extra, int k)
{
  // strip the mean-constraint row/column when present
  int ns = H.n_sigma(), nu = H.n_u();
  MatrixXd A = MatrixXd(A_with_extra).topLeftCorner(ns + nu, ns + nu);
  MatrixXd G = MatrixXd::Zero(ns + nu, ns + nu);
  if (k >= 1) {
    G.topLeftCorner(ns, ns) = MatrixXd(H.Mkm1()) + MatrixXd(H.Dkm1().transpose() * H.Mk() * H.Dkm1());
  }
  MatrixXd Gu = MatrixXd(H.Mk());
  if (H.Dk().size() > 0) Gu += MatrixXd(H.Dk().transpose() * H.Mk1() * H.Dk());
  G.bottomRightCorner(nu, nu) = Gu;
  Eigen::LLT<MatrixXd> llt(G);
  MatrixXd L = llt.matrixL();
  MatrixXd B = L.triangularView<Eigen::Lower>().solve(A);
  MatrixXd Bt = L.triangularView<Eigen::Lower>().solve(B.transpose());
  Eigen::BDCSVD<MatrixXd> svd(Bt);
  return svd.singularValues().minCoeff();
}

struct ConvergenceRow
{
  double h = 0.;
  int dofs = 0;
  HodgeErrors errors;
  double solve_seconds = 0.;
  double solver_residual = 0.;
};

/// Assemble, solve and measure one Hodge Laplacian run. For k = 0 the
/// manufactured solution is shifted by a constant so that its interpolate
/// satisfies the discrete mean constraint.
inline ConvergenceRow hodge_run(SpaceCache & cache, int k, int r, const Manufactured & mf, int quad_degree,
                                bool interpolate_source = true, unsigned threads = 0)
{
  HodgeLaplacian H(cache, k, r, threads);
  SparseMat A = H.assemble();
  VectorXd b = H.rhs(mf.g, quad_degree, interpolate_source);
  auto sol = H.solve(A, b);
  Manufactured shifted = mf;
  if (k == 0) {
    VectorXd iu = H.Xk().interpolate(mf.u, quad_degree);
    VectorXd ione = H.Xk().interpolate(H.constant_one_field(), quad_degree);
    double c = iu.dot(H.Mk() * ione) / ione.dot(H.Mk() * ione);
    FormField u0 = mf.u;
    auto base = mf.u.value;
    int n = u0.dim;
    shifted.u.dim = n;
    shifted.u.degree = 0;
    shifted.u.value = [base, c, n](const VectorXd & x) {
      AltForm w = base(x);
      w.coeffs[0] -= c;
      return w;
    };
  }
  ConvergenceRow row;
  row.h = cache.mesh().mesh_size();
  row.dofs = H.n_sigma() + H.n_u();
  row.errors = H.errors(shifted, sol, quad_degree);
  row.solve_seconds = sol.solve_seconds;
  row.solver_residual = sol.residual;
  return row;
}

/// Least-squares slope of log(err) against log(h)
inline double fitted_slope(const std::vector<double> & h, const std::vector<double> & err)
{
  int n = static_cast<int>(h.size());
  double sx = 0., sy = 0., sxx = 0., sxy = 0.;
  int m = 0;
  for (int i = 0; i < n; i++) {
    if (err[i] <= 0.) continue;
    double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    m++;
  }
  if (m < 2) return 0.;
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

} // namespace ddr
