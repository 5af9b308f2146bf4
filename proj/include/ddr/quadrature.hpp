// Quadrature on reference simplices via conical products of Gauss-Jacobi rules,
// exact to a requested total degree; integration of polynomial-form wedges and
// form fields over mesh cells; mass and pairing matrices.

#pragma once

#include <ddr/mesh.hpp>

#include <mutex>

namespace ddr {

/// Rule on the reference simplex {y >= 0, sum y <= 1}; weights sum to 1/d!
struct QuadratureRule
{
  int dim = 0;
  int degree_exact = 0;
  MatrixXd points; ///< dim x npoints
  VectorXd weights;
};

namespace detail {

  /// Gauss-Jacobi nodes/weights for weight (1-x)^alpha on [0,1] (Golub-Welsch)
  inline void gauss_jacobi01(int npoints, int alpha, VectorXd & x, VectorXd & w)
  {
    const double a = alpha, b = 0.;
    MatrixXd J = MatrixXd::Zero(npoints, npoints);
    for (int k = 0; k < npoints; k++) {
      double den = (2 * k + a + b) * (2 * k + a + b + 2);
      double diag = (den == 0.) ? (b - a) / (a + b + 2) : (b * b - a * a) / den;
      J(k, k) = diag;
      if (k + 1 < npoints) {
        int kk = k + 1;
        double num = 4. * kk * (kk + a) * (kk + b) * (kk + a + b);
        double d2 = (2 * kk + a + b) * (2 * kk + a + b);
        double off = std::sqrt(num / (d2 * (2 * kk + a + b + 1) * (2 * kk + a + b - 1)));
        J(k, k + 1) = off;
        J(k + 1, k) = off;
      }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    // total mass of (1-x)^a on [-1,1]: 2^{a+1} / (a+1)
    double mu0 = std::pow(2., a + 1.) / (a + 1.);
    x.resize(npoints);
    w.resize(npoints);
    for (int i = 0; i < npoints; i++) {
      x[i] = (1. + es.eigenvalues()[i]) / 2.; // map [-1,1] -> [0,1]
      double v = es.eigenvectors()(0, i);
      w[i] = mu0 * v * v * std::pow(2., -a - 1.); // weight transform to [0,1]
    }
  }

  inline double factorial(int n)
  {
    double r = 1.;
    for (int i = 2; i <= n; i++) r *= i;
    return r;
  }

  inline QuadratureRule make_rule(int dim, int degree)
  {
    QuadratureRule rule;
    rule.dim = dim;
    rule.degree_exact = degree;
    if (dim == 0) {
      rule.points = MatrixXd::Zero(0, 1);
      rule.weights = VectorXd::Ones(1);
      return rule;
    }
    int m = std::max(1, (degree + 2) / 2); // ceil((degree+1)/2)
    std::vector<VectorXd> xs(dim), ws(dim);
    for (int j = 0; j < dim; j++) gauss_jacobi01(m, dim - 1 - j, xs[j], ws[j]);
    int np = 1;
    for (int j = 0; j < dim; j++) np *= m;
    rule.points.resize(dim, np);
    rule.weights.resize(np);
    std::vector<int> idx(dim, 0);
    for (int q = 0; q < np; q++) {
      double wq = 1., remaining = 1.;
      VectorXd y(dim);
      for (int j = 0; j < dim; j++) {
        double u = xs[j][idx[j]];
        y[j] = remaining * u;
        wq *= ws[j][idx[j]];
        remaining *= (1. - u);
      }
      rule.points.col(q) = y;
      rule.weights[q] = wq;
      for (int j = dim - 1; j >= 0; j--) {
        if (++idx[j] < m) break;
        idx[j] = 0;
      }
    }
    // self-test: all monomials of total degree <= degree integrate exactly
    for (const auto & alpha : multi_indices(dim, degree)) {
      double num = 1.;
      int tot = 0;
      for (int g : alpha) {
        num *= factorial(g);
        tot += g;
      }
      double exact = num / factorial(tot + dim);
      double got = 0.;
      for (int q = 0; q < np; q++) {
        double v = 1.;
        for (int j = 0; j < dim; j++) {
          for (int e = 0; e < alpha[j]; e++) v *= rule.points(j, q);
        }
        got += rule.weights[q] * v;
      }
      if (std::abs(got - exact) > 1e-12 * std::max(1., std::abs(exact))) {
        throw std::runtime_error("quadrature self-test failed at dim " + std::to_string(dim) + " degree " + std::to_string(degree));
      }
    }
    return rule;
  }

} // namespace detail

/// Cached rule lookup; degree is capped at 21
inline const QuadratureRule & quadrature_rule(int dim, int degree)
{
  if (degree > 21) throw std::invalid_argument("quadrature_rule: degree cap is 21");
  if (degree < 0) degree = 0;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(dim, degree);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  return cache.emplace(key, detail::make_rule(dim, degree)).first->second;
}

/// Quadrature nodes of a cell in its own chart coordinates; weights carry the
/// chart jacobians of the simplicial subdivision, so sums approximate the
/// integral of chart top-form coefficients over the (scaled) cell.
struct ChartQuadrature
{
  MatrixXd points; ///< chart_dim x npoints
  VectorXd weights;
};

inline ChartQuadrature chart_quadrature(const Cell & c, int degree)
{
  const QuadratureRule & rule = quadrature_rule(c.dim, degree);
  int per = static_cast<int>(rule.weights.size());
  int np = per * static_cast<int>(c.chunks.size());
  ChartQuadrature q;
  q.points.resize(c.dim, np);
  q.weights.resize(np);
  int at = 0;
  for (const auto & s : c.chunks) {
    VectorXd y0 = c.chart.to_chart(s.vertices.col(0));
    MatrixXd J(c.dim, c.dim);
    for (int k = 0; k < c.dim; k++) J.col(k) = c.chart.to_chart(s.vertices.col(k + 1)) - y0;
    double det = (c.dim == 0) ? 1. : J.determinant();
    for (int i = 0; i < per; i++) {
      q.points.col(at) = y0 + J * rule.points.col(i);
      q.weights[at] = det * rule.weights[i];
      at++;
    }
  }
  return q;
}

/// Values of all monomials of multi_indices(dim, deg) at the given points (npts x nmono)
inline MatrixXd monomial_values(int dim, int deg, const MatrixXd & pts)
{
  const auto & tb = detail::monomials(dim, deg);
  int np = static_cast<int>(pts.cols());
  MatrixXd V(np, tb.expo.size());
  // per-variable power tables
  std::vector<MatrixXd> pw(dim);
  for (int i = 0; i < dim; i++) {
    pw[i].resize(np, deg + 1);
    pw[i].col(0).setOnes();
    for (int e = 1; e <= deg; e++) pw[i].col(e) = pw[i].col(e - 1).cwiseProduct(pts.row(i).transpose());
  }
  for (std::size_t m = 0; m < tb.expo.size(); m++) {
    VectorXd v = VectorXd::Ones(np);
    for (int i = 0; i < dim; i++) {
      if (tb.expo[m][i] > 0) v = v.cwiseProduct(pw[i].col(tb.expo[m][i]));
    }
    V.col(m) = v;
  }
  return V;
}

/// Evaluate a polynomial form at many points: (npts x nalt) matrix of coefficients
inline MatrixXd evaluate_many(const PolyForm & p, const MatrixXd & pts)
{
  if (p.c.size() == 0) return MatrixXd::Zero(pts.cols(), 0);
  return monomial_values(p.dim, p.pdeg, pts) * p.c;
}

/// Integral over the cell (chart representation) of a top-degree polynomial form
inline double integrate_top(const Cell & c, const PolyForm & p)
{
  if (p.degree != c.dim || p.dim != c.dim) throw std::invalid_argument("integrate_top: not a top-degree form on this cell");
  if (c.dim == 0) return p.c.size() ? p.c(0, 0) : 0.;
  ChartQuadrature q = chart_quadrature(c, p.pdeg);
  return q.weights.dot(evaluate_many(p, q.points).col(0));
}

/// Integral of a wedge of complementary-degree polynomial forms over a cell
inline double integrate_wedge(const Cell & c, const PolyForm & a, const PolyForm & b)
{
  if (a.degree + b.degree != c.dim) throw std::invalid_argument("integrate_wedge: degrees must sum to the cell dimension");
  if (c.dim == 0) return (a.c.size() && b.c.size()) ? a.c(0, 0) * b.c(0, 0) : 0.;
  if (a.c.size() == 0 || b.c.size() == 0) return 0.;
  ChartQuadrature q = chart_quadrature(c, a.pdeg + b.pdeg);
  MatrixXd va = evaluate_many(a, q.points);
  MatrixXd vb = evaluate_many(b, q.points);
  const auto & tb = detail::wedge_table(c.dim, a.degree, b.degree);
  double val = 0.;
  for (int i = 0; i < va.cols(); i++) {
    for (int j = 0; j < vb.cols(); j++) {
      int s = tb.sign(i, j);
      if (s != 0) val += s * q.weights.dot(va.col(i).cwiseProduct(vb.col(j)));
    }
  }
  return val;
}

/// Chart trace of an ambient field on a cell: h^k * trace through the frame.
/// This is the pullback of the field to the scaled chart.
inline AltForm chart_trace(const Cell & c, const FormField & F, const VectorXd & y)
{
  AltForm amb = F.value(c.chart.from_chart(y));
  AltForm tr = trace_alt(amb, c.chart.frame);
  tr.coeffs *= std::pow(c.chart.h, F.degree);
  return tr;
}

/// Integral over a cell of (chart trace of F) ^ b, with b of complementary degree
inline double integrate_field_wedge(const Cell & c, const FormField & F, const PolyForm & b, int quad_degree)
{
  if (F.degree + b.degree != c.dim) throw std::invalid_argument("integrate_field_wedge: degrees must sum to the cell dimension");
  if (c.dim == 0) return F.value(c.chart.center).coeffs[0] * (b.c.size() ? b.c(0, 0) : 0.);
  ChartQuadrature q = chart_quadrature(c, quad_degree);
  MatrixXd vb = evaluate_many(b, q.points);
  const auto & tb = detail::wedge_table(c.dim, F.degree, b.degree);
  double val = 0.;
  for (int i = 0; i < q.weights.size(); i++) {
    AltForm tr = chart_trace(c, F, q.points.col(i));
    double acc = 0.;
    for (int s = 0; s < tr.coeffs.size(); s++) {
      if (tr.coeffs[s] == 0.) continue;
      for (int j = 0; j < vb.cols(); j++) {
        if (tb.sign(s, j) != 0) acc += tb.sign(s, j) * tr.coeffs[s] * vb(i, j);
      }
    }
    val += q.weights[i] * acc;
  }
  return val;
}

/// Physical L2 mass matrix of a family of same-degree polynomial forms on a cell:
/// M_ij = integral over f of b_i ^ star b_j, including the h^{d-2l} chart factor.
inline MatrixXd mass_matrix(const Cell & c, const std::vector<PolyForm> & basis)
{
  int nb = static_cast<int>(basis.size());
  MatrixXd M = MatrixXd::Zero(nb, nb);
  if (nb == 0) return M;
  int l = basis[0].degree;
  if (c.dim == 0) {
    for (int i = 0; i < nb; i++) {
      for (int j = 0; j < nb; j++) M(i, j) = basis[i].c(0, 0) * basis[j].c(0, 0);
    }
    return M;
  }
  int maxdeg = 0;
  for (const auto & b : basis) maxdeg = std::max(maxdeg, b.pdeg);
  ChartQuadrature q = chart_quadrature(c, 2 * maxdeg);
  MatrixXd V = monomial_values(c.dim, maxdeg, q.points);
  int nalt = alt_dim(c.dim, l);
  // per alt component: coefficient matrix (nmono x nb), then a weighted Gram
  for (int a = 0; a < nalt; a++) {
    MatrixXd C(V.cols(), nb);
    for (int b = 0; b < nb; b++) {
      VectorXd col = VectorXd::Zero(V.cols());
      col.head(basis[b].c.rows()) = basis[b].c.col(a);
      C.col(b) = col;
    }
    MatrixXd vals = V * C; // npts x nb
    M += vals.transpose() * q.weights.asDiagonal() * vals;
  }
  return std::pow(c.chart.h, c.dim - 2 * l) * M;
}

/// Pairing matrix P_ij = integral over the cell of a_i ^ b_j (complementary degrees)
inline MatrixXd pairing_matrix(const Cell & c, const std::vector<PolyForm> & A, const std::vector<PolyForm> & B)
{
  MatrixXd P(A.size(), B.size());
  for (std::size_t i = 0; i < A.size(); i++) {
    for (std::size_t j = 0; j < B.size(); j++) P(i, j) = integrate_wedge(c, A[i], B[j]);
  }
  return P;
}

} // namespace ddr
