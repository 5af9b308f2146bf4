// Polynomial differential forms in local (chart) coordinates: monomial-form bases,
// exterior derivative, Koszul differential, codifferential, evaluation, wedge,
// and affine pullback. All operations are intrinsic to the chart.

#pragma once

#include <ddr/exterior.hpp>

#include <map>
#include <mutex>
#include <optional>

namespace ddr {

namespace detail {

  struct MonomialTable
  {
    std::vector<std::vector<int>> expo;
    std::map<std::vector<int>, int> lookup;
  };

  inline const MonomialTable & monomials(int dim, int deg)
  {
    static std::map<std::pair<int, int>, MonomialTable> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(dim, deg);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    MonomialTable tb;
    tb.expo = multi_indices(dim, deg);
    for (std::size_t i = 0; i < tb.expo.size(); i++) tb.lookup[tb.expo[i]] = static_cast<int>(i);
    return cache.emplace(key, std::move(tb)).first->second;
  }

} // namespace detail

/// Affine change of variables y = shift + linear * y' between chart coordinates
struct AffineMap
{
  VectorXd shift;
  MatrixXd linear; // src_dim x dst_dim
};

/// Polynomial differential form on a d-dimensional chart.
/// Coefficients: rows indexed by monomials of multi_indices(dim, pdeg) (graded order,
/// so lower degrees are a prefix), columns by alt_basis(dim, degree).
struct PolyForm
{
  int dim = 0;     ///< chart dimension d
  int degree = 0;  ///< form degree
  int pdeg = 0;    ///< polynomial degree bound r
  MatrixXd c;

  PolyForm() = default;
  PolyForm(int dim_, int degree_, int pdeg_) : dim(dim_), degree(degree_), pdeg(pdeg_)
  {
    c = MatrixXd::Zero(poly_dim(dim, pdeg), alt_dim(dim, degree));
  }

  bool is_zero(double tol = 0.) const { return c.size() == 0 || c.lpNorm<Eigen::Infinity>() <= tol; }

  double norm() const { return c.size() == 0 ? 0. : c.norm(); }

  /// Zero-pad rows to polynomial degree bound R >= pdeg (graded order prefix)
  PolyForm embedded(int R) const
  {
    if (R == pdeg) return *this;
    if (R < pdeg) throw std::invalid_argument("PolyForm::embedded: target degree too small");
    PolyForm out(dim, degree, R);
    out.c.topRows(c.rows()) = c;
    return out;
  }

  PolyForm operator+(const PolyForm & o) const
  {
    int R = std::max(pdeg, o.pdeg);
    PolyForm r = embedded(R);
    r.c += o.embedded(R).c;
    return r;
  }
  PolyForm operator-(const PolyForm & o) const
  {
    int R = std::max(pdeg, o.pdeg);
    PolyForm r = embedded(R);
    r.c -= o.embedded(R).c;
    return r;
  }
  PolyForm operator*(double s) const
  {
    PolyForm r = *this;
    r.c *= s;
    return r;
  }

  AltForm evaluate(const VectorXd & y) const
  {
    AltForm w(dim, degree);
    if (c.size() == 0) return w;
    const auto & tb = detail::monomials(dim, pdeg);
    for (std::size_t m = 0; m < tb.expo.size(); m++) {
      double v = 1.;
      for (int i = 0; i < dim; i++) {
        for (int e = 0; e < tb.expo[m][i]; e++) v *= y[i];
      }
      w.coeffs += v * c.row(m).transpose();
    }
    return w;
  }
};

/// Monomial-form basis of P_r Lambda^l on a d-chart; empty when r < 0 or l outside [0,d]
inline std::vector<PolyForm> poly_form_basis(int d, int r, int l)
{
  std::vector<PolyForm> out;
  if (r < 0 || l < 0 || l > d) return out;
  int nm = poly_dim(d, r), na = alt_dim(d, l);
  out.reserve(nm * na);
  for (int m = 0; m < nm; m++) {
    for (int a = 0; a < na; a++) {
      PolyForm p(d, l, r);
      p.c(m, a) = 1.;
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Exterior derivative in chart coordinates
inline PolyForm exterior_derivative(const PolyForm & p)
{
  PolyForm out(p.dim, p.degree + 1, std::max(p.pdeg - 1, 0));
  if (p.degree + 1 > p.dim || p.c.size() == 0) return out;
  const auto & src = detail::monomials(p.dim, p.pdeg);
  const auto & dst = detail::monomials(p.dim, out.pdeg);
  auto srcAlt = alt_basis(p.dim, p.degree);
  for (std::size_t m = 0; m < src.expo.size(); m++) {
    for (std::size_t a = 0; a < srcAlt.size(); a++) {
      double coef = p.c(m, a);
      if (coef == 0.) continue;
      for (int i = 0; i < p.dim; i++) {
        if (src.expo[m][i] == 0) continue;
        std::vector<int> alpha = src.expo[m];
        alpha[i] -= 1;
        int mrow = dst.lookup.at(alpha);
        auto [s, merged] = detail::merge_axes({i}, srcAlt[a].axes);
        if (s == 0) continue;
        out.c(mrow, AltIndex{p.dim, merged}.rank()) += s * src.expo[m][i] * coef;
      }
    }
  }
  return out;
}

/// Koszul differential: contraction with the chart position field y
inline PolyForm koszul(const PolyForm & p)
{
  if (p.degree == 0) return PolyForm(p.dim, -1, 0); // convention: kappa on 0-forms is zero
  PolyForm out(p.dim, p.degree - 1, p.pdeg + 1);
  const auto & src = detail::monomials(p.dim, p.pdeg);
  const auto & dst = detail::monomials(p.dim, out.pdeg);
  auto srcAlt = alt_basis(p.dim, p.degree);
  for (std::size_t m = 0; m < src.expo.size(); m++) {
    for (std::size_t a = 0; a < srcAlt.size(); a++) {
      double coef = p.c(m, a);
      if (coef == 0.) continue;
      const auto & ax = srcAlt[a].axes;
      for (int j = 0; j < p.degree; j++) {
        std::vector<int> rest;
        for (int l = 0; l < p.degree; l++) {
          if (l != j) rest.push_back(ax[l]);
        }
        std::vector<int> alpha = src.expo[m];
        alpha[ax[j]] += 1;
        double s = (j % 2 == 0) ? 1. : -1.;
        out.c(dst.lookup.at(alpha), AltIndex{p.dim, rest}.rank()) += s * coef;
      }
    }
  }
  return out;
}

/// Apply the (chart) Hodge star columnwise
inline PolyForm star_poly(const PolyForm & p)
{
  PolyForm out(p.dim, p.dim - p.degree, p.pdeg);
  auto srcAlt = alt_basis(p.dim, p.degree);
  for (std::size_t a = 0; a < srcAlt.size(); a++) {
    AltForm unit = AltForm::basis_element(p.dim, srcAlt[a].axes);
    AltForm img = hodge_star(unit);
    for (int t = 0; t < img.coeffs.size(); t++) {
      if (img.coeffs[t] != 0.) out.c.col(t) += img.coeffs[t] * p.c.col(a);
    }
  }
  return out;
}

inline PolyForm star_inv_poly(const PolyForm & p)
{
  PolyForm out = star_poly(p);
  if ((p.degree * (p.dim - p.degree)) % 2 != 0) out.c = -out.c;
  return out;
}

/// Codifferential in chart coordinates; the sign makes <d a, b> = <a, delta b>
/// hold against the chart L2 product (validated by the adjointness oracle in tests).
inline PolyForm codifferential(const PolyForm & p)
{
  if (p.degree < 1) throw std::invalid_argument("codifferential: degree 0 input");
  PolyForm out = star_inv_poly(exterior_derivative(star_poly(p)));
  if (p.degree % 2 != 0) out.c = -out.c;
  return out;
}

inline PolyForm wedge_poly(const PolyForm & p, const PolyForm & q)
{
  if (p.dim != q.dim) throw std::invalid_argument("wedge_poly: dimension mismatch");
  PolyForm out(p.dim, p.degree + q.degree, p.pdeg + q.pdeg);
  if (out.c.size() == 0) return out;
  const auto & mp = detail::monomials(p.dim, p.pdeg);
  const auto & mq = detail::monomials(p.dim, q.pdeg);
  const auto & mo = detail::monomials(p.dim, out.pdeg);
  const auto & tb = detail::wedge_table(p.dim, p.degree, q.degree);
  for (std::size_t ma = 0; ma < mp.expo.size(); ma++) {
    for (int a = 0; a < p.c.cols(); a++) {
      double ca = p.c(ma, a);
      if (ca == 0.) continue;
      for (std::size_t mb = 0; mb < mq.expo.size(); mb++) {
        std::vector<int> alpha(p.dim);
        for (int i = 0; i < p.dim; i++) alpha[i] = mp.expo[ma][i] + mq.expo[mb][i];
        int mrow = mo.lookup.at(alpha);
        for (int b = 0; b < q.c.cols(); b++) {
          int s = tb.sign(a, b);
          if (s != 0 && q.c(mb, b) != 0.) out.c(mrow, tb.target(a, b)) += s * ca * q.c(mb, b);
        }
      }
    }
  }
  return out;
}

namespace detail {

  /// Multiply scalar polynomials given as coefficient vectors over monomials(dim, *)
  inline VectorXd poly_multiply(const VectorXd & a, int dega, const VectorXd & b, int degb, int dim)
  {
    const auto & ma = monomials(dim, dega);
    const auto & mb = monomials(dim, degb);
    const auto & mo = monomials(dim, dega + degb);
    VectorXd out = VectorXd::Zero(static_cast<int>(mo.expo.size()));
    for (std::size_t i = 0; i < ma.expo.size(); i++) {
      if (a[i] == 0.) continue;
      for (std::size_t j = 0; j < mb.expo.size(); j++) {
        if (b[j] == 0.) continue;
        std::vector<int> e(dim);
        for (int l = 0; l < dim; l++) e[l] = ma.expo[i][l] + mb.expo[j][l];
        out[mo.lookup.at(e)] += a[i] * b[j];
      }
    }
    return out;
  }

} // namespace detail

/// Pullback of p under the affine substitution y = map.shift + map.linear * y'.
/// The result is a form on the chart of dimension map.linear.cols() with the same
/// polynomial degree bound (affine substitution preserves total degree).
inline PolyForm pullback(const PolyForm & p, const AffineMap & map)
{
  int dsrc = p.dim, ddst = static_cast<int>(map.linear.cols());
  if (map.linear.rows() != dsrc || map.shift.size() != dsrc) throw std::invalid_argument("pullback: shape mismatch");
  PolyForm out(ddst, p.degree, p.pdeg);
  if (p.degree > ddst) return out; // trace of higher-degree form onto a small chart vanishes
  const auto & msrc = detail::monomials(dsrc, p.pdeg);
  const auto & mdst = detail::monomials(ddst, p.pdeg);

  // composed monomials: for each source monomial, its expansion in destination coordinates
  std::vector<VectorXd> composed(msrc.expo.size());
  {
    // linear polynomials a_i + sum_j B_ij y'_j, each of degree 1 in destination variables
    std::vector<VectorXd> lin(dsrc);
    const auto & m1 = detail::monomials(ddst, 1);
    for (int i = 0; i < dsrc; i++) {
      VectorXd v = VectorXd::Zero(static_cast<int>(m1.expo.size()));
      std::vector<int> zero(ddst, 0);
      v[m1.lookup.at(zero)] = map.shift[i];
      for (int j = 0; j < ddst; j++) {
        std::vector<int> e(ddst, 0);
        e[j] = 1;
        v[m1.lookup.at(e)] += map.linear(i, j);
      }
      lin[i] = v;
    }
    for (std::size_t m = 0; m < msrc.expo.size(); m++) {
      VectorXd acc = VectorXd::Ones(1); // constant 1, degree 0
      int dega = 0;
      for (int i = 0; i < dsrc; i++) {
        for (int e = 0; e < msrc.expo[m][i]; e++) {
          acc = detail::poly_multiply(acc, dega, lin[i], 1, ddst);
          dega += 1;
        }
      }
      VectorXd full = VectorXd::Zero(static_cast<int>(mdst.expo.size()));
      full.head(acc.size()) = acc;
      composed[m] = full;
    }
  }

  // alt part: dy^sigma -> sum_tau det(B[sigma, tau]) dy'^tau
  auto srcAlt = alt_basis(dsrc, p.degree);
  auto dstAlt = alt_basis(ddst, p.degree);
  MatrixXd altmap(srcAlt.size(), dstAlt.size());
  for (std::size_t s = 0; s < srcAlt.size(); s++) {
    for (std::size_t t = 0; t < dstAlt.size(); t++) {
      MatrixXd sub(p.degree, p.degree);
      for (int i = 0; i < p.degree; i++) {
        for (int j = 0; j < p.degree; j++) {
          sub(i, j) = map.linear(srcAlt[s].axes[i], dstAlt[t].axes[j]);
        }
      }
      altmap(s, t) = (p.degree == 0) ? 1. : sub.determinant();
    }
  }
  if (p.degree == 0) altmap = MatrixXd::Ones(1, 1);

  for (std::size_t m = 0; m < msrc.expo.size(); m++) {
    for (int a = 0; a < p.c.cols(); a++) {
      double coef = p.c(m, a);
      if (coef == 0.) continue;
      for (int t = 0; t < static_cast<int>(dstAlt.size()); t++) {
        if (altmap(a, t) == 0.) continue;
        out.c.col(t) += coef * altmap(a, t) * composed[m];
      }
    }
  }
  return out;
}

// -- flattened operator matrices -------------------------------------------
//
// Coefficient vectors are flattened alternating-component major: the entry of
// monomial m in alternating slot a sits at index a * nmono + m. The builders
// below return cached matrices acting on such vectors.

namespace detail {

  inline const MatrixXd & flat_operator(const std::string & which, int d, int l, int rin, int rout)
  {
    static std::map<std::tuple<std::string, int, int, int, int>, MatrixXd> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(which, d, l, rin, rout);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    int lout = (which == "d") ? l + 1 : (which == "koszul") ? l - 1 : d - l;
    int nm_out = poly_dim(d, rout), na_out = alt_dim(d, lout);
    int nm_in = poly_dim(d, rin), na_in = alt_dim(d, l);
    MatrixXd M = MatrixXd::Zero(nm_out * na_out, nm_in * na_in);
    // column index follows the alt-major flattening: a * nm_in + m
    for (int m = 0; m < nm_in; m++) {
      for (int a = 0; a < na_in; a++) {
        PolyForm b(d, l, rin);
        b.c(m, a) = 1.;
        PolyForm img;
        if (which == "d") {
          img = exterior_derivative(b);
        } else if (which == "koszul") {
          img = koszul(b);
        } else {
          img = star_poly(b);
        }
        if (img.c.size() == 0) continue;
        PolyForm emb = img.embedded(rout);
        M.col(a * nm_in + m) = Eigen::Map<const VectorXd>(emb.c.data(), emb.c.size());
      }
    }
    return cache.emplace(key, std::move(M)).first->second;
  }

} // namespace detail

/// Matrix of the exterior derivative from P_rin Lambda^l to P_rout Lambda^{l+1} (rout >= rin-1)
inline const MatrixXd & d_flat(int d, int l, int rin, int rout)
{
  return detail::flat_operator("d", d, l, rin, rout);
}

/// Matrix of the Koszul differential from P_rin Lambda^l to P_rout Lambda^{l-1} (rout >= rin+1)
inline const MatrixXd & koszul_flat(int d, int l, int rin, int rout)
{
  return detail::flat_operator("koszul", d, l, rin, rout);
}

/// Matrix of the chart Hodge star on P_r Lambda^l (signed permutation of alt blocks)
inline const MatrixXd & star_flat(int d, int l, int r)
{
  return detail::flat_operator("star", d, l, r, r);
}

/// A differential form field given by evaluators in ambient coordinates
struct FormField
{
  int dim = 0;    ///< ambient dimension
  int degree = 0; ///< form degree
  std::function<AltForm(const VectorXd &)> value;
  std::function<AltForm(const VectorXd &)> derivative;     ///< optional: d omega
  std::function<AltForm(const VectorXd &)> codifferential; ///< optional: delta omega

  bool has_derivative() const { return static_cast<bool>(derivative); }
  bool has_codifferential() const { return static_cast<bool>(codifferential); }

  static FormField zero(int dim, int degree)
  {
    FormField f;
    f.dim = dim;
    f.degree = degree;
    f.value = [dim, degree](const VectorXd &) { return AltForm(dim, degree); };
    f.derivative = [dim, degree](const VectorXd &) { return AltForm(dim, degree + 1); };
    f.codifferential = [dim, degree](const VectorXd &) { return AltForm(dim, degree - 1); };
    return f;
  }
};

} // namespace ddr
