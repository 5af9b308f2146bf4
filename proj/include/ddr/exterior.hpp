// Constant alternating k-forms on a d-dimensional oriented inner-product space:
// increasing-index bases, exterior product, Hodge star, contraction, trace onto
// subspaces, and the 2D/3D vector proxy identifications.

#pragma once

#include <ddr/common.hpp>

#include <map>
#include <mutex>

namespace ddr {

/// Strictly increasing subset of {0,...,dim-1} indexing a basis alternating form.
/// Axes are stored 0-based; the basis element is dx^{axes[0]+1} ^ ... ^ dx^{axes[k-1]+1}.
struct AltIndex
{
  int dim;
  std::vector<int> axes;

  int degree() const { return static_cast<int>(axes.size()); }

  bool valid() const
  {
    if (dim < 0 || degree() > dim) return false;
    for (int i = 0; i < degree(); i++) {
      if (axes[i] < 0 || axes[i] >= dim) return false;
      if (i > 0 && axes[i] <= axes[i - 1]) return false;
    }
    return true;
  }

  /// Lexicographic rank among all increasing subsets of size degree()
  int rank() const
  {
    int k = degree();
    int r = 0, prev = -1;
    for (int i = 0; i < k; i++) {
      for (int a = prev + 1; a < axes[i]; a++) {
        r += static_cast<int>(binomial(dim - 1 - a, k - 1 - i));
      }
      prev = axes[i];
    }
    return r;
  }

  bool operator==(const AltIndex & o) const { return dim == o.dim && axes == o.axes; }
};

/// All increasing subsets of size degree in lexicographic order; empty if degree > dim
inline std::vector<AltIndex> alt_basis(int dim, int degree)
{
  std::vector<AltIndex> out;
  if (degree < 0 || degree > dim) return out;
  std::vector<int> cur(degree);
  std::function<void(int, int)> rec = [&](int pos, int start) {
    if (pos == degree) {
      out.push_back(AltIndex{dim, cur});
      return;
    }
    for (int a = start; a < dim; a++) {
      cur[pos] = a;
      rec(pos + 1, a + 1);
    }
  };
  rec(0, 0);
  return out;
}

inline int alt_dim(int dim, int degree)
{
  return (degree < 0 || degree > dim) ? 0 : static_cast<int>(binomial(dim, degree));
}

/// Orientation flag relative to the canonical ordered frame
struct Orientation
{
  int sign = +1;
};

namespace detail {

  /// Merge two increasing axis lists; returns (0,{}) if they intersect, else
  /// (sign of the interleaving permutation, merged sorted list).
  inline std::pair<int, std::vector<int>> merge_axes(const std::vector<int> & a, const std::vector<int> & b)
  {
    std::vector<int> merged;
    merged.reserve(a.size() + b.size());
    int inversions = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) return {0, {}};
      if (a[i] < b[j]) {
        merged.push_back(a[i++]);
      } else {
        // b[j] jumps over the remaining entries of a
        inversions += static_cast<int>(a.size() - i);
        merged.push_back(b[j++]);
      }
    }
    while (i < a.size()) merged.push_back(a[i++]);
    while (j < b.size()) merged.push_back(b[j++]);
    return {(inversions % 2 == 0) ? 1 : -1, merged};
  }

  /// Sign of the permutation (axes, complement) of (0,...,dim-1)
  inline int star_sign(int dim, const std::vector<int> & axes)
  {
    // count inversions: pairs (a in axes, c in complement) with c < a
    int inv = 0;
    std::vector<char> in(dim, 0);
    for (int a : axes) in[a] = 1;
    int seen_comp = 0;
    for (int x = 0; x < dim; x++) {
      if (!in[x]) {
        seen_comp++;
      } else {
        inv += seen_comp;
      }
    }
    // inv counts pairs (a, c) with c < a; permutation (axes | complement):
    // moving each complement element past the axes elements greater than it
    return (inv % 2 == 0) ? 1 : -1;
  }

  struct WedgeTable
  {
    // entry (i,j): target rank and sign for basis_i(deg a) ^ basis_j(deg b); sign 0 when the product vanishes
    Eigen::MatrixXi target;
    Eigen::MatrixXi sign;
  };

  /// Cached sign tables per (dim, degA, degB)
  inline const WedgeTable & wedge_table(int dim, int da, int db)
  {
    static std::map<std::tuple<int, int, int>, WedgeTable> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(dim, da, db);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    WedgeTable tb;
    auto A = alt_basis(dim, da), B = alt_basis(dim, db);
    tb.target.setZero(A.size(), B.size());
    tb.sign.setZero(A.size(), B.size());
    for (std::size_t i = 0; i < A.size(); i++) {
      for (std::size_t j = 0; j < B.size(); j++) {
        auto [s, merged] = merge_axes(A[i].axes, B[j].axes);
        if (s != 0) {
          tb.target(i, j) = AltIndex{dim, merged}.rank();
          tb.sign(i, j) = s;
        }
      }
    }
    return cache.emplace(key, std::move(tb)).first->second;
  }

} // namespace detail

/// A constant alternating form: dim, degree, dense coefficients over alt_basis(dim,degree)
struct AltForm
{
  int dim = 0;
  int degree = 0;
  VectorXd coeffs;

  AltForm() = default;
  AltForm(int dim_, int degree_) : dim(dim_), degree(degree_)
  {
    coeffs = VectorXd::Zero(alt_dim(dim, degree));
  }

  static AltForm basis_element(int dim, const std::vector<int> & axes)
  {
    AltForm w(dim, static_cast<int>(axes.size()));
    w.coeffs[AltIndex{dim, axes}.rank()] = 1.;
    return w;
  }

  bool is_zero(double tol = 0.) const { return coeffs.size() == 0 || coeffs.lpNorm<Eigen::Infinity>() <= tol; }

  AltForm operator+(const AltForm & o) const
  {
    AltForm r = *this;
    r.coeffs += o.coeffs;
    return r;
  }
  AltForm operator-(const AltForm & o) const
  {
    AltForm r = *this;
    r.coeffs -= o.coeffs;
    return r;
  }
  AltForm operator*(double s) const
  {
    AltForm r = *this;
    r.coeffs *= s;
    return r;
  }

  /// Evaluate on degree() vectors (columns of V)
  double operator()(const MatrixXd & V) const
  {
    if (degree == 0) return coeffs.size() ? coeffs[0] : 0.;
    double val = 0.;
    auto basis = alt_basis(dim, degree);
    for (std::size_t r = 0; r < basis.size(); r++) {
      if (coeffs[r] == 0.) continue;
      MatrixXd sub(degree, degree);
      for (int i = 0; i < degree; i++) {
        for (int j = 0; j < degree; j++) {
          sub(i, j) = V(basis[r].axes[i], j);
        }
      }
      val += coeffs[r] * sub.determinant();
    }
    return val;
  }
};

/// Euclidean inner product of same-degree forms (increasing basis is orthonormal)
inline double inner(const AltForm & a, const AltForm & b)
{
  return a.coeffs.dot(b.coeffs);
}

inline AltForm wedge(const AltForm & a, const AltForm & b)
{
  if (a.dim != b.dim) throw std::invalid_argument("wedge: dimension mismatch");
  AltForm r(a.dim, a.degree + b.degree);
  if (r.coeffs.size() == 0 || a.coeffs.size() == 0 || b.coeffs.size() == 0) return r;
  const auto & tb = detail::wedge_table(a.dim, a.degree, b.degree);
  for (int i = 0; i < a.coeffs.size(); i++) {
    if (a.coeffs[i] == 0.) continue;
    for (int j = 0; j < b.coeffs.size(); j++) {
      int s = tb.sign(i, j);
      if (s != 0 && b.coeffs[j] != 0.) r.coeffs[tb.target(i, j)] += s * a.coeffs[i] * b.coeffs[j];
    }
  }
  return r;
}

/// Hodge star for the Euclidean product and (optionally reversed) canonical orientation
inline AltForm hodge_star(const AltForm & a, Orientation o = {})
{
  AltForm r(a.dim, a.dim - a.degree);
  if (a.degree > a.dim || a.degree < 0) return r;
  auto basis = alt_basis(a.dim, a.degree);
  for (std::size_t i = 0; i < basis.size(); i++) {
    if (a.coeffs[i] == 0.) continue;
    std::vector<int> comp;
    std::vector<char> in(a.dim, 0);
    for (int x : basis[i].axes) in[x] = 1;
    for (int x = 0; x < a.dim; x++) {
      if (!in[x]) comp.push_back(x);
    }
    int s = detail::star_sign(a.dim, basis[i].axes) * o.sign;
    r.coeffs[AltIndex{a.dim, comp}.rank()] += s * a.coeffs[i];
  }
  return r;
}

/// Inverse Hodge star: (-1)^{k(n-k)} star on k-forms, so that hodge_star_inv(hodge_star(a)) = a
inline AltForm hodge_star_inv(const AltForm & a, Orientation o = {})
{
  int k = a.degree, n = a.dim;
  AltForm r = hodge_star(a, o);
  if ((k * (n - k)) % 2 != 0) r.coeffs = -r.coeffs;
  return r;
}

/// Contraction a .| v (v in the first slot); degree drops by one
inline AltForm contraction(const AltForm & a, const VectorXd & v)
{
  if (a.degree < 1) throw std::invalid_argument("contraction: degree 0 input");
  AltForm r(a.dim, a.degree - 1);
  auto basis = alt_basis(a.dim, a.degree);
  for (std::size_t i = 0; i < basis.size(); i++) {
    if (a.coeffs[i] == 0.) continue;
    const auto & ax = basis[i].axes;
    for (int j = 0; j < a.degree; j++) {
      std::vector<int> rest;
      rest.reserve(a.degree - 1);
      for (int l = 0; l < a.degree; l++) {
        if (l != j) rest.push_back(ax[l]);
      }
      double s = (j % 2 == 0) ? 1. : -1.;
      r.coeffs[AltIndex{a.dim, rest}.rank()] += s * v[ax[j]] * a.coeffs[i];
    }
  }
  return r;
}

/// Trace (pullback under inclusion) onto the subspace spanned by the orthonormal
/// columns of frame; the result lives on dimension frame.cols().
inline AltForm trace_alt(const AltForm & a, const MatrixXd & frame, double gram_tol = 1e-12)
{
  int d = static_cast<int>(frame.cols());
  if (frame.rows() != a.dim) throw std::invalid_argument("trace_alt: frame rows != form dim");
  MatrixXd G = frame.transpose() * frame - MatrixXd::Identity(d, d);
  if (d > 0 && G.lpNorm<Eigen::Infinity>() > gram_tol) throw std::invalid_argument("trace_alt: frame not orthonormal");
  AltForm r(d, a.degree);
  if (a.degree > d) return r; // zero form
  if (a.degree == 0) {
    r.coeffs = a.coeffs;
    return r;
  }
  auto src = alt_basis(a.dim, a.degree);
  auto dst = alt_basis(d, a.degree);
  for (std::size_t t = 0; t < dst.size(); t++) {
    MatrixXd V(a.dim, a.degree);
    for (int j = 0; j < a.degree; j++) V.col(j) = frame.col(dst[t].axes[j]);
    // evaluate a on the selected frame vectors
    double val = 0.;
    for (std::size_t s = 0; s < src.size(); s++) {
      if (a.coeffs[s] == 0.) continue;
      MatrixXd sub(a.degree, a.degree);
      for (int i = 0; i < a.degree; i++) {
        for (int j = 0; j < a.degree; j++) {
          sub(i, j) = V(src[s].axes[i], j);
        }
      }
      val += a.coeffs[s] * sub.determinant();
    }
    r.coeffs[t] = val;
  }
  return r;
}

/// 2D identification conventions for 1-forms; Clockwise matches the proxy
/// v -> v_perp = (v2, -v1) and is the default throughout.
enum class Proxy2D
{
  Direct,   ///< a dx1 + b dx2  <->  (a, b)
  Clockwise ///< a dx1 + b dx2  <->  (b, -a)
};

/// Scalar proxies: k = 0 (value) and k = n (coefficient of vol)
inline AltForm proxy_encode_scalar(double s, int degree, int dim)
{
  if (degree != 0 && degree != dim) throw std::invalid_argument("proxy_encode_scalar: degree must be 0 or dim");
  AltForm w(dim, degree);
  w.coeffs[0] = s;
  return w;
}

inline double proxy_decode_scalar(const AltForm & a)
{
  if (a.degree != 0 && a.degree != a.dim) throw std::invalid_argument("proxy_decode_scalar: degree must be 0 or dim");
  return a.coeffs[0];
}

/// Vector proxies for 1-forms and (n-1)-forms in dimensions 2 and 3
inline AltForm proxy_encode_vector(const VectorXd & v, int degree, int dim, Proxy2D conv = Proxy2D::Clockwise)
{
  if (dim != 2 && dim != 3) throw std::invalid_argument("proxy_encode_vector: dim must be 2 or 3");
  AltForm w(dim, degree);
  if (dim == 3 && degree == 1) {
    w.coeffs << v[0], v[1], v[2];
  } else if (dim == 3 && degree == 2) {
    // v <-> v1 dx2^dx3 - v2 dx1^dx3 + v3 dx1^dx2 ; basis order {12,13,23}
    w.coeffs << v[2], -v[1], v[0];
  } else if (dim == 2 && degree == 1) {
    if (conv == Proxy2D::Direct) {
      w.coeffs << v[0], v[1];
    } else {
      // form a dx1 + b dx2 has proxy (b,-a); invert: a = -v2, b = v1
      w.coeffs << -v[1], v[0];
    }
  } else {
    throw std::invalid_argument("proxy_encode_vector: unsupported (dim, degree)");
  }
  return w;
}

inline VectorXd proxy_decode_vector(const AltForm & a, Proxy2D conv = Proxy2D::Clockwise)
{
  VectorXd v(a.dim);
  if (a.dim == 3 && a.degree == 1) {
    v << a.coeffs[0], a.coeffs[1], a.coeffs[2];
  } else if (a.dim == 3 && a.degree == 2) {
    v << a.coeffs[2], -a.coeffs[1], a.coeffs[0];
  } else if (a.dim == 2 && a.degree == 1) {
    if (conv == Proxy2D::Direct) {
      v << a.coeffs[0], a.coeffs[1];
    } else {
      v << a.coeffs[1], -a.coeffs[0];
    }
  } else {
    throw std::invalid_argument("proxy_decode_vector: unsupported (dim, degree)");
  }
  return v;
}

} // namespace ddr
