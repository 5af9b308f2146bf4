// Smooth form fields with analytic derivatives: trigonometric and polynomial
// coefficient families, exterior derivative and codifferential evaluators, and
// manufactured solutions for the Hodge Laplacian.

#pragma once

#include <ddr/polynomial.hpp>

namespace ddr {

/// Scalar coefficient with optional derivative layers
struct ScalarField
{
  std::function<double(const VectorXd &)> value;
  std::function<VectorXd(const VectorXd &)> gradient;
  std::function<MatrixXd(const VectorXd &)> hessian;
};

/// amplitude * prod_i sin(pi f_i x_i + phase_i); entries with f_i = 0 contribute
/// the constant factor sin(phase_i)
inline ScalarField trig_scalar(int n, const VectorXd & freq, const VectorXd & phase, double amplitude)
{
  auto parts = [n, freq, phase](const VectorXd & x, std::vector<double> & s, std::vector<double> & c) {
    s.resize(n);
    c.resize(n);
    for (int i = 0; i < n; i++) {
      double arg = M_PI * freq[i] * x[i] + phase[i];
      s[i] = std::sin(arg);
      c[i] = std::cos(arg);
    }
  };
  ScalarField f;
  f.value = [=](const VectorXd & x) {
    std::vector<double> s, c;
    parts(x, s, c);
    double v = amplitude;
    for (int i = 0; i < n; i++) v *= s[i];
    return v;
  };
  f.gradient = [=](const VectorXd & x) {
    std::vector<double> s, c;
    parts(x, s, c);
    VectorXd g(n);
    for (int i = 0; i < n; i++) {
      double v = amplitude * M_PI * freq[i] * c[i];
      for (int j = 0; j < n; j++) {
        if (j != i) v *= s[j];
      }
      g[i] = v;
    }
    return g;
  };
  f.hessian = [=](const VectorXd & x) {
    std::vector<double> s, c;
    parts(x, s, c);
    MatrixXd H(n, n);
    for (int i = 0; i < n; i++) {
      for (int j = 0; j < n; j++) {
        double v = amplitude;
        if (i == j) {
          v *= -M_PI * M_PI * freq[i] * freq[i];
          for (int l = 0; l < n; l++) v *= s[l];
        } else {
          v *= M_PI * M_PI * freq[i] * freq[j] * c[i] * c[j];
          for (int l = 0; l < n; l++) {
            if (l != i && l != j) v *= s[l];
          }
        }
        H(i, j) = v;
      }
    }
    return H;
  };
  return f;
}

inline ScalarField polynomial_scalar(const PolyForm & p)
{
  if (p.degree != 0) throw std::invalid_argument("polynomial_scalar: expected a 0-form");
  ScalarField f;
  f.value = [p](const VectorXd & x) { return p.evaluate(x).coeffs[0]; };
  f.gradient = [p](const VectorXd & x) {
    PolyForm dp = exterior_derivative(p);
    return VectorXd(dp.evaluate(x).coeffs);
  };
  f.hessian = [p](const VectorXd & x) {
    int n = p.dim;
    MatrixXd H(n, n);
    PolyForm dp = exterior_derivative(p);
    for (int i = 0; i < n; i++) {
      // d of the i-th partial
      PolyForm pi(p.dim, 0, std::max(dp.pdeg, 0));
      pi.c.col(0) = dp.c.col(i);
      H.row(i) = exterior_derivative(pi).evaluate(x).coeffs.transpose();
    }
    return H;
  };
  return f;
}

/// A k-form with one ScalarField per increasing index (alt_basis order)
struct CoeffForm
{
  int dim = 0;
  int degree = 0;
  std::vector<ScalarField> coeffs;

  bool has_gradients() const
  {
    for (const auto & c : coeffs) {
      if (!c.gradient) return false;
    }
    return true;
  }
  bool has_hessians() const
  {
    for (const auto & c : coeffs) {
      if (!c.hessian) return false;
    }
    return true;
  }
};

/// Exterior derivative at the coefficient level; drops one derivative layer
inline CoeffForm d_coeff(const CoeffForm & w)
{
  CoeffForm out;
  out.dim = w.dim;
  out.degree = w.degree + 1;
  int na_out = alt_dim(w.dim, out.degree);
  auto src = alt_basis(w.dim, w.degree);
  // target coefficient tau <- sum over (i, sigma) with {i} u sigma = tau of sign * d_i a_sigma
  struct Term
  {
    int i, sigma;
    double sign;
  };
  std::vector<std::vector<Term>> terms(na_out);
  for (std::size_t s = 0; s < src.size(); s++) {
    for (int i = 0; i < w.dim; i++) {
      auto [sg, merged] = detail::merge_axes({i}, src[s].axes);
      if (sg == 0) continue;
      terms[AltIndex{w.dim, merged}.rank()].push_back({i, static_cast<int>(s), static_cast<double>(sg)});
    }
  }
  if (!w.has_gradients()) throw std::invalid_argument("d_coeff: coefficients have no gradient layer");
  bool hess = w.has_hessians();
  const CoeffForm win = w;
  for (int t = 0; t < na_out; t++) {
    ScalarField f;
    auto tl = terms[t];
    f.value = [tl, win](const VectorXd & x) {
      double v = 0.;
      for (const auto & tm : tl) v += tm.sign * win.coeffs[tm.sigma].gradient(x)[tm.i];
      return v;
    };
    if (hess) {
      f.gradient = [tl, win](const VectorXd & x) {
        VectorXd g = VectorXd::Zero(win.dim);
        for (const auto & tm : tl) g += tm.sign * win.coeffs[tm.sigma].hessian(x).row(tm.i).transpose();
        return g;
      };
    }
    out.coeffs.push_back(std::move(f));
  }
  return out;
}

/// Hodge star at the coefficient level (signed permutation of the coefficients)
inline CoeffForm star_coeff(const CoeffForm & w, bool inverse = false)
{
  CoeffForm out;
  out.dim = w.dim;
  out.degree = w.dim - w.degree;
  double flip = (inverse && (w.degree * (w.dim - w.degree)) % 2 != 0) ? -1. : 1.;
  auto src = alt_basis(w.dim, w.degree);
  out.coeffs.resize(alt_dim(w.dim, out.degree));
  for (std::size_t s = 0; s < src.size(); s++) {
    AltForm unit = AltForm::basis_element(w.dim, src[s].axes);
    AltForm img = hodge_star(unit);
    int t = 0;
    double sg = 0.;
    for (int j = 0; j < img.coeffs.size(); j++) {
      if (img.coeffs[j] != 0.) {
        t = j;
        sg = img.coeffs[j];
      }
    }
    const ScalarField & a = w.coeffs[s];
    double factor = sg * flip;
    ScalarField f;
    f.value = [a, factor](const VectorXd & x) { return factor * a.value(x); };
    if (a.gradient) f.gradient = [a, factor](const VectorXd & x) { return VectorXd(factor * a.gradient(x)); };
    if (a.hessian) f.hessian = [a, factor](const VectorXd & x) { return MatrixXd(factor * a.hessian(x)); };
    out.coeffs[t] = std::move(f);
  }
  return out;
}

/// delta = (-1)^k star^{-1} d star on k-forms
inline CoeffForm delta_coeff(const CoeffForm & w)
{
  CoeffForm out = star_coeff(d_coeff(star_coeff(w)), true);
  if (w.degree % 2 != 0) {
    for (auto & c : out.coeffs) {
      const ScalarField a = c;
      c.value = [a](const VectorXd & x) { return -a.value(x); };
      if (a.gradient) c.gradient = [a](const VectorXd & x) { return VectorXd(-a.gradient(x)); };
      if (a.hessian) c.hessian = [a](const VectorXd & x) { return MatrixXd(-a.hessian(x)); };
    }
  }
  return out;
}

inline std::function<AltForm(const VectorXd &)> coeff_evaluator(const CoeffForm & w)
{
  return [w](const VectorXd & x) {
    AltForm v(w.dim, w.degree);
    for (std::size_t i = 0; i < w.coeffs.size(); i++) v.coeffs[i] = w.coeffs[i].value(x);
    return v;
  };
}

/// FormField with value / derivative / codifferential evaluators from a CoeffForm
inline FormField make_field(const CoeffForm & w)
{
  FormField f;
  f.dim = w.dim;
  f.degree = w.degree;
  f.value = coeff_evaluator(w);
  if (w.has_gradients()) {
    if (w.degree < w.dim) f.derivative = coeff_evaluator(d_coeff(w));
    if (w.degree > 0) f.codifferential = coeff_evaluator(delta_coeff(w));
  }
  return f;
}

/// A smooth trigonometric k-form with distinct frequencies per coefficient
inline CoeffForm trig_form(int n, int k, double amplitude = 1., int variant = 0)
{
  CoeffForm w;
  w.dim = n;
  w.degree = k;
  int na = alt_dim(n, k);
  // unit frequencies keep moderate quadrature degrees exact to near machine
  // precision; genericity comes from the phases and amplitudes
  for (int a = 0; a < na; a++) {
    VectorXd freq = VectorXd::Ones(n), phase(n);
    for (int i = 0; i < n; i++) phase[i] = 0.3 + 0.21 * ((a + 2 * i + variant) % 4) + 0.05 * variant;
    w.coeffs.push_back(trig_scalar(n, freq, phase, amplitude * (1. + 0.5 * a)));
  }
  return w;
}

/// A polynomial k-form of total degree <= deg in ambient coordinates
inline CoeffForm polynomial_form(int n, int k, int deg, Rng & rng)
{
  CoeffForm w;
  w.dim = n;
  w.degree = k;
  int na = alt_dim(n, k);
  for (int a = 0; a < na; a++) {
    PolyForm p(n, 0, deg);
    for (int i = 0; i < p.c.rows(); i++) p.c(i, 0) = rng.uniform();
    w.coeffs.push_back(polynomial_scalar(p));
  }
  return w;
}

} // namespace ddr
