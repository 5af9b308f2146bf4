#include <catch_amalgamated.hpp>

#include <ddr/ddr_maps.hpp>
#include <ddr/fields.hpp>
#include <ddr/generators.hpp>

using namespace ddr;

namespace {

std::vector<PolytopalMesh> complex_meshes()
{
  std::vector<PolytopalMesh> out;
  out.push_back(distort(cartesian_grid(2, {2, 2}), 0.05, 5));
  out.push_back(annulus_2d(3, 1));
  out.push_back(cartesian_grid(3, {1, 1, 1}));
  out.push_back(distort(simplicial_grid(3, {1, 1, 1}), 0.03, 9));
  return out;
}

double matrix_norm(const SparseMat & M)
{
  double v = 0.;
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMat::InnerIterator it(M, k); it; ++it) v = std::max(v, std::abs(it.value()));
  }
  return v;
}

/// Project a discrete form into the flat subspace by removing the mean of the
/// components on the lowest-dimensional cells
VectorXd flatten_discrete(const DdrSpace & X, VectorXd v)
{
  int k = X.k();
  for (int i = 0; i < X.mesh().n_cells(k); i++) {
    const Cell & c = X.mesh().cells[k][i];
    const SubspaceBasis & B = X.component(k, i);
    // component of the constant function 1 (as the star of a k-form with unit star-inverse)
    PolyForm one(k, 0, 0);
    one.c(0, 0) = 1.;
    VectorXd unit = l2_project(X.cache(), B, one.embedded(0));
    PolyForm punit = B.combine(unit);
    double den = integrate_top(c, star_chart(c.chart, punit));
    double avg = component_average(X, i, v);
    v.segment(X.comp_offset(k, i), X.comp_dim(k, i)) -= (avg / den) * unit;
  }
  return v;
}

} // namespace

TEST_CASE("complex property D D = 0", "[ddr][complex]")
{
  for (const auto & m : complex_meshes()) {
    SpaceCache cache(m);
    for (int r = 0; r <= 2; r++) {
      DdrComplex C(cache, r);
      for (int k = 0; k + 1 < m.ambient_dim; k++) {
        SparseMat DD = C.d_matrix(k + 1) * C.d_matrix(k);
        double scale = matrix_norm(C.d_matrix(k + 1)) * matrix_norm(C.d_matrix(k));
        CHECK(matrix_norm(DD) <= 1e-10 * std::max(scale, 1.));
      }
    }
  }
}

TEST_CASE("commutation with the interpolator", "[ddr][commutation]")
{
  for (const auto & m : complex_meshes()) {
    int n = m.ambient_dim;
    SpaceCache cache(m);
    for (int r = 0; r <= 2; r++) {
      for (int k = 0; k < n; k++) {
        DdrSpace Xk(cache, k, r), Xk1(cache, k + 1, r);
        SparseMat D = Xk.global_d_matrix(Xk1);
        CoeffForm w = trig_form(n, k);
        FormField f = make_field(w);
        FormField df;
        df.dim = n;
        df.degree = k + 1;
        df.value = f.derivative;
        int quad = 20;
        VectorXd lhs = D * Xk.interpolate(f, quad);
        VectorXd rhs = Xk1.interpolate(df, quad);
        double scale = 1. + rhs.lpNorm<Eigen::Infinity>();
        CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-8 * scale);
      }
    }
  }
}

TEST_CASE("link between potentials and derivatives", "[ddr][links]")
{
  Rng rng(3);
  for (const auto & m : complex_meshes()) {
    int n = m.ambient_dim;
    SpaceCache cache(m);
    for (int r = 0; r <= 2; r++) {
      for (int k = 0; k < n; k++) {
        DdrSpace Xk(cache, k, r), Xk1(cache, k + 1, r);
        SparseMat D = Xk.global_d_matrix(Xk1);
        for (int trial = 0; trial < 3; trial++) {
          VectorXd omega = rng.vector(Xk.dim());
          VectorXd img = D * omega;
          // P^{k+1}(restriction of D omega) = d^k omega on every cell
          for (int d = k + 1; d <= n; d++) {
            for (int i = 0; i < m.n_cells(d); i++) {
              PolyForm pot = Xk1.potential(d, i, Xk1.gather(d, i, img));
              PolyForm der = Xk.local_derivative(d, i, Xk.gather(d, i, omega));
              CHECK((pot - der).norm() < 1e-10 * (1. + der.norm()));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("subcell derivative link", "[ddr][links]")
{
  Rng rng(5);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  meshes.push_back(distort(simplicial_grid(3, {1, 1, 1}), 0.04, 2));
  for (const auto & m : meshes) {
    SpaceCache cache(m);
    int n = 3, r = 1;
    for (int k = 0; k <= n - 2; k++) {
      DdrSpace X(cache, k, r);
      for (int d = k + 2; d <= n; d++) {
        for (int i = 0; i < m.n_cells(d); i++) {
          const Cell & f = m.cells[d][i];
          auto alpha_basis = cache.get(d, i, SpaceTag::Trimmed, r + 1, d - k - 2);
          for (int trial = 0; trial < 3; trial++) {
            VectorXd loc = rng.vector(X.local_map(d, i).total);
            PolyForm der = X.local_derivative(d, i, loc);
            VectorXd ac = rng.vector(alpha_basis->dim());
            PolyForm alpha = alpha_basis->combine(ac);
            double lhs = integrate_wedge(f, der, exterior_derivative(alpha).embedded(r + 1));
            double bdry = 0.;
            for (const auto & [j, eps] : f.boundary) {
              const Cell & fp = m.cells[d - 1][j];
              const LocalMap & lm = X.local_map(d, i);
              const LocalMap & ls = X.local_map(d - 1, j);
              VectorXd locsub(ls.total);
              for (const auto & [dd, id, off, sz] : ls.entries) {
                int pos = std::get<2>(lm.entries[lm.slot.at({dd, id})]);
                locsub.segment(off, sz) = loc.segment(pos, sz);
              }
              PolyForm dersub = X.local_derivative(d - 1, j, locsub);
              PolyForm tral = pullback(alpha, chart_map(f.chart, fp.chart));
              bdry += eps * integrate_wedge(fp, dersub, tral);
            }
            double sgn = ((k + 1) % 2 == 0) ? 1. : -1.;
            double scale = std::abs(lhs) + std::abs(bdry) + 1.;
            CHECK(std::abs(lhs - sgn * bdry) < 1e-10 * scale);
          }
        }
      }
    }
  }
}

TEST_CASE("potential correction identity", "[ddr][links]")
{
  Rng rng(7);
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 3);
  SpaceCache cache(m);
  int n = 2, r = 1;
  for (int k = 0; k < n; k++) {
    DdrSpace X(cache, k, r);
    int d = n, i = 0;
    const Cell & f = m.cells[d][i];
    auto Kmu = cache.get(d, i, SpaceTag::Koszul, r + 1, d - k - 1);
    auto Knu = cache.get(d, i, SpaceTag::Koszul, r, d - k);
    auto full = cache.get(d, i, SpaceTag::Full, r, d - k - 1);
    double sgn = ((k + 1) % 2 == 0) ? 1. : -1.;
    for (int trial = 0; trial < 5; trial++) {
      VectorXd loc = rng.vector(X.local_map(d, i).total);
      PolyForm pot = X.potential(d, i, loc);
      PolyForm der = X.local_derivative(d, i, loc);
      PolyForm mu = Kmu->dim() ? Kmu->combine(rng.vector(Kmu->dim())) : PolyForm(d, d - k - 1, r + 1);
      PolyForm nu = Knu->dim() ? Knu->combine(rng.vector(Knu->dim())) : PolyForm(d, d - k, r);
      PolyForm pmu = full->combine(l2_project(cache, *full, mu)); // pi^r of mu
      PolyForm mres = mu - pmu.embedded(mu.pdeg);
      // component of the cell inside the local vector
      const LocalMap & lm = X.local_map(d, i);
      int pos = std::get<2>(lm.entries[lm.slot.at({d, i})]);
      PolyForm comp = X.component(d, i).combine(loc.segment(pos, X.comp_dim(d, i)));
      PolyForm sic = star_chart_inv(f.chart, comp);
      double lhs = sgn * integrate_wedge(f, pot, exterior_derivative(mu).embedded(r) + nu);
      double rhs = sgn * integrate_wedge(f, sic, exterior_derivative(pmu).embedded(r) + nu)
                   + integrate_wedge(f, der, mres);
      for (const auto & [j, eps] : f.boundary) {
        const Cell & fp = m.cells[1][j];
        const LocalMap & ls = X.local_map(1, j);
        VectorXd locsub(ls.total);
        for (const auto & [dd, id, off, sz] : ls.entries) {
          int posj = std::get<2>(lm.entries[lm.slot.at({dd, id})]);
          locsub.segment(off, sz) = loc.segment(posj, sz);
        }
        PolyForm psub = X.potential(1, j, locsub);
        rhs -= eps * integrate_wedge(fp, psub, pullback(mres, chart_map(f.chart, fp.chart)));
      }
      CHECK(lhs == Catch::Approx(rhs).margin(1e-10 * (1. + std::abs(lhs))));
    }
  }
}

TEST_CASE("discrete L2 products", "[ddr][l2]")
{
  Rng rng(11);
  for (const auto & m : complex_meshes()) {
    int n = m.ambient_dim;
    SpaceCache cache(m);
    for (int r = 0; r <= 1; r++) {
      for (int k = 0; k <= n; k++) {
        DdrSpace X(cache, k, r);
        // symmetry and positivity
        for (int trial = 0; trial < 20; trial++) {
          VectorXd a = rng.vector(X.dim()), b = rng.vector(X.dim());
          CHECK(X.l2_product(a, b) == Catch::Approx(X.l2_product(b, a)).margin(1e-12 * (1. + std::abs(X.l2_product(a, b)))));
          if (a.norm() > 0) CHECK(X.l2_product(a, a) > 0.);
        }
        // stabilization vanishes on interpolates of polynomials of degree <= r
        Rng prng(13 + k);
        CoeffForm w = polynomial_form(n, k, r, prng);
        VectorXd iw = X.interpolate(make_field(w), 2 * r + 6);
        CHECK(X.stab_seminorm(iw) < 1e-10 * (1. + iw.lpNorm<Eigen::Infinity>()));
        for (int i = 0; i < m.n_cells(n); i++) {
          VectorXd mu = rng.vector(X.local_map(n, i).total);
          VectorXd liw = X.gather(n, i, iw);
          double sval = liw.dot(X.local_stab_matrix(i) * mu);
          CHECK(std::abs(sval) < 1e-10 * (1. + liw.norm()) * (1. + mu.norm()));
        }
        // consistency: (I omega, mu)_{k,f} = int omega ^ star P mu for polynomial omega
        for (int i = 0; i < std::min(2, m.n_cells(n)); i++) {
          const Cell & f = m.cells[n][i];
          for (const auto & omega : poly_form_basis(n, r, k)) {
            VectorXd il = X.interpolate_poly_local(n, i, omega);
            VectorXd mu = rng.vector(X.local_map(n, i).total);
            double lhs = il.dot(X.local_product_matrix(i) * mu);
            PolyForm pmu = X.potential(n, i, mu);
            double rhs = integrate_wedge(f, omega, star_chart(f.chart, pmu));
            CHECK(lhs == Catch::Approx(rhs).margin(1e-10 * (1. + std::abs(rhs))));
          }
        }
      }
    }
  }
}

TEST_CASE("reduction and extension", "[ddr][maps]")
{
  Rng rng(17);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  meshes.push_back(annulus_2d(3, 1));
  for (const auto & m : meshes) {
    int n = m.ambient_dim;
    SpaceCache cache(m);
    for (int r = 1; r <= 2; r++) {
      DdrComplex Cr(cache, r), C0(cache, 0);
      for (int k = 0; k <= n; k++) {
        SparseMat R = reduction_matrix(Cr.space(k), C0.space(k));
        SparseMat E = extension_matrix(Cr.space(k), C0.space(k));
        // R E = Id
        for (int trial = 0; trial < 10; trial++) {
          VectorXd eta = rng.vector(C0.space(k).dim());
          VectorXd back = R * (E * eta);
          CHECK((back - eta).lpNorm<Eigen::Infinity>() < 1e-12 * (1. + eta.lpNorm<Eigen::Infinity>()));
        }
        // cochain property
        if (k < n) {
          SparseMat Rk1 = reduction_matrix(Cr.space(k + 1), C0.space(k + 1));
          SparseMat Ek1 = extension_matrix(Cr.space(k + 1), C0.space(k + 1));
          for (int trial = 0; trial < 5; trial++) {
            VectorXd eta = rng.vector(C0.space(k).dim());
            VectorXd res1 = Cr.d_matrix(k) * (E * eta) - Ek1 * (C0.d_matrix(k) * eta);
            CHECK(res1.lpNorm<Eigen::Infinity>() < 1e-10 * (1. + eta.lpNorm<Eigen::Infinity>()));
            VectorXd om = rng.vector(Cr.space(k).dim());
            VectorXd res2 = Rk1 * (Cr.d_matrix(k) * om) - C0.d_matrix(k) * (R * om);
            CHECK(res2.lpNorm<Eigen::Infinity>() < 1e-10 * (1. + om.lpNorm<Eigen::Infinity>()));
          }
        }
        // E R - Id maps into the flat subspace
        for (int trial = 0; trial < 3; trial++) {
          VectorXd om = rng.vector(Cr.space(k).dim());
          VectorXd diff = E * (R * om) - om;
          for (int i = 0; i < m.n_cells(k); i++) {
            CHECK(std::abs(component_average(Cr.space(k), i, diff)) < 1e-12 * (1. + om.lpNorm<Eigen::Infinity>()));
          }
        }
      }
    }
  }
}

TEST_CASE("flat preimage round trip", "[ddr][maps]")
{
  Rng rng(19);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  meshes.push_back(annulus_2d(3, 1));
  for (const auto & m : meshes) {
    int n = m.ambient_dim;
    SpaceCache cache(m);
    for (int r = 1; r <= 2; r++) {
      DdrComplex C(cache, r);
      for (int k = 1; k <= n; k++) {
        const DdrSpace & Xk = C.space(k);
        const DdrSpace & Xkm1 = C.space(k - 1);
        const SparseMat & Dkm1 = C.d_matrix(k - 1);
        for (int trial = 0; trial < 3; trial++) {
          // eta = D(random flat omega') lies in the flat subspace and in the kernel
          VectorXd omp = flatten_discrete(Xkm1, rng.vector(Xkm1.dim()));
          VectorXd eta = Dkm1 * omp;
          VectorXd omega = (k < n) ? flat_preimage(Xkm1, Xk, eta, 1e-9, &C.d_matrix(k))
                                   : flat_preimage(Xkm1, Xk, eta, 1e-9, nullptr);
          VectorXd res = Dkm1 * omega - eta;
          CHECK(res.lpNorm<Eigen::Infinity>() < 1e-9 * (1. + eta.lpNorm<Eigen::Infinity>()));
          // the preimage itself is flat
          for (int i = 0; i < m.n_cells(k - 1); i++) {
            CHECK(std::abs(component_average(Xkm1, i, omega)) < 1e-10 * (1. + omega.lpNorm<Eigen::Infinity>()));
          }
        }
        // eta = 0 -> omega = 0
        VectorXd z = flat_preimage(Xkm1, Xk, VectorXd::Zero(Xk.dim()), 1e-9, nullptr);
        CHECK(z.lpNorm<Eigen::Infinity>() == 0.);
      }
    }
  }
}
