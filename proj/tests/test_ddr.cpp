#include <catch_amalgamated.hpp>

#include <ddr/ddr_space.hpp>
#include <ddr/generators.hpp>

using namespace ddr;

namespace {

std::vector<PolytopalMesh> small_meshes()
{
  std::vector<PolytopalMesh> out;
  out.push_back(distort(cartesian_grid(2, {2, 2}), 0.06, 5));
  out.push_back(cartesian_grid(3, {1, 1, 1}));
  out.push_back(distort(simplicial_grid(3, {1, 1, 1}), 0.03, 9));
  return out;
}

double eval_physical(const Cell & c, const PolyForm & p, const VectorXd & x, const MatrixXd & W)
{
  VectorXd y = c.chart.to_chart(x);
  MatrixXd Wc = c.chart.frame.transpose() * W / c.chart.h;
  return p.evaluate(y)(Wc);
}

} // namespace

TEST_CASE("DDR polynomial consistency of the potential", "[ddr]")
{
  for (const auto & m : small_meshes()) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int r = 0; r <= 2; r++) {
      for (int k = 0; k <= n; k++) {
        DdrSpace X(cache, k, r);
        for (int d = k; d <= n; d++) {
          for (int i = 0; i < m.n_cells(d); i++) {
            for (const auto & omega : poly_form_basis(d, r, k)) {
              VectorXd loc = X.interpolate_poly_local(d, i, omega);
              PolyForm pot = X.potential(d, i, loc);
              double err = (pot - omega.embedded(r)).norm();
              REQUIRE(err < 1e-10 * (1. + omega.norm()));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("DDR polynomial consistency of the discrete exterior derivative", "[ddr]")
{
  for (const auto & m : small_meshes()) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int r = 0; r <= 2; r++) {
      for (int k = 0; k <= n - 1; k++) {
        DdrSpace X(cache, k, r);
        for (int d = k + 1; d <= n; d++) {
          for (int i = 0; i < m.n_cells(d); i++) {
            auto trimmed = cache.get(d, i, SpaceTag::Trimmed, r + 1, k);
            for (int j = 0; j < trimmed->dim(); j++) {
              PolyForm omega = trimmed->element(j);
              VectorXd loc = X.interpolate_poly_local(d, i, omega);
              PolyForm der = X.local_derivative(d, i, loc);
              PolyForm expected = exterior_derivative(omega).embedded(r);
              REQUIRE((der - expected).norm() < 1e-10 * (1. + expected.norm()));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("projection of the potential returns the component", "[ddr]")
{
  Rng rng(3);
  for (const auto & m : small_meshes()) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int r = 0; r <= 2; r++) {
      for (int k = 0; k <= n; k++) {
        DdrSpace X(cache, k, r);
        for (int d = k; d <= n; d++) {
          for (int i = 0; i < std::min(2, m.n_cells(d)); i++) {
            const LocalMap & lm = X.local_map(d, i);
            for (int trial = 0; trial < 5; trial++) {
              VectorXd loc = rng.vector(lm.total);
              PolyForm pot = X.potential(d, i, loc);
              const Cell & c = m.cells[d][i];
              VectorXd proj = l2_project(cache, X.component(d, i), star_chart(c.chart, pot));
              // the component of this cell inside the local vector
              int pos = std::get<2>(lm.entries[lm.slot.at({d, i})]);
              VectorXd comp = loc.segment(pos, X.comp_dim(d, i));
              REQUIRE((proj - comp).lpNorm<Eigen::Infinity>() < 1e-10 * (1. + comp.lpNorm<Eigen::Infinity>()));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("trace consistency of potentials on subcells", "[ddr]")
{
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 7);
  SpaceCache cache(m);
  int r = 2, k = 1;
  DdrSpace X(cache, k, r);
  for (int i = 0; i < m.n_cells(2); i++) {
    const Cell & f = m.cells[2][i];
    for (const auto & omega : poly_form_basis(2, r, k)) {
      VectorXd loc = X.interpolate_poly_local(2, i, omega);
      const LocalMap & lm = X.local_map(2, i);
      for (int sub : f.sub[1]) {
        // restriction of the local vector to the subcell
        const LocalMap & ls = X.local_map(1, sub);
        VectorXd locsub(ls.total);
        for (const auto & [dd, id, off, sz] : ls.entries) {
          int pos = std::get<2>(lm.entries[lm.slot.at({dd, id})]);
          locsub.segment(off, sz) = loc.segment(pos, sz);
        }
        PolyForm pot = X.potential(1, sub, locsub);
        PolyForm expected = pullback(omega, chart_map(f.chart, m.cells[1][sub].chart));
        CHECK((pot - expected.embedded(pot.pdeg)).norm() < 1e-10 * (1. + expected.norm()));
      }
    }
  }
}

TEST_CASE("improved potential for k = 0", "[ddr]")
{
  Rng rng(5);
  for (const auto & m : small_meshes()) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int r = 0; r <= 1; r++) {
      DdrSpace X(cache, 0, r);
      for (int d = 0; d <= n; d++) {
        for (int i = 0; i < std::min(2, m.n_cells(d)); i++) {
          // reproduces polynomials of degree r+1
          for (const auto & omega : poly_form_basis(d, r + 1, 0)) {
            VectorXd loc = X.interpolate_poly_local(d, i, omega);
            PolyForm imp = X.improved_potential(d, i, loc);
            REQUIRE((imp - omega).norm() < 1e-10 * (1. + omega.norm()));
          }
          // its projection on degree r is the plain potential
          const LocalMap & lm = X.local_map(d, i);
          auto full_r = cache.get(d, i, SpaceTag::Full, r, 0);
          for (int trial = 0; trial < 3; trial++) {
            VectorXd loc = rng.vector(lm.total);
            PolyForm imp = X.improved_potential(d, i, loc);
            PolyForm pot = X.potential(d, i, loc);
            VectorXd pimp = l2_project(cache, *full_r, imp);
            VectorXd ppot = l2_project(cache, *full_r, pot);
            CHECK((pimp - ppot).lpNorm<Eigen::Infinity>() < 1e-9 * (1. + ppot.lpNorm<Eigen::Infinity>()));
          }
        }
      }
      // on a vertex the improved potential is the vertex value
      VectorXd glob = rng.vector(X.dim());
      VectorXd loc0 = glob.segment(X.comp_offset(0, 0), X.comp_dim(0, 0));
      PolyForm imp = X.improved_potential(0, 0, loc0);
      PolyForm pot = X.potential(0, 0, loc0);
      CHECK(imp.c(0, 0) == Catch::Approx(pot.c(0, 0)).margin(1e-14));
    }
  }
}

TEST_CASE("single square, lowest order: gradient of the coordinate interpolate", "[ddr]")
{
  PolytopalMesh m = cartesian_grid(2, {1, 1});
  SpaceCache cache(m);
  DdrSpace X(cache, 0, 0);
  // omega(x) = x1 as a 0-form field
  FormField f;
  f.dim = 2;
  f.degree = 0;
  f.value = [](const VectorXd & x) {
    AltForm w(2, 0);
    w.coeffs[0] = x[0];
    return w;
  };
  VectorXd glob = X.interpolate(f, 4);
  VectorXd loc = X.gather(2, 0, glob);
  PolyForm grad = X.local_derivative(2, 0, loc);
  const Cell & c = m.cells[2][0];
  // physical gradient proxy must be (1, 0): evaluate on ambient axis vectors
  MatrixXd W1 = MatrixXd::Zero(2, 1), W2 = MatrixXd::Zero(2, 1);
  W1(0, 0) = 1.;
  W2(1, 0) = 1.;
  VectorXd x(2);
  x << 0.4, 0.6;
  CHECK(eval_physical(c, grad, x, W1) == Catch::Approx(1.).margin(1e-11));
  CHECK(eval_physical(c, grad, x, W2) == Catch::Approx(0.).margin(1e-11));
}

TEST_CASE("interpolator basics", "[ddr]")
{
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 11);
  SpaceCache cache(m);
  DdrSpace X(cache, 1, 1);
  // zero field interpolates to zero
  VectorXd z = X.interpolate(FormField::zero(2, 1), 6);
  CHECK(z.lpNorm<Eigen::Infinity>() == 0.);
  // linearity
  Rng rng(7);
  auto mk = [&](double a, double b, double c, double d2) {
    FormField f;
    f.dim = 2;
    f.degree = 1;
    f.value = [=](const VectorXd & x) {
      AltForm w(2, 1);
      w.coeffs << a * x[0] + b * x[1], c * x[0] + d2 * x[1] * x[1];
      return w;
    };
    return f;
  };
  FormField f1 = mk(1., 2., -0.5, 3.), f2 = mk(-2., 0.3, 1., 0.7);
  FormField sum = mk(1. - 2. * 2., 2. + 0.3 * 2., -0.5 + 1. * 2., 3. + 0.7 * 2.);
  VectorXd v1 = X.interpolate(f1, 8), v2 = X.interpolate(f2, 8), vs = X.interpolate(sum, 8);
  CHECK((v1 + 2. * v2 - vs).lpNorm<Eigen::Infinity>() < 1e-11 * (1. + vs.lpNorm<Eigen::Infinity>()));
}
