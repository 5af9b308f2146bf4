#include <catch_amalgamated.hpp>

#include <ddr/generators.hpp>
#include <ddr/quadrature.hpp>

using namespace ddr;

namespace {

PolyForm random_poly(Rng & rng, int d, int l, int r)
{
  PolyForm p(d, l, r);
  for (int i = 0; i < p.c.rows(); i++) {
    for (int j = 0; j < p.c.cols(); j++) p.c(i, j) = rng.uniform();
  }
  return p;
}

std::vector<PolytopalMesh> stokes_meshes()
{
  std::vector<PolytopalMesh> out;
  out.push_back(cartesian_grid(2, {2, 2}));
  out.push_back(simplicial_grid(2, {2, 2}));
  out.push_back(distort(cartesian_grid(2, {3, 3}), 0.07, 11));
  out.push_back(annulus_2d(3, 1));
  out.push_back(cartesian_grid(3, {1, 1, 1}));
  out.push_back(simplicial_grid(3, {1, 1, 1}));
  out.push_back(distort(simplicial_grid(3, {2, 2, 2}), 0.04, 23));
  return out;
}

} // namespace

TEST_CASE("reference simplex rules", "[quadrature]")
{
  // construction self-tests monomial exactness; spot-check measures
  double fact = 1.;
  for (int d = 1; d <= 3; d++) {
    fact *= d;
    for (int deg : {0, 3, 8, 15}) {
      const QuadratureRule & r = quadrature_rule(d, deg);
      CHECK(r.weights.sum() == Catch::Approx(1. / fact).epsilon(1e-13));
      CHECK(r.weights.minCoeff() > 0.);
    }
  }
  CHECK_THROWS(quadrature_rule(2, 22));
}

TEST_CASE("basic wedge integrals", "[quadrature]")
{
  // unit segment: 0-form 1 against the chart 1-form dy integrates to 1
  PolytopalMesh seg = cartesian_grid(1, {1});
  const Cell & e = seg.cells[1][0];
  PolyForm one(1, 0, 0);
  one.c(0, 0) = 1.;
  PolyForm dy(1, 1, 0);
  dy.c(0, 0) = 1.;
  CHECK(integrate_wedge(e, one, dy) == Catch::Approx(1.).epsilon(1e-13));

  // unit square: odd coordinate against the physical volume form vanishes
  PolytopalMesh sq = cartesian_grid(2, {1, 1});
  const Cell & f = sq.cells[2][0];
  PolyForm y1(2, 0, 1);
  y1.c(detail::monomials(2, 1).lookup.at({1, 0}), 0) = 1.;
  PolyForm vol = star_chart(f.chart, one.embedded(0));
  {
    PolyForm one2(2, 0, 0);
    one2.c(0, 0) = 1.;
    vol = star_chart(f.chart, one2);
    CHECK(integrate_wedge(f, y1, vol) == Catch::Approx(0.).margin(1e-13));
    CHECK(integrate_wedge(f, one2, vol) == Catch::Approx(1.).epsilon(1e-13)); // cell measure
  }

  // constant field 1 against the physical volume form over the unit cube
  PolytopalMesh cu = cartesian_grid(3, {1, 1, 1});
  const Cell & T = cu.cells[3][0];
  PolyForm one3(3, 0, 0);
  one3.c(0, 0) = 1.;
  FormField unit_field;
  unit_field.dim = 3;
  unit_field.degree = 0;
  unit_field.value = [](const VectorXd &) {
    AltForm w(3, 0);
    w.coeffs[0] = 1.;
    return w;
  };
  CHECK(integrate_field_wedge(T, unit_field, star_chart(T.chart, one3), 2) == Catch::Approx(1.).epsilon(1e-12));
}

TEST_CASE("mass matrices are SPD and pairing against star matches", "[quadrature]")
{
  Rng rng(3);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(distort(cartesian_grid(2, {2, 2}), 0.05, 7));
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  for (const auto & m : meshes) {
    int n = m.ambient_dim;
    for (int d = 1; d <= n; d++) {
      for (const auto & c : m.cells[d]) {
        for (int l = 0; l <= d; l++) {
          int rmax = (d == n) ? 4 : 2;
          for (int r = 0; r <= rmax; r += 2) {
            auto basis = poly_form_basis(d, r, l);
            MatrixXd M = mass_matrix(c, basis);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
            CHECK(es.eigenvalues().minCoeff() > 0.);
            CHECK((M - M.transpose()).lpNorm<Eigen::Infinity>() < 1e-12 * M.lpNorm<Eigen::Infinity>());
            // pairing(B, star_phys B) = mass(B)
            std::vector<PolyForm> starred;
            for (const auto & b : basis) starred.push_back(star_chart(c.chart, b));
            MatrixXd P = pairing_matrix(c, basis, starred);
            CHECK((P - M).lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1., M.lpNorm<Eigen::Infinity>()));
          }
        }
      }
    }
  }
}

TEST_CASE("integrated anticommutativity", "[quadrature]")
{
  Rng rng(5);
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 9);
  const Cell & f = m.cells[2][0];
  for (int l = 0; l <= 2; l++) {
    PolyForm a = random_poly(rng, 2, l, 2), b = random_poly(rng, 2, 2 - l, 2);
    double ab = integrate_wedge(f, a, b), ba = integrate_wedge(f, b, a);
    double sign = (l * (2 - l)) % 2 == 0 ? 1. : -1.;
    CHECK(ab == Catch::Approx(sign * ba).margin(1e-12));
  }
}

TEST_CASE("Stokes master identity on every cell of every generator", "[quadrature][stokes]")
{
  Rng rng(7);
  for (const auto & m : stokes_meshes()) {
    int n = m.ambient_dim;
    for (int d = 1; d <= n; d++) {
      for (const auto & f : m.cells[d]) {
        for (int l = 0; l <= d - 1; l++) {
          for (int trial = 0; trial < 3; trial++) {
            PolyForm omega = random_poly(rng, d, l, 2);
            PolyForm mu = random_poly(rng, d, d - l - 1, 2);
            double lhs = integrate_wedge(f, exterior_derivative(omega), mu);
            double sign = (l % 2 == 0) ? 1. : -1.; // -(-1)^{l+1}
            double mid = integrate_wedge(f, omega, exterior_derivative(mu));
            double bdry = 0.;
            for (const auto & [j, eps] : f.boundary) {
              const Cell & fp = m.cells[d - 1][j];
              AffineMap to_sub = chart_map(f.chart, fp.chart);
              bdry += eps * integrate_wedge(fp, pullback(omega, to_sub), pullback(mu, to_sub));
            }
            double residual = std::abs(lhs + sign * mid - bdry);
            double scale = std::abs(lhs) + std::abs(mid) + std::abs(bdry) + 1.;
            CHECK(residual < 1e-10 * scale);
          }
        }
      }
    }
  }
}

TEST_CASE("Stokes with constant test form: d integral equals boundary integral", "[quadrature][stokes]")
{
  Rng rng(13);
  PolytopalMesh m = distort(simplicial_grid(3, {1, 1, 1}), 0.03, 1);
  for (int d = 1; d <= 3; d++) {
    for (const auto & f : m.cells[d]) {
      for (int trial = 0; trial < 20; trial++) {
        PolyForm omega = random_poly(rng, d, d - 1, 3);
        PolyForm one(d, 0, 0);
        one.c(0, 0) = 1.;
        double lhs = integrate_wedge(f, exterior_derivative(omega), one);
        double bdry = 0.;
        for (const auto & [j, eps] : f.boundary) {
          const Cell & fp = m.cells[d - 1][j];
          AffineMap to_sub = chart_map(f.chart, fp.chart);
          PolyForm onep(d - 1, 0, 0);
          onep.c(0, 0) = 1.;
          bdry += eps * integrate_wedge(fp, pullback(omega, to_sub), onep);
        }
        CHECK(std::abs(lhs - bdry) < 1e-10 * (std::abs(lhs) + std::abs(bdry) + 1.));
      }
    }
  }
}
