#include <catch_amalgamated.hpp>

#include <ddr/generators.hpp>
#include <ddr/hodge.hpp>

using namespace ddr;

TEST_CASE("assembled matrix is symmetric and topology is enforced", "[hodge]")
{
  PolytopalMesh m = cartesian_grid(2, {2, 2});
  SpaceCache cache(m);
  for (int k = 0; k <= 2; k++) {
    HodgeLaplacian H(cache, k, 1);
    SparseMat A = H.assemble();
    SparseMat At = SparseMat(A.transpose());
    double scale = 0.;
    for (int kk = 0; kk < A.outerSize(); ++kk) {
      for (SparseMat::InnerIterator it(A, kk); it; ++it) scale = std::max(scale, std::abs(it.value()));
    }
    SparseMat diff = A - At;
    double worst = 0.;
    for (int kk = 0; kk < diff.outerSize(); ++kk) {
      for (SparseMat::InnerIterator it(diff, kk); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    CHECK(worst <= 1e-12 * scale);
  }
  // annulus has non-trivial topology: refused
  PolytopalMesh an = annulus_2d(3, 1);
  SpaceCache cache2(an);
  CHECK_THROWS_AS(HodgeLaplacian(cache2, 1, 0), std::invalid_argument);
}

TEST_CASE("zero source gives the zero solution", "[hodge]")
{
  PolytopalMesh m = cartesian_grid(2, {2, 2});
  SpaceCache cache(m);
  for (int k = 0; k <= 2; k++) {
    HodgeLaplacian H(cache, k, 0);
    SparseMat A = H.assemble();
    VectorXd b = H.rhs(FormField::zero(2, k), 6);
    auto sol = H.solve(A, b);
    CHECK(sol.u.lpNorm<Eigen::Infinity>() < 1e-12);
    if (k >= 1) CHECK(sol.sigma.lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("polynomial manufactured solutions are solved exactly", "[hodge]")
{
  // nontrivial boundary-compatible polynomial families exist from degree 3 on
  std::vector<std::tuple<int, int, int>> cases = {{2, 0, 3}, {2, 1, 3}, {3, 1, 3}};
  for (auto [n, k, r] : cases) {
    PolytopalMesh m = (n == 2) ? distort(cartesian_grid(2, {2, 2}), 0.04, 3) : cartesian_grid(3, {1, 1, 1});
    SpaceCache cache(m);
    CoeffForm u = boundary_compatible_poly(n, k, r);
    Manufactured mf = manufactured_from(u);
    ConvergenceRow row = hodge_run(cache, k, r, mf, 2 * r + 6);
    INFO("n=" << n << " k=" << k << " r=" << r);
    CHECK(row.errors.err_sigma < 1e-9);
    CHECK(row.errors.err_dsigma < 1e-9);
    CHECK(row.errors.err_u < 1e-9);
    CHECK(row.errors.err_du < 1e-9);
    CHECK(row.errors.stab_sigma < 1e-9);
    CHECK(row.errors.stab_dsigma < 1e-9);
    CHECK(row.errors.stab_u < 1e-9);
    CHECK(row.errors.stab_du < 1e-9);
    CHECK(row.solver_residual < 1e-10);
  }
}

TEST_CASE("both source paths coincide for polynomial sources", "[hodge]")
{
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 9);
  SpaceCache cache(m);
  int k = 1, r = 2;
  HodgeLaplacian H(cache, k, r);
  Rng rng(3);
  CoeffForm g = polynomial_form(2, k, r, rng);
  FormField gf = make_field(g);
  VectorXd b1 = H.rhs(gf, 2 * r + 6, true);
  VectorXd b2 = H.rhs(gf, 2 * r + 6, false);
  CHECK((b1 - b2).lpNorm<Eigen::Infinity>() < 1e-11 * (1. + b1.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("trigonometric convergence at lowest order", "[hodge][convergence]")
{
  int n = 2, k = 1, r = 0;
  Manufactured mf = manufactured_from(boundary_compatible_trig(n, k));
  std::vector<double> hs, errs;
  for (int divs : {2, 4, 8}) {
    PolytopalMesh m = cartesian_grid(2, {divs, divs});
    SpaceCache cache(m);
    ConvergenceRow row = hodge_run(cache, k, r, mf, 14);
    hs.push_back(row.h);
    errs.push_back(row.errors.total());
    CHECK(row.solver_residual < 1e-10);
  }
  double slope = fitted_slope(hs, errs);
  INFO("errors " << errs[0] << " " << errs[1] << " " << errs[2]);
  CHECK(slope > r + 0.75);
  CHECK(slope < r + 1.25);
}

TEST_CASE("error functional identity on random test vectors", "[hodge]")
{
  // E_h(tau, v) = Etilde^k(du; v) - Etilde^{k-1}(u; tau)
  int n = 2, k = 1, r = 1;
  PolytopalMesh m = cartesian_grid(2, {2, 2});
  SpaceCache cache(m);
  HodgeLaplacian H(cache, k, r);
  Manufactured mf = manufactured_from(boundary_compatible_trig(n, k));
  int quad = 20;
  SparseMat A = H.assemble();
  VectorXd b = H.rhs(mf.g, quad);
  // interpolants
  DdrSpace Xkm1(cache, k - 1, r), Xk(cache, k, r), Xk1(cache, k + 1, r);
  VectorXd isig = Xkm1.interpolate(mf.sigma, quad);
  VectorXd iu = Xk.interpolate(mf.u, quad);
  Rng rng(5);
  // deltadu field for the k-level functional
  CoeffForm ucf = boundary_compatible_trig(n, k);
  CoeffForm du = d_coeff(ucf);
  FormField duf = make_field(du);
  int ns = H.n_sigma(), nu = H.n_u();
  for (int trial = 0; trial < 5; trial++) {
    VectorXd tau = rng.vector(ns), v = rng.vector(nu);
    // E_h = (I g, v) - A_h((isig, iu), (tau, v)) with the unsymmetrized form
    VectorXd ig = Xk.interpolate(mf.g, quad);
    double Eh = ig.dot(MatrixXd(H.Mk()) * v);
    double Ahval = isig.dot(H.Mkm1() * tau) - iu.dot(H.Mk() * (H.Dkm1() * tau))
                   + (H.Dkm1() * isig).dot(H.Mk() * v) + (H.Dk() * iu).dot(H.Mk1() * (H.Dk() * v));
    Eh -= Ahval;
    double Ek = H.adjoint_error_functional(Xk, Xk1, H.Dk(), H.Mk(), H.Mk1(), duf, v, quad);
    double Ekm1 = H.adjoint_error_functional(Xkm1, Xk, H.Dkm1(), H.Mkm1(), H.Mk(), make_field(ucf), tau, quad);
    double scale = std::abs(Eh) + std::abs(Ek) + std::abs(Ekm1) + 1.;
    CHECK(std::abs(Eh - (Ek - Ekm1)) < 1e-9 * scale);
  }
}

TEST_CASE("adjoint functional basics", "[hodge]")
{
  int n = 2, r = 3, l = 0;
  PolytopalMesh m = cartesian_grid(2, {1, 1});
  SpaceCache cache(m);
  HodgeLaplacian H(cache, 1, r);
  DdrSpace Xl(cache, l, r), Xl1(cache, l + 1, r);
  SparseMat Dl = Xl.global_d_matrix(Xl1);
  SparseMat Ml = Xl.product_matrix(), Ml1 = Xl1.product_matrix();
  // omega = 0 gives 0
  Rng rng(7);
  VectorXd mu = rng.vector(Xl.dim());
  CHECK(H.adjoint_error_functional(Xl, Xl1, Dl, Ml, Ml1, FormField::zero(2, 1), mu, 10) == Catch::Approx(0.).margin(1e-14));
  // boundary-compatible polynomial 1-form of degree <= r on a single cell: roundoff
  CoeffForm w = boundary_compatible_poly(n, 1, 3);
  FormField wf = make_field(w);
  double val = H.adjoint_error_functional(Xl, Xl1, Dl, Ml, Ml1, wf, mu, 2 * r + 6);
  CHECK(std::abs(val) < 1e-11 * (1. + mu.norm()));
}

TEST_CASE("inf-sup diagnostic returns positive values", "[hodge]")
{
  for (int divs : {2, 4}) {
    PolytopalMesh m = cartesian_grid(2, {divs, divs});
    SpaceCache cache(m);
    HodgeLaplacian H(cache, 1, 0);
    SparseMat A = H.assemble();
    double s = infsup_sigma_min(H, A, 1);
    CHECK(s > 1e-3);
  }
}
