#include <catch_amalgamated.hpp>

#include <ddr/generators.hpp>
#include <ddr/local_spaces.hpp>

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

/// Independent rank oracle on raw generator columns (no mass, no SVD path)
int raw_rank(const std::vector<PolyForm> & gens, int enclosing)
{
  if (gens.empty()) return 0;
  MatrixXd A(flatten(gens[0], enclosing).size(), gens.size());
  for (std::size_t j = 0; j < gens.size(); j++) A.col(j) = flatten(gens[j], enclosing);
  Eigen::FullPivLU<MatrixXd> lu(A);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

} // namespace

TEST_CASE("koszul space dimensions", "[local_spaces]")
{
  PolytopalMesh m2 = distort(cartesian_grid(2, {1, 1}), 0., 0);
  PolytopalMesh m3 = cartesian_grid(3, {1, 1, 1});
  SpaceCache c2(m2), c3(m3);

  // d=2, l=1, r=1: dim K = dim P_1 Lambda^1 - dim dP_2 Lambda^0 = 6 - 5 = 1
  auto K = c2.get(2, 0, SpaceTag::Koszul, 1, 1);
  CHECK(K->dim() == 1);
  {
    std::vector<PolyForm> gens;
    for (const auto & g : poly_form_basis(2, 0, 2)) gens.push_back(koszul(g));
    CHECK(raw_rank(gens, 1) == 1);
  }

  // K_r^d = {0} for all r; K_0^l = {0}
  for (int r = 0; r <= 3; r++) {
    CHECK(c2.get(2, 0, SpaceTag::Koszul, r, 2)->dim() == 0);
    CHECK(c3.get(3, 0, SpaceTag::Koszul, r, 3)->dim() == 0);
  }
  for (int l = 0; l <= 3; l++) CHECK(c3.get(3, 0, SpaceTag::Koszul, 0, l)->dim() == 0);

  // d=3, l=2, r=1: proxy space (x-x_T) P_0, dimension by the rank oracle
  auto K32 = c3.get(3, 0, SpaceTag::Koszul, 1, 2);
  {
    std::vector<PolyForm> gens;
    for (const auto & g : poly_form_basis(3, 0, 3)) gens.push_back(koszul(g));
    CHECK(K32->dim() == raw_rank(gens, 1));
    CHECK(K32->dim() == 1);
  }
}

TEST_CASE("decomposition dimension ledger", "[local_spaces]")
{
  // dim P_r Lambda^l = dim dP_{r+1}Lambda^{l-1} + dim K_r^l for l >= 1 (exact integers)
  // dim P_r^- Lambda^l = dim dP_r Lambda^{l-1} + dim K_r^l
  // P_r^- Lambda^d = P_{r-1} Lambda^d
  PolytopalMesh m2 = distort(cartesian_grid(2, {1, 1}), 0., 1);
  PolytopalMesh m3 = simplicial_grid(3, {1, 1, 1});
  std::vector<std::pair<const PolytopalMesh *, int>> meshes = {{&m2, 2}, {&m3, 3}};
  for (auto [mp, n] : meshes) {
    SpaceCache cache(*mp);
    for (int d = 1; d <= n; d++) {
      for (int id = 0; id < std::min(2, mp->n_cells(d)); id++) {
        for (int r = 0; r <= 4; r++) {
          for (int l = 0; l <= d; l++) {
            int full = cache.get(d, id, SpaceTag::Full, r, l)->dim();
            CHECK(full == poly_dim(d, r) * alt_dim(d, l));
            if (l >= 1) {
              int imd = cache.get(d, id, SpaceTag::ImageD, r + 1, l)->dim();
              int kos = cache.get(d, id, SpaceTag::Koszul, r, l)->dim();
              CHECK(full == imd + kos);
              int imd_r = cache.get(d, id, SpaceTag::ImageD, r, l)->dim();
              int trm = cache.get(d, id, SpaceTag::Trimmed, r, l)->dim();
              CHECK(trm == imd_r + kos);
            } else {
              int kos = cache.get(d, id, SpaceTag::Koszul, r, 0)->dim();
              CHECK(full == 1 + kos);
              CHECK(cache.get(d, id, SpaceTag::Trimmed, r, 0)->dim() == full);
            }
          }
          // top-degree collapse
          int trm_top = cache.get(d, id, SpaceTag::Trimmed, r, d)->dim();
          CHECK(trm_top == poly_dim(d, r - 1));
        }
      }
    }
  }
}

TEST_CASE("trimmed space special cases", "[local_spaces]")
{
  PolytopalMesh m3 = cartesian_grid(3, {1, 1, 1});
  SpaceCache cache(m3);
  // P_0^- Lambda^l = {0} for l in [1,d]
  for (int l = 1; l <= 3; l++) CHECK(cache.get(3, 0, SpaceTag::Trimmed, 0, l)->dim() == 0);
  // d=3, l=1: Nedelec dimension matches the raw-generator rank oracle
  for (int r = 1; r <= 3; r++) {
    std::vector<PolyForm> gens;
    for (const auto & g : poly_form_basis(3, r, 0)) gens.push_back(exterior_derivative(g));
    for (const auto & g : poly_form_basis(3, r - 1, 2)) gens.push_back(koszul(g));
    CHECK(cache.get(3, 0, SpaceTag::Trimmed, r, 1)->dim() == raw_rank(gens, r));
  }
  // surjectivity onto top forms: dP_{r+1}Lambda^2 = P_r Lambda^3
  for (int r = 0; r <= 2; r++) {
    CHECK(cache.get(3, 0, SpaceTag::ImageD, r + 1, 3)->dim() == poly_dim(3, r));
  }
  // d injective on Koszul spaces: rank of d on a Koszul basis equals its dimension
  for (int r = 1; r <= 3; r++) {
    for (int l = 0; l <= 2; l++) {
      auto K = cache.get(3, 0, SpaceTag::Koszul, r, l);
      std::vector<PolyForm> dK;
      for (int j = 0; j < K->dim(); j++) dK.push_back(exterior_derivative(K->element(j)));
      CHECK(raw_rank(dK, r) == K->dim());
    }
  }
}

TEST_CASE("mass of orthonormalized basis is the identity", "[local_spaces]")
{
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.06, 3);
  SpaceCache cache(m);
  for (int id = 0; id < m.n_cells(2); id++) {
    for (int l = 0; l <= 2; l++) {
      auto B = cache.get(2, id, SpaceTag::Trimmed, 2, l);
      if (B->dim() == 0) continue;
      MatrixXd M = mass_matrix(m.cells[2][id], B->elements());
      CHECK((M - MatrixXd::Identity(B->dim(), B->dim())).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("projection onto subspaces", "[local_spaces]")
{
  Rng rng(4);
  PolytopalMesh m = distort(cartesian_grid(2, {2, 2}), 0.05, 5);
  SpaceCache cache(m);
  const int d = 2;
  for (int id = 0; id < 2; id++) {
    for (int l = 0; l <= d; l++) {
      auto B = cache.get(d, id, SpaceTag::Trimmed, 2, l);
      if (B->dim() == 0) continue;
      // projecting a member of the span recovers it
      VectorXd coeffs = rng.vector(B->dim());
      PolyForm member = B->combine(coeffs);
      VectorXd back = l2_project(cache, *B, member);
      CHECK((back - coeffs).lpNorm<Eigen::Infinity>() < 1e-12 * (1. + coeffs.lpNorm<Eigen::Infinity>()));

      // Galerkin orthogonality of the residual
      PolyForm src = random_poly(rng, d, l, 3);
      VectorXd proj = l2_project(cache, *B, src);
      PolyForm residual = src - B->combine(proj);
      const Cell & cell = m.cells[d][id];
      for (int j = 0; j < B->dim(); j++) {
        double ip = integrate_wedge(cell, residual, star_chart(cell.chart, B->element(j)));
        CHECK(std::abs(ip) < 1e-11 * (1. + src.norm()));
      }

      // zero projects to zero
      VectorXd z = l2_project(cache, *B, PolyForm(d, l, 0));
      CHECK(z.lpNorm<Eigen::Infinity>() == 0.);
    }
  }
}

TEST_CASE("projector removal identity", "[local_spaces]")
{
  // int star^{-1} pi_X(star omega) ^ mu = int omega ^ mu for mu in X
  Rng rng(6);
  PolytopalMesh m = distort(cartesian_grid(2, {1, 1}), 0., 2);
  SpaceCache cache(m);
  const Cell & cell = m.cells[2][0];
  int k = 1;
  auto X = cache.get(2, 0, SpaceTag::Trimmed, 2, 2 - k);
  for (int trial = 0; trial < 10; trial++) {
    PolyForm omega = random_poly(rng, 2, k, 2);
    PolyForm starred = star_chart(cell.chart, omega);
    PolyForm piX = X->combine(l2_project(cache, *X, starred));
    PolyForm lhs_form = star_chart_inv(cell.chart, piX);
    for (int j = 0; j < X->dim(); j++) {
      PolyForm mu = X->element(j);
      double lhs = integrate_wedge(cell, lhs_form, mu);
      double rhs = integrate_wedge(cell, omega, mu);
      CHECK(lhs == Catch::Approx(rhs).margin(1e-11));
    }
  }
}

TEST_CASE("koszul pair decompositions", "[local_spaces]")
{
  Rng rng(7);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(distort(cartesian_grid(2, {2, 2}), 0.05, 9));
  meshes.push_back(simplicial_grid(3, {1, 1, 1}));
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  for (const auto & m : meshes) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int d = 1; d <= n; d++) {
      for (int id = 0; id < std::min(2, m.n_cells(d)); id++) {
        for (int r = 0; r <= 3; r++) {
          for (int l = 1; l <= d; l++) {
            for (int trial = 0; trial < 3; trial++) {
              PolyForm omega = random_poly(rng, d, l, r);
              auto dec = decompose(cache, d, id, r, omega);
              PolyForm recon = exterior_derivative(dec.mu) + dec.nu;
              CHECK((recon - omega.embedded(recon.pdeg)).norm() < 1e-10 * (1. + omega.norm()));
            }
            // omega = d kappa p has zero Koszul component
            PolyForm p = random_poly(rng, d, l, r);
            PolyForm omega = exterior_derivative(koszul(p));
            auto dec = decompose(cache, d, id, std::max(r, 0), omega.embedded(std::max(r, 0)));
            CHECK(dec.nu.norm() < 1e-9 * (1. + omega.norm()));
            // omega in K_r^l: mu = 0
            auto K = cache.get(d, id, SpaceTag::Koszul, r, l);
            if (K->dim() > 0) {
              PolyForm w = K->combine(rng.vector(K->dim()));
              auto dk = decompose(cache, d, id, r, w);
              CHECK(dk.mu.norm() < 1e-9);
              CHECK((dk.nu - w).norm() < 1e-9);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("trace containment of trimmed spaces", "[local_spaces]")
{
  // tr_{f'} of trimmed elements lies in the trimmed space of f'
  Rng rng(8);
  std::vector<PolytopalMesh> meshes;
  meshes.push_back(distort(cartesian_grid(2, {2, 2}), 0.06, 11));
  meshes.push_back(cartesian_grid(3, {1, 1, 1}));
  for (const auto & m : meshes) {
    SpaceCache cache(m);
    int n = m.ambient_dim;
    for (int r = 1; r <= 2; r++) {
      for (int l = 0; l <= n - 1; l++) {
        const Cell & f = m.cells[n][0];
        auto B = cache.get(n, 0, SpaceTag::Trimmed, r, l);
        if (B->dim() == 0) continue;
        for (int dsub = std::max(l, 1); dsub < n; dsub++) {
          for (int sub : f.sub[dsub]) {
            const Cell & fp = m.cells[dsub][sub];
            auto Bp = cache.get(dsub, sub, SpaceTag::Trimmed, r, l);
            AffineMap to_sub = chart_map(f.chart, fp.chart);
            for (int trial = 0; trial < 8; trial++) {
              PolyForm w = B->combine(rng.vector(B->dim()));
              PolyForm tw = pullback(w, to_sub);
              PolyForm proj = Bp->combine(l2_project(cache, *Bp, tw));
              CHECK((proj - tw.embedded(proj.pdeg)).norm() < 1e-10 * (1. + tw.norm()));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("rigid motion invariance of space constructions", "[local_spaces]")
{
  // projector matrices of the constructed subspaces are invariant under a rigid
  // motion of the cell (compared through the common monomial frame)
  PolytopalMesh m = cartesian_grid(2, {1, 1});
  // rotate the square by a fixed angle and translate
  double th = 0.6;
  MatrixXd R(2, 2);
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  MatrixXd V = m.vertex_coords;
  for (int v = 0; v < V.cols(); v++) V.col(v) = R * V.col(v) + Eigen::Vector2d(0.3, -0.7);
  std::vector<std::vector<std::vector<int>>> bnd(3);
  for (int d = 1; d <= 2; d++) {
    bnd[d].resize(m.cells[d].size());
    for (const auto & c : m.cells[d]) {
      for (const auto & [j, s] : c.boundary) bnd[d][c.id].push_back(j);
    }
  }
  PolytopalMesh mr = PolytopalMesh::build(2, V, bnd);
  SpaceCache ca(m), cb(mr);
  Eigen::Vector2d t(0.3, -0.7);

  // ambient test form and its transform under the motion T(x) = Rx + t
  Rng rng(12);
  PolyForm ambient = random_poly(rng, 2, 1, 2);

  // physical evaluation of a stored form: apply to ambient tangent vectors
  auto eval_physical = [](const Cell & c, const PolyForm & p, const VectorXd & x, const MatrixXd & W) {
    VectorXd y = c.chart.to_chart(x);
    MatrixXd Wc = c.chart.frame.transpose() * W / c.chart.h;
    return p.evaluate(y)(Wc);
  };

  const Cell & cell_a = m.cells[2][0];
  const Cell & cell_b = mr.cells[2][0];
  for (int l = 1; l <= 2; l++) {
    for (auto tag : {SpaceTag::Koszul, SpaceTag::Trimmed}) {
      auto A = ca.get(2, 0, tag, 2, l);
      auto B = cb.get(2, 0, tag, 2, l);
      REQUIRE(A->dim() == B->dim());
      if (A->dim() == 0) continue;
      // pull the same physical form onto both cells: src on A, its pushforward on B;
      // chart_B -> ambient -> T^{-1} gives the source coordinates of src
      PolyForm src = random_poly(rng, 2, l, 2);
      AffineMap chartB_to_src;
      chartB_to_src.shift = R.transpose() * (cell_b.chart.center - VectorXd(t));
      chartB_to_src.linear = R.transpose() * cell_b.chart.frame * cell_b.chart.h;
      AffineMap chartA_to_src;
      chartA_to_src.shift = cell_a.chart.center;
      chartA_to_src.linear = cell_a.chart.frame * cell_a.chart.h;
      PolyForm wa = pullback(src, chartA_to_src);
      PolyForm wb = pullback(src, chartB_to_src);
      PolyForm pa = A->combine(l2_project(ca, *A, wa));
      PolyForm pb = B->combine(l2_project(cb, *B, wb));
      // compare physical evaluations at matched points and matched tangent vectors
      for (int trial = 0; trial < 5; trial++) {
        VectorXd x = rng.vector(2, 0.2, 0.8);
        MatrixXd W(2, l);
        for (int i = 0; i < 2; i++) {
          for (int j = 0; j < l; j++) W(i, j) = rng.uniform();
        }
        double va = eval_physical(cell_a, pa, x, W);
        double vb = eval_physical(cell_b, pb, VectorXd(R * x + t), MatrixXd(R * W));
        CHECK(va == Catch::Approx(vb).margin(1e-10));
      }
    }
  }
}
