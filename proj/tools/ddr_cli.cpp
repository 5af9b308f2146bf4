// Command-line driver: mesh generation and I/O, property check suites,
// cohomology reports, and Hodge Laplacian convergence studies with
// machine-readable outputs.

#include <ddr/cohomology.hpp>
#include <ddr/generators.hpp>
#include <ddr/hodge.hpp>
#include <ddr/mesh_io.hpp>
#include <ddr/vem_space.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace ddr;
using nlohmann::json;

namespace {

constexpr const char * kVersion = "1.0.0";

struct RunConfig
{
  std::string command;
  std::string mesh_path;
  std::string gen = "cartesian:1x1x1";
  int r = 1;
  int k = 1;
  double tol = 0.; // 0: per-check defaults
  int quad_degree = 0; // 0: default 2r+4
  int refinements = 3;
  std::string out = ".";
  std::uint64_t seed = 42;
  unsigned threads = 0;
  std::string complex_choice = "both"; // ddr | vem | both
  bool interpolate_source = true;
};

void apply_config_file(RunConfig & cfg, const std::string & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  in >> j;
  if (j.contains("mesh")) cfg.mesh_path = j["mesh"].get<std::string>();
  if (j.contains("gen")) cfg.gen = j["gen"].get<std::string>();
  if (j.contains("r")) cfg.r = j["r"].get<int>();
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
  if (j.contains("quad_degree")) cfg.quad_degree = j["quad_degree"].get<int>();
  if (j.contains("refinements")) cfg.refinements = j["refinements"].get<int>();
  if (j.contains("out")) cfg.out = j["out"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<unsigned>();
  if (j.contains("complex")) cfg.complex_choice = j["complex"].get<std::string>();
  if (j.contains("interpolate_source")) cfg.interpolate_source = j["interpolate_source"].get<bool>();
}

json config_to_json(const RunConfig & cfg)
{
  json j;
  j["command"] = cfg.command;
  j["mesh"] = cfg.mesh_path;
  j["gen"] = cfg.gen;
  j["r"] = cfg.r;
  j["k"] = cfg.k;
  j["tol"] = cfg.tol;
  j["quad_degree"] = cfg.quad_degree;
  j["refinements"] = cfg.refinements;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["complex"] = cfg.complex_choice;
  j["version"] = kVersion;
  return j;
}

/// Generator spec: name:AxBxC with optional :dMAG distortion suffix,
/// e.g. "cartesian:4x4", "simplicial:2x2x2:d0.05", "annulus:4x2"
PolytopalMesh make_mesh(const RunConfig & cfg)
{
  if (!cfg.mesh_path.empty()) return load_mesh(cfg.mesh_path);
  std::vector<std::string> parts;
  std::string cur;
  for (char c : cfg.gen + std::string(":")) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (parts.empty()) throw std::invalid_argument("gen: empty spec");
  std::string name = parts[0];
  double dist = 0.;
  if (parts.size() >= 3 && parts.back().size() > 1 && parts.back()[0] == 'd') {
    dist = std::stod(parts.back().substr(1));
    parts.pop_back();
  }
  auto parse_divs = [](const std::string & s) {
    std::vector<int> divs;
    std::string acc;
    for (char c : s + std::string("x")) {
      if (c == 'x') {
        divs.push_back(std::stoi(acc));
        acc.clear();
      } else {
        acc += c;
      }
    }
    return divs;
  };
  PolytopalMesh m = [&]() {
    if (name == "cartesian" || name == "simplicial") {
      if (parts.size() < 2) throw std::invalid_argument("gen: missing divisions");
      std::vector<int> divs = parse_divs(parts[1]);
      int n = static_cast<int>(divs.size());
      return name == "cartesian" ? cartesian_grid(n, divs) : simplicial_grid(n, divs);
    }
    if (name == "annulus") {
      std::vector<int> p = parse_divs(parts.at(1));
      if (p.size() != 2) throw std::invalid_argument("gen: annulus takes OUTERxHOLE");
      return annulus_2d(p[0], p[1]);
    }
    throw std::invalid_argument("gen: unknown generator '" + name + "'");
  }();
  if (dist > 0.) m = distort(m, dist, cfg.seed);
  return m;
}

struct CheckResult
{
  std::string name;
  double residual = 0.;
  double threshold = 0.;
  bool pass() const { return residual <= threshold; }
};

PolyForm random_poly(Rng & rng, int d, int l, int r)
{
  PolyForm p(d, l, r);
  for (int i = 0; i < p.c.rows(); i++) {
    for (int j = 0; j < p.c.cols(); j++) p.c(i, j) = rng.uniform();
  }
  return p;
}

std::vector<CheckResult> run_checks(const RunConfig & cfg, const PolytopalMesh & mesh)
{
  std::vector<CheckResult> out;
  int n = mesh.ambient_dim;
  int r = cfg.r;
  Rng rng(cfg.seed);
  auto tol = [&](double def) { return cfg.tol > 0. ? cfg.tol : def; };
  SpaceCache cache(mesh);

  // Stokes / orientation master identity
  {
    double worst = 0.;
    for (int d = 1; d <= n; d++) {
      for (const auto & f : mesh.cells[d]) {
        for (int l = 0; l <= d - 1; l++) {
          for (int trial = 0; trial < 5; trial++) {
            PolyForm omega = random_poly(rng, d, l, 2);
            PolyForm mu = random_poly(rng, d, d - l - 1, 2);
            double lhs = integrate_wedge(f, exterior_derivative(omega), mu);
            double sgn = (l % 2 == 0) ? 1. : -1.;
            double mid = integrate_wedge(f, omega, exterior_derivative(mu));
            double bdry = 0.;
            for (const auto & [j, eps] : f.boundary) {
              const Cell & fp = mesh.cells[d - 1][j];
              AffineMap map = chart_map(f.chart, fp.chart);
              bdry += eps * integrate_wedge(fp, pullback(omega, map), pullback(mu, map));
            }
            worst = std::max(worst, std::abs(lhs + sgn * mid - bdry) / (std::abs(lhs) + std::abs(mid) + std::abs(bdry) + 1.));
          }
        }
      }
    }
    out.push_back({"stokes_orientation", worst, tol(1e-10)});
  }

  // dimension ledger (exact integer identities)
  {
    int violations = 0;
    for (int d = 1; d <= n; d++) {
      for (int i = 0; i < std::min(4, mesh.n_cells(d)); i++) {
        for (int rr = 0; rr <= std::min(r + 1, 4); rr++) {
          for (int l = 0; l <= d; l++) {
            int full = cache.get(d, i, SpaceTag::Full, rr, l)->dim();
            int kos = cache.get(d, i, SpaceTag::Koszul, rr, l)->dim();
            int trm = cache.get(d, i, SpaceTag::Trimmed, rr, l)->dim();
            if (l >= 1) {
              if (full != cache.get(d, i, SpaceTag::ImageD, rr + 1, l)->dim() + kos) violations++;
              if (trm != cache.get(d, i, SpaceTag::ImageD, rr, l)->dim() + kos) violations++;
            } else {
              if (full != 1 + kos) violations++;
            }
          }
          if (cache.get(d, i, SpaceTag::Trimmed, rr, d)->dim() != poly_dim(d, rr - 1)) violations++;
        }
      }
    }
    out.push_back({"dimension_ledger", static_cast<double>(violations), 0.});
  }

  bool do_ddr = cfg.complex_choice != "vem";
  bool do_vem = cfg.complex_choice != "ddr";

  if (do_ddr) {
    DdrComplex C(cache, r, cfg.threads);
    double wpot = 0., wder = 0., wproj = 0., wlink = 0.;
    for (int k = 0; k <= n; k++) {
      const DdrSpace & X = C.space(k);
      for (int d = k; d <= n; d++) {
        for (int i = 0; i < mesh.n_cells(d); i++) {
          for (const auto & omega : poly_form_basis(d, r, k)) {
            VectorXd loc = X.interpolate_poly_local(d, i, omega);
            wpot = std::max(wpot, (X.potential(d, i, loc) - omega.embedded(r)).norm() / (1. + omega.norm()));
          }
          if (d > k) {
            auto trimmed = cache.get(d, i, SpaceTag::Trimmed, r + 1, k);
            for (int j = 0; j < trimmed->dim(); j++) {
              PolyForm omega = trimmed->element(j);
              VectorXd loc = X.interpolate_poly_local(d, i, omega);
              PolyForm expected = exterior_derivative(omega).embedded(r);
              wder = std::max(wder, (X.local_derivative(d, i, loc) - expected).norm() / (1. + expected.norm()));
            }
          }
          // projection identity on random local vectors
          const LocalMap & lm = X.local_map(d, i);
          VectorXd loc = rng.vector(lm.total);
          PolyForm pot = X.potential(d, i, loc);
          const Cell & c = mesh.cells[d][i];
          VectorXd proj = l2_project(cache, X.component(d, i), star_chart(c.chart, pot));
          int pos = std::get<2>(lm.entries[lm.slot.at({d, i})]);
          VectorXd comp = loc.segment(pos, X.comp_dim(d, i));
          wproj = std::max(wproj, (proj - comp).lpNorm<Eigen::Infinity>() / (1. + comp.lpNorm<Eigen::Infinity>()));
        }
      }
      if (k < n) {
        // potential/derivative link on random global vectors
        VectorXd omega = rng.vector(X.dim());
        VectorXd img = C.d_matrix(k) * omega;
        for (int d = k + 1; d <= n; d++) {
          for (int i = 0; i < mesh.n_cells(d); i++) {
            PolyForm pot = C.space(k + 1).potential(d, i, C.space(k + 1).gather(d, i, img));
            PolyForm der = X.local_derivative(d, i, X.gather(d, i, omega));
            wlink = std::max(wlink, (pot - der).norm() / (1. + der.norm()));
          }
        }
      }
    }
    out.push_back({"ddr_potential_consistency", wpot, tol(1e-10)});
    out.push_back({"ddr_derivative_consistency", wder, tol(1e-10)});
    out.push_back({"ddr_projection_identity", wproj, tol(1e-10)});
    out.push_back({"ddr_potential_derivative_link", wlink, tol(1e-10)});

    // complex property
    double wc = 0.;
    auto mn = [](const SparseMat & M) {
      double v = 0.;
      for (int kk = 0; kk < M.outerSize(); ++kk) {
        for (SparseMat::InnerIterator it(M, kk); it; ++it) v = std::max(v, std::abs(it.value()));
      }
      return v;
    };
    for (int k = 0; k + 1 < n; k++) {
      SparseMat DD = C.d_matrix(k + 1) * C.d_matrix(k);
      wc = std::max(wc, mn(DD) / std::max(1., mn(C.d_matrix(k + 1)) * mn(C.d_matrix(k))));
    }
    out.push_back({"ddr_complex_property", wc, tol(1e-10)});

    // commutation for a smooth field
    double wcom = 0.;
    for (int k = 0; k < n; k++) {
      FormField f = make_field(trig_form(n, k));
      FormField df;
      df.dim = n;
      df.degree = k + 1;
      df.value = f.derivative;
      VectorXd lhs = C.d_matrix(k) * C.space(k).interpolate(f, 20);
      VectorXd rhs = C.space(k + 1).interpolate(df, 20);
      wcom = std::max(wcom, (lhs - rhs).lpNorm<Eigen::Infinity>() / (1. + rhs.lpNorm<Eigen::Infinity>()));
    }
    out.push_back({"ddr_commutation", wcom, tol(1e-8)});

    // L2 product: stabilization vanishing and positivity
    double wstab = 0., wpos = 0.;
    for (int k = 0; k <= n; k++) {
      const DdrSpace & X = C.space(k);
      CoeffForm w = polynomial_form(n, k, r, rng);
      VectorXd iw = X.interpolate(make_field(w), 2 * r + 6);
      wstab = std::max(wstab, X.stab_seminorm(iw) / (1. + iw.lpNorm<Eigen::Infinity>()));
      for (int trial = 0; trial < 5; trial++) {
        VectorXd a = rng.vector(X.dim());
        double q = X.l2_product(a, a);
        wpos = std::max(wpos, -q);
      }
    }
    out.push_back({"ddr_stabilization_vanishing", wstab, tol(1e-10)});
    out.push_back({"ddr_l2_positivity", wpos, 0.});

    // de Rham map at degree 0
    DdrComplex C0(cache, 0, cfg.threads);
    out.push_back({"de_rham_map", de_rham_map_check(C0, 3, cfg.seed), tol(1e-10)});
  }

  if (do_vem) {
    VemComplex V(cache, r, cfg.threads);
    double wpot = 0., wder = 0.;
    for (int k = 0; k <= n; k++) {
      const VemSpace & Vk = V.space(k);
      std::unique_ptr<VemSpace> Vnext;
      if (k + 2 <= n) Vnext = std::make_unique<VemSpace>(cache, k + 1, r, cfg.threads);
      for (int d = k; d <= n; d++) {
        for (int i = 0; i < mesh.n_cells(d); i++) {
          auto trimmed = cache.get(d, i, SpaceTag::Trimmed, r + 1, k);
          for (int j = 0; j < trimmed->dim(); j++) {
            PolyForm omega = trimmed->element(j);
            VectorXd loc = Vk.interpolate_poly_local(d, i, omega);
            wpot = std::max(wpot, (Vk.potential(d, i, loc) - omega).norm() / (1. + omega.norm()));
            if (d == k + 1) {
              PolyForm expected = exterior_derivative(omega).embedded(r);
              wder = std::max(wder, (Vk.local_derivative_k1(i, loc) - expected).norm() / (1. + expected.norm()));
            } else if (d >= k + 2) {
              PolyForm expected = exterior_derivative(omega).embedded(r + 1);
              wder = std::max(wder, (Vk.local_derivative_high(*Vnext, d, i, loc) - expected).norm() / (1. + expected.norm()));
            }
          }
        }
      }
    }
    out.push_back({"vem_potential_consistency", wpot, tol(1e-10)});
    out.push_back({"vem_derivative_consistency", wder, tol(1e-10)});
    double wc = 0.;
    auto mn = [](const SparseMat & M) {
      double v = 0.;
      for (int kk = 0; kk < M.outerSize(); ++kk) {
        for (SparseMat::InnerIterator it(M, kk); it; ++it) v = std::max(v, std::abs(it.value()));
      }
      return v;
    };
    for (int k = 0; k + 1 < n; k++) {
      SparseMat DD = V.d_matrix(k + 1) * V.d_matrix(k);
      wc = std::max(wc, mn(DD) / std::max(1., mn(V.d_matrix(k + 1)) * mn(V.d_matrix(k))));
    }
    out.push_back({"vem_complex_property", wc, tol(1e-10)});
  }
  return out;
}

json checks_to_json(const RunConfig & cfg, const std::vector<CheckResult> & results)
{
  json j;
  j["config"] = config_to_json(cfg);
  auto & arr = j["checks"] = json::array();
  bool all = true;
  for (const auto & c : results) {
    json e;
    e["name"] = c.name;
    e["residual"] = c.residual;
    e["threshold"] = c.threshold;
    e["pass"] = c.pass();
    all = all && c.pass();
    arr.push_back(e);
  }
  j["pass"] = all;
  return j;
}

int cmd_mesh(const RunConfig & cfg)
{
  PolytopalMesh m = make_mesh(cfg);
  std::filesystem::create_directories(cfg.out);
  std::string path = cfg.out + "/mesh.json";
  save_mesh(m, path);
  std::cout << "wrote " << path << " (";
  for (int d = 0; d <= m.ambient_dim; d++) std::cout << m.n_cells(d) << (d < m.ambient_dim ? " " : "");
  std::cout << " cells by dimension)\n";
  return 0;
}

int cmd_check(const RunConfig & cfg)
{
  PolytopalMesh mesh = make_mesh(cfg);
  auto results = run_checks(cfg, mesh);
  json report = checks_to_json(cfg, results);
  std::filesystem::create_directories(cfg.out);
  std::ofstream out(cfg.out + "/report.json");
  out << report.dump(1) << "\n";
  bool all = true;
  for (const auto & c : results) {
    std::cout << (c.pass() ? "pass " : "FAIL ") << c.name << "  residual " << c.residual << "  threshold "
              << c.threshold << "\n";
    all = all && c.pass();
  }
  return all ? 0 : 2;
}

int cmd_cohomology(const RunConfig & cfg)
{
  PolytopalMesh mesh = make_mesh(cfg);
  SpaceCache cache(mesh);
  json report;
  report["config"] = config_to_json(cfg);
  bool all = true;
  auto handle = [&](const CohomologyReport & rep) {
    print_report(std::cout, rep);
    json e;
    e["provenance"] = rep.provenance;
    e["space_dims"] = rep.space_dims;
    e["rank_d"] = rep.rank_d;
    e["cohomology_dims"] = rep.cohomology_dims;
    e["betti"] = rep.betti;
    std::vector<double> gaps;
    for (double g : rep.sv_gap) gaps.push_back(std::isfinite(g) ? g : -1.);
    e["sv_gap"] = gaps;
    e["complex_residual"] = rep.complex_residual;
    e["match"] = rep.match;
    e["rank_ambiguous"] = rep.rank_ambiguous;
    report["complexes"].push_back(e);
    all = all && rep.match && !rep.rank_ambiguous;
  };
  handle(cohomology_dims(cw_complex(mesh), mesh));
  if (cfg.complex_choice != "vem") {
    DdrComplex C(cache, cfg.r, cfg.threads);
    handle(cohomology_dims(ddr_complex_matrices(C), mesh));
    if (!cfg.out.empty()) {
      std::filesystem::create_directories(cfg.out);
      for (int k = 0; k < mesh.ambient_dim; k++) {
        std::ofstream os(cfg.out + "/ddr_d" + std::to_string(k) + ".triplets");
        write_triplets(os, C.d_matrix(k));
      }
    }
  }
  if (cfg.complex_choice != "ddr") {
    VemComplex V(cache, cfg.r, cfg.threads);
    ComplexMatrices M;
    M.provenance = "VEM_" + std::to_string(cfg.r);
    for (int k = 0; k <= V.n(); k++) M.dims.push_back(V.space(k).dim());
    for (int k = 0; k < V.n(); k++) M.D.push_back(V.d_matrix(k));
    handle(cohomology_dims(M, mesh));
    if (!cfg.out.empty()) {
      std::filesystem::create_directories(cfg.out);
      for (int k = 0; k < mesh.ambient_dim; k++) {
        std::ofstream os(cfg.out + "/vem_d" + std::to_string(k) + ".triplets");
        write_triplets(os, V.d_matrix(k));
      }
    }
  }
  std::filesystem::create_directories(cfg.out);
  std::ofstream out(cfg.out + "/report.json");
  out << report.dump(1) << "\n";
  return all ? 0 : 2;
}

int cmd_hodge(const RunConfig & cfg)
{
  // refinement family from the generator by doubling divisions
  std::vector<std::string> parts;
  std::string cur;
  for (char c : cfg.gen + std::string(":")) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (parts.empty() || (parts[0] != "cartesian" && parts[0] != "simplicial")) {
    throw std::invalid_argument("hodge: needs a cartesian or simplicial generator for refinement");
  }
  std::vector<int> base;
  {
    std::string acc;
    for (char c : parts.at(1) + std::string("x")) {
      if (c == 'x') {
        base.push_back(std::stoi(acc));
        acc.clear();
      } else {
        acc += c;
      }
    }
  }
  int n = static_cast<int>(base.size());
  if (cfg.k < 0 || cfg.k > n) throw std::invalid_argument("hodge: k out of range");
  Manufactured mf = manufactured_from(boundary_compatible_trig(n, cfg.k));
  int quad = cfg.quad_degree > 0 ? cfg.quad_degree : std::min(2 * cfg.r + 10, 21);
  std::vector<ConvergenceRow> rows;
  for (int level = 0; level < cfg.refinements; level++) {
    std::vector<int> divs = base;
    for (int & d : divs) d <<= level;
    PolytopalMesh mesh = (parts[0] == "cartesian") ? cartesian_grid(n, divs) : simplicial_grid(n, divs);
    SpaceCache cache(mesh);
    rows.push_back(hodge_run(cache, cfg.k, cfg.r, mf, quad, cfg.interpolate_source, cfg.threads));
  }
  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream csv(cfg.out + "/errors.csv");
    csv << "mesh_h,dofs,err_sigma,err_dsigma,err_u,err_du,stab_sigma,stab_dsigma,stab_u,stab_du,solve_time_s\n";
    csv << std::setprecision(16);
    for (const auto & row : rows) {
      csv << row.h << "," << row.dofs << "," << row.errors.err_sigma << "," << row.errors.err_dsigma << ","
          << row.errors.err_u << "," << row.errors.err_du << "," << row.errors.stab_sigma << ","
          << row.errors.stab_dsigma << "," << row.errors.stab_u << "," << row.errors.stab_du << ","
          << row.solve_seconds << "\n";
    }
  }
  std::vector<double> hs, total;
  for (const auto & row : rows) {
    hs.push_back(row.h);
    total.push_back(row.errors.total());
  }
  double slope = fitted_slope(hs, total);
  json j;
  j["config"] = config_to_json(cfg);
  j["slope_total"] = slope;
  j["slope_target"] = cfg.r + 1;
  auto per = [&](auto field) {
    std::vector<double> e;
    for (const auto & row : rows) e.push_back(field(row.errors));
    return fitted_slope(hs, e);
  };
  j["slope_err_u"] = per([](const HodgeErrors & e) { return e.err_u; });
  j["slope_err_sigma"] = per([](const HodgeErrors & e) { return e.err_sigma; });
  j["rows"] = json::array();
  for (const auto & row : rows) {
    json e;
    e["h"] = row.h;
    e["dofs"] = row.dofs;
    e["total_error"] = row.errors.total();
    e["solver_residual"] = row.solver_residual;
    j["rows"].push_back(e);
  }
  std::ofstream out(cfg.out + "/convergence.json");
  out << j.dump(1) << "\n";
  std::cout << "h:";
  for (double h : hs) std::cout << " " << h;
  std::cout << "\ntotal error:";
  for (double e : total) std::cout << " " << e;
  std::cout << "\nfitted slope " << slope << " (target " << cfg.r + 1 << ")\n";
  return 0;
}

} // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"discrete de Rham complexes of differential forms on polytopal meshes"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_path;

  // config file first (so that explicit flags override it)
  for (int i = 1; i + 1 < argc; i++) {
    if (std::string(argv[i]) == "--config") {
      try {
        apply_config_file(cfg, argv[i + 1]);
      } catch (const std::exception & e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
      }
    }
  }

  auto add_common = [&](CLI::App * sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override)");
    sub->add_option("--mesh", cfg.mesh_path, "mesh file (ddrmesh-v1 JSON)");
    sub->add_option("--gen", cfg.gen, "generator spec, e.g. cartesian:4x4, simplicial:2x2x2:d0.05, annulus:4x2");
    sub->add_option("--r", cfg.r, "polynomial degree (0..5)");
    sub->add_option("--k", cfg.k, "form degree (hodge)");
    sub->add_option("--tol", cfg.tol, "override residual thresholds");
    sub->add_option("--quad-degree", cfg.quad_degree, "field quadrature degree override");
    sub->add_option("--refinements", cfg.refinements, "number of nested refinements (hodge)");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--seed", cfg.seed, "random seed (recorded in outputs)");
    sub->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
    sub->add_option("--complex", cfg.complex_choice, "ddr | vem | both")->check(CLI::IsMember({"ddr", "vem", "both"}));
  };

  CLI::App * mesh_cmd = app.add_subcommand("mesh", "generate a mesh and write it as ddrmesh-v1 JSON");
  CLI::App * check_cmd = app.add_subcommand("check", "run the property suites and write report.json");
  CLI::App * coho_cmd = app.add_subcommand("cohomology", "cohomology dimensions against Betti numbers");
  CLI::App * hodge_cmd = app.add_subcommand("hodge", "Hodge Laplacian convergence study");
  for (auto * sub : {mesh_cmd, check_cmd, coho_cmd, hodge_cmd}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    (void)config_path;
    if (cfg.r < 0 || cfg.r > 5) {
      std::cerr << "configuration error: r must be in [0,5]\n";
      return 3;
    }
    if (cfg.refinements < 1 || cfg.refinements > 8) {
      std::cerr << "configuration error: refinements must be in [1,8]\n";
      return 3;
    }
    for (auto * sub : {mesh_cmd, check_cmd, coho_cmd, hodge_cmd}) {
      if (sub->parsed()) cfg.command = sub->get_name();
    }
    if (mesh_cmd->parsed()) return cmd_mesh(cfg);
    if (check_cmd->parsed()) return cmd_check(cfg);
    if (coho_cmd->parsed()) return cmd_cohomology(cfg);
    if (hodge_cmd->parsed()) return cmd_hodge(cfg);
    return 3;
  } catch (const MeshValidationError & e) {
    std::cerr << "mesh validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument & e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
