#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "maglab/experiments.hpp"
#include "oracles.hpp"

using namespace maglab;
using doctest::Approx;

namespace {

Config cfg_of(const std::string& text) {
  std::stringstream ss(text);
  return Config::parse(ss);
}

std::string tmp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("maglab_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const Config c = cfg_of("# header\nh = 1/64  # trailing\nsigmas = 100, 200,400\nname=disk\nflag = yes\nseed = 18446744073709551615\n");
  CHECK(c.num("h") == 1.0 / 64);
  CHECK(c.list("sigmas", {}) == std::vector<double>{100, 200, 400});
  CHECK(c.str("name") == "disk");
  CHECK(c.flag("flag", false));
  CHECK(c.u64("seed", 0) == 18446744073709551615ull);
  CHECK(c.num("missing", 2.5) == 2.5);
  CHECK_THROWS_WITH_AS(c.num("missing"), doctest::Contains("missing required key"), Error);
  CHECK_THROWS_AS(c.num("name"), Error);
  CHECK_THROWS_AS(c.integer("h", 0), Error);
  CHECK_THROWS_WITH_AS(cfg_of("a = 1\na = 2\n"), doctest::Contains("duplicate"), Error);
  CHECK_THROWS_AS(cfg_of("just words\n"), Error);
  CHECK_THROWS_AS(cfg_of("bad key = 1\n"), Error);
  CHECK_THROWS_AS(cfg_of("x = 1/0\n").num("x"), Error);
  CHECK_THROWS_AS(cfg_of("seed = -1\n").u64("seed", 0), Error);

  Config o = c;
  o.set("h=0.5");
  CHECK(o.num("h") == 0.5);
  CHECK_THROWS_AS(o.set("novalue"), Error);
  CHECK_THROWS_WITH_AS(c.check_known({"h"}, "eig"), doctest::Contains("unknown key"), Error);
  CHECK_THROWS_AS(Config::load("/nonexistent/maglab.cfg"), Error);
}

TEST_CASE("config validation before dispatch") {
  CHECK_THROWS_AS(run_eig(cfg_of("bogus = 1\n")), Error);
  CHECK_THROWS_AS(run_eig(cfg_of("domain = hexagon\n")), Error);
  CHECK_THROWS_AS(run_eig(cfg_of("h = -1\n")), Error);
  CHECK_THROWS_AS(run_averaging(cfg_of("N = 0\n")), Error);
  CHECK_THROWS_AS(run_averaging(cfg_of("ells = 0.25, -1\n")), Error);
  CHECK_THROWS_AS(run_bulk(cfg_of("b_list = 0.5, 0.25\n")), Error);
  CHECK_THROWS_AS(run_gl(cfg_of("mode = other\n")), Error);
  CHECK_THROWS_AS(run_gl(cfg_of("kappas = 4\n")), Error);  // no g table
  CHECK_THROWS_AS(run_field_gen(cfg_of("format = png\n")), Error);
  CHECK(config_schema("gl").size() > 10);
  CHECK_THROWS_AS(config_schema("nope"), Error);
}

TEST_CASE("averaging command") {
  SUBCASE("constant field") {
    const Report r = run_averaging(cfg_of("field = constant\nB0 = 3\n"));
    CHECK(r.pass());
    REQUIRE(r.rows.size() == 3);
    for (const Json& row : r.rows) CHECK(row["lhs"].get<double>() <= 1e-20);
  }
  SUBCASE("linear field") {
    const Report r = run_averaging(cfg_of("field = linear\nells = 0.5\nh_ratio = 256\n"));
    // hand integral of |(2 x1 / 3) A0|^2 over the square of side ell, divided by ell^6
    const double oracle = oracle::gauss_2d([](double x, double y) { return x * x * (x * x + y * y) / 9; }, -0.5, 0.5,
                                           -0.5, 0.5);
    CHECK(oracle == Approx(7.0 / 3240).epsilon(1e-12));
    CHECK(r.rows[0]["lhs_over_ell6"].get<double>() == Approx(oracle).epsilon(1e-2));
    CHECK(r.pass());
  }
  SUBCASE("random fields, reproducible and job-order independent") {
    const Config c = cfg_of("N = 3\nseed = 11\nells = 1/4, 1/8\nh_ratio = 32\n");
    const Report a = run_averaging(c, "", 1);
    const Report b = run_averaging(c, "", 3);
    CHECK(a.pass());
    CHECK(a.rows.size() == 6);
    CHECK(a.rows.dump() == b.rows.dump());
    CHECK(a.rows[2]["seed"] == 12);
    CHECK(a.rows[2]["ell"] == 0.25);
  }
  SUBCASE("files") {
    const std::string d = tmp_dir("avg");
    run_averaging(cfg_of("N = 2\nh_ratio = 16\n"), d);
    const std::string csv = slurp(d + "/averaging.csv");
    CHECK(csv.rfind("ell,lhs,rhs,ratio", 0) == 0);
    CHECK(csv.find(version()) != std::string::npos);
    std::ifstream j(d + "/averaging.json");
    const Json doc = Json::parse(j);
    CHECK(doc["pass"] == true);
    CHECK(doc["rows"].size() == 6);
    run_averaging(cfg_of("N = 2\nh_ratio = 16\n"), d);
    CHECK(slurp(d + "/averaging.csv") == csv);
  }
}

TEST_CASE("eig command") {
  SUBCASE("no field, unit square") {
    const Report r = run_eig(cfg_of("sigmas = 0\nh = 1/64\n"));
    CHECK(r.rows[0]["lambda"].get<double>() == Approx(2 * std::numbers::pi * std::numbers::pi).epsilon(5e-3));
    CHECK(r.rows[0]["ratio"].is_null());
  }
  SUBCASE("uniform field sweep on a disk") {
    const Report r = run_eig(cfg_of("domain = disk\nradius = 2\nmargin_cells = 1\nh = 1/32\nsigmas = 25, 50, 100\n"), "", 2);
    CHECK(r.pass());
    REQUIRE(r.rows.size() == 3);
    for (const Json& row : r.rows) {
      CHECK(row["m0"] == Approx(1.0));
      CHECK(row["upper_quotient"].get<double>() >= row["lambda"].get<double>());
      CHECK(row.contains("residual"));
      CHECK(row.contains("iterations"));
    }
    // a ratio cap below the measured values trips the embedded check
    const Report t = run_eig(cfg_of("domain = disk\nradius = 2\nh = 1/32\nsigmas = 25\nratio_max = 0.5\nupper = false\n"));
    CHECK_FALSE(t.pass());
  }
}

TEST_CASE("bulk and gl commands") {
  const std::string d = tmp_dir("bulk");
  BulkTable t;
  const Report b = run_bulk(cfg_of("b_list = 0, 0.5, 1\nR_list = 4, 6\n"), d, 2, &t);
  CHECK(b.pass());
  CHECK(t.records.size() == 12);
  CHECK(slurp(d + "/bulk.csv").rfind("b,R,boundary,energy,grad_norm,iters,seed,h,tol,version", 0) == 0);
  std::ifstream js(d + "/bulk_summary.json");
  const std::vector<GEstimate> s = read_bulk_summary(js);
  REQUIRE(s.size() == 3);
  CHECK(s[2].g_est == 0.0);

  SUBCASE("thm13 from the written table") {
    const std::string gd = tmp_dir("gl");
    const Report r = run_gl(cfg_of("kappas = 4, 5\nsnapshots = true\ng_table = " + d + "/bulk_summary.json\n"), gd);
    CHECK(r.pass());
    REQUIRE(r.rows.size() == 2);
    for (const Json& row : r.rows) {
      CHECK(row["E_min"].get<double>() <= row["E_trial"].get<double>());
      CHECK(row["E_trial"].get<double>() <= 0.0);
      CHECK(row.contains("el_residuals"));
    }
    CHECK(std::filesystem::exists(gd + "/gl_kappa4.mcf"));
    std::ifstream f(gd + "/gl_kappa4.mcf", std::ios::binary);
    CHECK(read_mcf(f).layers.size() == 4);
  }
  SUBCASE("normal regime") {
    const GInterpolant g = GInterpolant::from(s);
    const Report r = run_gl(cfg_of("kappas = 6\nb = 3\n"), "", 1, &g);
    CHECK(r.pass());
    CHECK(std::abs(r.rows[0]["E_min"].get<double>()) <= 1e-8);
    CHECK(r.rows[0]["E_asy"] == 0.0);
  }
  SUBCASE("eigenvalue bridge") {
    const Report r = run_gl(cfg_of("mode = eigen\nsigmas = 64\n"));
    CHECK(r.pass());
    CHECK(r.rows[0]["quotient"].get<double>() >= r.rows[0]["lambda"].get<double>());
  }
}

TEST_CASE("field-gen command") {
  const std::string d = tmp_dir("field");
  const Report r = run_field_gen(cfg_of("field = random\nseed = 5\nh = 1/8\nformat = both\npotential = reference\nfloor = 1\n"), d);
  CHECK(r.summary["ess_inf"].get<double>() > 0.5);
  CHECK(r.summary["min"] == Approx(1.0));
  const GridPtr g = make_grid(Domain::rectangle({0, 1, 0, 1}, 1.0 / 8));
  std::ifstream c(d + "/B.csv");
  const ScalarField B = read_scalar_csv(c, g);
  std::ifstream m(d + "/B.mcf", std::ios::binary);
  const ScalarField Bm = scalar_from_mcf(read_mcf(m), g);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(B[k] == Bm[k]);
  CHECK(std::filesystem::exists(d + "/A.csv"));
  std::ifstream am(d + "/A.mcf", std::ios::binary);
  CHECK(read_mcf(am).layers.size() == 2);
}
