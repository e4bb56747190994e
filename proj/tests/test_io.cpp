#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "maglab/io.hpp"

using namespace maglab;

namespace {

GridPtr small_grid() { return make_grid(Domain::rectangle({0, 1, 0, 0.5}, 0.25)); }

void append_le(std::string& s, const void* p, std::size_t n) {
  // test machines are little-endian; the writer swaps on big-endian hosts
  s.append(static_cast<const char*>(p), n);
}

}  // namespace

TEST_CASE("csv round trip") {
  const GridPtr g = small_grid();
  const ScalarField f = sample(g, [](Point p) { return std::sin(p.x) / 3 + p.y * 1e-7; });
  std::stringstream ss;
  write_csv(ss, f);
  std::string first;
  std::getline(ss, first);
  CHECK(first == "x,y,value");
  ss.seekg(0);
  const ScalarField r = read_scalar_csv(ss, g);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(r[k] == f[k]);

  VectorField A(g);
  for (std::size_t k = 0; k < g->size(); ++k) A.set(k, {0.1 * k, -1.0 / (k + 1)});
  std::stringstream sv;
  write_csv(sv, A);
  const VectorField B = read_vector_csv(sv, g);
  for (std::size_t k = 0; k < g->size(); ++k) {
    CHECK(B.x()[k] == A.x()[k]);
    CHECK(B.y()[k] == A.y()[k]);
  }

  std::stringstream bad("x,y,value\n0,0,1\n");
  CHECK_THROWS_WITH_AS(read_scalar_csv(bad, g), doctest::Contains("missing"), Error);
  std::stringstream off("x,y,value\n0.1,0,1\n");
  CHECK_THROWS_WITH_AS(read_scalar_csv(off, g), doctest::Contains("not a grid node"), Error);
  std::stringstream hdr("a,b\n");
  CHECK_THROWS_AS(read_scalar_csv(hdr, g), Error);
}

TEST_CASE("MCF1 layout") {
  const GridPtr g = small_grid();
  const ScalarField f = sample(g, [](Point p) { return p.x - 2 * p.y; });
  std::stringstream ss;
  write_mcf(ss, to_mcf(f));
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 48 + 8 * g->size());

  // independently assembled header
  std::string ref = "MCF1";
  const std::uint32_t hdr[3] = {1, static_cast<std::uint32_t>(g->nx()), static_cast<std::uint32_t>(g->ny())};
  append_le(ref, hdr, sizeof hdr);
  const double box[4] = {0.0, 1.0, 0.0, 0.5};
  append_le(ref, box, sizeof box);
  CHECK(bytes.substr(0, 48) == ref);
  double v;
  std::memcpy(&v, bytes.data() + 48 + 8 * g->index(3, 1), 8);
  CHECK(v == f.at(3, 1));

  ss.seekg(0);
  const McfData d = read_mcf(ss);
  CHECK(d.nx == 5);
  CHECK(d.ny == 3);
  const ScalarField r = scalar_from_mcf(d, g);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(r[k] == f[k]);
  CHECK_THROWS_AS(scalar_from_mcf(d, make_grid(Domain::rectangle({0, 1, 0, 1}, 0.25))), Error);
  CHECK_THROWS_AS(scalar_from_mcf(d, g, 1), Error);

  std::stringstream magic("MCF2xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
  CHECK_THROWS_WITH_AS(read_mcf(magic), doctest::Contains("magic"), Error);
  std::stringstream cut(bytes.substr(0, 60));
  CHECK_THROWS_WITH_AS(read_mcf(cut), doctest::Contains("truncated"), Error);
  McfData wrong = d;
  wrong.layers[0].pop_back();
  std::stringstream out;
  CHECK_THROWS_AS(write_mcf(out, wrong), Error);
}

TEST_CASE("GL snapshot") {
  const GridPtr g = small_grid();
  VectorField F(g);
  GLState s = normal_state(F, 2.0, 1.0);
  for (std::size_t k = 0; k < g->size(); ++k) s.psi[k] = {0.5, -0.25 * k};
  const McfData d = to_mcf(s);
  REQUIRE(d.layers.size() == 4);
  CHECK(d.layers[0][7] == 0.5);
  CHECK(d.layers[1][7] == -1.75);
  for (double a : d.layers[2]) CHECK(a == 0.0);
}

TEST_CASE("bulk files") {
  BulkTable t;
  BulkRecord r;
  r.b = 0.5;
  r.R = 4;
  r.boundary = Boundary::dirichlet;
  r.energy = -1.25;
  r.grad_norm = 1e-8;
  r.iterations = 17;
  t.records.push_back(r);
  std::stringstream ss;
  write_bulk_csv(ss, t);
  CHECK(ss.str() == "b,R,boundary,energy,grad_norm,iters\n0.5,4,dirichlet,-1.25,1e-08,17\n");

  std::vector<GEstimate> s(2);
  s[0].b = 0.0;
  s[0].g_est = -0.5;
  s[1].b = 1.0;
  s[1].g_est = 0.0;
  s[1].C_emp = 0.3;
  std::stringstream js;
  js << bulk_summary_json(s).dump(2);
  const auto back = read_bulk_summary(js);
  REQUIRE(back.size() == 2);
  CHECK(back[1].C_emp == 0.3);
  CHECK(back[0].g_est == -0.5);
  std::stringstream wrapped(R"({"summary": [{"b": 0.5, "g_est": -0.1}]})");
  CHECK(read_bulk_summary(wrapped)[0].bracket_lo == -0.1);
  std::stringstream junk("{");
  CHECK_THROWS_AS(read_bulk_summary(junk), Error);
  std::stringstream missing(R"([{"b": 0.5}])");
  CHECK_THROWS_AS(read_bulk_summary(missing), Error);
}

TEST_CASE("run records") {
  Thm13Record r;
  r.kappa = 8;
  r.E_min = -3;
  r.residuals.A = 1e-9;
  const Json j = to_json(r);
  for (const char* key : {"kappa", "H", "b", "ell", "E_min", "E_trial", "E_asy", "gap", "normalized_gap", "psi_linf",
                          "el_residuals"})
    CHECK(j.contains(key));
  CHECK(j["el_residuals"]["A"] == 1e-9);
  const Json p = to_json(Provenance{42, 0.125, 1e-7});
  CHECK(p["seed"] == 42);
  CHECK(p["version"].get<std::string>().rfind("0.1.0", 0) == 0);
}

TEST_CASE("row csv") {
  Json rows = Json::array();
  rows.push_back({{"k", 1}, {"r", {{"a", 0.5}, {"b", nullptr}}}, {"s", "x"}});
  rows.push_back({{"k", 2}, {"s", "y"}});
  std::stringstream ss;
  write_rows_csv(ss, rows);
  CHECK(ss.str() == "k,r_a,r_b,s\n1,0.5,nan,x\n2,,,y\n");
  std::stringstream none;
  write_rows_csv(none, Json::array());
  CHECK(none.str().empty());
  CHECK_THROWS_AS(write_rows_csv(none, Json::object()), Error);
}
