#include "maglab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "maglab/field.hpp"
#include "maglab/gl.hpp"
#include "maglab/parallel.hpp"
#include "maglab/random_field.hpp"
#include "maglab/spectral.hpp"

namespace maglab {

namespace {

const std::vector<KeyDoc> kDomainKeys = {
    {"domain", "square", "square | disk"},
    {"side", "1", "square side; the square is [x0, x0 + side] x [y0, y0 + side]"},
    {"x0", "0", "square corner"},
    {"y0", "0", "square corner"},
    {"radius", "1", "disk radius"},
    {"cx", "0", "disk centre"},
    {"cy", "0", "disk centre"},
    {"margin_cells", "0", "extra grid nodes around the domain's bounding box"},
};

const std::vector<KeyDoc> kFieldKeys = {
    {"field", "constant", "constant | linear | random"},
    {"B0", "1", "constant value, or the value at x = 0 for the linear field B0 + slope x"},
    {"slope", "1", "linear field slope in x"},
    {"seed", "0", "random field seed (64-bit)"},
    {"K", "32", "random field: modes with |k| <= K"},
    {"epsilon", "0.1", "random field: weights (1 + |k|)^-(1 + epsilon)"},
    {"amplitude", "1", "random field: factor on the oscillating part"},
    {"offset", "0", "random field: constant offset"},
    {"floor", "(unset)", "random field: shift so the grid minimum equals this value"},
};

std::vector<KeyDoc> join(std::initializer_list<std::vector<KeyDoc>> parts) {
  std::vector<KeyDoc> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::map<std::string, std::vector<KeyDoc>>& schemas() {
  static const std::map<std::string, std::vector<KeyDoc>> s = {
      {"averaging",
       {{"field", "random", "random | constant | linear"},
        {"B0", "1", "constant value / linear intercept"},
        {"slope", "1", "linear field slope in x"},
        {"seed", "0", "first seed; instances use seed, seed + 1, ..."},
        {"N", "100", "number of random fields (1 for constant and linear)"},
        {"K", "32", "random field modes"},
        {"epsilon", "0.1", "random field decay"},
        {"amplitude", "1", "random field amplitude"},
        {"offset", "0", "random field offset"},
        {"ells", "1/4, 1/8, 1/16", "cell sizes"},
        {"shape", "square", "square (side ell) | disk (radius ell / 2)"},
        {"cx", "0", "cell centre"},
        {"cy", "0", "cell centre"},
        {"h_ratio", "128", "h = ell / h_ratio unless h is set"},
        {"h", "(unset)", "fixed grid spacing"},
        {"tol_factor", "10", "pass when lhs <= rhs (1 + tol_factor h) + 1e-20"}}},
      {"eig", join({kDomainKeys, kFieldKeys,
                    {{"h", "1/64", "grid spacing"},
                     {"sigmas", "100, 200, 400", "field strengths"},
                     {"tol", "1e-8", "eigensolver relative residual"},
                     {"max_iter", "4000", "eigensolver inner solves"},
                     {"upper", "true", "also evaluate the Gaussian trial upper bound"},
                     {"rho", "3/8", "trial cutoff radius sigma^-rho"},
                     {"eta", "1/8", "trial error exponent"},
                     {"eps", "0", "centre selection slack"},
                     {"C_lower", "1/4", "check lambda / (sigma m0) >= 1 - C_lower h^2 sigma"},
                     {"ratio_max", "inf", "check lambda / (sigma m0) <= ratio_max"},
                     {"monotone", "true", "check lambda / sigma nonincreasing in sigma"}}})},
      {"bulk-table",
       {{"b_list", "0, 1/16, ..., 1", "reduced field strengths"},
        {"R_list", "4, 6, 8, 12, 16", "square sizes, increasing"},
        {"h", "1/16", "grid spacing of the reduced problems (0: min(1/16, R/256))"},
        {"tol", "1e-6", "gradient tolerance"},
        {"max_iter", "20000", "descent iterations"},
        {"max_width", "1/4", "largest bracket width at R_max"},
        {"mono_tol", "1e-4", "slack of the monotonicity check on g_est"},
        {"concave_tol", "1e-3", "slack of the concavity check on g_est"},
        {"seed", "0", "recorded only"}}},
      {"gl", join({kDomainKeys, kFieldKeys,
                   {{"mode", "thm13", "thm13 | eigen"},
                    {"kappas", "8, 16, 32", "thm13: kappa values"},
                    {"b", "1/2", "thm13: H = b kappa"},
                    {"ell_factor", "1", "thm13: ell = ell_factor kappa^(-3/4)"},
                    {"h", "(unset)", "fixed grid spacing; otherwise 1 / (h_factor kappa)"},
                    {"h_factor", "8", "grid spacing rule"},
                    {"g_table", "(required unless given in code)", "bulk summary JSON"},
                    {"tol", "1e-7", "Euler-Lagrange residual tolerance"},
                    {"max_iter", "20000", "descent iterations per seed"},
                    {"seeds", "vortex, constant", "start states"},
                    {"snapshots", "false", "write MCF1 state snapshots"},
                    {"normal_frac", "0.05", "normal regime check |E_min| <= normal_frac kappa^2 |Omega|"},
                    {"growth_max", "1.5", "normalized gap check last <= growth_max first"},
                    {"sigmas", "64, 128", "eigen: field strengths"},
                    {"a", "1/2", "eigen: b = (1 - a) / m0"},
                    {"psi_floor", "1e-6", "eigen: degenerate state threshold"}}})},
      {"field-gen", join({kDomainKeys, kFieldKeys,
                          {{"h", "1/64", "grid spacing"},
                           {"format", "csv", "csv | mcf | both"},
                           {"potential", "none", "none | ray (about the domain centre) | reference"}}})},
  };
  return s;
}

std::vector<std::string> keys_of(const std::string& command) {
  std::vector<std::string> k;
  for (const KeyDoc& d : config_schema(command)) k.push_back(d.key);
  return k;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& dir, const std::string& name, bool binary = false) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw Error("cannot write " + path);
  return f;
}

void write_rows(const Report& r, const std::string& dir, const std::string& stem) {
  if (dir.empty()) return;
  ensure_dir(dir);
  std::ofstream c = open_out(dir, stem + ".csv");
  write_rows_csv(c, r.rows);
  std::ofstream j = open_out(dir, stem + ".json");
  Json doc;
  doc["command"] = r.command;
  doc["summary"] = r.summary;
  doc["pass"] = r.pass();
  doc["failures"] = r.failures;
  doc["rows"] = r.rows;
  j << doc.dump(2) << '\n';
}

void add_provenance(Json& row, std::uint64_t seed, double h, double tol) {
  row["seed"] = seed;
  row["h"] = h;
  row["tol"] = tol;
  row["version"] = version();
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string w;
  while (std::getline(ss, w, ',')) {
    w.erase(0, w.find_first_not_of(" \t"));
    w.erase(w.find_last_not_of(" \t") + 1);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

GLOptions gl_options(const Config& cfg) {
  GLOptions o;
  o.tol = cfg.num("tol", 1e-7);
  o.max_iter = cfg.integer("max_iter", 20000);
  if (cfg.has("seeds")) o.seeds = split_words(cfg.str("seeds"));
  if (!(o.tol > 0.0) || o.max_iter < 1 || o.seeds.empty()) throw Error("config: bad GL solver settings");
  return o;
}

}  // namespace

const std::vector<KeyDoc>& config_schema(const std::string& command) {
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw Error("unknown command " + command);
  return it->second;
}

Domain domain_from(const Config& cfg, double h) {
  if (!(h > 0.0)) throw Error("config: h must be positive");
  const double margin = cfg.integer("margin_cells", 0) * h;
  if (margin < 0.0) throw Error("config: margin_cells must be nonnegative");
  const std::string kind = cfg.str("domain", "square");
  if (kind == "square") {
    const double s = cfg.num("side", 1.0), x0 = cfg.num("x0", 0.0), y0 = cfg.num("y0", 0.0);
    if (!(s > 0.0)) throw Error("config: side must be positive");
    return Domain::rectangle({x0, x0 + s, y0, y0 + s}, h, margin);
  }
  if (kind == "disk") {
    const double r = cfg.num("radius", 1.0);
    if (!(r > 0.0)) throw Error("config: radius must be positive");
    return Domain::disk({cfg.num("cx", 0.0), cfg.num("cy", 0.0)}, r, h, margin);
  }
  throw Error("config: unknown domain '" + kind + "'");
}

ScalarField field_from(const Config& cfg, const GridPtr& grid) {
  const std::string kind = cfg.str("field", "constant");
  const double B0 = cfg.num("B0", 1.0);
  if (kind == "constant") return ScalarField(grid, B0);
  if (kind == "linear") {
    const double s = cfg.num("slope", 1.0);
    return sample(grid, [B0, s](Point p) { return B0 + s * p.x; });
  }
  if (kind == "random") {
    FourierOptions o;
    o.K = cfg.integer("K", 32);
    o.epsilon = cfg.num("epsilon", 0.1);
    o.amplitude = cfg.num("amplitude", 1.0);
    o.offset = cfg.num("offset", 0.0);
    if (o.K < 1) throw Error("config: K must be at least 1");
    FourierField f(cfg.u64("seed", 0), o);
    if (cfg.has("floor")) f.shift_to_floor(cfg.num("floor"), grid);
    return f.sample(grid);
  }
  throw Error("config: unknown field '" + kind + "'");
}

// ---------------------------------------------------------------------------------------------------------------

Report run_averaging(const Config& cfg, const std::string& out_dir, int jobs) {
  cfg.check_known(keys_of("averaging"), "averaging");
  Report rep;
  rep.command = "averaging";
  const std::string kind = cfg.str("field", "random");
  if (kind != "random" && kind != "constant" && kind != "linear") throw Error("config: unknown field '" + kind + "'");
  const int N = cfg.integer("N", kind == "random" ? 100 : 1);
  const std::uint64_t seed0 = cfg.u64("seed", 0);
  const std::vector<double> ells = cfg.list("ells", {0.25, 0.125, 0.0625});
  const std::string shape = cfg.str("shape", "square");
  const Point c{cfg.num("cx", 0.0), cfg.num("cy", 0.0)};
  const double h_ratio = cfg.num("h_ratio", 128);
  const double tol_factor = cfg.num("tol_factor", 10);
  if (N < 1) throw Error("config: N must be at least 1");
  if (shape != "square" && shape != "disk") throw Error("config: unknown shape '" + shape + "'");
  if (!(h_ratio >= 4)) throw Error("config: h_ratio must be at least 4");
  for (double l : ells)
    if (!(l > 0.0)) throw Error("config: cell sizes must be positive");

  FourierOptions fo;
  fo.K = cfg.integer("K", 32);
  fo.epsilon = cfg.num("epsilon", 0.1);
  fo.amplitude = cfg.num("amplitude", 1.0);
  fo.offset = cfg.num("offset", 0.0);
  const double B0 = cfg.num("B0", 1.0), slope = cfg.num("slope", 1.0);

  const std::size_t n = static_cast<std::size_t>(N) * ells.size();
  std::vector<Json> rows(n);
  std::vector<char> ok(n, 1);
  parallel_for(n, jobs, [&](std::size_t idx) {
    const std::uint64_t seed = seed0 + idx / ells.size();
    const double ell = ells[idx % ells.size()];
    const double h = cfg.has("h") ? cfg.num("h") : ell / h_ratio;
    if (!(h > 0.0) || h > ell / 4) throw Error("config: h must lie in (0, ell / 4]");
    const Cell cell = shape == "square" ? Cell::square(c, ell) : Cell::disk(c, ell / 2);
    const Box b = cell.bounds();
    const GridPtr g = make_grid(Domain::rectangle({b.x_min - h, b.x_max + h, b.y_min - h, b.y_max + h}, h));
    ScalarField B;
    if (kind == "random")
      B = FourierField(seed, fo).sample(g);
    else if (kind == "constant")
      B = ScalarField(g, B0);
    else
      B = sample(g, [&](Point p) { return B0 + slope * (p.x - c.x); });
    const GapResult r = averaging_gap(B, cell);
    const double tol = tol_factor * h;
    Json row;
    row["ell"] = ell;
    row["lhs"] = r.lhs;
    row["rhs"] = r.rhs;
    row["ratio"] = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
    row["sharper"] = r.sharper;
    row["sharper_ratio"] = r.sharper > 0.0 ? r.lhs / r.sharper : 0.0;
    row["lhs_over_ell6"] = r.lhs / std::pow(ell, 6);
    add_provenance(row, seed, h, tol);
    rows[idx] = std::move(row);
    ok[idx] = r.lhs <= r.rhs * (1 + tol) + 1e-20;
  });
  double worst = 0.0;
  int violations = 0;
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, rows[i]["ratio"].get<double>());
    if (!ok[i]) {
      ++violations;
      rep.fail("seed " + std::to_string(rows[i]["seed"].get<std::uint64_t>()) + ", ell " +
               fmt(rows[i]["ell"].get<double>()) + ": lhs > rhs (1 + tol)");
    }
    rep.rows.push_back(std::move(rows[i]));
  }
  rep.summary = {{"instances", n}, {"max_ratio", worst}, {"violations", violations}, {"field", kind}};
  write_rows(rep, out_dir, "averaging");
  return rep;
}

// ---------------------------------------------------------------------------------------------------------------

Report run_eig(const Config& cfg, const std::string& out_dir, int jobs) {
  cfg.check_known(keys_of("eig"), "eig");
  Report rep;
  rep.command = "eig";
  const double h = cfg.num("h", 1.0 / 64);
  const std::vector<double> sigmas = cfg.list("sigmas", {100, 200, 400});
  const double tol = cfg.num("tol", 1e-8);
  const int max_iter = cfg.integer("max_iter", 4000);
  const bool upper = cfg.flag("upper", true);
  const double rho = cfg.num("rho", 0.375), eta = cfg.num("eta", 0.125), eps = cfg.num("eps", 0.0);
  const double C_lower = cfg.num("C_lower", 0.25);
  const double ratio_max = cfg.num("ratio_max", std::numeric_limits<double>::infinity());
  const bool monotone = cfg.flag("monotone", true);
  const std::uint64_t seed = cfg.u64("seed", 0);
  for (double s : sigmas)
    if (!(s >= 0.0)) throw Error("config: sigmas must be nonnegative");
  if (!(tol > 0.0) || max_iter < 1) throw Error("config: bad eigensolver settings");

  const GridPtr g = make_grid(domain_from(cfg, h));
  const ScalarField B = field_from(cfg, g);
  const Box bb = g->domain().bounding_box();
  const VectorField A = potential_from_field(B, bb.center());
  const double m0 = ess_inf(B).value;

  std::vector<Json> rows(sigmas.size());
  parallel_for(sigmas.size(), jobs, [&](std::size_t i) {
    const double sigma = sigmas[i];
    const MagneticOperator op = assemble(g, sigma, A);
    const SpectralResult r = lowest_eigenvalue(op, tol, max_iter);
    Json row;
    row["sigma"] = sigma;
    row["lambda"] = r.lambda;
    row["residual"] = r.residual;
    row["iterations"] = r.iterations;
    row["m0"] = m0;
    row["ratio"] = sigma > 0.0 ? Json(r.lambda / (sigma * m0)) : Json(nullptr);
    row["upper_quotient"] = nullptr;
    row["upper_ratio"] = nullptr;
    if (upper && sigma > 0.0) {
      const double q = thm12_upper(op, B, eps, rho, eta).quotient;
      row["upper_quotient"] = q;
      row["upper_ratio"] = q / (sigma * m0);
    }
    add_provenance(row, seed, h, tol);
    rows[i] = std::move(row);
  });

  double prev = std::numeric_limits<double>::infinity(), prev_sigma = -1.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const Json& r = rows[i];
    const double sigma = sigmas[i];
    const std::string at = "sigma " + fmt(sigma) + ": ";
    if (sigma > 0.0) {
      const double ratio = r["ratio"].get<double>();
      if (ratio < 1.0 - C_lower * h * h * sigma) rep.fail(at + "ratio below 1 - C h^2 sigma");
      if (ratio > ratio_max) rep.fail(at + "ratio above ratio_max");
      if (upper && r["upper_quotient"].get<double>() < r["lambda"].get<double>() * (1 - 1e-9))
        rep.fail(at + "trial upper bound below lambda");
      if (monotone && sigma > prev_sigma && prev_sigma > 0.0 && ratio > prev * (1 + 10 * tol))
        rep.fail(at + "lambda / sigma increased");
      prev = ratio;
      prev_sigma = sigma;
    }
    rep.rows.push_back(r);
  }
  rep.summary = {{"m0", m0}, {"nodes", g->inside_count()}};
  write_rows(rep, out_dir, "eig");
  return rep;
}

// ---------------------------------------------------------------------------------------------------------------

Report run_bulk(const Config& cfg, const std::string& out_dir, int jobs, BulkTable* table) {
  cfg.check_known(keys_of("bulk-table"), "bulk-table");
  Report rep;
  rep.command = "bulk-table";
  std::vector<double> bl;
  for (int i = 0; i <= 16; ++i) bl.push_back(i / 16.0);
  bl = cfg.list("b_list", bl);
  BulkOptions o;
  o.R_list = cfg.list("R_list", o.R_list);
  o.fixed_h = cfg.num("h", o.fixed_h);
  o.tol = cfg.num("tol", o.tol);
  o.max_iter = cfg.integer("max_iter", o.max_iter);
  o.max_width = cfg.num("max_width", o.max_width);
  o.jobs = jobs;
  const double mono_tol = cfg.num("mono_tol", 1e-4), concave_tol = cfg.num("concave_tol", 1e-3);
  const std::uint64_t seed = cfg.u64("seed", 0);
  if (!std::is_sorted(bl.begin(), bl.end()) || std::adjacent_find(bl.begin(), bl.end()) != bl.end())
    throw Error("config: b_list must be strictly increasing");

  BulkTable t = build_bulk_table(bl, o);
  for (const BulkRecord& r : t.records) {
    const std::string at = "b " + fmt(r.b) + ", R " + fmt(r.R) + ", " + to_string(r.boundary) + ": ";
    if (!r.converged) rep.fail(at + "not converged");
    if (r.max_modulus > 1.0 + 1e-9) rep.fail(at + "|u| exceeds 1");
    if (r.b >= 1.0 && r.boundary == Boundary::dirichlet && (r.energy != 0.0 || r.max_modulus * r.R > 1e-6))
      rep.fail(at + "nonzero Dirichlet minimizer for b >= 1");
    Json row;
    row["b"] = r.b;
    row["R"] = r.R;
    row["boundary"] = to_string(r.boundary);
    row["energy"] = r.energy;
    row["energy_per_area"] = r.energy / (r.R * r.R);
    row["grad_norm"] = r.grad_norm;
    row["iters"] = r.iterations;
    row["max_modulus"] = r.max_modulus;
    add_provenance(row, seed, bulk_h(r.R, o.fixed_h), o.tol);
    rep.rows.push_back(std::move(row));
  }
  const auto& s = t.summary;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].b == 0.0 && !(s[i].bracket_lo <= -0.5 && -0.5 <= s[i].bracket_hi)) rep.fail("b = 0: bracket misses -1/2");
    if (s[i].b >= 1.0 && s[i].g_est != 0.0) rep.fail("b = " + fmt(s[i].b) + ": g_est is not 0");
    if (i > 0 && s[i].g_est < s[i - 1].g_est - mono_tol) rep.fail("g_est decreases at b = " + fmt(s[i].b));
    if (i > 0 && i + 1 < s.size()) {
      // second divided difference on a possibly uneven b grid
      const double h1 = s[i].b - s[i - 1].b, h2 = s[i + 1].b - s[i].b;
      const double d2 = 2 * ((s[i + 1].g_est - s[i].g_est) / h2 - (s[i].g_est - s[i - 1].g_est) / h1) / (h1 + h2);
      if (d2 * 0.5 * h1 * h2 > concave_tol) rep.fail("g_est not concave at b = " + fmt(s[i].b));
    }
  }
  rep.summary = bulk_summary_json(s);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const Provenance p{seed, o.fixed_h, o.tol};
    std::ofstream c = open_out(out_dir, "bulk.csv");
    write_bulk_csv(c, t, &p);
    std::ofstream j = open_out(out_dir, "bulk_summary.json");
    Json doc;
    doc["summary"] = rep.summary;
    doc["provenance"] = to_json(p);
    doc["pass"] = rep.pass();
    doc["failures"] = rep.failures;
    j << doc.dump(2) << '\n';
  }
  if (table) *table = std::move(t);
  return rep;
}

// ---------------------------------------------------------------------------------------------------------------

namespace {

void gl_thm13(const Config& cfg, Report& rep, const std::string& out_dir, int jobs, const GInterpolant& gt) {
  const std::vector<double> kappas = cfg.list("kappas", {8, 16, 32});
  const double b = cfg.num("b", 0.5);
  const double ell_factor = cfg.num("ell_factor", 1.0);
  const double h_factor = cfg.num("h_factor", 8.0);
  const double normal_frac = cfg.num("normal_frac", 0.05), growth_max = cfg.num("growth_max", 1.5);
  const bool snapshots = cfg.flag("snapshots", false);
  const std::uint64_t seed = cfg.u64("seed", 0);
  const GLOptions opt = gl_options(cfg);
  if (!(b > 0.0)) throw Error("config: b must be positive");
  if (!(h_factor > 0.0)) throw Error("config: h_factor must be positive");
  for (double k : kappas)
    if (!(k > 0.0)) throw Error("config: kappas must be positive");

  std::vector<Json> rows(kappas.size());
  std::vector<std::string> errors(kappas.size());
  std::vector<double> floors(kappas.size()), areas(kappas.size());
  parallel_for(kappas.size(), jobs, [&](std::size_t i) {
    const double kappa = kappas[i];
    const double h = cfg.has("h") ? cfg.num("h") : 1.0 / (h_factor * kappa);
    const GridPtr g = make_grid(domain_from(cfg, h));
    const ScalarField B = field_from(cfg, g);
    floors[i] = ess_inf(B).value;
    areas[i] = g->domain().area();
    Json row;
    try {
      const Thm13Record r = thm13_report(B, kappa, b, ell_factor * std::pow(kappa, -0.75), gt, opt);
      row = to_json(r);
      row["h"] = h;
      row["iterations"] = r.minimizer.iterations;
      row["start"] = r.minimizer.seed;
      row["lower_envelope"] = r.lower_envelope;
      row["upper_envelope"] = r.upper_envelope;
      if (snapshots && !out_dir.empty()) {
        std::ofstream f = open_out(out_dir, "gl_kappa" + fmt(kappa) + ".mcf", true);
        write_mcf(f, to_mcf(r.minimizer.state));
      }
    } catch (const Error& e) {
      errors[i] = e.what();
      row["kappa"] = kappa;
    }
    add_provenance(row, seed, h, opt.tol);
    rows[i] = std::move(row);
  });

  std::vector<double> gaps;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& r = rows[i];
    const std::string at = "kappa " + fmt(kappas[i]) + ": ";
    if (!errors[i].empty()) {
      rep.fail(at + errors[i]);
      rep.rows.push_back(r);
      continue;
    }
    const double E_min = r["E_min"], E_trial = r["E_trial"], E_asy = r["E_asy"];
    if (E_min > E_trial + 1e-9 * std::max(1.0, std::abs(E_trial))) rep.fail(at + "E_min > E_trial");
    if (E_trial > 1e-12) rep.fail(at + "E_trial > 0");
    const Json& res = r["el_residuals"];
    const double worst = std::max({res["psi"].get<double>(), res["A"].get<double>(), res["bc"].get<double>()});
    if (worst > 10 * opt.tol) rep.fail(at + "Euler-Lagrange residual above 10 tol");
    if (r["psi_linf"].get<double>() > 1.0 + 1e-6) rep.fail(at + "|psi| exceeds 1");
    const bool normal = b * floors[i] >= 1.0;
    if (normal) {
      if (std::abs(E_min) > normal_frac * kappas[i] * kappas[i] * areas[i]) rep.fail(at + "normal regime energy too large");
      if (E_asy != 0.0) rep.fail(at + "E_asy is not 0 in the normal regime");
    } else {
      gaps.push_back(r["normalized_gap"].get<double>());
    }
    rep.rows.push_back(r);
  }
  if (gaps.size() >= 2 && gaps.back() > growth_max * gaps.front()) rep.fail("normalized gap grows");
  rep.summary = {{"mode", "thm13"}, {"b", b}, {"normal_regime", b * floors.front() >= 1.0}};
}

void gl_eigen(const Config& cfg, Report& rep, int jobs) {
  const std::vector<double> sigmas = cfg.list("sigmas", {64, 128});
  const double a = cfg.num("a", 0.5), psi_floor = cfg.num("psi_floor", 1e-6);
  const double h = cfg.num("h", 1.0 / 32);
  const std::uint64_t seed = cfg.u64("seed", 0);
  const GLOptions opt = gl_options(cfg);
  const GridPtr g = make_grid(domain_from(cfg, h));
  const ScalarField B = field_from(cfg, g);
  const VectorField F = build_reference_potential(B);
  std::vector<Json> rows(sigmas.size());
  std::vector<std::string> errors(sigmas.size());
  parallel_for(sigmas.size(), jobs, [&](std::size_t i) {
    Json row;
    row["sigma"] = sigmas[i];
    try {
      const EigenViaGL e = eigen_upper_via_gl(B, F, sigmas[i], a, opt, psi_floor);
      const double lam = lowest_eigenvalue(assemble(g, sigmas[i], F)).lambda;
      row["a"] = a;
      row["b"] = e.b;
      row["kappa"] = e.kappa;
      row["H"] = e.H;
      row["ell"] = e.ell;
      row["quotient"] = e.quotient;
      row["ratio"] = e.ratio;
      row["lambda"] = lam;
      row["lambda_ratio"] = lam / sigmas[i];
    } catch (const Error& ex) {
      errors[i] = ex.what();
    }
    add_provenance(row, seed, h, opt.tol);
    rows[i] = std::move(row);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string at = "sigma " + fmt(sigmas[i]) + ": ";
    if (!errors[i].empty())
      rep.fail(at + errors[i]);
    else if (rows[i]["quotient"].get<double>() < rows[i]["lambda"].get<double>() * (1 - 1e-9))
      rep.fail(at + "quotient below lambda");
    rep.rows.push_back(rows[i]);
  }
  rep.summary = {{"mode", "eigen"}, {"a", a}};
}

}  // namespace

Report run_gl(const Config& cfg, const std::string& out_dir, int jobs, const GInterpolant* g) {
  cfg.check_known(keys_of("gl"), "gl");
  Report rep;
  rep.command = "gl";
  const std::string mode = cfg.str("mode", "thm13");
  ensure_dir(out_dir);
  if (mode == "thm13") {
    if (g) {
      gl_thm13(cfg, rep, out_dir, jobs, *g);
    } else {
      const std::string path = cfg.str("g_table");
      std::ifstream f(path);
      if (!f) throw Error("cannot open g table " + path);
      gl_thm13(cfg, rep, out_dir, jobs, GInterpolant::from(read_bulk_summary(f)));
    }
  } else if (mode == "eigen") {
    gl_eigen(cfg, rep, jobs);
  } else {
    throw Error("config: unknown gl mode '" + mode + "'");
  }
  write_rows(rep, out_dir, "gl");
  return rep;
}

// ---------------------------------------------------------------------------------------------------------------

Report run_field_gen(const Config& cfg, const std::string& out_dir, int) {
  cfg.check_known(keys_of("field-gen"), "field-gen");
  Report rep;
  rep.command = "field-gen";
  const double h = cfg.num("h", 1.0 / 64);
  const std::string format = cfg.str("format", "csv"), potential = cfg.str("potential", "none");
  if (format != "csv" && format != "mcf" && format != "both") throw Error("config: unknown format '" + format + "'");
  if (potential != "none" && potential != "ray" && potential != "reference")
    throw Error("config: unknown potential '" + potential + "'");
  const GridPtr g = make_grid(domain_from(cfg, h));
  const ScalarField B = field_from(cfg, g);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < g->size(); ++k)
    if (g->inside(k)) {
      lo = std::min(lo, B[k]);
      hi = std::max(hi, B[k]);
    }
  rep.summary = {{"nx", g->nx()},        {"ny", g->ny()},      {"min", lo},
                 {"max", hi},            {"ess_inf", ess_inf(B).value}, {"mean", integral(B) / g->domain().area()},
                 {"field", cfg.str("field", "constant")}};
  add_provenance(rep.summary, cfg.u64("seed", 0), h, 0.0);

  VectorField A;
  if (potential == "ray") A = potential_from_field(B, g->domain().bounding_box().center());
  if (potential == "reference") A = build_reference_potential(B);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    if (format != "mcf") {
      std::ofstream f = open_out(out_dir, "B.csv");
      write_csv(f, B);
      if (A.grid()) {
        std::ofstream fa = open_out(out_dir, "A.csv");
        write_csv(fa, A);
      }
    }
    if (format != "csv") {
      std::ofstream f = open_out(out_dir, "B.mcf", true);
      write_mcf(f, to_mcf(B));
      if (A.grid()) {
        McfData d = to_mcf(B);
        d.layers = {A.x(), A.y()};
        std::ofstream fa = open_out(out_dir, "A.mcf", true);
        write_mcf(fa, d);
      }
    }
    std::ofstream j = open_out(out_dir, "field.json");
    j << rep.summary.dump(2) << '\n';
  }
  return rep;
}

}  // namespace maglab
