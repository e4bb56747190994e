#include "maglab/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace maglab {

#ifndef MAGLAB_VERSION
#define MAGLAB_VERSION "0.1.0"
#endif

std::string version() { return MAGLAB_VERSION; }

Json to_json(const Provenance& p) {
  Json j;
  j["seed"] = p.seed;
  j["h"] = p.h;
  j["tol"] = p.tol;
  j["version"] = version();
  return j;
}

namespace {

std::vector<double> split_numbers(const std::string& line, std::size_t expect, std::size_t lineno) {
  std::vector<double> v;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw Error("csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
    v.push_back(x);
  }
  if (v.size() != expect) throw Error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(expect) +
                                      " columns");
  return v;
}

/// Reads rows of (x, y, values...) and places them on the grid nodes; every node must appear once.
std::vector<std::vector<double>> read_node_csv(std::istream& is, const Grid& g, const std::string& header,
                                               std::size_t ncols) {
  std::string line;
  if (!std::getline(is, line) || line != header) throw Error("csv: expected header '" + header + "'");
  std::vector<std::vector<double>> out(ncols, std::vector<double>(g.size(), 0.0));
  std::vector<char> seen(g.size(), 0);
  const double h = g.h();
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<double> v = split_numbers(line, ncols + 2, lineno);
    const double fi = (v[0] - g.x0()) / h, fj = (v[1] - g.y0()) / h;
    const long i = std::lround(fi), j = std::lround(fj);
    if (std::abs(fi - i) > 1e-6 || std::abs(fj - j) > 1e-6 || i < 0 || j < 0 || i >= g.nx() || j >= g.ny())
      throw Error("csv line " + std::to_string(lineno) + ": point is not a grid node");
    const std::size_t k = g.index(static_cast<int>(i), static_cast<int>(j));
    if (seen[k]) throw Error("csv line " + std::to_string(lineno) + ": duplicate node");
    seen[k] = 1;
    for (std::size_t c = 0; c < ncols; ++c) out[c][k] = v[c + 2];
  }
  for (char s : seen)
    if (!s) throw Error("csv: missing grid nodes");
  return out;
}

template <class T>
void put(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("MCF1: truncated file");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

McfData header_of(const Grid& g) {
  McfData d;
  d.nx = static_cast<std::uint32_t>(g.nx());
  d.ny = static_cast<std::uint32_t>(g.ny());
  d.box = g.extent();
  return d;
}

}  // namespace

void write_csv(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.g();
  os << "x,y,value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point p = g.node(k);
    os << p.x << ',' << p.y << ',' << f[k] << '\n';
  }
}

void write_csv(std::ostream& os, const VectorField& f) {
  const Grid& g = f.g();
  os << "x,y,ax,ay\n" << std::setprecision(17);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point p = g.node(k);
    os << p.x << ',' << p.y << ',' << f.x()[k] << ',' << f.y()[k] << '\n';
  }
}

ScalarField read_scalar_csv(std::istream& is, const GridPtr& grid) {
  auto cols = read_node_csv(is, *grid, "x,y,value", 1);
  return ScalarField(grid, std::move(cols[0]));
}

VectorField read_vector_csv(std::istream& is, const GridPtr& grid) {
  auto cols = read_node_csv(is, *grid, "x,y,ax,ay", 2);
  VectorField A(grid);
  A.x() = std::move(cols[0]);
  A.y() = std::move(cols[1]);
  return A;
}

void write_mcf(std::ostream& os, const McfData& d) {
  const std::size_t n = static_cast<std::size_t>(d.nx) * d.ny;
  for (const auto& l : d.layers)
    if (l.size() != n) throw Error("MCF1: layer size does not match nx * ny");
  os.write("MCF1", 4);
  put(os, static_cast<std::uint32_t>(d.layers.size()));
  put(os, d.nx);
  put(os, d.ny);
  put(os, d.box.x_min);
  put(os, d.box.x_max);
  put(os, d.box.y_min);
  put(os, d.box.y_max);
  for (const auto& l : d.layers)
    for (double v : l) put(os, v);
  if (!os) throw Error("MCF1: write failed");
}

McfData read_mcf(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MCF1", 4) != 0) throw Error("MCF1: bad magic");
  McfData d;
  const auto nl = get<std::uint32_t>(is);
  d.nx = get<std::uint32_t>(is);
  d.ny = get<std::uint32_t>(is);
  d.box.x_min = get<double>(is);
  d.box.x_max = get<double>(is);
  d.box.y_min = get<double>(is);
  d.box.y_max = get<double>(is);
  const std::size_t n = static_cast<std::size_t>(d.nx) * d.ny;
  d.layers.assign(nl, std::vector<double>(n));
  for (auto& l : d.layers)
    for (double& v : l) v = get<double>(is);
  return d;
}

McfData to_mcf(const ScalarField& f) {
  McfData d = header_of(f.g());
  d.layers.push_back(f.values());
  return d;
}

McfData to_mcf(const GLState& s) {
  const Grid& g = s.psi.g();
  McfData d = header_of(g);
  std::vector<double> re(g.size()), im(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    re[k] = s.psi[k].real();
    im[k] = s.psi[k].imag();
  }
  const VectorField A = potential_at_nodes(s);
  d.layers = {std::move(re), std::move(im), A.x(), A.y()};
  return d;
}

ScalarField scalar_from_mcf(const McfData& d, const GridPtr& grid, std::size_t layer) {
  const Grid& g = *grid;
  const Box e = g.extent();
  const double tol = 1e-9 * g.h();
  if (d.nx != static_cast<std::uint32_t>(g.nx()) || d.ny != static_cast<std::uint32_t>(g.ny()) ||
      std::abs(d.box.x_min - e.x_min) > tol || std::abs(d.box.x_max - e.x_max) > tol ||
      std::abs(d.box.y_min - e.y_min) > tol || std::abs(d.box.y_max - e.y_max) > tol)
    throw Error("MCF1: header does not match the grid");
  if (layer >= d.layers.size()) throw Error("MCF1: no layer " + std::to_string(layer));
  return ScalarField(grid, d.layers[layer]);
}

void write_bulk_csv(std::ostream& os, const BulkTable& t, const Provenance* prov) {
  os << "b,R,boundary,energy,grad_norm,iters" << (prov ? ",seed,h,tol,version" : "") << '\n'
     << std::setprecision(17);
  for (const BulkRecord& r : t.records) {
    os << r.b << ',' << r.R << ',' << to_string(r.boundary) << ',' << r.energy << ',' << r.grad_norm << ','
       << r.iterations;
    if (prov) os << ',' << prov->seed << ',' << prov->h << ',' << prov->tol << ',' << version();
    os << '\n';
  }
}

Json bulk_summary_json(const std::vector<GEstimate>& summary) {
  Json a = Json::array();
  for (const GEstimate& e : summary)
    a.push_back({{"b", e.b}, {"g_est", e.g_est}, {"bracket_lo", e.bracket_lo}, {"bracket_hi", e.bracket_hi},
                 {"C_emp", e.C_emp}});
  return a;
}

std::vector<GEstimate> read_bulk_summary(std::istream& is) {
  Json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw Error(std::string("bulk summary: ") + e.what());
  }
  // either a bare array or an object holding it under "summary"
  const Json& a = j.is_object() && j.contains("summary") ? j["summary"] : j;
  if (!a.is_array() || a.empty()) throw Error("bulk summary: expected a non-empty array");
  std::vector<GEstimate> out;
  for (const Json& r : a) {
    GEstimate e;
    try {
      e.b = r.at("b").get<double>();
      e.g_est = r.at("g_est").get<double>();
      e.bracket_lo = r.value("bracket_lo", e.g_est);
      e.bracket_hi = r.value("bracket_hi", e.g_est);
      e.C_emp = r.value("C_emp", 0.0);
    } catch (const std::exception& ex) {
      throw Error(std::string("bulk summary: ") + ex.what());
    }
    out.push_back(e);
  }
  return out;
}

Json to_json(const ELResiduals& r) { return {{"psi", r.psi}, {"A", r.A}, {"bc", r.bc}}; }

Json to_json(const Thm13Record& r) {
  Json j;
  j["kappa"] = r.kappa;
  j["H"] = r.H;
  j["b"] = r.b;
  j["ell"] = r.ell;
  j["E_min"] = r.E_min;
  j["E_trial"] = r.E_trial;
  j["E_asy"] = r.E_asy;
  j["gap"] = r.gap;
  j["normalized_gap"] = r.normalized_gap;
  j["psi_linf"] = r.psi_linf;
  j["el_residuals"] = to_json(r.residuals);
  return j;
}

namespace {

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, const Json*>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "_" + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, &*it);
  }
}

}  // namespace

void write_rows_csv(std::ostream& os, const Json& rows) {
  if (!rows.is_array()) throw Error("write_rows_csv: expected an array of records");
  if (rows.empty()) return;
  std::vector<std::vector<std::pair<std::string, const Json*>>> cells(rows.size());
  std::vector<std::string> cols;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    flatten(rows[r], "", cells[r]);
    for (const auto& c : cells[r])
      if (std::find(cols.begin(), cols.end(), c.first) == cols.end()) cols.push_back(c.first);
  }
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n' << std::setprecision(17);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ',';
      const auto it = std::find_if(row.begin(), row.end(), [&](const auto& p) { return p.first == cols[c]; });
      if (it == row.end()) continue;  // failed runs leave cells empty
      const Json& v = *it->second;
      if (v.is_null())
        os << "nan";
      else if (v.is_string())
        os << v.get<std::string>();
      else if (v.is_number_float())
        os << v.get<double>();
      else
        os << v.dump();
    }
    os << '\n';
  }
}

}  // namespace maglab
