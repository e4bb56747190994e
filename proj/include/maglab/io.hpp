#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "maglab/bulk.hpp"
#include "maglab/gl.hpp"
#include "maglab/grid.hpp"
#include "json.hpp"

namespace maglab {

using Json = nlohmann::ordered_json;

/// Build version, "0.1.0+<git describe>" when the tree was a git checkout at configure time.
std::string version();

/// Attached to every output row.
struct Provenance {
  std::uint64_t seed = 0;
  double h = 0.0;
  double tol = 0.0;
};
Json to_json(const Provenance& p);

// CSV, one row per grid node in row-major order, full precision.
void write_csv(std::ostream& os, const ScalarField& f);   ///< x,y,value
void write_csv(std::ostream& os, const VectorField& f);   ///< x,y,ax,ay
ScalarField read_scalar_csv(std::istream& is, const GridPtr& grid);
VectorField read_vector_csv(std::istream& is, const GridPtr& grid);

/// MCF1 binary: "MCF1", uint32 layer count, uint32 nx, uint32 ny, float64 x_min, x_max, y_min, y_max
/// (48 bytes), then each layer as nx*ny little-endian float64 in row-major order.
struct McfData {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  Box box;
  std::vector<std::vector<double>> layers;
};
void write_mcf(std::ostream& os, const McfData& d);
McfData read_mcf(std::istream& is);
McfData to_mcf(const ScalarField& f);
/// Re psi, Im psi, A_x, A_y at the nodes.
McfData to_mcf(const GLState& s);
/// Checks that the header matches the grid.
ScalarField scalar_from_mcf(const McfData& d, const GridPtr& grid, std::size_t layer = 0);

// Bulk table files.
/// b,R,boundary,energy,grad_norm,iters, then seed,h,tol,version when `prov` is given.
void write_bulk_csv(std::ostream& os, const BulkTable& t, const Provenance* prov = nullptr);
Json bulk_summary_json(const std::vector<GEstimate>& summary);
std::vector<GEstimate> read_bulk_summary(std::istream& is);

Json to_json(const Thm13Record& r);

/// Rows of records as CSV. Columns in order of first appearance, nested objects become parent_child
/// columns, missing cells stay empty. Numbers at full precision, null as nan.
void write_rows_csv(std::ostream& os, const Json& rows);
Json to_json(const ELResiduals& r);

}  // namespace maglab
