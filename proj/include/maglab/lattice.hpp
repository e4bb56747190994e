#pragma once

#include <ostream>
#include <vector>

#include "maglab/field.hpp"

namespace maglab {

struct LatticeSite {
  long m = 0;
  long n = 0;
  Point center;
};

/// J_ell: centres (ell m, ell n) whose open square of side ell lies in Omega.
struct CellLattice {
  double ell = 0.0;
  std::vector<LatticeSite> sites;
  double domain_area = 0.0;

  std::size_t count() const { return sites.size(); }
  Cell cell(std::size_t k) const { return Cell::square(sites[k].center, ell); }
};

/// Exact geometric containment test, never the grid mask.
bool square_in_domain(const Domain& domain, Point center, double ell);
CellLattice build_lattice(const Domain& domain, double ell);
/// |Omega| - N(ell) ell^2.
double coverage_defect(const CellLattice& lattice);
/// CSV with header m,n,cx,cy.
void write_lattice_csv(std::ostream& os, const CellLattice& lattice);

}  // namespace maglab
