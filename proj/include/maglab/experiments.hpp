#pragma once

#include <string>
#include <vector>

#include "maglab/bulk.hpp"
#include "maglab/config.hpp"
#include "maglab/io.hpp"

namespace maglab {

/// Outcome of one experiment: per-row records, a summary and the embedded property checks.
struct Report {
  std::string command;
  Json rows = Json::array();
  Json summary = Json::object();
  std::vector<std::string> failures;

  bool pass() const { return failures.empty(); }
  void fail(const std::string& why) { failures.push_back(why); }
};

/// Schema of each command: the accepted keys with their defaults, for --help and the README.
struct KeyDoc {
  std::string key;
  std::string fallback;
  std::string meaning;
};
const std::vector<KeyDoc>& config_schema(const std::string& command);

/// `out_dir` empty: nothing is written. Jobs run on `jobs` workers, rows are ordered by job index.
Report run_averaging(const Config& cfg, const std::string& out_dir = "", int jobs = 1);
Report run_eig(const Config& cfg, const std::string& out_dir = "", int jobs = 1);
Report run_bulk(const Config& cfg, const std::string& out_dir = "", int jobs = 1, BulkTable* table = nullptr);
/// `g` overrides the `g_table` key (path to a bulk summary JSON).
Report run_gl(const Config& cfg, const std::string& out_dir = "", int jobs = 1, const GInterpolant* g = nullptr);
Report run_field_gen(const Config& cfg, const std::string& out_dir = "", int jobs = 1);

Domain domain_from(const Config& cfg, double h);
ScalarField field_from(const Config& cfg, const GridPtr& grid);

}  // namespace maglab
