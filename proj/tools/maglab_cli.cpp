// maglab: experiment driver. Exit codes: 0 checks passed, 1 a property check failed, 2 bad usage or config,
// 3 a solver failed.
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "maglab/experiments.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<double> h;
  int jobs = 1;
  std::vector<std::string> overrides;
  bool schema = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "flat key = value config file");
  sub->add_option("--seed", c.seed, "random seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--h", c.h, "grid spacing (overrides the config)");
  sub->add_option("--jobs", c.jobs, "worker threads (0: hardware concurrency)")->capture_default_str();
  sub->add_option("--set", c.overrides, "key=value override, repeatable");
  sub->add_flag("--schema", c.schema, "print the accepted config keys and exit");
}

void print_schema(const std::string& cmd) {
  for (const maglab::KeyDoc& d : maglab::config_schema(cmd))
    std::cout << d.key << " = " << d.fallback << "    # " << d.meaning << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic averaging, eigenvalue and Ginzburg-Landau experiments"};
  app.set_help_flag("--help", "print help");  // -h would clash with --h
  app.set_version_flag("--version", maglab::version());
  app.require_subcommand(1);
  Common c;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"averaging", "averaging inequality on seeded random fields"},
      {"eig", "lowest eigenvalue of the magnetic Laplacian and its Gaussian trial bound"},
      {"bulk-table", "reduced Ginzburg-Landau energies and the g table"},
      {"gl", "full Ginzburg-Landau minimization against the effective energy"},
      {"field-gen", "write a sampled field (and optionally a potential)"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  maglab::Report rep;
  try {
    if (c.schema) {
      print_schema(cmd);
      return 0;
    }
    maglab::Config cfg = c.config.empty() ? maglab::Config{} : maglab::Config::load(c.config);
    for (const std::string& o : c.overrides) cfg.set(o);
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    if (c.h) {
      std::ostringstream os;
      os.precision(17);
      os << *c.h;
      cfg.set("h", os.str());
    }
    int jobs = c.jobs;
    if (jobs == 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (jobs < 0) throw maglab::Error("--jobs must be nonnegative");

    if (cmd == "averaging") rep = maglab::run_averaging(cfg, c.out, jobs);
    if (cmd == "eig") rep = maglab::run_eig(cfg, c.out, jobs);
    if (cmd == "bulk-table") rep = maglab::run_bulk(cfg, c.out, jobs);
    if (cmd == "gl") rep = maglab::run_gl(cfg, c.out, jobs);
    if (cmd == "field-gen") rep = maglab::run_field_gen(cfg, c.out, jobs);
  } catch (const maglab::ConvergenceError& e) {
    std::cerr << "maglab " << cmd << ": " << e.what() << '\n';
    return 3;
  } catch (const maglab::Error& e) {
    std::cerr << "maglab " << cmd << ": " << e.what() << '\n';
    return 2;
  }

  std::cout << cmd << ": " << rep.rows.size() << " rows, " << (rep.pass() ? "PASS" : "FAIL") << '\n';
  for (const std::string& f : rep.failures) std::cout << "  " << f << '\n';
  return rep.pass() ? 0 : 1;
}
