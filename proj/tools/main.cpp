#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace torifano;
using namespace torifano::cli;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int resolution = 0;
  double t_end = -1.0;
  std::string preset;
  std::string resume;
};

void add_flags(CLI::App* sub, Flags& f, bool flow) {
  sub->add_option("--config", f.config, "run configuration (JSON)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "seed for randomized checks")->default_val(0);
  sub->add_option("--resolution", f.resolution, "grid resolution")->check(CLI::Range(8, 100000));
  sub->add_option("--preset", f.preset, "cp1, cp1xcp1 or cp2 (overrides the config polytope)");
  if (flow) {
    sub->add_option("--t-end", f.t_end, "final flow time")->check(CLI::NonNegativeNumber);
    sub->add_option("--resume", f.resume, "continue from a snapshot file");
  }
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config, std::ios::binary);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_config_text(ss.str());
  }
  if (!f.preset.empty()) {
    c.preset = f.preset;
    c.labels.clear();
  }
  if (!c.preset && c.labels.empty()) {
    throw Error(ErrorKind::ConfigError, "polytope: missing (use --preset or a config file)");
  }
  if (f.resolution > 0) c.resolution = f.resolution;
  if (f.t_end >= 0.0) c.flow.t_end = f.t_end;
  if (!f.out.empty()) c.out_dir = f.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torifano: toric generalized Kahler-Ricci flow toolkit"};
  app.require_subcommand(1);
  Flags flags;
  auto* validate = app.add_subcommand("validate", "check a setup");
  auto* flow = app.add_subcommand("flow", "integrate the flow and write observables");
  auto* functionals = app.add_subcommand("functionals", "Mabuchi energy, Futaki values, kappa");
  auto* transform = app.add_subcommand("transform", "Legendre transform at the configured y points");
  add_flags(validate, flags, false);
  add_flags(flow, flags, true);
  add_flags(functionals, flags, false);
  add_flags(transform, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    const RunConfig c = resolve(flags);
    Options o;
    o.seed = flags.seed;
    o.out_given = !flags.out.empty();
    if (!flags.resume.empty()) o.resume = flags.resume;
    if (*validate) return cmd_validate(c, o, std::cout);
    if (*flow) return cmd_flow(c, o, std::cout);
    if (*functionals) return cmd_functionals(c, o, std::cout);
    return cmd_transform(c, o, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << describe(e) << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}
