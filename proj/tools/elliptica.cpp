#include "elliptica/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"elliptica: elliptic operator experiments"};
  app.set_version_flag("--version", std::string(elliptica::version()));
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("--config", config, "Path to the experiment config")->required();
  run->add_option("--out", out, "Output directory (default: the config's \"out\" or ./out)");
  run->add_option("--seed", seed, "Master seed for stochastic experiments");

  app.add_subcommand("list", "List experiments, parameters and defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // exit 1 on usage errors; --help and --version exit 0
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (app.got_subcommand("list")) {
    std::cout << elliptica::catalog_text();
    return 0;
  }
  return elliptica::run_to_directory(config, out, seed, std::cout, std::cerr);
}
