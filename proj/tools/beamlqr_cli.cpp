#include <iostream>

#include <CLI11.hpp>

#include "beamlqr/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"LQR boundary-control synthesis and simulation for the "
               "Euler-Bernoulli beam"};
  app.require_subcommand(1);

  beamlqr::cli::Options opt;
  std::string config, out_dir, format;
  int modes = 0;

  for (const char* name : {"synthesize", "spectrum", "simulate", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "key=value configuration file");
    sub->add_option("--out-dir", out_dir, "directory for output files");
    sub->add_option("--modes", modes, "override weights.N")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", format, "trajectory layout")
        ->check(CLI::IsMember({"wide", "long"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : beamlqr::cli::kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  opt.command = sub->get_name();
  if (sub->count("--config")) opt.config_path = config;
  if (sub->count("--out-dir")) opt.out_dir = out_dir;
  if (sub->count("--modes")) opt.modes = modes;
  if (sub->count("--format")) opt.format = format;
  return beamlqr::cli::run(opt, std::cout, std::cerr);
}
