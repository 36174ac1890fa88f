// nestcov: nested covariance estimators, Monte Carlo experiments and reports.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nestcov/cli.hpp"
#include "nestcov/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nested maximum-likelihood covariance estimators"};
  app.require_subcommand(1);

  nestcov::CliConfig cli;
  std::string config_path, out_dir, format = "csv";
  std::uint64_t seed = 0;

  for (auto command : {nestcov::Command::SimulateDiag, nestcov::Command::SimulateGmrf,
                       nestcov::Command::CompareShrinkage, nestcov::Command::FisherTrace,
                       nestcov::Command::Estimate}) {
    auto* sub = app.add_subcommand(std::string(nestcov::to_string(command)));
    sub->add_option("--config", config_path, "experiment JSON")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--format", format, "csv or csv+svg")
        ->check(CLI::IsMember({"csv", "csv+svg"}));
    sub->callback([&cli, command] { cli.command = command; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: UsageError: %s\n", e.what());
    return 2;
  }

  cli.config_path = config_path;
  cli.output_dir = out_dir;
  cli.svg = format == "csv+svg";
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) cli.seed_override = seed;
  cli.threads = nestcov::threads_from_env();

  try {
    for (const auto& path : nestcov::run_command(cli)) std::cout << path.string() << "\n";
  } catch (const nestcov::Error& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "error: %s: %s\n", std::string(nestcov::to_string(e.kind())).c_str(),
                 msg.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
