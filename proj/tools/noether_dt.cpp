#include <iostream>

#include "CLI11.hpp"
#include "noether/cli.hpp"

int main(int argc, char** argv) {
  using noether::cli::CommandOptions;
  CLI::App app{"Discrete-time Pontryagin extremals, quasi-invariance checks and Noether integrals"};
  app.require_subcommand(1);

  CommandOptions options;
  const std::pair<const char*, const char*> commands[] = {
      {"solve", "Compute an extremal and its residual report"},
      {"check", "Check quasi-invariance of the problem under the [symmetry] family"},
      {"noether", "Evaluate the Noether integrals along an extremal"},
      {"el", "Euler-Lagrange residuals of a first-order variational problem"},
      {"ep", "Euler-Poisson residuals of a higher-order variational problem"},
      {"discover", "Search for a one-parameter symmetry in a basis span"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", options.config, "Problem file")->required();
    sub->add_option("--extremal", options.extremal, "Extremal or state-sequence CSV");
    sub->add_option("--tol", options.tol, "Tolerance override");
    sub->add_option("--seed", options.seed, "Sampling seed");
    sub->add_option("--out", options.out, "Write the report here instead of stdout");
    sub->add_option("--write-extremal", options.write_extremal, "solve: write the result as CSV");
    sub->callback([&options, name = std::string(name)] { options.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : noether::cli::kExitUsage;
  }
  return noether::cli::dispatch(options, std::cout, std::cerr);
}
