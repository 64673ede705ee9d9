#include "capcm/cli.hpp"
#include "capcm/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"capillary Christoffel-Minkowski solver"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  double grid_scale = 1.0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config, "run configuration (key = value)");
    if (needs_config) opt->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--grid-scale", grid_scale, "multiplies grid.nr and grid.nphi");
  };
  auto* solve = app.add_subcommand("solve", "solve sigma_k(tau[s]) = phi");
  auto* forward = app.add_subcommand("forward", "evaluate phi = sigma_k(tau[s])");
  auto* validate = app.add_subcommand("validate", "run the validation suite at two resolutions");
  auto* mesh = app.add_subcommand("export-mesh", "write the reconstructed surface as OBJ");
  auto* selftest = app.add_subcommand("selftest", "quick built-in checks");
  add_common(solve, true);
  add_common(forward, true);
  add_common(validate, false);
  add_common(mesh, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : capcm::exit_config;
  }

  if (selftest->parsed()) return capcm::guarded([] { return capcm::cmd_selftest(std::cout); }, std::cerr);

  return capcm::guarded(
      [&] {
        capcm::CliOverrides ov;
        if (!out.empty()) ov.out_dir = out;
        for (auto* sub : {solve, forward, validate, mesh}) {
          if (!sub->parsed()) continue;
          if (sub->count("--seed")) ov.seed = seed;
          if (sub->count("--grid-scale")) ov.grid_scale = grid_scale;
        }
        const auto map = config.empty() ? capcm::ConfigMap{} : capcm::load_config(config);
        const auto cfg = capcm::make_run_config(map, ov);
        if (solve->parsed()) return capcm::cmd_solve(cfg, std::cout);
        if (forward->parsed()) return capcm::cmd_forward(cfg, std::cout);
        if (validate->parsed()) return capcm::cmd_validate(cfg, std::cout);
        return capcm::cmd_export_mesh(cfg, std::cout);
      },
      std::cerr);
}
