#include <iostream>

#include <CLI11.hpp>

#include "pouf/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised prototype/feature alignment for zero-shot classifiers"};
  app.set_version_flag("--version", pouf::kVersion);
  app.require_subcommand(1);

  pouf::CommandOptions opts;
  std::string config;
  std::string data;
  std::string out;
  std::string params;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_data) {
    cmd->add_option("--config", config, "JSON config file");
    auto* d = cmd->add_option("--data", data, "benchmark directory");
    if (needs_data) d->required();
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "overrides the config seed");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic domain-shift benchmark");
  add_common(generate, false);
  generate->get_option("--out")->required();
  auto* adapt = app.add_subcommand("adapt", "adapt parameters on unlabeled target features");
  add_common(adapt, true);
  adapt->get_option("--out")->required();
  auto* eval = app.add_subcommand("eval", "evaluate parameters and export figure data");
  add_common(eval, true);
  eval->get_option("--out")->required();
  eval->add_option("--params", params, "directory holding adapted parameters")->required();
  auto* ablate = app.add_subcommand("ablate", "run the variant x seed ablation grid");
  add_common(ablate, true);
  ablate->get_option("--out")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients with finite differences");
  gradcheck->add_option("--seed", seed, "instance seed");
  gradcheck->add_option("--out", out, "optional directory for a manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pouf::kExitValidation;
  }

  if (!config.empty()) opts.config = config;
  opts.data_dir = data;
  opts.out_dir = out;
  opts.params_dir = params;
  for (auto* cmd : {generate, adapt, eval, ablate, gradcheck}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) opts.seed = seed;
  }

  if (*generate) return pouf::cmd_generate(opts, std::cout, std::cerr);
  if (*adapt) return pouf::cmd_adapt(opts, std::cout, std::cerr);
  if (*eval) return pouf::cmd_eval(opts, std::cout, std::cerr);
  if (*ablate) return pouf::cmd_ablate(opts, std::cout, std::cerr);
  return pouf::cmd_gradcheck(opts, std::cout, std::cerr);
}
