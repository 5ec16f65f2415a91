// Command-line front end for the detection pipeline: data generation,
// training, evaluation, gradient verification, objectness scoring and
// artifact export. All failures surface as a single "error: ..." line on
// stderr with a nonzero exit.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsflab/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key=value lines)");
  cmd->add_option("--seed", args.seed, "root seed");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--set", args.overrides, "override one configuration key (key=value)");
}

vsflab::Config make_config(const CommonArgs& args) {
  vsflab::Config cfg;
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const std::string& pair : args.overrides) cfg.set_pair(pair);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxel-shift gas detection laboratory"};
  app.require_subcommand(1);

  CommonArgs args;

  CLI::App* generate = app.add_subcommand("generate", "render labeled clips");
  add_common(generate, args);

  CLI::App* train = app.add_subcommand("train", "train a detector variant");
  add_common(train, args);
  std::string manifest, variant = "vsf_full";
  train->add_option("--manifest", manifest, "clip manifest to train on")->required();
  train->add_option("--variant", variant,
                    "frame_baseline | concat_baseline | vsf_data | vsf_full");

  CLI::App* eval = app.add_subcommand("eval", "score a training run");
  add_common(eval, args);
  std::string run_dir;
  eval->add_option("--run", run_dir, "training run directory")->required();
  eval->add_option("--manifest", manifest, "clip manifest to evaluate on")->required();

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(gradcheck, args);
  std::string scope = "all";
  gradcheck->add_option("--scope", scope, "tensorcore | vsf | detector | all");

  CLI::App* objectness =
      app.add_subcommand("objectness", "score ground-truth boxes");
  add_common(objectness, args);
  objectness->add_option("--manifest", manifest, "clip manifest to score")->required();

  CLI::App* exp = app.add_subcommand("export", "re-export a clip or tensor dump");
  add_common(exp, args);
  std::string input, format = "csv";
  exp->add_option("input", input, "clip directory or tensor file")->required();
  exp->add_option("--format", format, "csv | pgm");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const std::string path =
          vsflab::cmd_generate(make_config(args), args.out_dir, args.seed);
      std::cout << path << "\n";
    } else if (train->parsed()) {
      vsflab::cmd_train(make_config(args), manifest, variant, args.out_dir,
                        args.seed);
    } else if (eval->parsed()) {
      vsflab::cmd_eval(make_config(args), run_dir, manifest, args.out_dir);
    } else if (gradcheck->parsed()) {
      const int failures = vsflab::cmd_gradcheck(scope, args.seed, std::cout);
      if (failures > 0) {
        std::cerr << "error: " << failures << " gradient checks failed\n";
        return 1;
      }
    } else if (objectness->parsed()) {
      vsflab::cmd_objectness(make_config(args), manifest, args.out_dir);
    } else if (exp->parsed()) {
      vsflab::cmd_export(input, format, args.out_dir);
    }
  } catch (const vsflab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
