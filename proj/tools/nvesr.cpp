#include <CLI11.hpp>

#include <iostream>

#include "nvesr/cli.hpp"

int main(int argc, char** argv) {
  using namespace nvesr::cli;

  CLI::App app{"Field-swept NV relaxometry: simulate, fit and deconvolve P1 bath spectra"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  std::string config_path;
  std::string out_dir;
  bool svg = false;
  std::string record_file;
  std::string profile_file;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON configuration file");
    sub->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_flag("--svg", svg, "Also render SVG line charts");
  };
  auto* theory = app.add_subcommand("theory", "Analytic relaxation-rate profile, bath spectrum and peak table");
  auto* simulate = app.add_subcommand("simulate", "Synthesize a measurement record over the field sweep");
  auto* fit = app.add_subcommand("fit", "Extract the relaxation rate at every field from a record");
  auto* deconvolve = app.add_subcommand("deconvolve", "Recover the bath spectrum from a rate profile");
  auto* pipeline = app.add_subcommand("pipeline", "theory, simulate, fit and deconvolve into one directory");
  for (auto* sub : {theory, simulate, fit, deconvolve, pipeline}) common(sub);
  fit->add_option("record", record_file, "record.csv produced by simulate")->required();
  deconvolve->add_option("profile", profile_file, "rates.csv produced by fit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  return run_guarded(
      [&] {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        const CommandContext ctx{svg, &std::cout};
        if (theory->parsed()) cmd_theory(config, ctx);
        else if (simulate->parsed()) cmd_simulate(config, ctx);
        else if (fit->parsed()) cmd_fit(record_file, config, ctx);
        else if (deconvolve->parsed()) cmd_deconvolve(profile_file, config, ctx);
        else if (pipeline->parsed()) cmd_pipeline(config, ctx);
      },
      std::cerr);
}
