#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nce/config.hpp"
#include "nce/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"NCE / eNCE optimization and landscape certification"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the optimizer sweep of a config; writes CSV and plot data");
  run->add_option("config", config_path, "config file or preset name")->required();
  auto* verify = app.add_subcommand("verify", "certify landscape claims; exit 0 pass, 1 fail, 2 inconclusive");
  verify->add_option("config", config_path, "config file or preset name")->required();
  auto* landscape = app.add_subcommand("landscape", "dump loss, gradient and curvature along tau_q -> tau*");
  landscape->add_option("config", config_path, "config file or preset name")->required();
  auto* list = app.add_subcommand("presets", "list shipped configs");
  std::string show;
  list->add_option("--show", show, "print the text of one preset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      if (!show.empty()) {
        const nce::Preset* p = nce::find_preset(show);
        if (p == nullptr) {
          std::cerr << "unknown preset '" << show << "'\n";
          return 2;
        }
        std::cout << p->text;
        return 0;
      }
      for (const nce::Preset& p : nce::presets()) std::cout << p.name << "\t" << p.description << "\n";
      return 0;
    }
    const nce::ExperimentConfig config = nce::parse_config(config_path);
    if (run->parsed()) return nce::run_command(config, std::cout);
    if (verify->parsed()) return nce::verify_command(config, std::cout);
    return nce::landscape_command(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
