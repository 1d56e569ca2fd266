#include "gaugeatlas/config.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace ga = gaugeatlas;

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2)
      throw ga::ConfigError("unexpected argument '" + tok + "' (overrides look like --key value)");
    const std::string body = tok.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ga::ConfigError("override --" + body + " has no value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

void print_summary(const nlohmann::json& report, const std::filesystem::path& out_dir) {
  std::cout << "command: " << report.at("command").get<std::string>() << "\n";
  if (report.contains("stages"))
    for (const auto& [name, stage] : report.at("stages").items()) std::cout << "stage " << name << ": done\n";
  std::cout << "files: " << report.at("files").size() << "\n";
  std::cout << "report: " << (out_dir / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc chart atlas analysis of activation datasets"};
  app.require_subcommand(1);
  std::string config_path;
  const std::vector<std::string> names = {"synth", "check", "atlas", "transport", "gauge", "shear",
                                          "jam",   "bootstrap", "null", "sweep", "report"};
  const std::map<std::string, std::string> help = {
      {"synth", "write a synthetic dataset described by the config's synth block"},
      {"check", "validate the config and dataset"},
      {"atlas", "cluster, build the chart graph, bases and overlaps"},
      {"transport", "fit overlap transports and shear records"},
      {"gauge", "spanning-tree gauge, cycle holonomy and persistence sweep"},
      {"shear", "transport stage plus a shear summary table"},
      {"jam", "dictionary learning and jamming certificates (needs gradients)"},
      {"bootstrap", "bootstrap stability of shear and holonomy"},
      {"null", "random-basis null control"},
      {"sweep", "one full run per value of sweep.axis"},
      {"report", "full pipeline with all enabled stages"}};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    const auto cfg = ga::config::load_config(config_path, parse_overrides(sub->remaining()));
    if (command == "synth") {
      std::cout << "wrote " << ga::pipeline::run_synth(cfg).string() << "\n";
    } else if (command == "sweep") {
      print_summary(ga::pipeline::run_sweep(cfg), cfg.output_path());
    } else {
      print_summary(ga::pipeline::run_pipeline(cfg, ga::pipeline::parse_command(command)), cfg.output_path());
    }
  } catch (const ga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
