#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "greybox/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"grey-box adversarial ML study over tabular intrusion data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  const std::pair<const char*, const char*> stages[] = {
      {"ingest", "load, sanitize, normalize and split the data"},
      {"train", "train every model and run cross-validation"},
      {"attack", "craft adversarial sets and sweep the (theta, gamma) grid"},
      {"defend", "adversarial training and grid re-evaluation"},
      {"report", "assemble the artifact index and summary"},
  };
  for (auto [name, desc] : stages) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "experiment config file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "global seed (overrides config)");
    sub->add_option("--threads", threads, "worker thread cap, 0 = all cores (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    greybox::ExperimentConfig cfg = greybox::ExperimentConfig::load_file(config_path);
    if (sub->count("--out") > 0) cfg.out_dir = out_dir;
    if (sub->count("--seed") > 0) cfg.seed = seed;
    if (sub->count("--threads") > 0) cfg.threads = threads;
    cfg.validate();
    greybox::set_max_threads(cfg.threads);

    const std::string& name = sub->get_name();
    if (name == "ingest") {
      greybox::run_ingest(cfg, std::cout);
    } else if (name == "train") {
      greybox::run_train(cfg, std::cout);
    } else if (name == "attack") {
      greybox::run_attack(cfg, std::cout);
    } else if (name == "defend") {
      greybox::run_defend(cfg, std::cout);
    } else {
      greybox::run_report(cfg, std::cout);
    }
    return 0;
  } catch (const greybox::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
