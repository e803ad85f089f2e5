#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "molcycle/dataio.hpp"
#include "molcycle/errors.hpp"
#include "molcycle/experiment.hpp"

namespace {

using molcycle::experiment::ExperimentConfig;

struct CommonFlags {
  std::string config_path;
  std::string task;
  std::string dataset;
  std::string output_dir;
  std::string codec;
  std::string property;
  std::vector<double> deltas;
  std::int64_t seed = -1;
  int epochs = -1;
  int k_points = -1;
  int iterations = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--task", f.task, "halogen|aromatic|constrained|unconstrained|synthetic");
  cmd->add_option("--dataset", f.dataset, "JSONL dataset path");
  cmd->add_option("--output-dir", f.output_dir, "output directory");
  cmd->add_option("--codec", f.codec, "table|synthetic");
  cmd->add_option("--property", f.property, "property name to optimize");
  cmd->add_option("--delta", f.deltas, "similarity thresholds");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--k-points", f.k_points, "points along the optimization path");
  cmd->add_option("--iterations", f.iterations, "unconstrained iterations");
}

// precedence: flags > config file > defaults
ExperimentConfig build_config(const CommonFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw molcycle::config_error("cannot open config: " + f.config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw molcycle::config_error(std::string("config parse error: ") + e.what());
    }
  }
  if (!f.task.empty()) j["task"] = f.task;
  if (!f.dataset.empty()) j["dataset"] = f.dataset;
  if (!f.output_dir.empty()) j["output_dir"] = f.output_dir;
  if (!f.codec.empty()) j["codec"] = f.codec;
  if (!f.property.empty()) j["property"] = f.property;
  if (!f.deltas.empty()) j["deltas"] = f.deltas;
  if (f.seed >= 0) j["seed"] = static_cast<std::uint64_t>(f.seed);
  if (f.epochs >= 0) j["epochs"] = f.epochs;
  if (f.k_points >= 0) j["k_points"] = f.k_points;
  if (f.iterations >= 0) j["iterations"] = f.iterations;
  return molcycle::experiment::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mol-CycleGAN latent-space molecule optimization"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train_cmd, train_flags);

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(eval_cmd, eval_flags);
  std::string checkpoint;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint bundle")->required();

  auto* convert_cmd = app.add_subcommand("convert", "convert a CSV dataset to JSONL");
  std::string csv_in, jsonl_out;
  convert_cmd->add_option("csv", csv_in, "input CSV")->required();
  convert_cmd->add_option("jsonl", jsonl_out, "output JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      molcycle::experiment::run_train(build_config(train_flags));
    } else if (eval_cmd->parsed()) {
      molcycle::experiment::run_evaluate(build_config(eval_flags), checkpoint);
    } else if (convert_cmd->parsed()) {
      const auto n = molcycle::dataio::convert_csv(csv_in, jsonl_out);
      if (n == 0) std::cerr << "warning: no data rows in " << csv_in << "\n";
      std::cout << "wrote " << n << " records to " << jsonl_out << "\n";
    }
  } catch (const molcycle::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const molcycle::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const molcycle::parse_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const molcycle::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
