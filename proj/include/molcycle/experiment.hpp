#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molcycle/codec.hpp"
#include "molcycle/dataio.hpp"
#include "molcycle/gan.hpp"
#include "molcycle/optimize.hpp"

#include <nlohmann/json_fwd.hpp>

namespace molcycle::experiment {

enum class Task { Halogen, Aromatic, Constrained, Unconstrained, Synthetic };
enum class CodecMode { Table, Synthetic };

struct ExperimentConfig {
  Task task = Task::Synthetic;
  CodecMode codec_mode = CodecMode::Synthetic;
  std::string dataset_path;
  std::string output_dir = ".";
  std::string property_name = "penalized_logp";
  int latent_dim = 56;
  dataio::SplitSizes sizes;                      // 0 = all available
  gan::TrainConfig train;                        // lr, lambdas, m, epochs, seed
  std::vector<double> deltas{0.0, 0.2, 0.4, 0.6};
  int k_points = 80;
  bool include_start_in_path = false;
  int iterations = 10;
  std::uint64_t seed = 0;
  std::size_t synthetic_train = 2000;
  std::size_t synthetic_test = 200;
  double top_fraction = 0.2;
  bool generator_batchnorm = true;
  bool discriminator_batchnorm = false;
};

Task task_from_string(const std::string& s);
std::string task_to_string(Task t);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

gan::Preset preset_for(Task task);

/// 64-bit hash of the effective config dump; stamped into run_info.json.
std::string config_hash(const ExperimentConfig& cfg);

/// Train per config; writes checkpoint.json, training_log.csv,
/// split_manifest.json (table mode) and effective_config.json into
/// output_dir. On a non-finite loss the last epoch checkpoint is retained
/// and the numeric_error propagates.
void run_train(const ExperimentConfig& cfg);

/// Evaluate a checkpoint per the config's task; writes the task's report
/// files into output_dir.
void run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path);

}  // namespace molcycle::experiment
