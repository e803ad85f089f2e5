#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "molcycle/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace molcycle::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LayerKind { Dense, ResidualDense };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int in_dim = 0;
  int out_dim = 0;
  bool use_batchnorm = false;
  bool use_activation = false;

  void validate() const;
};

struct BatchNormState {
  Vector gamma, beta;
  Vector running_mean, running_var;
  double momentum = 0.9;
  double eps = 1e-5;
};

struct LayerParams {
  Matrix weight;  // out_dim x in_dim
  Vector bias;
  BatchNormState bn;  // used only when the spec asks for batch norm
};

/// Feed-forward network of dense / residual-dense layers.
/// All arithmetic is double precision; eval-mode forward is pure.
struct MlpModel {
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> layers;
  double leaky_alpha = 0.1;

  int in_dim() const { return specs.front().in_dim; }
  int out_dim() const { return specs.back().out_dim; }

  // Glorot-uniform weights, zero bias, identity batch-norm state.
  static MlpModel create(std::vector<LayerSpec> specs, std::uint64_t seed);
};

struct LayerTape {
  Matrix input;     // m x in_dim
  Matrix lin_out;   // W x + b
  Matrix bn_xhat;   // normalized pre-scale (empty when no BN)
  Matrix bn_out;    // after gamma/beta (or == lin_out)
  Matrix output;    // after activation (+ skip for residual)
  Vector mean, var; // batch statistics used (train mode)
};

struct Tape {
  std::vector<LayerTape> layers;
  Matrix output;
};

struct LayerGrads {
  Matrix weight;
  Vector bias;
  Vector gamma, beta;  // zero-size when the layer has no BN
};

struct Grads {
  std::vector<LayerGrads> layers;
  Matrix input;  // gradient wrt the forward input batch

  Grads& operator+=(const Grads& other);
};

/// Eval-mode forward: running batch-norm statistics, no caches.
Matrix forward_eval(const MlpModel& model, const Matrix& batch);

/// Train-mode forward: batch statistics, caches everything backward() needs.
/// update_running=false evaluates with batch statistics but leaves the
/// running averages untouched (used when a frozen net sits inside another
/// net's gradient path).
Tape forward_train(MlpModel& model, const Matrix& batch, bool update_running = true);

/// Reverse pass over a tape produced by forward_train.
Grads backward(const MlpModel& model, const Tape& tape, const Matrix& upstream);

struct AdamConfig {
  double lr = 0.0001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long step_count = 0;
  std::vector<LayerGrads> first_moment;
  std::vector<LayerGrads> second_moment;

  static AdamState create(const MlpModel& model);
};

void adam_step(MlpModel& model, const Grads& grads, AdamState& state,
               const AdamConfig& cfg);

// Checkpoint (de)serialization. Doubles survive the round trip bitwise
// (shortest-round-trip formatting on write, exact parse on read).
nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& j);
nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& j, const MlpModel& model);

}  // namespace molcycle::nn
