#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "molcycle/nn.hpp"

#include <nlohmann/json_fwd.hpp>

namespace molcycle::gan {

using nn::Matrix;
using nn::Vector;

enum class Preset { Structural, Physiochemical };

struct CycleGanModel {
  nn::MlpModel G;    // X -> Y
  nn::MlpModel F;    // Y -> X
  nn::MlpModel D_X;  // latent -> scalar score
  nn::MlpModel D_Y;
  int latent_dim = 0;
};

/// Structural: generators = 1 residual + 1 dense layer of latent_dim units,
/// discriminators dense 56-42-28-14-7-1 (head sizes scale off latent_dim=56).
/// Physiochemical: generators = 4 residual layers, discriminators
/// 48-36-28-18-12-7-1.
/// Discriminators default to no batch normalization: with batch statistics a
/// normalized discriminator is invariant to translating the whole generated
/// batch, which silences the gradient that moves the generated distribution.
CycleGanModel make_model(Preset preset, int latent_dim, std::uint64_t seed,
                         bool generator_batchnorm = true,
                         bool discriminator_batchnorm = false);

enum class UpdateOrder { GeneratorsFirst, Simultaneous };

struct TrainConfig {
  double lr = 0.0001;
  double lambda_cycle = 0.3;
  double lambda_identity = 0.1;
  int batch_size = 64;
  int epochs = 100;
  std::uint64_t seed = 0;
  UpdateOrder update_order = UpdateOrder::GeneratorsFirst;
};

struct LossReport {
  double l_gan = 0.0;
  double l_cyc = 0.0;
  double l_identity = 0.0;
  double total = 0.0;
  double d_x = 0.0;  // each discriminator's own least-squares objective
  double d_y = 0.0;
};

// Loss evaluation on a frozen model (eval-mode forwards), Eq. style:
// adversarial = 1/2 E[(D_Y(y)-1)^2] + 1/2 E[D_Y(G(x))^2] + mirrored X terms.
double adversarial_loss(const CycleGanModel& model, const Matrix& x_batch,
                        const Matrix& y_batch);
double cycle_loss(const CycleGanModel& model, const Matrix& x_batch,
                  const Matrix& y_batch);
double identity_loss(const CycleGanModel& model, const Matrix& x_batch,
                     const Matrix& y_batch);
LossReport total_loss(const CycleGanModel& model, const Matrix& x_batch,
                      const Matrix& y_batch, const TrainConfig& cfg);

struct TrainState {
  nn::AdamState g, f, d_x, d_y;
  static TrainState create(const CycleGanModel& model);
};

/// One optimization step on a pair of batches. Returns the pre-update losses.
LossReport train_step(CycleGanModel& model, const Matrix& x_batch,
                      const Matrix& y_batch, const TrainConfig& cfg,
                      TrainState& state);

using EpochCallback =
    std::function<void(int epoch, const LossReport& epoch_mean, const CycleGanModel&)>;

struct TrainResult {
  std::vector<LossReport> history;  // one mean report per epoch
};

TrainResult train(CycleGanModel& model, const Matrix& x_train, const Matrix& y_train,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = nullptr);

// Checkpoint bundle: four network checkpoints + optimizer states + config.
nlohmann::json checkpoint_to_json(const CycleGanModel& model, const TrainConfig& cfg,
                                  const TrainState* state = nullptr);
CycleGanModel checkpoint_model(const nlohmann::json& j);
TrainConfig checkpoint_config(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const CycleGanModel& model,
                     const TrainConfig& cfg, const TrainState* state = nullptr);
CycleGanModel load_checkpoint(const std::string& path, TrainConfig* cfg_out = nullptr);

}  // namespace molcycle::gan
