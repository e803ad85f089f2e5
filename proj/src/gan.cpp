#include "molcycle/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "molcycle/rng.hpp"

namespace molcycle::gan {

using nlohmann::json;
using nn::AdamConfig;
using nn::Grads;
using nn::LayerKind;
using nn::LayerSpec;
using nn::MlpModel;
using nn::Tape;

namespace {

LayerSpec dense(int in, int out, bool bn, bool act) {
  return LayerSpec{LayerKind::Dense, in, out, bn, act};
}

LayerSpec residual(int dim, bool bn, bool act) {
  return LayerSpec{LayerKind::ResidualDense, dim, dim, bn, act};
}

MlpModel make_discriminator(const std::vector<int>& out_dims, int latent_dim,
                            bool batchnorm, std::uint64_t seed) {
  std::vector<LayerSpec> specs;
  int in = latent_dim;
  for (std::size_t i = 0; i < out_dims.size(); ++i) {
    const bool last = i + 1 == out_dims.size();
    specs.push_back(dense(in, out_dims[i], batchnorm && !last, !last));
    in = out_dims[i];
  }
  return MlpModel::create(std::move(specs), seed);
}

}  // namespace

CycleGanModel make_model(Preset preset, int latent_dim, std::uint64_t seed,
                         bool generator_batchnorm, bool discriminator_batchnorm) {
  if (latent_dim < 1) throw config_error("latent_dim must be >= 1");
  CycleGanModel m;
  m.latent_dim = latent_dim;
  const bool gbn = generator_batchnorm;
  const bool dbn = discriminator_batchnorm;
  if (preset == Preset::Structural) {
    auto gen_specs = [&] {
      return std::vector<LayerSpec>{residual(latent_dim, gbn, true),
                                    dense(latent_dim, latent_dim, false, false)};
    };
    m.G = MlpModel::create(gen_specs(), mix64(seed ^ 0xA1));
    m.F = MlpModel::create(gen_specs(), mix64(seed ^ 0xA2));
    const std::vector<int> disc{latent_dim, 42, 28, 14, 7, 1};
    m.D_X = make_discriminator(disc, latent_dim, dbn, mix64(seed ^ 0xA3));
    m.D_Y = make_discriminator(disc, latent_dim, dbn, mix64(seed ^ 0xA4));
  } else {
    auto gen_specs = [&] {
      std::vector<LayerSpec> s;
      for (int i = 0; i < 4; ++i) {
        const bool last = i == 3;
        s.push_back(residual(latent_dim, gbn && !last, !last));
      }
      return s;
    };
    m.G = MlpModel::create(gen_specs(), mix64(seed ^ 0xB1));
    m.F = MlpModel::create(gen_specs(), mix64(seed ^ 0xB2));
    const std::vector<int> disc{48, 36, 28, 18, 12, 7, 1};
    m.D_X = make_discriminator(disc, latent_dim, dbn, mix64(seed ^ 0xB3));
    m.D_Y = make_discriminator(disc, latent_dim, dbn, mix64(seed ^ 0xB4));
  }
  return m;
}

namespace {

void check_batches(const CycleGanModel& model, const Matrix& x, const Matrix& y) {
  if (x.cols() != model.latent_dim || y.cols() != model.latent_dim)
    throw shape_error("batch dim does not match latent_dim " +
                      std::to_string(model.latent_dim));
  if (x.rows() < 1 || y.rows() < 1) throw shape_error("empty batch");
}

template <typename Expr>
double mean_sq(const Expr& m) {
  return m.array().square().mean();
}

// mean over rows of the L1 norm of each row.
double mean_l1(const Matrix& diff) {
  return diff.array().abs().rowwise().sum().mean();
}

Matrix sign_of(const Matrix& m) {
  return m.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

double adversarial_loss(const CycleGanModel& model, const Matrix& x, const Matrix& y) {
  check_batches(model, x, y);
  const Matrix gx = nn::forward_eval(model.G, x);
  const Matrix fy = nn::forward_eval(model.F, y);
  const Matrix dy_real = nn::forward_eval(model.D_Y, y);
  const Matrix dy_fake = nn::forward_eval(model.D_Y, gx);
  const Matrix dx_real = nn::forward_eval(model.D_X, x);
  const Matrix dx_fake = nn::forward_eval(model.D_X, fy);
  return 0.5 * mean_sq(dy_real.array() - 1.0) + 0.5 * mean_sq(dy_fake) +
         0.5 * mean_sq(dx_real.array() - 1.0) + 0.5 * mean_sq(dx_fake);
}

double cycle_loss(const CycleGanModel& model, const Matrix& x, const Matrix& y) {
  check_batches(model, x, y);
  const Matrix fgx = nn::forward_eval(model.F, nn::forward_eval(model.G, x));
  const Matrix gfy = nn::forward_eval(model.G, nn::forward_eval(model.F, y));
  return mean_l1(fgx - x) + mean_l1(gfy - y);
}

double identity_loss(const CycleGanModel& model, const Matrix& x, const Matrix& y) {
  check_batches(model, x, y);
  return mean_l1(nn::forward_eval(model.G, x) - x) +
         mean_l1(nn::forward_eval(model.F, y) - y);
}

LossReport total_loss(const CycleGanModel& model, const Matrix& x, const Matrix& y,
                      const TrainConfig& cfg) {
  LossReport r;
  r.l_gan = adversarial_loss(model, x, y);
  r.l_cyc = cycle_loss(model, x, y);
  r.l_identity = identity_loss(model, x, y);
  r.total = r.l_gan + cfg.lambda_cycle * r.l_cyc + cfg.lambda_identity * r.l_identity;
  const Matrix gx = nn::forward_eval(model.G, x);
  const Matrix fy = nn::forward_eval(model.F, y);
  r.d_y = 0.5 * mean_sq(nn::forward_eval(model.D_Y, y).array() - 1.0) +
          0.5 * mean_sq(nn::forward_eval(model.D_Y, gx));
  r.d_x = 0.5 * mean_sq(nn::forward_eval(model.D_X, x).array() - 1.0) +
          0.5 * mean_sq(nn::forward_eval(model.D_X, fy));
  return r;
}

TrainState TrainState::create(const CycleGanModel& model) {
  TrainState s;
  s.g = nn::AdamState::create(model.G);
  s.f = nn::AdamState::create(model.F);
  s.d_x = nn::AdamState::create(model.D_X);
  s.d_y = nn::AdamState::create(model.D_Y);
  return s;
}

namespace {

// Least-squares discriminator step on a real batch and a detached fake batch.
double discriminator_step(MlpModel& disc, const Matrix& real, const Matrix& fake,
                          nn::AdamState& adam, const AdamConfig& acfg,
                          Grads* out_grads) {
  const double m_real = static_cast<double>(real.rows());
  const double m_fake = static_cast<double>(fake.rows());
  Tape tr = nn::forward_train(disc, real);
  Tape tf = nn::forward_train(disc, fake);
  const double loss =
      0.5 * mean_sq(tr.output.array() - 1.0) + 0.5 * mean_sq(tf.output);
  Grads g = nn::backward(disc, tr, (tr.output.array() - 1.0).matrix() / m_real);
  g += nn::backward(disc, tf, tf.output / m_fake);
  if (out_grads)
    *out_grads = std::move(g);
  else
    nn::adam_step(disc, g, adam, acfg);
  return loss;
}

}  // namespace

LossReport train_step(CycleGanModel& model, const Matrix& x, const Matrix& y,
                      const TrainConfig& cfg, TrainState& state) {
  check_batches(model, x, y);
  const double mx = static_cast<double>(x.rows());
  const double my = static_cast<double>(y.rows());
  const AdamConfig acfg{cfg.lr, 0.9, 0.999, 1e-8};

  // Generator pass: x -> G -> F cycle plus the mirrored y cycle, with the
  // discriminators frozen inside the gradient path.
  Tape t_gx = nn::forward_train(model.G, x);
  const Matrix gx = t_gx.output;
  Tape t_fgx = nn::forward_train(model.F, gx);
  Tape t_fy = nn::forward_train(model.F, y);
  const Matrix fy = t_fy.output;
  Tape t_gfy = nn::forward_train(model.G, fy);
  Tape t_dy_fake = nn::forward_train(model.D_Y, gx, /*update_running=*/false);
  Tape t_dx_fake = nn::forward_train(model.D_X, fy, /*update_running=*/false);

  const double l_cyc = mean_l1(t_fgx.output - x) + mean_l1(t_gfy.output - y);
  const double l_identity = mean_l1(gx - x) + mean_l1(fy - y);

  // Upstream of G on the x branch: adversarial push toward D_Y(G(x)) = 1,
  // the cycle term through F, and the identity term.
  Grads g_dy = nn::backward(model.D_Y, t_dy_fake,
                            (t_dy_fake.output.array() - 1.0).matrix() / mx);
  Grads g_f1 = nn::backward(model.F, t_fgx,
                            cfg.lambda_cycle * sign_of(t_fgx.output - x) / mx);
  Matrix up_gx = g_dy.input + g_f1.input +
                 cfg.lambda_identity * sign_of(gx - x) / mx;
  Grads g_g = nn::backward(model.G, t_gx, up_gx);

  Grads g_dx = nn::backward(model.D_X, t_dx_fake,
                            (t_dx_fake.output.array() - 1.0).matrix() / my);
  Grads g_g2 = nn::backward(model.G, t_gfy,
                            cfg.lambda_cycle * sign_of(t_gfy.output - y) / my);
  Matrix up_fy = g_dx.input + g_g2.input +
                 cfg.lambda_identity * sign_of(fy - y) / my;
  Grads g_f2 = nn::backward(model.F, t_fy, up_fy);

  g_g += g_g2;
  g_f1 += g_f2;

  LossReport report;
  report.l_cyc = l_cyc;
  report.l_identity = l_identity;

  if (cfg.update_order == UpdateOrder::GeneratorsFirst) {
    nn::adam_step(model.G, g_g, state.g, acfg);
    nn::adam_step(model.F, g_f1, state.f, acfg);
    // Fresh fake samples from the updated generators for the discriminators.
    const Matrix gx2 = nn::forward_train(model.G, x, false).output;
    const Matrix fy2 = nn::forward_train(model.F, y, false).output;
    report.d_y = discriminator_step(model.D_Y, y, gx2, state.d_y, acfg, nullptr);
    report.d_x = discriminator_step(model.D_X, x, fy2, state.d_x, acfg, nullptr);
  } else {
    Grads dy_grads, dx_grads;
    report.d_y = discriminator_step(model.D_Y, y, gx, state.d_y, acfg, &dy_grads);
    report.d_x = discriminator_step(model.D_X, x, fy, state.d_x, acfg, &dx_grads);
    nn::adam_step(model.G, g_g, state.g, acfg);
    nn::adam_step(model.F, g_f1, state.f, acfg);
    nn::adam_step(model.D_Y, dy_grads, state.d_y, acfg);
    nn::adam_step(model.D_X, dx_grads, state.d_x, acfg);
  }

  // Pre-update adversarial value per the L_GAN line (all four terms).
  report.l_gan = report.d_y + report.d_x;
  report.total = report.l_gan + cfg.lambda_cycle * report.l_cyc +
                 cfg.lambda_identity * report.l_identity;
  if (!std::isfinite(report.total))
    throw numeric_error("non-finite loss in train_step");
  return report;
}

TrainResult train(CycleGanModel& model, const Matrix& x_train, const Matrix& y_train,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (x_train.rows() == 0 || y_train.rows() == 0)
    throw config_error("empty training set");
  if (x_train.cols() != model.latent_dim || y_train.cols() != model.latent_dim)
    throw shape_error("training data dim does not match latent_dim " +
                      std::to_string(model.latent_dim));
  const long m = cfg.batch_size;
  if (m < 1) throw config_error("batch_size must be >= 1");
  const long steps = x_train.rows() / m;
  if (cfg.epochs > 0 && steps == 0)
    throw config_error("batch_size exceeds |X_train|");

  TrainState state = TrainState::create(model);
  TrainResult result;
  auto rng = make_rng(cfg.seed, /*tag=*/0x5457);

  std::vector<long> xi(x_train.rows()), yi(y_train.rows());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(xi.begin(), xi.end(), 0);
    std::iota(yi.begin(), yi.end(), 0);
    std::shuffle(xi.begin(), xi.end(), rng);
    std::shuffle(yi.begin(), yi.end(), rng);

    LossReport mean;
    for (long s = 0; s < steps; ++s) {
      Matrix xb(m, model.latent_dim), yb(m, model.latent_dim);
      for (long i = 0; i < m; ++i) {
        xb.row(i) = x_train.row(xi[s * m + i]);
        yb.row(i) = y_train.row(yi[(s * m + i) % y_train.rows()]);
      }
      LossReport r = train_step(model, xb, yb, cfg, state);
      mean.l_gan += r.l_gan;
      mean.l_cyc += r.l_cyc;
      mean.l_identity += r.l_identity;
      mean.total += r.total;
      mean.d_x += r.d_x;
      mean.d_y += r.d_y;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    mean.l_gan *= inv;
    mean.l_cyc *= inv;
    mean.l_identity *= inv;
    mean.total *= inv;
    mean.d_x *= inv;
    mean.d_y *= inv;
    result.history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, model);
  }
  return result;
}

namespace {
constexpr const char* kBundleTag = "molcycle-cyclegan-v1";

const char* order_name(UpdateOrder o) {
  return o == UpdateOrder::GeneratorsFirst ? "generators_first" : "simultaneous";
}
}  // namespace

json checkpoint_to_json(const CycleGanModel& model, const TrainConfig& cfg,
                        const TrainState* state) {
  json j;
  j["format"] = kBundleTag;
  j["latent_dim"] = model.latent_dim;
  j["config"] = {{"lr", cfg.lr},
                 {"lambda_cycle", cfg.lambda_cycle},
                 {"lambda_identity", cfg.lambda_identity},
                 {"batch_size", cfg.batch_size},
                 {"epochs", cfg.epochs},
                 {"seed", cfg.seed},
                 {"update_order", order_name(cfg.update_order)}};
  j["G"] = nn::model_to_json(model.G);
  j["F"] = nn::model_to_json(model.F);
  j["D_X"] = nn::model_to_json(model.D_X);
  j["D_Y"] = nn::model_to_json(model.D_Y);
  if (state) {
    j["adam"] = {{"G", nn::adam_to_json(state->g)},
                 {"F", nn::adam_to_json(state->f)},
                 {"D_X", nn::adam_to_json(state->d_x)},
                 {"D_Y", nn::adam_to_json(state->d_y)}};
  }
  return j;
}

CycleGanModel checkpoint_model(const json& j) {
  if (j.value("format", "") != kBundleTag)
    throw data_error("unrecognized checkpoint bundle format");
  CycleGanModel m;
  m.latent_dim = j.at("latent_dim").get<int>();
  m.G = nn::model_from_json(j.at("G"));
  m.F = nn::model_from_json(j.at("F"));
  m.D_X = nn::model_from_json(j.at("D_X"));
  m.D_Y = nn::model_from_json(j.at("D_Y"));
  return m;
}

TrainConfig checkpoint_config(const json& j) {
  const auto& c = j.at("config");
  TrainConfig cfg;
  cfg.lr = c.at("lr").get<double>();
  cfg.lambda_cycle = c.at("lambda_cycle").get<double>();
  cfg.lambda_identity = c.at("lambda_identity").get<double>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.update_order = c.value("update_order", "generators_first") == "simultaneous"
                         ? UpdateOrder::Simultaneous
                         : UpdateOrder::GeneratorsFirst;
  return cfg;
}

void save_checkpoint(const std::string& path, const CycleGanModel& model,
                     const TrainConfig& cfg, const TrainState* state) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open checkpoint path for writing: " + path);
  out << checkpoint_to_json(model, cfg, state).dump() << "\n";
}

CycleGanModel load_checkpoint(const std::string& path, TrainConfig* cfg_out) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  json j = json::parse(in);
  if (cfg_out) *cfg_out = checkpoint_config(j);
  return checkpoint_model(j);
}

}  // namespace molcycle::gan
