#include "molcycle/nn.hpp"

#include <cmath>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "molcycle/rng.hpp"

namespace molcycle::nn {

using nlohmann::json;

void LayerSpec::validate() const {
  if (in_dim < 1 || out_dim < 1)
    throw shape_error("layer dims must be >= 1");
  if (kind == LayerKind::ResidualDense && in_dim != out_dim)
    throw shape_error("residual-dense layer requires in_dim == out_dim, got " +
                      std::to_string(in_dim) + " vs " + std::to_string(out_dim));
}

MlpModel MlpModel::create(std::vector<LayerSpec> specs, std::uint64_t seed) {
  if (specs.empty()) throw shape_error("model needs at least one layer");
  for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
    if (specs[i].out_dim != specs[i + 1].in_dim)
      throw shape_error("layer " + std::to_string(i) + " out_dim does not feed layer " +
                        std::to_string(i + 1));
  }
  MlpModel model;
  model.specs = std::move(specs);
  auto rng = make_rng(seed, /*tag=*/0x1717);
  for (const auto& spec : model.specs) {
    spec.validate();
    LayerParams p;
    const double limit = std::sqrt(6.0 / (spec.in_dim + spec.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    p.weight.resize(spec.out_dim, spec.in_dim);
    for (int r = 0; r < spec.out_dim; ++r)
      for (int c = 0; c < spec.in_dim; ++c) p.weight(r, c) = dist(rng);
    p.bias = Vector::Zero(spec.out_dim);
    if (spec.use_batchnorm) {
      p.bn.gamma = Vector::Ones(spec.out_dim);
      p.bn.beta = Vector::Zero(spec.out_dim);
      p.bn.running_mean = Vector::Zero(spec.out_dim);
      p.bn.running_var = Vector::Ones(spec.out_dim);
    }
    model.layers.push_back(std::move(p));
  }
  return model;
}

namespace {

void check_finite(const Matrix& m, const char* what, std::size_t layer_idx) {
  if (!m.allFinite())
    throw numeric_error(std::string("non-finite ") + what + " in layer " +
                        std::to_string(layer_idx));
}

Matrix leaky_relu(const Matrix& z, double alpha) {
  return z.unaryExpr([alpha](double v) { return v > 0.0 ? v : alpha * v; });
}

Matrix leaky_relu_grad(const Matrix& z, const Matrix& upstream, double alpha) {
  return upstream.cwiseProduct(
      z.unaryExpr([alpha](double v) { return v > 0.0 ? 1.0 : alpha; }));
}

}  // namespace

Matrix forward_eval(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != model.in_dim())
    throw shape_error("input dim " + std::to_string(batch.cols()) +
                      " does not match model in_dim " + std::to_string(model.in_dim()));
  Matrix x = batch;
  for (std::size_t i = 0; i < model.specs.size(); ++i) {
    const auto& spec = model.specs[i];
    const auto& p = model.layers[i];
    Matrix z = (x * p.weight.transpose()).rowwise() + p.bias.transpose();
    if (spec.use_batchnorm) {
      const auto& bn = p.bn;
      Vector inv_std = (bn.running_var.array() + bn.eps).sqrt().inverse().matrix();
      z = ((z.rowwise() - bn.running_mean.transpose()).array().rowwise() *
           inv_std.transpose().array())
              .matrix();
      z = (z.array().rowwise() * bn.gamma.transpose().array()).matrix();
      z = z.rowwise() + bn.beta.transpose();
    }
    if (spec.use_activation) z = leaky_relu(z, model.leaky_alpha);
    if (spec.kind == LayerKind::ResidualDense) z += x;
    check_finite(z, "activation", i);
    x = std::move(z);
  }
  return x;
}

Tape forward_train(MlpModel& model, const Matrix& batch, bool update_running) {
  if (batch.cols() != model.in_dim())
    throw shape_error("input dim " + std::to_string(batch.cols()) +
                      " does not match model in_dim " + std::to_string(model.in_dim()));
  const auto m = static_cast<double>(batch.rows());
  Tape tape;
  Matrix x = batch;
  for (std::size_t i = 0; i < model.specs.size(); ++i) {
    const auto& spec = model.specs[i];
    auto& p = model.layers[i];
    LayerTape lt;
    lt.input = x;
    lt.lin_out = (x * p.weight.transpose()).rowwise() + p.bias.transpose();
    Matrix z = lt.lin_out;
    if (spec.use_batchnorm) {
      if (batch.rows() < 2)
        throw state_error("batch norm in train mode needs at least 2 rows");
      auto& bn = p.bn;
      lt.mean = z.colwise().mean().transpose();
      Matrix centered = z.rowwise() - lt.mean.transpose();
      lt.var = (centered.array().square().colwise().sum() / m).transpose();
      Vector inv_std = (lt.var.array() + bn.eps).sqrt().inverse().matrix();
      lt.bn_xhat = (centered.array().rowwise() * inv_std.transpose().array()).matrix();
      z = (lt.bn_xhat.array().rowwise() * bn.gamma.transpose().array()).matrix();
      z = z.rowwise() + bn.beta.transpose();
      if (update_running) {
        bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * lt.mean;
        bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * lt.var;
      }
    }
    lt.bn_out = z;
    if (spec.use_activation) z = leaky_relu(z, model.leaky_alpha);
    if (spec.kind == LayerKind::ResidualDense) z += x;
    check_finite(z, "activation", i);
    lt.output = z;
    tape.layers.push_back(std::move(lt));
    x = tape.layers.back().output;
  }
  tape.output = x;
  return tape;
}

Grads backward(const MlpModel& model, const Tape& tape, const Matrix& upstream) {
  if (tape.layers.size() != model.specs.size())
    throw state_error("tape does not match model (missing forward cache?)");
  if (upstream.rows() != tape.output.rows() || upstream.cols() != tape.output.cols())
    throw shape_error("upstream gradient shape mismatch");

  Grads grads;
  grads.layers.resize(model.specs.size());
  Matrix dout = upstream;
  for (int i = static_cast<int>(model.specs.size()) - 1; i >= 0; --i) {
    const auto& spec = model.specs[i];
    const auto& p = model.layers[i];
    const auto& lt = tape.layers[i];
    const double m = static_cast<double>(lt.input.rows());

    Matrix dbranch = dout;  // grad flowing into the dense->bn->act branch
    if (spec.use_activation)
      dbranch = leaky_relu_grad(lt.bn_out, dbranch, model.leaky_alpha);

    LayerGrads& lg = grads.layers[i];
    Matrix dlin;
    if (spec.use_batchnorm) {
      const auto& bn = p.bn;
      lg.gamma = dbranch.cwiseProduct(lt.bn_xhat).colwise().sum().transpose();
      lg.beta = dbranch.colwise().sum().transpose();
      Matrix dxhat = (dbranch.array().rowwise() * bn.gamma.transpose().array()).matrix();
      Vector inv_std = (lt.var.array() + bn.eps).sqrt().inverse().matrix();
      Vector sum_dxhat = dxhat.colwise().sum().transpose();
      Vector sum_dxhat_xhat = dxhat.cwiseProduct(lt.bn_xhat).colwise().sum().transpose();
      dlin = (m * dxhat).rowwise() - sum_dxhat.transpose();
      dlin -= (lt.bn_xhat.array().rowwise() * sum_dxhat_xhat.transpose().array()).matrix();
      dlin = (dlin.array().rowwise() * (inv_std / m).transpose().array()).matrix();
    } else {
      dlin = dbranch;
    }

    lg.weight = dlin.transpose() * lt.input;
    lg.bias = dlin.colwise().sum().transpose();
    Matrix dinput = dlin * p.weight;
    if (spec.kind == LayerKind::ResidualDense) dinput += dout;  // skip path
    dout = std::move(dinput);
  }
  grads.input = std::move(dout);
  return grads;
}

Grads& Grads::operator+=(const Grads& other) {
  if (layers.size() != other.layers.size())
    throw shape_error("gradient accumulation shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
    if (layers[i].gamma.size() > 0) {
      layers[i].gamma += other.layers[i].gamma;
      layers[i].beta += other.layers[i].beta;
    }
  }
  if (input.size() > 0 && other.input.size() > 0) input += other.input;
  return *this;
}

AdamState AdamState::create(const MlpModel& model) {
  AdamState s;
  for (std::size_t i = 0; i < model.specs.size(); ++i) {
    const auto& spec = model.specs[i];
    LayerGrads zero;
    zero.weight = Matrix::Zero(spec.out_dim, spec.in_dim);
    zero.bias = Vector::Zero(spec.out_dim);
    if (spec.use_batchnorm) {
      zero.gamma = Vector::Zero(spec.out_dim);
      zero.beta = Vector::Zero(spec.out_dim);
    }
    s.first_moment.push_back(zero);
    s.second_moment.push_back(zero);
  }
  return s;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, long t, const AdamConfig& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw shape_error("adam: param/grad shape mismatch");
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  param.array() -=
      cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(MlpModel& model, const Grads& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.layers.size() != model.layers.size())
    throw shape_error("adam: grads do not match model");
  state.step_count += 1;
  const long t = state.step_count;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& p = model.layers[i];
    const auto& g = grads.layers[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    adam_update(p.weight, g.weight, m.weight, v.weight, t, cfg);
    adam_update(p.bias, g.bias, m.bias, v.bias, t, cfg);
    if (model.specs[i].use_batchnorm) {
      adam_update(p.bn.gamma, g.gamma, m.gamma, v.gamma, t, cfg);
      adam_update(p.bn.beta, g.beta, m.beta, v.beta, t, cfg);
    }
  }
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto nrows = j.size();
  if (nrows == 0) return Matrix();
  const auto ncols = j.at(0).size();
  Matrix m(nrows, ncols);
  for (std::size_t r = 0; r < nrows; ++r) {
    if (j.at(r).size() != ncols) throw data_error("ragged matrix in checkpoint");
    for (std::size_t c = 0; c < ncols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

json layer_grads_to_json(const LayerGrads& g) {
  json j;
  j["weight"] = matrix_to_json(g.weight);
  j["bias"] = vector_to_json(g.bias);
  if (g.gamma.size() > 0) {
    j["gamma"] = vector_to_json(g.gamma);
    j["beta"] = vector_to_json(g.beta);
  }
  return j;
}

LayerGrads layer_grads_from_json(const json& j) {
  LayerGrads g;
  g.weight = matrix_from_json(j.at("weight"));
  g.bias = vector_from_json(j.at("bias"));
  if (j.contains("gamma")) {
    g.gamma = vector_from_json(j.at("gamma"));
    g.beta = vector_from_json(j.at("beta"));
  }
  return g;
}

constexpr const char* kFormatTag = "molcycle-mlp-v1";

}  // namespace

json model_to_json(const MlpModel& model) {
  json j;
  j["format"] = kFormatTag;
  j["leaky_alpha"] = model.leaky_alpha;
  json layers = json::array();
  for (std::size_t i = 0; i < model.specs.size(); ++i) {
    const auto& spec = model.specs[i];
    const auto& p = model.layers[i];
    json layer;
    layer["kind"] = spec.kind == LayerKind::Dense ? "dense" : "residual-dense";
    layer["in_dim"] = spec.in_dim;
    layer["out_dim"] = spec.out_dim;
    layer["use_batchnorm"] = spec.use_batchnorm;
    layer["use_activation"] = spec.use_activation;
    layer["weight"] = matrix_to_json(p.weight);
    layer["bias"] = vector_to_json(p.bias);
    if (spec.use_batchnorm) {
      layer["bn"] = {{"gamma", vector_to_json(p.bn.gamma)},
                     {"beta", vector_to_json(p.bn.beta)},
                     {"running_mean", vector_to_json(p.bn.running_mean)},
                     {"running_var", vector_to_json(p.bn.running_var)},
                     {"momentum", p.bn.momentum},
                     {"eps", p.bn.eps}};
    }
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

MlpModel model_from_json(const json& j) {
  if (j.value("format", "") != kFormatTag)
    throw data_error("unrecognized checkpoint format tag");
  MlpModel model;
  model.leaky_alpha = j.at("leaky_alpha").get<double>();
  for (const auto& layer : j.at("layers")) {
    LayerSpec spec;
    const std::string kind = layer.at("kind").get<std::string>();
    spec.kind = kind == "dense" ? LayerKind::Dense : LayerKind::ResidualDense;
    spec.in_dim = layer.at("in_dim").get<int>();
    spec.out_dim = layer.at("out_dim").get<int>();
    spec.use_batchnorm = layer.at("use_batchnorm").get<bool>();
    spec.use_activation = layer.at("use_activation").get<bool>();
    spec.validate();
    LayerParams p;
    p.weight = matrix_from_json(layer.at("weight"));
    p.bias = vector_from_json(layer.at("bias"));
    if (p.weight.rows() != spec.out_dim || p.weight.cols() != spec.in_dim)
      throw data_error("checkpoint weight shape does not match its layer spec");
    if (spec.use_batchnorm) {
      const auto& bn = layer.at("bn");
      p.bn.gamma = vector_from_json(bn.at("gamma"));
      p.bn.beta = vector_from_json(bn.at("beta"));
      p.bn.running_mean = vector_from_json(bn.at("running_mean"));
      p.bn.running_var = vector_from_json(bn.at("running_var"));
      p.bn.momentum = bn.at("momentum").get<double>();
      p.bn.eps = bn.at("eps").get<double>();
    }
    model.specs.push_back(spec);
    model.layers.push_back(std::move(p));
  }
  return model;
}

json adam_to_json(const AdamState& state) {
  json j;
  j["step_count"] = state.step_count;
  json m = json::array(), v = json::array();
  for (const auto& g : state.first_moment) m.push_back(layer_grads_to_json(g));
  for (const auto& g : state.second_moment) v.push_back(layer_grads_to_json(g));
  j["first_moment"] = std::move(m);
  j["second_moment"] = std::move(v);
  return j;
}

AdamState adam_from_json(const json& j, const MlpModel& model) {
  AdamState s;
  s.step_count = j.at("step_count").get<long>();
  for (const auto& g : j.at("first_moment")) s.first_moment.push_back(layer_grads_from_json(g));
  for (const auto& g : j.at("second_moment")) s.second_moment.push_back(layer_grads_from_json(g));
  if (s.first_moment.size() != model.layers.size())
    throw data_error("optimizer state does not match model");
  return s;
}

}  // namespace molcycle::nn
