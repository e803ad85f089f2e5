#include "molcycle/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "molcycle/chem.hpp"
#include "molcycle/rng.hpp"

namespace molcycle::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

Task task_from_string(const std::string& s) {
  if (s == "halogen") return Task::Halogen;
  if (s == "aromatic") return Task::Aromatic;
  if (s == "constrained") return Task::Constrained;
  if (s == "unconstrained") return Task::Unconstrained;
  if (s == "synthetic") return Task::Synthetic;
  throw config_error("unknown task: " + s);
}

std::string task_to_string(Task t) {
  switch (t) {
    case Task::Halogen: return "halogen";
    case Task::Aromatic: return "aromatic";
    case Task::Constrained: return "constrained";
    case Task::Unconstrained: return "unconstrained";
    case Task::Synthetic: return "synthetic";
  }
  return "?";
}

gan::Preset preset_for(Task task) {
  switch (task) {
    case Task::Constrained:
    case Task::Unconstrained:
      return gan::Preset::Physiochemical;
    default:
      return gan::Preset::Structural;
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("task")) cfg.task = task_from_string(j.at("task").get<std::string>());
  if (j.contains("codec"))
    cfg.codec_mode = j.at("codec").get<std::string>() == "table" ? CodecMode::Table
                                                                 : CodecMode::Synthetic;
  else
    cfg.codec_mode = cfg.task == Task::Synthetic ? CodecMode::Synthetic : CodecMode::Table;
  cfg.dataset_path = j.value("dataset", "");
  cfg.output_dir = j.value("output_dir", ".");
  cfg.property_name = j.value("property", cfg.property_name);
  cfg.latent_dim = j.value("latent_dim", 56);
  cfg.seed = j.value("seed", std::uint64_t{0});

  cfg.train.lr = j.value("lr", 0.0001);
  cfg.train.lambda_cycle = j.value("lambda_cycle", 0.3);
  cfg.train.lambda_identity = j.value("lambda_identity", 0.1);
  cfg.train.batch_size = j.value("batch_size", 64);
  const int default_epochs =
      preset_for(cfg.task) == gan::Preset::Physiochemical ? 300 : 100;
  cfg.train.epochs = j.value("epochs", default_epochs);
  cfg.train.seed = cfg.seed;
  if (j.value("update_order", "generators_first") == "simultaneous")
    cfg.train.update_order = gan::UpdateOrder::Simultaneous;
  if (cfg.train.lambda_cycle < 0 || cfg.train.lambda_identity < 0)
    throw config_error("loss weights must be >= 0");

  if (j.contains("sizes")) {
    const auto& s = j.at("sizes");
    cfg.sizes.x_train = s.value("x_train", std::size_t{0});
    cfg.sizes.y_train = s.value("y_train", std::size_t{0});
    cfg.sizes.x_test = s.value("x_test", std::size_t{0});
    cfg.sizes.y_test = s.value("y_test", std::size_t{0});
  }
  if (j.contains("deltas")) cfg.deltas = j.at("deltas").get<std::vector<double>>();
  cfg.k_points = j.value("k_points", 80);
  cfg.include_start_in_path = j.value("include_start_in_path", false);
  cfg.iterations = j.value("iterations", 10);
  cfg.synthetic_train = j.value("synthetic_train", std::size_t{2000});
  cfg.synthetic_test = j.value("synthetic_test", std::size_t{200});
  cfg.top_fraction = j.value("top_fraction", 0.2);
  cfg.generator_batchnorm = j.value("generator_batchnorm", true);
  cfg.discriminator_batchnorm = j.value("discriminator_batchnorm", false);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["task"] = task_to_string(cfg.task);
  j["codec"] = cfg.codec_mode == CodecMode::Table ? "table" : "synthetic";
  j["dataset"] = cfg.dataset_path;
  j["output_dir"] = cfg.output_dir;
  j["property"] = cfg.property_name;
  j["latent_dim"] = cfg.latent_dim;
  j["seed"] = cfg.seed;
  j["lr"] = cfg.train.lr;
  j["lambda_cycle"] = cfg.train.lambda_cycle;
  j["lambda_identity"] = cfg.train.lambda_identity;
  j["batch_size"] = cfg.train.batch_size;
  j["epochs"] = cfg.train.epochs;
  j["update_order"] = cfg.train.update_order == gan::UpdateOrder::Simultaneous
                          ? "simultaneous"
                          : "generators_first";
  j["sizes"] = {{"x_train", cfg.sizes.x_train},
                {"y_train", cfg.sizes.y_train},
                {"x_test", cfg.sizes.x_test},
                {"y_test", cfg.sizes.y_test}};
  j["deltas"] = cfg.deltas;
  j["k_points"] = cfg.k_points;
  j["include_start_in_path"] = cfg.include_start_in_path;
  j["iterations"] = cfg.iterations;
  j["synthetic_train"] = cfg.synthetic_train;
  j["synthetic_test"] = cfg.synthetic_test;
  j["top_fraction"] = cfg.top_fraction;
  j["generator_batchnorm"] = cfg.generator_batchnorm;
  j["discriminator_batchnorm"] = cfg.discriminator_batchnorm;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xC0FF33;
  for (char c : dump) h = hash_combine(h, static_cast<std::uint64_t>(c));
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

namespace {

optimize::Predicate halogen_pred(bool want) {
  return [want](const dataio::MoleculeRecord& r) {
    if (r.smiles.empty()) return false;
    try {
      return chem::has_halogen_moiety(chem::parse_smiles(r.smiles)) == want;
    } catch (const std::exception&) {
      return false;
    }
  };
}

optimize::Predicate ring_pred(bool y_side) {
  return [y_side](const dataio::MoleculeRecord& r) {
    if (r.smiles.empty()) return false;
    try {
      const int n = chem::count_aromatic_rings(chem::parse_smiles(r.smiles));
      return y_side ? (n == 1 || n == 3) : n == 2;
    } catch (const std::exception&) {
      return false;
    }
  };
}

struct Prepared {
  dataio::SplitPair split;
  std::string mode;
};

Prepared prepare_split(const ExperimentConfig& cfg, const dataio::Dataset& ds) {
  Prepared p;
  switch (cfg.task) {
    case Task::Halogen:
      p.split = dataio::split_structural(ds, dataio::StructuralPredicate::Halogen,
                                         cfg.sizes, cfg.seed);
      p.mode = "structural-halogen";
      break;
    case Task::Aromatic:
      p.split = dataio::split_structural(ds, dataio::StructuralPredicate::AromaticRings,
                                         cfg.sizes, cfg.seed);
      p.mode = "structural-aromatic";
      break;
    case Task::Constrained:
      p.split = dataio::split_by_median(ds, cfg.property_name, cfg.sizes, cfg.seed);
      p.mode = "median";
      break;
    case Task::Unconstrained:
      p.split = dataio::split_top_fraction(ds, cfg.property_name, cfg.top_fraction,
                                           cfg.sizes, cfg.seed);
      p.mode = "top-fraction";
      break;
    case Task::Synthetic:
      throw config_error("synthetic task has no dataset split");
  }
  return p;
}

void write_training_log(const std::string& path,
                        const std::vector<gan::LossReport>& history) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write training log: " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "epoch,l_gan,l_cyc,l_identity,total\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    out << i << ',' << history[i].l_gan << ',' << history[i].l_cyc << ','
        << history[i].l_identity << ',' << history[i].total << "\n";
}

void write_run_info(const ExperimentConfig& cfg, const std::string& stage,
                    bool surrogate) {
  json j;
  j["stage"] = stage;
  j["task"] = task_to_string(cfg.task);
  j["config_hash"] = config_hash(cfg);
  j["surrogate_decode"] = surrogate;
  std::ofstream out(fs::path(cfg.output_dir) / ("run_info_" + stage + ".json"));
  out << j.dump(2) << "\n";
}

void check_architecture(const gan::CycleGanModel& model, const ExperimentConfig& cfg) {
  const gan::CycleGanModel expected =
      gan::make_model(preset_for(cfg.task), cfg.latent_dim, 0,
                      cfg.generator_batchnorm, cfg.discriminator_batchnorm);
  auto describe = [](const nn::MlpModel& m) {
    std::ostringstream os;
    for (const auto& s : m.specs)
      os << (s.kind == nn::LayerKind::Dense ? "d" : "r") << s.in_dim << "x" << s.out_dim
         << (s.use_batchnorm ? "bn" : "") << " ";
    return os.str();
  };
  auto same = [](const nn::MlpModel& a, const nn::MlpModel& b) {
    if (a.specs.size() != b.specs.size()) return false;
    for (std::size_t i = 0; i < a.specs.size(); ++i) {
      const auto& x = a.specs[i];
      const auto& y = b.specs[i];
      if (x.kind != y.kind || x.in_dim != y.in_dim || x.out_dim != y.out_dim ||
          x.use_batchnorm != y.use_batchnorm)
        return false;
    }
    return true;
  };
  if (!same(model.G, expected.G) || !same(model.D_X, expected.D_X))
    throw config_error("checkpoint architecture mismatch: expected G=[" +
                       describe(expected.G) + "] D=[" + describe(expected.D_X) +
                       "], found G=[" + describe(model.G) + "] D=[" +
                       describe(model.D_X) + "]");
}

}  // namespace

void run_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  {
    std::ofstream f(out / "effective_config.json");
    f << config_to_json(cfg).dump(2) << "\n";
  }

  Eigen::MatrixXd x_train, y_train;
  if (cfg.task == Task::Synthetic) {
    const auto space = codec::SyntheticSpace::standard(cfg.latent_dim);
    x_train = dataio::embedding_matrix(
        space.sample(codec::SyntheticSpace::SetLabel::X, cfg.synthetic_train, cfg.seed));
    y_train = dataio::embedding_matrix(
        space.sample(codec::SyntheticSpace::SetLabel::Y, cfg.synthetic_train, cfg.seed));
  } else {
    if (cfg.dataset_path.empty()) throw config_error("dataset path required");
    const auto ds = dataio::load_dataset(cfg.dataset_path);
    auto prepared = prepare_split(cfg, ds);
    dataio::write_split_manifest((out / "split_manifest.json").string(), prepared.split,
                                 prepared.mode, cfg.seed);
    x_train = dataio::embedding_matrix(prepared.split.x_train);
    y_train = dataio::embedding_matrix(prepared.split.y_train);
    if (x_train.cols() != cfg.latent_dim)
      throw config_error("dataset embedding dim " + std::to_string(x_train.cols()) +
                         " != configured latent_dim " + std::to_string(cfg.latent_dim));
  }

  gan::CycleGanModel model =
      gan::make_model(preset_for(cfg.task), cfg.latent_dim, cfg.seed,
                      cfg.generator_batchnorm, cfg.discriminator_batchnorm);
  const std::string ckpt = (out / "checkpoint.json").string();
  std::vector<gan::LossReport> history;
  try {
    gan::train(model, x_train, y_train, cfg.train,
                             [&](int, const gan::LossReport& r, const gan::CycleGanModel& m) {
                               history.push_back(r);
                               gan::save_checkpoint(ckpt, m, cfg.train);
                             });
  } catch (const numeric_error&) {
    write_training_log((out / "training_log.csv").string(), history);
    throw;  // last epoch checkpoint stays on disk
  }
  if (cfg.train.epochs == 0) gan::save_checkpoint(ckpt, model, cfg.train);
  write_training_log((out / "training_log.csv").string(), history);
  write_run_info(cfg, "train", cfg.codec_mode == CodecMode::Table);
}

namespace {

void evaluate_synthetic(const ExperimentConfig& cfg, const gan::CycleGanModel& model,
                        const fs::path& out) {
  const auto space = codec::SyntheticSpace::standard(cfg.latent_dim);
  const auto x_test = space.sample(codec::SyntheticSpace::SetLabel::X,
                                   cfg.synthetic_test, cfg.seed + 1);
  const auto y_test = space.sample(codec::SyntheticSpace::SetLabel::Y,
                                   cfg.synthetic_test, cfg.seed + 1);
  auto g = optimize::model_generator(model);

  std::size_t success = 0;
  double mean_disp = 0.0, mean_rand = 0.0;
  for (std::size_t i = 0; i < x_test.size(); ++i) {
    const auto z = *x_test[i].embedding;
    const auto gz = g(z);
    if (space.property_of(gz) > 0.0) ++success;
    mean_disp += (gz - z).norm();
    mean_rand += (*y_test[i].embedding - z).norm();
  }
  const double n = static_cast<double>(x_test.size());
  std::ofstream f(out / "synthetic_report.csv");
  f << std::setprecision(std::numeric_limits<double>::max_digits10);
  f << "success_rate,mean_displacement,mean_random_displacement,n\n";
  f << (static_cast<double>(success) / n) << ',' << (mean_disp / n) << ','
    << (mean_rand / n) << ',' << x_test.size() << "\n";

  std::vector<std::pair<double, std::vector<optimize::OptimizationOutcome>>> per_delta;
  for (double d : cfg.deltas) {
    optimize::ConstrainedOptions opt;
    opt.property_name = codec::kSyntheticProperty;
    opt.delta = d;
    opt.k_points = cfg.k_points;
    opt.include_start = cfg.include_start_in_path;
    per_delta.emplace_back(d, optimize::constrained_optimize(g, x_test, space, opt));
  }
  optimize::write_constrained_csv((out / "constrained_summary.csv").string(),
                                  optimize::eval_constrained(per_delta), false);
}

void evaluate_structural(const ExperimentConfig& cfg, const gan::CycleGanModel& model,
                         const dataio::SplitPair& split, const codec::EmbeddingTable& table,
                         const dataio::Dataset& full, const fs::path& out) {
  const bool halogen = cfg.task == Task::Halogen;
  auto y_pred = halogen ? halogen_pred(true) : ring_pred(true);
  auto x_pred = halogen ? halogen_pred(false) : ring_pred(false);
  auto report = optimize::eval_structural(
      optimize::model_generator(model), optimize::model_inverse_generator(model),
      split.x_test, split.y_test, table, y_pred, x_pred);
  optimize::write_structural_csv((out / "structural_report.csv").string(), report);
  optimize::write_histogram_csv((out / "similarity_x_to_gx.csv").string(),
                                report.x_to_y.similarities, "similarity");
  optimize::write_histogram_csv((out / "similarity_y_to_fy.csv").string(),
                                report.y_to_x.similarities, "similarity");
  optimize::write_histogram_csv(
      (out / "similarity_baseline.csv").string(),
      optimize::similarity_baseline(split.x_test, full, table, cfg.seed), "similarity");
  auto to_double = [](const std::vector<int>& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  optimize::write_histogram_csv((out / "rings_input_x.csv").string(),
                                to_double(report.x_to_y.input_ring_counts), "rings");
  optimize::write_histogram_csv((out / "rings_output_gx.csv").string(),
                                to_double(report.x_to_y.output_ring_counts), "rings");
}

}  // namespace

void run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  gan::CycleGanModel model = gan::load_checkpoint(checkpoint_path);
  check_architecture(model, cfg);

  if (cfg.task == Task::Synthetic) {
    evaluate_synthetic(cfg, model, out);
    write_run_info(cfg, "evaluate", false);
    return;
  }

  if (cfg.dataset_path.empty()) throw config_error("dataset path required");
  const auto ds = dataio::load_dataset(cfg.dataset_path);
  auto prepared = prepare_split(cfg, ds);
  codec::EmbeddingTable table(ds);
  if (table.dim() != model.latent_dim)
    throw config_error("dataset embedding dim does not match checkpoint latent_dim");

  switch (cfg.task) {
    case Task::Halogen:
    case Task::Aromatic:
      evaluate_structural(cfg, model, prepared.split, table, ds, out);
      break;
    case Task::Constrained: {
      auto g = optimize::model_generator(model);
      std::vector<std::pair<double, std::vector<optimize::OptimizationOutcome>>> per_delta;
      for (double d : cfg.deltas) {
        optimize::ConstrainedOptions opt;
        opt.property_name = cfg.property_name;
        opt.delta = d;
        opt.k_points = cfg.k_points;
        opt.include_start = cfg.include_start_in_path;
        auto outcomes = optimize::constrained_optimize(g, prepared.split.x_test, table, opt);
        std::ostringstream name;
        name << "outcomes_delta_" << d << ".jsonl";
        optimize::write_outcomes_jsonl((out / name.str()).string(), outcomes,
                                       cfg.property_name);
        per_delta.emplace_back(d, std::move(outcomes));
      }
      optimize::write_constrained_csv((out / "constrained_summary.csv").string(),
                                      optimize::eval_constrained(per_delta), true);
      break;
    }
    case Task::Unconstrained: {
      auto trace = optimize::unconstrained_iterate(optimize::model_generator(model),
                                                   prepared.split.x_test, table,
                                                   cfg.property_name, cfg.iterations);
      optimize::write_trace_csv((out / "iteration_trace.csv").string(), trace, true);
      std::ofstream best(out / "best_molecules.txt");
      for (const auto& r : trace.best_per_iteration) best << r.smiles << "\n";
      break;
    }
    case Task::Synthetic:
      break;  // handled above
  }
  write_run_info(cfg, "evaluate", true);
}

}  // namespace molcycle::experiment
