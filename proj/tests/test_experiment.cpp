#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "molcycle/experiment.hpp"
#include "molcycle/rng.hpp"

using namespace molcycle;
using experiment::CodecMode;
using experiment::ExperimentConfig;
using experiment::Task;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small table-mode dataset: corpus molecules with seeded embeddings and a
// property derived from the first coordinate.
std::string write_table_dataset(const fs::path& dir, int n, int dim) {
  std::ifstream corpus(std::string(MOLCYCLE_TEST_DATA_DIR) + "/chem_corpus.jsonl");
  REQUIRE(corpus.good());
  auto rng = make_rng(515, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const fs::path out = dir / "dataset.jsonl";
  std::ofstream f(out);
  std::string line;
  int written = 0;
  while (written < n && std::getline(corpus, line)) {
    auto j = json::parse(line);
    json rec;
    rec["id"] = j.at("id");
    rec["smiles"] = j.at("smiles");
    json emb = json::array();
    for (int d = 0; d < dim; ++d) emb.push_back(gauss(rng));
    rec["properties"] = {{"plogp", emb[0].get<double>() * 2.0}};
    rec["embedding"] = std::move(emb);
    f << rec.dump() << "\n";
    ++written;
  }
  REQUIRE(written == n);
  return out.string();
}

json base_synthetic_config(const std::string& outdir) {
  return {{"task", "synthetic"}, {"latent_dim", 6},      {"epochs", 2},
          {"batch_size", 16},    {"synthetic_train", 64}, {"synthetic_test", 32},
          {"seed", 7},           {"output_dir", outdir}};
}

}  // namespace

TEST_CASE("config defaults") {
  ExperimentConfig cfg = experiment::config_from_json(json::object());
  CHECK(cfg.task == Task::Synthetic);
  CHECK(cfg.codec_mode == CodecMode::Synthetic);
  CHECK(cfg.latent_dim == 56);
  CHECK(cfg.train.lr == 0.0001);
  CHECK(cfg.train.lambda_cycle == 0.3);
  CHECK(cfg.train.lambda_identity == 0.1);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.epochs == 100);  // structural preset default
  CHECK(cfg.deltas == std::vector<double>{0.0, 0.2, 0.4, 0.6});
  CHECK(cfg.k_points == 80);
  CHECK(cfg.iterations == 10);
  CHECK(cfg.top_fraction == 0.2);

  ExperimentConfig phys = experiment::config_from_json({{"task", "constrained"}});
  CHECK(phys.train.epochs == 300);  // physiochemical preset default
  CHECK(phys.codec_mode == CodecMode::Table);
  CHECK(experiment::preset_for(Task::Constrained) == gan::Preset::Physiochemical);
  CHECK(experiment::preset_for(Task::Halogen) == gan::Preset::Structural);
}

TEST_CASE("config validation and round trip") {
  CHECK_THROWS_AS(experiment::config_from_json({{"task", "nope"}}),
                  molcycle::config_error);
  CHECK_THROWS_AS(experiment::config_from_json({{"lambda_cycle", -1.0}}),
                  molcycle::config_error);
  ExperimentConfig cfg = experiment::config_from_json(
      {{"task", "halogen"}, {"epochs", 5}, {"deltas", {0.1, 0.3}}, {"seed", 11}});
  ExperimentConfig back = experiment::config_from_json(experiment::config_to_json(cfg));
  CHECK(experiment::config_hash(cfg) == experiment::config_hash(back));
  cfg.seed = 12;
  CHECK(experiment::config_hash(cfg) != experiment::config_hash(back));
}

TEST_CASE("synthetic training writes checkpoint, log and config") {
  TempDir dir("molcycle_exp_syn");
  ExperimentConfig cfg = experiment::config_from_json(base_synthetic_config(dir.str()));
  experiment::run_train(cfg);
  CHECK(fs::exists(dir.path / "checkpoint.json"));
  CHECK(fs::exists(dir.path / "effective_config.json"));
  CHECK(fs::exists(dir.path / "run_info_train.json"));
  std::ifstream log(dir.path / "training_log.csv");
  std::string line;
  std::getline(log, line);
  CHECK(line == "epoch,l_gan,l_cyc,l_identity,total");
  int rows = 0;
  while (std::getline(log, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);  // one per epoch

  gan::TrainConfig tc;
  gan::CycleGanModel model =
      gan::load_checkpoint((dir.path / "checkpoint.json").string(), &tc);
  CHECK(model.latent_dim == 6);
  CHECK(tc.epochs == 2);
}

TEST_CASE("identical configs produce byte-identical checkpoints") {
  TempDir a("molcycle_exp_det_a"), b("molcycle_exp_det_b");
  json ja = base_synthetic_config(a.str());
  json jb = base_synthetic_config(b.str());
  experiment::run_train(experiment::config_from_json(ja));
  experiment::run_train(experiment::config_from_json(jb));
  CHECK(slurp(a.path / "checkpoint.json") == slurp(b.path / "checkpoint.json"));
  CHECK(slurp(a.path / "training_log.csv") == slurp(b.path / "training_log.csv"));
}

TEST_CASE("synthetic evaluation emits its reports") {
  TempDir dir("molcycle_exp_syn_eval");
  ExperimentConfig cfg = experiment::config_from_json(base_synthetic_config(dir.str()));
  experiment::run_train(cfg);
  experiment::run_evaluate(cfg, (dir.path / "checkpoint.json").string());
  CHECK(fs::exists(dir.path / "synthetic_report.csv"));
  CHECK(fs::exists(dir.path / "constrained_summary.csv"));
  CHECK(fs::exists(dir.path / "run_info_evaluate.json"));
  std::ifstream rep(dir.path / "synthetic_report.csv");
  std::string header, row;
  std::getline(rep, header);
  CHECK(header == "success_rate,mean_displacement,mean_random_displacement,n");
  std::getline(rep, row);
  double sr, md, mr;
  int n;
  char comma;
  std::istringstream(row) >> sr >> comma >> md >> comma >> mr >> comma >> n;
  CHECK(n == 32);
  CHECK(sr >= 0.0);
  CHECK(sr <= 1.0);
  CHECK(md >= 0.0);
  const std::string summary = slurp(dir.path / "constrained_summary.csv");
  CHECK(summary.find("# decode=analytic") == 0);
}

TEST_CASE("table-mode halogen pipeline end to end") {
  TempDir dir("molcycle_exp_tab");
  const std::string dataset = write_table_dataset(dir.path, 80, 6);
  json j = {{"task", "halogen"},  {"dataset", dataset},
            {"latent_dim", 6},    {"epochs", 1},
            {"batch_size", 8},    {"seed", 3},
            {"output_dir", dir.str()},
            {"sizes", {{"x_test", 8}, {"y_test", 8}}}};
  ExperimentConfig cfg = experiment::config_from_json(j);
  experiment::run_train(cfg);
  CHECK(fs::exists(dir.path / "split_manifest.json"));
  {
    std::ifstream in(dir.path / "split_manifest.json");
    json manifest = json::parse(in);
    CHECK(manifest.at("mode") == "structural-halogen");
    CHECK(manifest.at("x_test").size() == 8);
  }
  experiment::run_evaluate(cfg, (dir.path / "checkpoint.json").string());
  CHECK(fs::exists(dir.path / "structural_report.csv"));
  CHECK(fs::exists(dir.path / "similarity_x_to_gx.csv"));
  CHECK(fs::exists(dir.path / "similarity_baseline.csv"));
  CHECK(fs::exists(dir.path / "rings_input_x.csv"));
  const std::string rep = slurp(dir.path / "structural_report.csv");
  CHECK(rep.find("# decode=surrogate-nearest-neighbor") == 0);
  CHECK(rep.find("X_to_GX") != std::string::npos);
  CHECK(rep.find("Y_to_FY") != std::string::npos);
}

TEST_CASE("table-mode constrained evaluation writes per-delta outcomes") {
  TempDir dir("molcycle_exp_con");
  const std::string dataset = write_table_dataset(dir.path, 60, 6);
  json j = {{"task", "constrained"}, {"dataset", dataset},  {"latent_dim", 6},
            {"epochs", 1},           {"batch_size", 4},     {"seed", 5},
            {"property", "plogp"},   {"k_points", 10},      {"deltas", {0.0, 0.4}},
            {"output_dir", dir.str()}, {"sizes", {{"x_test", 6}}}};
  ExperimentConfig cfg = experiment::config_from_json(j);
  experiment::run_train(cfg);
  experiment::run_evaluate(cfg, (dir.path / "checkpoint.json").string());
  CHECK(fs::exists(dir.path / "outcomes_delta_0.jsonl"));
  CHECK(fs::exists(dir.path / "outcomes_delta_0.4.jsonl"));
  CHECK(fs::exists(dir.path / "constrained_summary.csv"));
  std::ifstream in(dir.path / "outcomes_delta_0.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    auto rec = json::parse(line);
    CHECK(rec.contains("start_id"));
    CHECK(rec.at("path").size() == 10);
    ++rows;
  }
  CHECK(rows == 6);
}

TEST_CASE("table-mode unconstrained evaluation writes the iteration trace") {
  TempDir dir("molcycle_exp_unc");
  const std::string dataset = write_table_dataset(dir.path, 60, 6);
  json j = {{"task", "unconstrained"}, {"dataset", dataset}, {"latent_dim", 6},
            {"epochs", 1},             {"batch_size", 4},    {"seed", 5},
            {"property", "plogp"},     {"iterations", 3},
            {"output_dir", dir.str()}, {"sizes", {{"x_test", 6}}}};
  ExperimentConfig cfg = experiment::config_from_json(j);
  experiment::run_train(cfg);
  experiment::run_evaluate(cfg, (dir.path / "checkpoint.json").string());
  CHECK(fs::exists(dir.path / "best_molecules.txt"));
  std::ifstream in(dir.path / "iteration_trace.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# decode=surrogate-nearest-neighbor");
  std::getline(in, line);
  CHECK(line.rfind("iteration,", 0) == 0);
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 4);  // start + 3 iterations
}

TEST_CASE("evaluation rejects a checkpoint with the wrong architecture") {
  TempDir dir("molcycle_exp_mismatch");
  ExperimentConfig cfg = experiment::config_from_json(base_synthetic_config(dir.str()));
  experiment::run_train(cfg);  // structural preset
  const std::string dataset = write_table_dataset(dir.path, 40, 6);
  json j = {{"task", "constrained"}, {"dataset", dataset}, {"latent_dim", 6},
            {"property", "plogp"},   {"output_dir", dir.str()}};
  ExperimentConfig eval_cfg = experiment::config_from_json(j);  // physiochemical
  CHECK_THROWS_WITH_AS(
      experiment::run_evaluate(eval_cfg, (dir.path / "checkpoint.json").string()),
      doctest::Contains("architecture mismatch"), molcycle::config_error);
}

TEST_CASE("training errors are config or data errors") {
  TempDir dir("molcycle_exp_err");
  json j = {{"task", "halogen"}, {"output_dir", dir.str()}};
  CHECK_THROWS_AS(experiment::run_train(experiment::config_from_json(j)),
                  molcycle::config_error);  // no dataset
  j["dataset"] = (dir.path / "missing.jsonl").string();
  CHECK_THROWS_AS(experiment::run_train(experiment::config_from_json(j)),
                  molcycle::data_error);
}
