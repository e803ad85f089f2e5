#include "molcycle/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "molcycle/chem.hpp"
#include "molcycle/rng.hpp"

namespace molcycle::dataio {

using nlohmann::json;

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open dataset: " + path);
  Dataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw data_error("line " + std::to_string(lineno) + ": " + e.what());
    }
    MoleculeRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.smiles = j.value("smiles", "");
      if (j.contains("embedding") && !j.at("embedding").is_null()) {
        const auto& e = j.at("embedding");
        Eigen::VectorXd v(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) v(i) = e.at(i).get<double>();
        r.embedding = std::move(v);
      }
      if (j.contains("properties"))
        for (const auto& [k, v] : j.at("properties").items())
          r.properties[k] = v.get<double>();
    } catch (const json::exception& e) {
      throw data_error("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(r.id).second)
      throw data_error("line " + std::to_string(lineno) + ": duplicate id " + r.id);
    if (r.embedding) {
      if (dim < 0) dim = r.embedding->size();
      else if (r.embedding->size() != dim)
        throw data_error("line " + std::to_string(lineno) + ": embedding dim " +
                         std::to_string(r.embedding->size()) + " != " +
                         std::to_string(dim));
      if (!r.embedding->allFinite())
        throw data_error("line " + std::to_string(lineno) + ": non-finite embedding");
    }
    ds.push_back(std::move(r));
  }
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open for writing: " + path);
  for (const auto& r : ds) {
    json j;
    j["id"] = r.id;
    if (!r.smiles.empty()) j["smiles"] = r.smiles;
    if (r.embedding) {
      json e = json::array();
      for (Eigen::Index i = 0; i < r.embedding->size(); ++i)
        e.push_back((*r.embedding)(i));
      j["embedding"] = std::move(e);
    }
    if (!r.properties.empty()) j["properties"] = r.properties;
    out << j.dump() << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

std::size_t convert_csv(const std::string& csv_path, const std::string& jsonl_path) {
  std::ifstream in(csv_path);
  if (!in) throw data_error("cannot open CSV: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty CSV: " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  std::vector<int> emb_cols;
  std::vector<std::pair<int, std::string>> prop_cols;
  int id_col = -1, smiles_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "id") id_col = static_cast<int>(i);
    else if (header[i] == "smiles") smiles_col = static_cast<int>(i);
    else if (header[i].rfind("embedding_", 0) == 0) emb_cols.push_back(static_cast<int>(i));
    else prop_cols.emplace_back(static_cast<int>(i), header[i]);
  }
  if (id_col < 0) throw data_error("CSV missing 'id' column");

  Dataset ds;
  std::size_t rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw data_error("row " + std::to_string(rowno) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    MoleculeRecord r;
    r.id = cells[id_col];
    if (smiles_col >= 0) r.smiles = cells[smiles_col];
    auto parse_num = [&](const std::string& cell) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
      } catch (const std::exception&) {
        throw data_error("row " + std::to_string(rowno) + ": non-numeric cell '" +
                         cell + "'");
      }
    };
    if (!emb_cols.empty()) {
      Eigen::VectorXd v(emb_cols.size());
      for (std::size_t i = 0; i < emb_cols.size(); ++i) v(i) = parse_num(cells[emb_cols[i]]);
      r.embedding = std::move(v);
    }
    for (const auto& [col, name] : prop_cols) r.properties[name] = parse_num(cells[col]);
    ds.push_back(std::move(r));
  }
  save_dataset(jsonl_path, ds);
  return ds.size();
}

double get_property(const MoleculeRecord& r, const std::string& name) {
  auto it = r.properties.find(name);
  if (it == r.properties.end())
    throw data_error("record " + r.id + " missing property '" + name + "'");
  return it->second;
}

Eigen::MatrixXd embedding_matrix(const Dataset& ds) {
  if (ds.empty()) return Eigen::MatrixXd();
  if (!ds.front().embedding) throw data_error("dataset has no embeddings");
  const auto dim = ds.front().embedding->size();
  Eigen::MatrixXd m(ds.size(), dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds[i].embedding) throw data_error("record " + ds[i].id + " has no embedding");
    m.row(i) = ds[i].embedding->transpose();
  }
  return m;
}

namespace {

// Seeded shuffle, then carve train/test off the front. size 0 = "the rest".
void carve(Dataset pool, std::size_t n_train, std::size_t n_test, std::uint64_t seed,
           std::uint64_t tag, Dataset& train, Dataset& test) {
  auto rng = make_rng(seed, tag);
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t nt = std::min(n_test, pool.size());
  test.assign(pool.begin(), pool.begin() + nt);
  std::size_t ntr = pool.size() - nt;
  if (n_train > 0) ntr = std::min(n_train, ntr);
  train.assign(pool.begin() + nt, pool.begin() + nt + ntr);
}

}  // namespace

SplitPair split_structural(const Dataset& ds, StructuralPredicate predicate,
                           const SplitSizes& sizes, std::uint64_t seed,
                           std::size_t* skipped, std::size_t* excluded) {
  Dataset x_pool, y_pool;
  std::size_t n_skipped = 0, n_excluded = 0;
  for (const auto& r : ds) {
    chem::MolGraph g;
    try {
      g = chem::parse_smiles(r.smiles);
    } catch (const std::exception&) {
      ++n_skipped;
      continue;
    }
    if (predicate == StructuralPredicate::Halogen) {
      (chem::has_halogen_moiety(g) ? y_pool : x_pool).push_back(r);
    } else {
      const int rings = chem::count_aromatic_rings(g);
      if (rings == 2) x_pool.push_back(r);
      else if (rings == 1 || rings == 3) y_pool.push_back(r);
      else ++n_excluded;
    }
  }
  if (skipped) *skipped = n_skipped;
  if (excluded) *excluded = n_excluded;
  SplitPair sp;
  carve(std::move(x_pool), sizes.x_train, sizes.x_test, seed, 0x58, sp.x_train, sp.x_test);
  carve(std::move(y_pool), sizes.y_train, sizes.y_test, seed, 0x59, sp.y_train, sp.y_test);
  return sp;
}

namespace {

Dataset lowest_n(const Dataset& ds, const std::string& prop, std::size_t n) {
  Dataset sorted = ds;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](const MoleculeRecord& a, const MoleculeRecord& b) {
                     const double pa = get_property(a, prop);
                     const double pb = get_property(b, prop);
                     if (pa != pb) return pa < pb;
                     return a.id < b.id;
                   });
  sorted.resize(std::min(n, sorted.size()));
  return sorted;
}

void remove_ids(Dataset& ds, const Dataset& exclude) {
  std::set<std::string> ids;
  for (const auto& r : exclude) ids.insert(r.id);
  std::erase_if(ds, [&](const MoleculeRecord& r) { return ids.count(r.id) > 0; });
}

}  // namespace

SplitPair split_by_median(const Dataset& ds, const std::string& property_name,
                          const SplitSizes& sizes, std::uint64_t seed) {
  if (ds.empty()) throw data_error("empty dataset");
  std::vector<double> values;
  values.reserve(ds.size());
  for (const auto& r : ds) values.push_back(get_property(r, property_name));
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  Dataset x_pool, y_pool;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (values[i] <= median ? x_pool : y_pool).push_back(ds[i]);  // ties to X

  SplitPair sp;
  const std::size_t n_test = sizes.x_test == 0 ? 800 : sizes.x_test;
  sp.x_test = lowest_n(ds, property_name, n_test);
  remove_ids(x_pool, sp.x_test);

  Dataset unused;
  carve(std::move(x_pool), sizes.x_train, 0, seed, 0x4d58, sp.x_train, unused);
  carve(std::move(y_pool), sizes.y_train, 0, seed, 0x4d59, sp.y_train, unused);
  return sp;
}

SplitPair split_top_fraction(const Dataset& ds, const std::string& property_name,
                             double fraction, const SplitSizes& sizes,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw config_error("fraction must be in (0, 1]");
  if (ds.empty()) throw data_error("empty dataset");

  Dataset by_prop = ds;
  std::stable_sort(by_prop.begin(), by_prop.end(),
                   [&](const MoleculeRecord& a, const MoleculeRecord& b) {
                     const double pa = get_property(a, property_name);
                     const double pb = get_property(b, property_name);
                     if (pa != pb) return pa > pb;
                     return a.id < b.id;
                   });
  const auto top_n = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(fraction * static_cast<double>(ds.size()))));
  Dataset y_pool(by_prop.begin(), by_prop.begin() + top_n);

  SplitPair sp;
  const std::size_t n_test = sizes.x_test == 0 ? 800 : sizes.x_test;
  sp.x_test = lowest_n(ds, property_name, n_test);

  Dataset x_pool = ds;
  remove_ids(x_pool, sp.x_test);
  Dataset unused;
  carve(std::move(x_pool), sizes.x_train, 0, seed, 0x5458, sp.x_train, unused);
  carve(std::move(y_pool), sizes.y_train, 0, seed, 0x5459, sp.y_train, unused);
  return sp;
}

void write_split_manifest(const std::string& path, const SplitPair& split,
                          const std::string& mode, std::uint64_t seed) {
  json j;
  j["mode"] = mode;
  j["seed"] = seed;
  auto ids = [](const Dataset& ds) {
    json a = json::array();
    for (const auto& r : ds) a.push_back(r.id);
    return a;
  };
  j["x_train"] = ids(split.x_train);
  j["y_train"] = ids(split.y_train);
  j["x_test"] = ids(split.x_test);
  j["y_test"] = ids(split.y_test);
  std::ofstream out(path);
  if (!out) throw data_error("cannot write split manifest: " + path);
  out << j.dump() << "\n";
}

}  // namespace molcycle::dataio
