#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "molcycle/errors.hpp"

namespace molcycle::dataio {

struct MoleculeRecord {
  std::string id;
  std::string smiles;  // empty in synthetic mode
  std::optional<Eigen::VectorXd> embedding;
  std::map<std::string, double> properties;
};

using Dataset = std::vector<MoleculeRecord>;

struct SplitPair {
  Dataset x_train, y_train, x_test, y_test;
};

struct SplitSizes {
  // 0 means "everything available"
  std::size_t x_train = 0, y_train = 0, x_test = 0, y_test = 0;
};

/// JSONL: {"id":..., "smiles":..., "embedding":[...], "properties":{...}}
/// per line. Embedding dim must be uniform.
Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& ds);

/// One-shot CSV -> JSONL converter. Columns: id, smiles,
/// embedding_0..embedding_{d-1}, then property columns.
std::size_t convert_csv(const std::string& csv_path, const std::string& jsonl_path);

enum class StructuralPredicate { Halogen, AromaticRings };

/// Halogen mode: Y = records matching the halogen-moiety patterns, X = rest.
/// Aromatic mode: X = exactly 2 aromatic rings, Y = 1 or 3; 0 or >=4 rings
/// excluded. Train/test split by seeded shuffle.
SplitPair split_structural(const Dataset& ds, StructuralPredicate predicate,
                           const SplitSizes& sizes, std::uint64_t seed,
                           std::size_t* skipped = nullptr,
                           std::size_t* excluded = nullptr);

/// X strictly below median (ties to X), Y above; x_test = the n_test records
/// with the lowest property values, excluded from x_train.
SplitPair split_by_median(const Dataset& ds, const std::string& property_name,
                          const SplitSizes& sizes, std::uint64_t seed);

/// Y_train sampled from the top-`fraction` records by property; X_train a
/// random sample of the whole dataset; x_test as in split_by_median.
SplitPair split_top_fraction(const Dataset& ds, const std::string& property_name,
                             double fraction, const SplitSizes& sizes,
                             std::uint64_t seed);

/// Reproducibility manifest: ids per split + seed + mode.
void write_split_manifest(const std::string& path, const SplitPair& split,
                          const std::string& mode, std::uint64_t seed);

/// Stacks embeddings into a row-per-record matrix.
Eigen::MatrixXd embedding_matrix(const Dataset& ds);

double get_property(const MoleculeRecord& r, const std::string& name);

}  // namespace molcycle::dataio
