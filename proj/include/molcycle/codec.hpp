#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "molcycle/dataio.hpp"

namespace molcycle::codec {

using dataio::Dataset;
using dataio::MoleculeRecord;
using Vector = Eigen::VectorXd;

struct DecodeResult {
  MoleculeRecord record;
  double distance = 0.0;
};

/// Latent codec abstraction: molecule <-> latent point, plus the similarity
/// measure the optimization protocols constrain on.
class LatentCodec {
 public:
  virtual ~LatentCodec() = default;
  virtual int dim() const = 0;
  virtual Vector encode(const MoleculeRecord& r) const = 0;
  virtual std::vector<DecodeResult> decode(const Vector& z, int k) const = 0;
  DecodeResult decode_one(const Vector& z) const { return decode(z, 1).front(); }
  virtual double similarity(const MoleculeRecord& a, const MoleculeRecord& b) const = 0;
  /// Identity key: equal keys = "same molecule".
  virtual std::string canonical_key(const MoleculeRecord& r) const = 0;
  /// True when decoding can only return already-known molecules.
  virtual bool surrogate_decode() const = 0;
};

/// Embedding-table codec: encode = canonical-SMILES lookup of stored
/// embeddings, decode = exact nearest-neighbor over the table (ties by id),
/// similarity = Tanimoto on Morgan fingerprints.
class EmbeddingTable : public LatentCodec {
 public:
  explicit EmbeddingTable(Dataset records, int fp_radius = 2, int fp_nbits = 2048);

  int dim() const override { return dim_; }
  Vector encode(const MoleculeRecord& r) const override;
  Vector encode_smiles(const std::string& smiles) const;
  std::vector<DecodeResult> decode(const Vector& z, int k) const override;
  double similarity(const MoleculeRecord& a, const MoleculeRecord& b) const override;
  std::string canonical_key(const MoleculeRecord& r) const override;
  bool surrogate_decode() const override { return true; }
  std::size_t size() const { return records_.size(); }

 private:
  Dataset records_;
  Eigen::MatrixXd points_;  // one row per record
  std::map<std::string, std::size_t> by_canonical_;
  int dim_ = 0;
  int fp_radius_, fp_nbits_;
};

/// Analytic verification space: two Gaussian clusters and an affine property
/// p(z) = w.z + b; decode is the identity.
class SyntheticSpace : public LatentCodec {
 public:
  SyntheticSpace(int dim, Vector mu_x, Vector mu_y, Vector w, double b);

  /// Paper-shaped default: dim 56, clusters at -2/+2 on axis 0, p(z) = z0.
  static SyntheticSpace standard(int dim = 56);

  int dim() const override { return dim_; }
  Vector encode(const MoleculeRecord& r) const override;
  std::vector<DecodeResult> decode(const Vector& z, int k) const override;
  MoleculeRecord decode_point(const Vector& z) const;
  double similarity(const MoleculeRecord& a, const MoleculeRecord& b) const override;
  std::string canonical_key(const MoleculeRecord& r) const override;
  bool surrogate_decode() const override { return false; }

  double property_of(const Vector& z) const { return w_.dot(z) + b_; }
  const Vector& mu_x() const { return mu_x_; }
  const Vector& mu_y() const { return mu_y_; }
  const Vector& w() const { return w_; }

  enum class SetLabel { X, Y };
  /// n unit-variance Gaussian draws around the cluster mean; records carry
  /// the analytic property under the name "p".
  Dataset sample(SetLabel label, std::size_t n, std::uint64_t seed) const;

 private:
  static std::string canonical_key_of(const Vector& z);

  int dim_;
  Vector mu_x_, mu_y_, w_;
  double b_;
};

constexpr const char* kSyntheticProperty = "p";

}  // namespace molcycle::codec
