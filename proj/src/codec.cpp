#include "molcycle/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include "molcycle/chem.hpp"
#include "molcycle/rng.hpp"

namespace molcycle::codec {

EmbeddingTable::EmbeddingTable(Dataset records, int fp_radius, int fp_nbits)
    : records_(std::move(records)), fp_radius_(fp_radius), fp_nbits_(fp_nbits) {
  if (records_.empty()) throw data_error("embedding table needs at least one record");
  points_ = dataio::embedding_matrix(records_);
  dim_ = static_cast<int>(points_.cols());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].smiles.empty())
      throw data_error("record " + records_[i].id + " has no SMILES");
    const std::string key = chem::canonical_smiles(chem::parse_smiles(records_[i].smiles));
    by_canonical_.emplace(key, i);  // first record wins on duplicates
  }
}

Vector EmbeddingTable::encode_smiles(const std::string& smiles) const {
  const std::string key = chem::canonical_smiles(chem::parse_smiles(smiles));
  auto it = by_canonical_.find(key);
  if (it == by_canonical_.end())
    throw data_error("molecule not in embedding table: " + smiles);
  return *records_[it->second].embedding;
}

Vector EmbeddingTable::encode(const MoleculeRecord& r) const {
  if (r.embedding) return *r.embedding;
  return encode_smiles(r.smiles);
}

std::vector<DecodeResult> EmbeddingTable::decode(const Vector& z, int k) const {
  if (k < 1) throw config_error("decode k must be >= 1");
  if (z.size() != dim_) throw shape_error("query dim does not match table dim");
  k = std::min<int>(k, static_cast<int>(records_.size()));  // clip
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> dist(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i)
    dist[i] = (points_.row(i).transpose() - z).norm();
  auto better = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return records_[a].id < records_[b].id;  // deterministic tie-break
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
  std::vector<DecodeResult> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back({records_[order[i]], dist[order[i]]});
  return out;
}

double EmbeddingTable::similarity(const MoleculeRecord& a, const MoleculeRecord& b) const {
  const auto fa = chem::morgan_fingerprint(chem::parse_smiles(a.smiles), fp_radius_, fp_nbits_);
  const auto fb = chem::morgan_fingerprint(chem::parse_smiles(b.smiles), fp_radius_, fp_nbits_);
  return chem::tanimoto(fa, fb);
}

std::string EmbeddingTable::canonical_key(const MoleculeRecord& r) const {
  return chem::canonical_smiles(chem::parse_smiles(r.smiles));
}

SyntheticSpace::SyntheticSpace(int dim, Vector mu_x, Vector mu_y, Vector w, double b)
    : dim_(dim), mu_x_(std::move(mu_x)), mu_y_(std::move(mu_y)), w_(std::move(w)), b_(b) {
  if (dim_ < 1) throw config_error("synthetic dim must be >= 1");
  if (mu_x_.size() != dim_ || mu_y_.size() != dim_ || w_.size() != dim_)
    throw shape_error("synthetic space parameter dims disagree");
  if (mu_x_ == mu_y_) throw config_error("cluster means must differ");
  if (w_.isZero(0.0)) throw config_error("property direction w must be nonzero");
}

SyntheticSpace SyntheticSpace::standard(int dim) {
  Vector mx = Vector::Zero(dim), my = Vector::Zero(dim), w = Vector::Zero(dim);
  mx(0) = -2.0;
  my(0) = 2.0;
  w(0) = 1.0;
  return SyntheticSpace(dim, mx, my, w, 0.0);
}

Vector SyntheticSpace::encode(const MoleculeRecord& r) const {
  if (!r.embedding) throw data_error("synthetic record " + r.id + " has no coordinates");
  return *r.embedding;
}

MoleculeRecord SyntheticSpace::decode_point(const Vector& z) const {
  if (z.size() != dim_) throw shape_error("point dim does not match space dim");
  MoleculeRecord r;
  r.id = canonical_key_of(z);
  r.embedding = z;
  r.properties[kSyntheticProperty] = property_of(z);
  return r;
}

std::vector<DecodeResult> SyntheticSpace::decode(const Vector& z, int k) const {
  if (k < 1) throw config_error("decode k must be >= 1");
  return {DecodeResult{decode_point(z), 0.0}};
}

double SyntheticSpace::similarity(const MoleculeRecord& a, const MoleculeRecord& b) const {
  // Euclidean proxy in [0, 1], 1 on identical points.
  const double d = (*a.embedding - *b.embedding).norm();
  return 1.0 / (1.0 + d);
}

std::string SyntheticSpace::canonical_key(const MoleculeRecord& r) const {
  return canonical_key_of(*r.embedding);
}

std::string SyntheticSpace::canonical_key_of(const Vector& z) {
  // bit-exact coordinate hash
  std::uint64_t h = 0x53594e;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    std::uint64_t bits;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&bits, &z(i), sizeof(bits));
    h = hash_combine(h, bits);
  }
  std::ostringstream os;
  os << "z_" << std::hex << h;
  return os.str();
}

Dataset SyntheticSpace::sample(SetLabel label, std::size_t n, std::uint64_t seed) const {
  const Vector& mu = label == SetLabel::X ? mu_x_ : mu_y_;
  auto rng = make_rng(seed, label == SetLabel::X ? 0x5358 : 0x5359);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector z(dim_);
    for (int d = 0; d < dim_; ++d) z(d) = mu(d) + gauss(rng);
    MoleculeRecord r;
    r.id = (label == SetLabel::X ? "x_" : "y_") + std::to_string(i);
    r.embedding = std::move(z);
    r.properties[kSyntheticProperty] = property_of(*r.embedding);
    ds.push_back(std::move(r));
  }
  return ds;
}

}  // namespace molcycle::codec
