#include "molcycle/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "molcycle/chem.hpp"
#include "molcycle/rng.hpp"

namespace molcycle::optimize {

using nlohmann::json;

Generator model_generator(const gan::CycleGanModel& model) {
  return [&model](const Vector& z) -> Vector {
    return nn::forward_eval(model.G, z.transpose()).row(0).transpose();
  };
}

Generator model_inverse_generator(const gan::CycleGanModel& model) {
  return [&model](const Vector& z) -> Vector {
    return nn::forward_eval(model.F, z.transpose()).row(0).transpose();
  };
}

namespace {

DirectionReport eval_direction(const Generator& gen, const Dataset& inputs,
                               const LatentCodec& codec, const Predicate& target) {
  DirectionReport rep;
  std::set<std::string> unique_keys;
  std::size_t successes = 0, non_identical = 0;
  for (const auto& rec : inputs) {
    Vector z, gz;
    MoleculeRecord out;
    try {
      z = codec.encode(rec);
      gz = gen(z);
      out = codec.decode_one(gz).record;
    } catch (const std::exception&) {
      ++rep.undecodable;
      continue;
    }
    ++rep.evaluated;
    if (target(out)) ++successes;
    const std::string key_out = codec.canonical_key(out);
    if (key_out != codec.canonical_key(rec)) ++non_identical;
    unique_keys.insert(key_out);
    rep.similarities.push_back(codec.similarity(rec, out));
    if (!rec.smiles.empty() && !out.smiles.empty()) {
      try {
        rep.input_ring_counts.push_back(
            chem::count_aromatic_rings(chem::parse_smiles(rec.smiles)));
        rep.output_ring_counts.push_back(
            chem::count_aromatic_rings(chem::parse_smiles(out.smiles)));
      } catch (const std::exception&) {
        // non-parseable SMILES stay out of the ring histogram
      }
    }
  }
  if (rep.evaluated > 0) {
    const double n = static_cast<double>(rep.evaluated);
    rep.success_rate = static_cast<double>(successes) / n;
    rep.non_identity = static_cast<double>(non_identical) / n;
    rep.uniqueness = static_cast<double>(unique_keys.size()) / n;
  }
  return rep;
}

}  // namespace

StructuralReport eval_structural(const Generator& g, const Generator& f,
                                 const Dataset& x_test, const Dataset& y_test,
                                 const LatentCodec& codec,
                                 const Predicate& y_predicate,
                                 const Predicate& x_predicate) {
  StructuralReport rep;
  rep.x_to_y = eval_direction(g, x_test, codec, y_predicate);
  rep.y_to_x = eval_direction(f, y_test, codec, x_predicate);
  rep.surrogate_decode = codec.surrogate_decode();
  return rep;
}

std::vector<OptimizationOutcome> constrained_optimize(const Generator& g,
                                                      const Dataset& starts,
                                                      const LatentCodec& codec,
                                                      const ConstrainedOptions& opt) {
  if (opt.k_points < 1) throw config_error("k_points must be >= 1");
  if (opt.delta < 0.0 || opt.delta > 1.0) throw config_error("delta must be in [0,1]");
  if (opt.property_name.empty()) throw config_error("property_name required");

  std::vector<OptimizationOutcome> outcomes;
  outcomes.reserve(starts.size());
  for (const auto& start : starts) {
    OptimizationOutcome oc;
    oc.start = start;
    const Vector z = codec.encode(start);
    const Vector gz = g(z);
    const int k0 = opt.include_start ? 0 : 1;
    const int K = opt.k_points;
    for (int k = k0; k <= K; ++k) {
      // z_K is G(x) itself, not an interpolation rounding of it.
      Vector zk = (k == K) ? gz
                           : (z + (static_cast<double>(k) / K) * (gz - z)).eval();
      oc.path.push_back({zk, codec.decode_one(zk).record});
    }

    const std::string start_key = codec.canonical_key(start);
    const double start_prop = dataio::get_property(start, opt.property_name);
    std::map<std::string, const MoleculeRecord*> candidates;  // deduplicated
    for (const auto& pp : oc.path) {
      const std::string key = codec.canonical_key(pp.decoded);
      if (key == start_key) continue;
      candidates.emplace(key, &pp.decoded);
    }
    for (const auto& [key, rec] : candidates) {
      const double sim = codec.similarity(start, *rec);
      if (sim < opt.delta) continue;
      const double improvement =
          dataio::get_property(*rec, opt.property_name) - start_prop;
      if (opt.require_positive_improvement && improvement <= 0.0) continue;
      if (!oc.success || improvement > oc.improvement) {
        oc.success = true;
        oc.best = *rec;
        oc.improvement = improvement;
        oc.similarity = sim;
      }
    }
    outcomes.push_back(std::move(oc));
  }
  return outcomes;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  return {mean, std::sqrt(var)};
}

}  // namespace

DeltaSummary summarize_outcomes(double delta,
                                const std::vector<OptimizationOutcome>& outcomes) {
  DeltaSummary s;
  s.delta = delta;
  s.n_total = outcomes.size();
  std::vector<double> improvements, similarities;
  for (const auto& oc : outcomes) {
    if (!oc.success) continue;
    ++s.n_success;
    improvements.push_back(oc.improvement);
    similarities.push_back(oc.similarity);
  }
  if (s.n_total > 0)
    s.success_rate = static_cast<double>(s.n_success) / static_cast<double>(s.n_total);
  if (!improvements.empty()) {
    auto [mi, si] = mean_std(improvements);
    s.mean_improvement = mi;
    s.std_improvement = si;
    auto [ms, ss] = mean_std(similarities);
    s.mean_similarity = ms;
    s.std_similarity = ss;
  }
  return s;
}

std::vector<DeltaSummary> eval_constrained(
    const std::vector<std::pair<double, std::vector<OptimizationOutcome>>>& per_delta) {
  std::vector<DeltaSummary> out;
  out.reserve(per_delta.size());
  for (const auto& [delta, outcomes] : per_delta)
    out.push_back(summarize_outcomes(delta, outcomes));
  return out;
}

namespace {

IterationStats stats_of(std::vector<double> values) {
  IterationStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  auto pct = [&](double q) {  // nearest-rank percentile
    const auto idx = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(n) - 1.0,
                         std::floor(q * static_cast<double>(n))));
    return values[idx];
  };
  s.p75 = pct(0.75);
  s.p90 = pct(0.90);
  s.max = values.back();
  return s;
}

}  // namespace

IterationTrace unconstrained_iterate(const Generator& g, const Dataset& x_start,
                                     const LatentCodec& codec,
                                     const std::string& property_name,
                                     int iterations) {
  if (iterations < 0) throw config_error("iterations must be >= 0");
  if (x_start.empty()) throw config_error("empty start set");

  IterationTrace trace;
  std::vector<Vector> zs;
  zs.reserve(x_start.size());
  for (const auto& r : x_start) zs.push_back(codec.encode(r));

  auto record_iteration = [&](const std::vector<Vector>& pts) {
    std::vector<double> props, sims;
    MoleculeRecord best;
    double best_prop = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      MoleculeRecord rec = codec.decode_one(pts[i]).record;
      const double p = dataio::get_property(rec, property_name);
      props.push_back(p);
      sims.push_back(codec.similarity(x_start[i], rec));
      if (p > best_prop) {
        best_prop = p;
        best = rec;
      }
    }
    trace.stats.push_back(stats_of(props));
    trace.similarity_to_start.push_back(std::move(sims));
    trace.best_per_iteration.push_back(std::move(best));
  };

  record_iteration(zs);  // iteration 0 = starting set
  for (int it = 0; it < iterations; ++it) {
    for (auto& z : zs) {
      z = g(z);
      if (!z.allFinite()) {
        trace.aborted = true;
        return trace;
      }
    }
    record_iteration(zs);
  }
  return trace;
}

std::vector<double> similarity_baseline(const Dataset& x_set, const Dataset& dataset,
                                        const LatentCodec& codec, std::uint64_t seed) {
  if (dataset.empty()) throw config_error("empty baseline dataset");
  auto rng = make_rng(seed, 0x42415345);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<double> sims;
  sims.reserve(x_set.size());
  for (const auto& x : x_set) sims.push_back(codec.similarity(x, dataset[pick(rng)]));
  return sims;
}

// ---------------------------------------------------------------------------
// Report files

namespace {
const char* surrogate_header(bool surrogate) {
  return surrogate ? "# decode=surrogate-nearest-neighbor\n" : "# decode=analytic\n";
}

// Reports carry full double precision so downstream recomputation can match
// them exactly.
std::ofstream open_report(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}
}  // namespace

void write_structural_csv(const std::string& path, const StructuralReport& report) {
  std::ofstream out = open_report(path);
  out << surrogate_header(report.surrogate_decode);
  out << "direction,success_rate,non_identity,uniqueness,evaluated,undecodable\n";
  auto row = [&](const char* name, const DirectionReport& d) {
    out << name << ',' << d.success_rate << ',' << d.non_identity << ','
        << d.uniqueness << ',' << d.evaluated << ',' << d.undecodable << "\n";
  };
  row("X_to_GX", report.x_to_y);
  row("Y_to_FY", report.y_to_x);
}

void write_constrained_csv(const std::string& path,
                           const std::vector<DeltaSummary>& summaries,
                           bool surrogate_decode) {
  std::ofstream out = open_report(path);
  out << surrogate_header(surrogate_decode);
  out << "delta,improvement_mean,improvement_std,similarity_mean,similarity_std,"
         "success_rate,n_success,n_total\n";
  for (const auto& s : summaries) {
    out << s.delta << ',';
    auto opt = [&](const std::optional<double>& v) {
      if (v) out << *v;
      out << ',';
    };
    opt(s.mean_improvement);
    opt(s.std_improvement);
    opt(s.mean_similarity);
    opt(s.std_similarity);
    out << s.success_rate << ',' << s.n_success << ',' << s.n_total << "\n";
  }
}

void write_trace_csv(const std::string& path, const IterationTrace& trace,
                     bool surrogate_decode) {
  std::ofstream out = open_report(path);
  out << surrogate_header(surrogate_decode);
  out << "iteration,mean,p75,p90,max,mean_similarity_to_start,best_id\n";
  for (std::size_t i = 0; i < trace.stats.size(); ++i) {
    const auto& sims = trace.similarity_to_start[i];
    double mean_sim = 0.0;
    for (double s : sims) mean_sim += s;
    if (!sims.empty()) mean_sim /= static_cast<double>(sims.size());
    out << i << ',' << trace.stats[i].mean << ',' << trace.stats[i].p75 << ','
        << trace.stats[i].p90 << ',' << trace.stats[i].max << ',' << mean_sim << ','
        << trace.best_per_iteration[i].id << "\n";
  }
  if (trace.aborted) out << "# aborted: non-finite latent coordinates\n";
}

void write_outcomes_jsonl(const std::string& path,
                          const std::vector<OptimizationOutcome>& outcomes,
                          const std::string& property_name) {
  std::ofstream out = open_report(path);
  for (const auto& oc : outcomes) {
    json j;
    j["start_id"] = oc.start.id;
    j["start_property"] = dataio::get_property(oc.start, property_name);
    j["success"] = oc.success;
    if (oc.best) {
      j["best_id"] = oc.best->id;
      if (!oc.best->smiles.empty()) j["best_smiles"] = oc.best->smiles;
      j["improvement"] = oc.improvement;
      j["similarity"] = oc.similarity;
    }
    json path = json::array();
    for (const auto& pp : oc.path) {
      json p;
      json z = json::array();
      for (Eigen::Index i = 0; i < pp.z.size(); ++i) z.push_back(pp.z(i));
      p["z"] = std::move(z);
      p["decoded_id"] = pp.decoded.id;
      path.push_back(std::move(p));
    }
    j["path"] = std::move(path);
    out << j.dump() << "\n";
  }
}

void write_histogram_csv(const std::string& path, const std::vector<double>& values,
                         const std::string& label) {
  std::ofstream out = open_report(path);
  out << label << "\n";
  for (double v : values) out << v << "\n";
}

}  // namespace molcycle::optimize
