#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "molcycle/codec.hpp"
#include "molcycle/gan.hpp"

namespace molcycle::optimize {

using codec::LatentCodec;
using codec::MoleculeRecord;
using codec::Vector;
using dataio::Dataset;

/// Latent-space map (a trained generator, or an analytic stand-in in tests).
using Generator = std::function<Vector(const Vector&)>;

Generator model_generator(const gan::CycleGanModel& model);          // G
Generator model_inverse_generator(const gan::CycleGanModel& model);  // F

using Predicate = std::function<bool(const MoleculeRecord&)>;

struct DirectionReport {
  double success_rate = 0.0;
  double non_identity = 0.0;
  double uniqueness = 0.0;
  std::size_t evaluated = 0;
  std::size_t undecodable = 0;
  std::vector<double> similarities;       // start vs generated (Fig. 6 data)
  std::vector<int> input_ring_counts;     // Fig. 5 data, when SMILES present
  std::vector<int> output_ring_counts;
};

struct StructuralReport {
  DirectionReport x_to_y;  // X -> G(X), success against the Y predicate
  DirectionReport y_to_x;
  bool surrogate_decode = false;
};

StructuralReport eval_structural(const Generator& g, const Generator& f,
                                 const Dataset& x_test, const Dataset& y_test,
                                 const LatentCodec& codec,
                                 const Predicate& y_predicate,
                                 const Predicate& x_predicate);

struct PathPoint {
  Vector z;
  MoleculeRecord decoded;
};

struct OptimizationOutcome {
  MoleculeRecord start;
  std::vector<PathPoint> path;
  std::optional<MoleculeRecord> best;
  double improvement = 0.0;  // defined only on success
  double similarity = 0.0;
  bool success = false;
};

struct ConstrainedOptions {
  std::string property_name;
  double delta = 0.0;
  int k_points = 80;
  bool include_start = false;  // add k=0 (the start point) to the path
  bool require_positive_improvement = false;
};

/// Decode K points along x -> G(x) (endpoint included exactly), collapse
/// duplicates, keep candidates distinct from the start with
/// similarity >= delta, report the property maximizer.
std::vector<OptimizationOutcome> constrained_optimize(const Generator& g,
                                                      const Dataset& starts,
                                                      const LatentCodec& codec,
                                                      const ConstrainedOptions& opt);

struct DeltaSummary {
  double delta = 0.0;
  std::size_t n_total = 0;
  std::size_t n_success = 0;
  double success_rate = 0.0;
  std::optional<double> mean_improvement, std_improvement;
  std::optional<double> mean_similarity, std_similarity;
};

DeltaSummary summarize_outcomes(double delta,
                                const std::vector<OptimizationOutcome>& outcomes);

std::vector<DeltaSummary> eval_constrained(
    const std::vector<std::pair<double, std::vector<OptimizationOutcome>>>& per_delta);

struct IterationStats {
  double mean = 0.0, p75 = 0.0, p90 = 0.0, max = 0.0;
};

struct IterationTrace {
  std::vector<IterationStats> stats;                 // index 0 = start set
  std::vector<std::vector<double>> similarity_to_start;
  std::vector<MoleculeRecord> best_per_iteration;
  bool aborted = false;
};

IterationTrace unconstrained_iterate(const Generator& g, const Dataset& x_start,
                                     const LatentCodec& codec,
                                     const std::string& property_name,
                                     int iterations);

/// Tanimoto (or proxy) similarity of each start against one uniformly drawn
/// random dataset record; the comparison baseline of the density plots.
std::vector<double> similarity_baseline(const Dataset& x_set, const Dataset& dataset,
                                        const LatentCodec& codec, std::uint64_t seed);

// Report emission (CSV / JSONL shaped like the summary tables).
void write_structural_csv(const std::string& path, const StructuralReport& report);
void write_constrained_csv(const std::string& path,
                           const std::vector<DeltaSummary>& summaries,
                           bool surrogate_decode);
void write_trace_csv(const std::string& path, const IterationTrace& trace,
                     bool surrogate_decode);
void write_outcomes_jsonl(const std::string& path,
                          const std::vector<OptimizationOutcome>& outcomes,
                          const std::string& property_name);
void write_histogram_csv(const std::string& path, const std::vector<double>& values,
                         const std::string& label);

}  // namespace molcycle::optimize
