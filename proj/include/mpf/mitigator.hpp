#pragma once

#include <map>
#include <string>
#include <vector>

#include "mpf/core.hpp"
#include "mpf/metrics.hpp"

namespace mpf::mitigator {

/// Hyperparameter grid; the cartesian product of the three lists is swept.
struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<std::pair<double, double>> lambda_pairs;  // (lambda_kl, lambda_cal)

  void validate() const;

  /// Shipped default grid: alpha in {0, 0.5}, beta in {0, 0.1, 0.3, 1, 3},
  /// lambda pairs {(0.2,0.8), (0.5,0.5), (0.8,0.2)} - 30 cells.
  static SweepGrid defaults();
};

/// Per-attempt diagnostics, for tests that assert the restart/polish
/// bookkeeping. Finals are recorded after epsilon flooring.
struct OptimizeTrace {
  std::vector<double> attempt_objectives;  // one per restart
  std::vector<double> polish_objectives;   // one-hot vertices then uniform
};

/**
 * Minimizes the combined objective over the probability simplex.
 *
 * Runs hp.restarts attempts, each started from a seeded Dirichlet draw and
 * descended with finite-difference projected gradient steps (monotone in the
 * objective) until the per-iteration improvement drops below hp.tolerance or
 * hp.max_iterations is reached. Infeasible trial points are projected back
 * by clipping to [0,1] and renormalizing. Every one-hot vertex and the
 * uniform vector are evaluated as polish candidates. The returned vector is
 * the epsilon-floored candidate with the lowest exact objective; ties within
 * 1e-12 resolve to the lexicographically largest vector.
 */
DecompositionResult optimize(const std::vector<FeatureHistogram>& components,
                             const FeatureHistogram& target,
                             const FeatureScores& scores,
                             const HyperParams& hp,
                             OptimizeTrace* trace = nullptr);

struct OraclePoint {
  std::vector<double> weights;
  double objective = 0.0;
  std::size_t points_evaluated = 0;
};

/**
 * Exhaustive reference: evaluates the exact objective on every simplex
 * lattice point whose coordinates are multiples of `step` and returns the
 * best. Guarded to n <= 4 perspectives; step must divide 1.
 */
OraclePoint grid_search_oracle(const std::vector<FeatureHistogram>& components,
                               const FeatureHistogram& target,
                               const FeatureScores& scores,
                               const HyperParams& hp, double step);

/// Inputs for one concept's decomposition.
struct ConceptData {
  std::vector<FeatureHistogram> components;  // registry order
  FeatureHistogram target;
  FeatureScores scores;
};

/**
 * Optimizes each benchmark concept independently. Every concept uses the
 * same hp (including the seed), so concepts with identical data produce
 * identical results.
 */
std::map<std::string, DecompositionResult> decompose_benchmark(
    const Benchmark& benchmark, const std::map<std::string, ConceptData>& data,
    const HyperParams& hp);

struct SweepRow {
  double alpha = 0.0;
  double beta = 0.0;
  double lambda_kl = 0.0;
  double lambda_cal = 0.0;
  std::map<std::string, DecompositionResult> results;
  double aggregate_kl = 0.0;           // mean of per-concept kl terms
  double aggregate_calibration = 0.0;  // mean of per-concept calibration terms
};

/**
 * Full cartesian product over the grid in declaration order (alpha outermost,
 * lambda pair innermost); one row per grid cell.
 */
std::vector<SweepRow> sweep(const Benchmark& benchmark,
                            const std::map<std::string, ConceptData>& data,
                            const SweepGrid& grid, const HyperParams& base);

/// Tab-separated sweep table, one line per (grid cell, concept):
/// alpha, beta, lambda_kl, lambda_cal, concept, weights..., kl, calibration, objective.
std::string sweep_table(const std::vector<SweepRow>& rows,
                        const PerspectiveRegistry& registry);

}  // namespace mpf::mitigator
