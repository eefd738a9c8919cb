#include "mpf/mitigator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "mpf/rand.hpp"

namespace mpf::mitigator {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kFdStep = 1e-6;

/// Clip to [0,1] and renormalize; falls back to uniform if everything clips away.
std::vector<double> project_simplex(std::vector<double> w) {
  double sum = 0.0;
  for (double& v : w) {
    v = std::clamp(v, 0.0, 1.0);
    sum += v;
  }
  if (sum <= 1e-300) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> floor_and_renormalize(std::vector<double> w, double eps) {
  for (double& v : w) {
    if (v < eps) v = 0.0;
  }
  return project_simplex(std::move(w));
}

bool lex_greater(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

struct Candidate {
  std::vector<double> weights;
  double objective = 0.0;
  int restart_index = -1;
  int iterations = 0;
  bool met_tolerance = true;
};

/// Strictly better, or tied within 1e-12 and lexicographically larger.
bool beats(const Candidate& a, const Candidate& b) {
  if (a.objective < b.objective - kTieTolerance) return true;
  if (a.objective > b.objective + kTieTolerance) return false;
  return lex_greater(a.weights, b.weights);
}

struct AttemptResult {
  std::vector<double> weights;
  double objective = 0.0;
  int iterations = 0;
  bool met_tolerance = false;
};

/**
 * Monotone projected-gradient descent from `start`. The gradient of the
 * exact objective is estimated by central differences along projected
 * probes, so every evaluation stays on the simplex. A backtracking line
 * search guarantees the objective never increases.
 */
AttemptResult descend(const std::function<double(const std::vector<double>&)>& f,
                      std::vector<double> start, const HyperParams& hp) {
  AttemptResult res;
  std::vector<double> w = project_simplex(std::move(start));
  double fw = f(w);
  const std::size_t n = w.size();

  for (int iter = 1; iter <= hp.max_iterations; ++iter) {
    res.iterations = iter;

    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = w;
      up[i] += kFdStep;
      std::vector<double> down = w;
      down[i] -= kFdStep;
      grad[i] = (f(project_simplex(std::move(up))) - f(project_simplex(std::move(down)))) /
                (2.0 * kFdStep);
    }

    double step = 1.0;
    bool improved = false;
    std::vector<double> next;
    double fnext = fw;
    for (int halvings = 0; halvings < 60; ++halvings) {
      std::vector<double> trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] - step * grad[i];
      trial = project_simplex(std::move(trial));
      const double ftrial = f(trial);
      if (ftrial < fw) {
        next = std::move(trial);
        fnext = ftrial;
        improved = true;
        break;
      }
      step *= 0.5;
    }

    if (!improved) {
      // No descent direction left at this resolution; change is zero.
      res.met_tolerance = true;
      break;
    }
    const double delta = fw - fnext;
    w = std::move(next);
    fw = fnext;
    if (delta < hp.tolerance) {
      res.met_tolerance = true;
      break;
    }
  }

  res.weights = std::move(w);
  res.objective = fw;
  return res;
}

void check_inputs(const std::vector<FeatureHistogram>& components,
                  const FeatureHistogram& target, const FeatureScores& scores,
                  const HyperParams& hp) {
  hp.validate();
  if (components.size() < 2) {
    throw ValidationError("decomposition needs at least 2 perspective histograms");
  }
  if (components.size() != scores.perspective_count()) {
    throw ValidationError("component count does not match score matrix rows");
  }
  for (const auto& c : components) {
    if (c.bin_edges != target.bin_edges) {
      throw ValidationError("component and target histograms have mismatched bins");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

DecompositionResult optimize(const std::vector<FeatureHistogram>& components,
                             const FeatureHistogram& target,
                             const FeatureScores& scores, const HyperParams& hp,
                             OptimizeTrace* trace) {
  check_inputs(components, target, scores, hp);
  const std::size_t n = components.size();

  auto evaluate = [&](const std::vector<double>& w) {
    return metrics::objective(w, components, target, scores, hp).total;
  };

  // All candidates are compared in epsilon-floored form, so the reported
  // minimum is over exactly the vectors this function is allowed to return.
  auto as_candidate = [&](std::vector<double> w, int restart, int iters,
                          bool met_tol) {
    Candidate c;
    c.weights = floor_and_renormalize(std::move(w), hp.nonzero_epsilon);
    c.objective = evaluate(c.weights);
    c.restart_index = restart;
    c.iterations = iters;
    c.met_tolerance = met_tol;
    return c;
  };

  std::optional<Candidate> best;
  auto offer = [&](Candidate c) {
    if (!best || beats(c, *best)) best = std::move(c);
  };

  for (int r = 0; r < hp.restarts; ++r) {
    SplitMix64 rng(mix_seed(hp.rng_seed, static_cast<std::uint64_t>(r)));
    AttemptResult attempt = descend(evaluate, dirichlet_uniform(n, rng), hp);
    Candidate c = as_candidate(std::move(attempt.weights), r, attempt.iterations,
                               attempt.met_tolerance);
    if (trace) trace->attempt_objectives.push_back(c.objective);
    offer(std::move(c));
  }

  // Vertex polish: the sparsity count term is flat almost everywhere, so the
  // descent can stall off-vertex; exact evaluation of the corners and the
  // uniform point covers that.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> vertex(n, 0.0);
    vertex[i] = 1.0;
    Candidate c = as_candidate(std::move(vertex), -1, 0, true);
    if (trace) trace->polish_objectives.push_back(c.objective);
    offer(std::move(c));
  }
  {
    std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    Candidate c = as_candidate(std::move(uniform), -1, 0, true);
    if (trace) trace->polish_objectives.push_back(c.objective);
    offer(std::move(c));
  }

  DecompositionResult result;
  result.concept_name = scores.concept_name();
  result.weights = best->weights;
  result.breakdown = metrics::objective(best->weights, components, target, scores, hp);
  result.converged = best->met_tolerance;
  result.iterations_used = best->iterations;
  result.restart_index = best->restart_index;
  return result;
}

// ---------------------------------------------------------------------------
// grid_search_oracle
// ---------------------------------------------------------------------------

OraclePoint grid_search_oracle(const std::vector<FeatureHistogram>& components,
                               const FeatureHistogram& target,
                               const FeatureScores& scores, const HyperParams& hp,
                               double step) {
  check_inputs(components, target, scores, hp);
  const std::size_t n = components.size();
  if (n > 4) throw ValidationError("grid oracle is limited to n <= 4 perspectives");
  if (!(step > 0.0 && step <= 1.0)) throw ValidationError("oracle step must lie in (0, 1]");
  const double ticks = 1.0 / step;
  const long m = std::lround(ticks);
  if (std::abs(ticks - static_cast<double>(m)) > 1e-9) {
    throw ValidationError("oracle step must divide 1");
  }

  OraclePoint best;
  bool have_best = false;

  std::vector<long> counts(n, 0);
  // Depth-first over lattice compositions of m, first coordinate high to low,
  // so the enumeration order is lexicographically descending and the first
  // best found is also the lexicographically largest among ties.
  std::function<void(std::size_t, long)> visit = [&](std::size_t i, long remaining) {
    if (i + 1 == n) {
      counts[i] = remaining;
      std::vector<double> w(n);
      for (std::size_t k = 0; k < n; ++k) {
        w[k] = static_cast<double>(counts[k]) * step;
      }
      w = project_simplex(std::move(w));  // absorb rounding in w's sum
      const double obj = metrics::objective(w, components, target, scores, hp).total;
      ++best.points_evaluated;
      if (!have_best || obj < best.objective - kTieTolerance) {
        best.weights = std::move(w);
        best.objective = obj;
        have_best = true;
      }
      return;
    }
    for (long c = remaining; c >= 0; --c) {
      counts[i] = c;
      visit(i + 1, remaining - c);
    }
  };
  visit(0, m);
  return best;
}

// ---------------------------------------------------------------------------
// decompose_benchmark / sweep
// ---------------------------------------------------------------------------

std::map<std::string, DecompositionResult> decompose_benchmark(
    const Benchmark& benchmark, const std::map<std::string, ConceptData>& data,
    const HyperParams& hp) {
  std::map<std::string, DecompositionResult> out;
  for (const auto& concept_name : benchmark.concepts()) {
    auto it = data.find(concept_name);
    if (it == data.end()) {
      throw ValidationError("concept '" + concept_name +
                            "' is missing scores or histograms");
    }
    out.emplace(concept_name,
                optimize(it->second.components, it->second.target, it->second.scores, hp));
  }
  return out;
}

void SweepGrid::validate() const {
  if (alphas.empty() || betas.empty() || lambda_pairs.empty()) {
    throw ValidationError("sweep grid lists must be non-empty");
  }
  auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (double a : alphas) {
    if (!non_negative(a)) throw ValidationError("sweep alpha values must be >= 0");
  }
  for (double b : betas) {
    if (!non_negative(b)) throw ValidationError("sweep beta values must be >= 0");
  }
  for (const auto& [kl, cal] : lambda_pairs) {
    if (!non_negative(kl) || !non_negative(cal)) {
      throw ValidationError("sweep lambda values must be >= 0");
    }
  }
}

SweepGrid SweepGrid::defaults() {
  SweepGrid g;
  g.alphas = {0.0, 0.5};
  g.betas = {0.0, 0.1, 0.3, 1.0, 3.0};
  g.lambda_pairs = {{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
  return g;
}

std::vector<SweepRow> sweep(const Benchmark& benchmark,
                            const std::map<std::string, ConceptData>& data,
                            const SweepGrid& grid, const HyperParams& base) {
  grid.validate();
  std::vector<SweepRow> rows;
  rows.reserve(grid.alphas.size() * grid.betas.size() * grid.lambda_pairs.size());
  for (double alpha : grid.alphas) {
    for (double beta : grid.betas) {
      for (const auto& [lambda_kl, lambda_cal] : grid.lambda_pairs) {
        HyperParams hp = base;
        hp.alpha = alpha;
        hp.beta = beta;
        hp.lambda_kl = lambda_kl;
        hp.lambda_cal = lambda_cal;

        SweepRow row;
        row.alpha = alpha;
        row.beta = beta;
        row.lambda_kl = lambda_kl;
        row.lambda_cal = lambda_cal;
        row.results = decompose_benchmark(benchmark, data, hp);
        for (const auto& [name, res] : row.results) {
          (void)name;
          row.aggregate_kl += res.breakdown.kl;
          row.aggregate_calibration += res.breakdown.calibration;
        }
        const double count = static_cast<double>(row.results.size());
        row.aggregate_kl /= count;
        row.aggregate_calibration /= count;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows,
                        const PerspectiveRegistry& registry) {
  std::ostringstream os;
  os << "alpha\tbeta\tlambda_kl\tlambda_cal\tconcept";
  for (const auto& p : registry.all()) os << "\tw_" << p.name;
  os << "\tkl\tcalibration\tobjective\n";

  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };

  for (const auto& row : rows) {
    for (const auto& [concept_name, res] : row.results) {
      os << num(row.alpha) << '\t' << num(row.beta) << '\t' << num(row.lambda_kl)
         << '\t' << num(row.lambda_cal) << '\t' << concept_name;
      for (double w : res.weights) os << '\t' << num(w);
      os << '\t' << num(res.breakdown.kl) << '\t' << num(res.breakdown.calibration)
         << '\t' << num(res.breakdown.total) << '\n';
    }
  }
  return os.str();
}

}  // namespace mpf::mitigator
