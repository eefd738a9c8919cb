#include "mpf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mpf::metrics {

namespace {

void check_same_bins(const FeatureHistogram& a, const FeatureHistogram& b) {
  if (a.bin_edges != b.bin_edges) {
    throw ValidationError("histograms have mismatched bin edges");
  }
}

std::vector<double> smoothed(const std::vector<double>& masses, double epsilon) {
  std::vector<double> out(masses.size());
  const double total = 1.0 + epsilon * static_cast<double>(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) {
    out[i] = (masses[i] + epsilon) / total;
  }
  return out;
}

}  // namespace

FeatureHistogram compose_histogram(std::span<const double> weights,
                                   const std::vector<FeatureHistogram>& components) {
  if (components.empty()) throw ValidationError("compose needs at least one component");
  if (weights.size() != components.size()) {
    throw ValidationError("weight count does not match component count");
  }
  const auto& edges = components.front().bin_edges;
  for (const auto& c : components) check_same_bins(components.front(), c);

  std::vector<double> masses(components.front().bins(), 0.0);
  for (std::size_t i = 0; i < components.size(); ++i) {
    for (std::size_t j = 0; j < masses.size(); ++j) {
      masses[j] += weights[i] * components[i].masses[j];
    }
  }
  return FeatureHistogram::create(edges, std::move(masses));
}

FeatureHistogram compose_histogram(const Weights& weights,
                                   const std::vector<FeatureHistogram>& components) {
  return compose_histogram(weights.values(), components);
}

double kl_divergence(const FeatureHistogram& p, const FeatureHistogram& q,
                     double smoothing_epsilon) {
  check_same_bins(p, q);
  if (!(smoothing_epsilon > 0)) throw ValidationError("smoothing_epsilon must be positive");
  const std::vector<double> ps = smoothed(p.masses, smoothing_epsilon);
  const std::vector<double> qs = smoothed(q.masses, smoothing_epsilon);
  double kl = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    kl += ps[i] * std::log(ps[i] / qs[i]);
  }
  return kl;
}

double calibration_error(std::span<const double> weights, const FeatureScores& scores) {
  if (weights.size() != scores.perspective_count()) {
    throw ValidationError("weight count does not match score matrix rows");
  }
  const std::size_t d = scores.question_count();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double composed = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      composed += weights[i] * scores.perspective_score(i, j);
    }
    total += std::abs(composed - scores.baseline()[j]);
  }
  return total / static_cast<double>(d);
}

double calibration_error(const Weights& weights, const FeatureScores& scores) {
  return calibration_error(weights.values(), scores);
}

double l2_regularizer(std::span<const double> weights) {
  const double uniform = 1.0 / static_cast<double>(weights.size());
  double sum = 0.0;
  for (double w : weights) {
    const double diff = w - uniform;
    sum += diff * diff;
  }
  return sum;
}

double sparsity_penalty(std::span<const double> weights, double nonzero_epsilon) {
  const double n = static_cast<double>(weights.size());
  if (!(nonzero_epsilon > 0.0 && nonzero_epsilon < 1.0 / n)) {
    throw ValidationError("nonzero_epsilon must lie in (0, 1/n)");
  }
  std::size_t nonzero = 0;
  double max_w = 0.0;
  for (double w : weights) {
    if (w > nonzero_epsilon) ++nonzero;
    max_w = std::max(max_w, w);
  }
  return static_cast<double>(nonzero) / n + (1.0 - max_w);
}

ObjectiveBreakdown objective(std::span<const double> weights,
                             const std::vector<FeatureHistogram>& components,
                             const FeatureHistogram& target,
                             const FeatureScores& scores,
                             const HyperParams& hp) {
  hp.validate();
  ObjectiveBreakdown out;
  const FeatureHistogram composed = compose_histogram(weights, components);
  out.kl = kl_divergence(composed, target, hp.smoothing_epsilon);
  out.calibration = calibration_error(weights, scores);
  out.l2 = l2_regularizer(weights);
  out.sparsity = sparsity_penalty(weights, hp.nonzero_epsilon);
  out.total = hp.lambda_kl * out.kl + hp.lambda_cal * out.calibration +
              hp.alpha * out.l2 + hp.beta * out.sparsity;
  if (!std::isfinite(out.total)) {
    throw ValidationError("objective evaluated to a non-finite value");
  }
  return out;
}

}  // namespace mpf::metrics
