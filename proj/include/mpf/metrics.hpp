#pragma once

#include <span>
#include <vector>

#include "mpf/core.hpp"

namespace mpf::metrics {

/**
 * Mixture of histograms sharing identical bin edges:
 * masses = sum_i w[i] * components[i].masses.
 */
FeatureHistogram compose_histogram(std::span<const double> weights,
                                   const std::vector<FeatureHistogram>& components);
FeatureHistogram compose_histogram(const Weights& weights,
                                   const std::vector<FeatureHistogram>& components);

/**
 * KL(p || q) with natural log, after adding smoothing_epsilon to every bin
 * of both histograms and renormalizing. The smoothing keeps the value finite
 * when q has empty bins; kl(p, p) is exactly 0.
 */
double kl_divergence(const FeatureHistogram& p, const FeatureHistogram& q,
                     double smoothing_epsilon = 1e-9);

/**
 * Mean absolute difference, over questions, between the weighted composition
 * of per-perspective scores and the baseline score.
 */
double calibration_error(std::span<const double> weights, const FeatureScores& scores);
double calibration_error(const Weights& weights, const FeatureScores& scores);

/// ||w - uniform||_2^2, unscaled. Zero exactly at the uniform vector.
double l2_regularizer(std::span<const double> weights);

/// n_nonzero/n + (1 - max(w)), unscaled. n_nonzero counts entries above
/// nonzero_epsilon. Minimized at one-hot vertices (value 1/n).
double sparsity_penalty(std::span<const double> weights, double nonzero_epsilon);

/**
 * All four terms at once. kl/calibration/l2/sparsity are stored unscaled;
 * total = lambda_kl*kl + lambda_cal*calibration + alpha*l2 + beta*sparsity.
 */
ObjectiveBreakdown objective(std::span<const double> weights,
                             const std::vector<FeatureHistogram>& components,
                             const FeatureHistogram& target,
                             const FeatureScores& scores,
                             const HyperParams& hp);

}  // namespace mpf::metrics
