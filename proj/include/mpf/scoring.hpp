#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpf/core.hpp"

namespace mpf::scoring {

struct ScorerConfig {
  enum class Kind { lexicon, external };

  Kind kind = Kind::lexicon;
  double low = 0.0;
  double high = 1.0;
  int bins = 10;
  std::string lexicon_path = "data/lexicon.txt";

  // external scorer only
  std::string endpoint;
  double timeout_seconds = 10.0;

  void validate() const;
};

/// Maps a response text to a feature score inside the configured range.
class FeatureScorer {
public:
  virtual ~FeatureScorer() = default;
  virtual double score_text(const std::string& text) const = 0;
};

/**
 * Deterministic lexicon scorer: tokens are lowercased alphanumeric runs, a
 * token hits a lexicon stem when the stem is a prefix of the token, and
 * (positive_hits - negative_hits) / max(1, total_hits) is mapped affinely
 * from [-1, 1] onto [low, high]. Text with no hits scores the midpoint.
 */
class LexiconScorer : public FeatureScorer {
public:
  /// Loads a lexicon file: one stem per line, sections opened by the
  /// header lines `#positive` / `#negative`, `#` comments and blanks ignored.
  static LexiconScorer from_file(const std::string& path, double low, double high);

  static LexiconScorer from_stems(std::vector<std::string> positive,
                                  std::vector<std::string> negative,
                                  double low, double high);

  double score_text(const std::string& text) const override;

  std::size_t positive_count() const { return positive_.size(); }
  std::size_t negative_count() const { return negative_.size(); }
  const std::vector<std::string>& positive_stems() const { return positive_; }
  const std::vector<std::string>& negative_stems() const { return negative_; }

private:
  LexiconScorer(std::vector<std::string> positive, std::vector<std::string> negative,
                double low, double high);
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
  double low_;
  double high_;
};

/// Adapter for an external scoring service: POST {"text": ...} to the
/// endpoint, expect {"score": <real in range>}. Not used by hermetic tests.
class ExternalScorer : public FeatureScorer {
public:
  ExternalScorer(std::string endpoint, double low, double high, double timeout_seconds);
  double score_text(const std::string& text) const override;

private:
  std::string endpoint_;
  double low_;
  double high_;
  double timeout_seconds_;
};

std::unique_ptr<FeatureScorer> make_scorer(const ScorerConfig& config);

/**
 * Histogram over `config.bins` uniform bins spanning [low, high]. Bins are
 * right-open except the last: a score equal to an interior edge falls in
 * the higher bin, and a score equal to the top edge falls in the last bin.
 */
FeatureHistogram build_histogram(const std::vector<double>& scores,
                                 const ScorerConfig& config);

/// Bin index for one score under the same boundary rules.
std::size_t bin_index(double score, const std::vector<double>& edges);

/// Everything scoring produces for one concept.
struct ScoredConcept {
  FeatureScores decomposition;               // decomposition-split questions
  std::optional<FeatureScores> validation;   // kept separate, if present
  std::vector<FeatureHistogram> perspective_histograms;  // decomposition split
  FeatureHistogram baseline_histogram;                   // decomposition split
};

/**
 * Scores every benchmark response once and groups the results by concept.
 * Histograms are built from decomposition-split questions only. Requires a
 * baseline response and a response from every perspective for each
 * decomposition question.
 */
std::map<std::string, ScoredConcept> score_benchmark(const Benchmark& benchmark,
                                                     const FeatureScorer& scorer,
                                                     const ScorerConfig& config);

}  // namespace mpf::scoring
