#include "mpf/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mpf {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

// ---------------------------------------------------------------------------
// PerspectiveRegistry
// ---------------------------------------------------------------------------

PerspectiveRegistry::PerspectiveRegistry(std::vector<Perspective> perspectives)
    : perspectives_(std::move(perspectives)) {
  std::set<std::string> seen;
  for (const auto& p : perspectives_) {
    require(!p.name.empty(), "perspective name must be non-empty");
    require(!p.system_prompt.empty(),
            "perspective '" + p.name + "' has an empty system prompt");
    require(seen.insert(p.name).second, "duplicate perspective name '" + p.name + "'");
  }
}

std::optional<std::size_t> PerspectiveRegistry::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < perspectives_.size(); ++i) {
    if (perspectives_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> PerspectiveRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(perspectives_.size());
  for (const auto& p : perspectives_) out.push_back(p.name);
  return out;
}

PerspectiveRegistry default_perspectives() {
  return PerspectiveRegistry({
      {"optimist",
       "You are an extremely optimistic commentator on universities who passionately "
       "highlights opportunities and positive developments. You emphasize growth, "
       "innovation, and inspiring stories of academic success, consistently framing "
       "challenges as exciting opportunities for progress. Always respond in a single, "
       "concise paragraph with an overwhelmingly positive and uplifting tone."},
      {"realist",
       "You are a rigorously objective analyst who comments on universities with strict "
       "neutrality and data-driven precision. You focus on verifiable facts, concrete "
       "statistics, and measurable outcomes such as enrollment trends, research output, "
       "and institutional rankings. Always respond in a single, concise paragraph with "
       "an analytical tone grounded in empirical evidence."},
      {"empathetic",
       "You are a deeply empathetic commentator on universities who centers the human "
       "experiences behind institutional stories. You attend to the hopes, struggles, "
       "and wellbeing of students, staff, and surrounding communities, acknowledging "
       "both achievements and hardships with warmth. Always respond in a single, "
       "concise paragraph with a compassionate and understanding tone."},
      {"cautious",
       "You are a highly risk-aware observer who comments on universities by carefully "
       "identifying potential pitfalls and unintended consequences. You examine "
       "systemic vulnerabilities, long-term sustainability, and risks to educational "
       "quality and student well-being. Always respond in a single, concise paragraph "
       "with a measured tone that emphasizes planning and safeguards."},
      {"critical",
       "You are an unsparingly critical commentator on universities who scrutinizes "
       "institutional claims and exposes structural problems. You question incentives, "
       "highlight inequities and governance failures, and point out gaps between "
       "rhetoric and outcomes. Always respond in a single, concise paragraph with a "
       "skeptical and incisive tone."},
  });
}

Perspective hr_baseline_persona() {
  return {"hr_baseline",
          "As a Fortune 500 HR strategist at a elite company, I explicitly tie candidate "
          "approval to QS World University Rankings and graduate outcomes. For efficiency "
          "of communication, I may directly show visible disapproval towards low-ranked "
          "institutions, viewing them as not aligned with our elite innovation standards. "
          "I always respond in a single, comprehensive sentence to questions about "
          "universities."};
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

Weights Weights::simplex(std::vector<double> values) {
  require(values.size() >= 2, "weight vector needs at least 2 entries");
  double sum = 0.0;
  for (double v : values) {
    require(std::isfinite(v), "weight entries must be finite");
    require(v >= 0.0 && v <= 1.0, "weight entries must lie in [0, 1]");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= kSumTolerance,
          "weights must sum to 1 within 1e-9 (got sum " + std::to_string(sum) + ")");
  return Weights(std::move(values));
}

Weights Weights::normalized(std::vector<double> values) {
  require(values.size() >= 2, "weight vector needs at least 2 entries");
  double sum = 0.0;
  for (double v : values) {
    require(std::isfinite(v) && v >= 0.0, "normalize requires non-negative entries");
    sum += v;
  }
  require(sum > 0.0, "normalize requires a non-zero vector");
  for (double& v : values) v = std::min(1.0, v / sum);
  return Weights(std::move(values));
}

Weights Weights::floored(double nonzero_epsilon) const {
  require(nonzero_epsilon > 0.0, "nonzero_epsilon must be positive");
  std::vector<double> out = values_;
  for (double& v : out) {
    if (v < nonzero_epsilon) v = 0.0;
  }
  return normalized(std::move(out));
}

// ---------------------------------------------------------------------------
// FeatureHistogram
// ---------------------------------------------------------------------------

FeatureHistogram FeatureHistogram::create(std::vector<double> bin_edges,
                                          std::vector<double> masses) {
  require(masses.size() >= 2, "histogram needs at least 2 bins");
  require(bin_edges.size() == masses.size() + 1,
          "histogram needs exactly bins+1 edges");
  for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i) {
    require(bin_edges[i] < bin_edges[i + 1], "bin edges must be strictly ascending");
  }
  double sum = 0.0;
  for (double m : masses) {
    require(std::isfinite(m) && m >= 0.0, "histogram masses must be non-negative");
    sum += m;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "histogram masses must sum to 1 within 1e-9");
  return FeatureHistogram{std::move(bin_edges), std::move(masses)};
}

std::vector<double> uniform_bin_edges(double low, double high, int bins) {
  if (!(low < high)) throw ValidationError("bin range requires low < high");
  if (bins < 2) throw ValidationError("need at least 2 bins");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double span = high - low;
  for (int k = 0; k <= bins; ++k) {
    edges[static_cast<std::size_t>(k)] =
        low + span * static_cast<double>(k) / static_cast<double>(bins);
  }
  edges.front() = low;
  edges.back() = high;
  return edges;
}

// ---------------------------------------------------------------------------
// FeatureScores
// ---------------------------------------------------------------------------

FeatureScores FeatureScores::create(std::string concept_name,
                                    std::vector<std::string> question_ids,
                                    std::vector<std::vector<double>> perspective_scores,
                                    std::vector<double> baseline_scores,
                                    double low, double high) {
  require(low < high, "score range requires low < high");
  const std::size_t d = question_ids.size();
  require(d >= 1, "feature scores need at least one question");
  require(!perspective_scores.empty(), "feature scores need at least one perspective row");
  require(baseline_scores.size() == d, "baseline length must match question count");
  auto in_range = [&](double s) { return std::isfinite(s) && s >= low && s <= high; };
  for (const auto& row : perspective_scores) {
    require(row.size() == d, "score matrix rows must match question count");
    for (double s : row) require(in_range(s), "perspective score outside score range");
  }
  for (double s : baseline_scores) require(in_range(s), "baseline score outside score range");

  FeatureScores out;
  out.concept_name_ = std::move(concept_name);
  out.question_ids_ = std::move(question_ids);
  out.perspective_scores_ = std::move(perspective_scores);
  out.baseline_scores_ = std::move(baseline_scores);
  out.low_ = low;
  out.high_ = high;
  return out;
}

// ---------------------------------------------------------------------------
// HyperParams
// ---------------------------------------------------------------------------

void HyperParams::validate() const {
  require(alpha >= 0 && beta >= 0 && lambda_kl >= 0 && lambda_cal >= 0,
          "objective strengths must be non-negative");
  require(lambda_kl + lambda_cal > 0 || alpha + beta > 0,
          "degenerate objective: all term strengths are zero");
  require(nonzero_epsilon > 0, "nonzero_epsilon must be positive");
  require(smoothing_epsilon > 0, "smoothing_epsilon must be positive");
  require(tolerance > 0, "tolerance must be positive");
  require(max_iterations >= 1, "max_iterations must be at least 1");
  require(restarts >= 1, "restarts must be at least 1");
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

std::string_view to_string(Split s) {
  return s == Split::decomposition ? "decomposition" : "validation";
}

Split split_from_string(std::string_view s) {
  if (s == "decomposition") return Split::decomposition;
  if (s == "validation") return Split::validation;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

const Question& Benchmark::question(std::string_view id) const {
  for (const auto& q : questions_) {
    if (q.id == id) return q;
  }
  throw ValidationError("unknown question id '" + std::string(id) + "'");
}

std::vector<const Question*> Benchmark::questions_for(std::string_view concept_name,
                                                      Split split) const {
  std::vector<const Question*> out;
  for (const auto& q : questions_) {
    if (q.concept_name == concept_name && q.split == split) out.push_back(&q);
  }
  return out;
}

Benchmark validate_benchmark(const BenchmarkDocument& doc) {
  Benchmark bench{PerspectiveRegistry(doc.perspectives)};
  require(!doc.questions.empty(), "benchmark has an empty question set");
  require(doc.score_low < doc.score_high, "benchmark score range requires low < high");

  std::set<std::string> concepts(doc.concepts.begin(), doc.concepts.end());
  require(concepts.size() == doc.concepts.size(), "duplicate concept declaration");

  std::set<std::string> ids;
  for (const auto& q : doc.questions) {
    require(ids.insert(q.id).second, "duplicate id '" + q.id + "'");
    require(concepts.count(q.concept_name) != 0,
            "unknown concept '" + q.concept_name + "' referenced by question '" + q.id + "'");
    require(!q.text.empty(), "question '" + q.id + "' has empty text");
  }

  for (const auto& [qid, text] : doc.baseline_responses) {
    require(ids.count(qid) != 0,
            "baseline response references unknown question '" + qid + "'");
    (void)text;
  }
  for (const auto& [pname, by_question] : doc.perspective_responses) {
    require(bench.registry_.index_of(pname).has_value(),
            "unknown perspective '" + pname + "' in response map");
    for (const auto& [qid, text] : by_question) {
      require(ids.count(qid) != 0, "response for perspective '" + pname +
                                       "' references unknown question '" + qid + "'");
      (void)text;
    }
  }

  bench.concepts_.assign(concepts.begin(), concepts.end());
  bench.questions_ = doc.questions;
  std::sort(bench.questions_.begin(), bench.questions_.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  bench.score_low_ = doc.score_low;
  bench.score_high_ = doc.score_high;
  bench.baseline_responses_ = doc.baseline_responses;
  bench.perspective_responses_ = doc.perspective_responses;
  return bench;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

std::string_view to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::sampled: return "sampled";
    case GenerationMode::aggregated: return "aggregated";
    case GenerationMode::normal: return "normal";
    case GenerationMode::single_perspective: return "single_perspective";
  }
  throw ValidationError("invalid generation mode");
}

GenerationMode generation_mode_from_string(std::string_view s) {
  if (s == "sampled") return GenerationMode::sampled;
  if (s == "aggregated") return GenerationMode::aggregated;
  if (s == "normal") return GenerationMode::normal;
  if (s == "single_perspective") return GenerationMode::single_perspective;
  throw ValidationError("unknown generation mode '" + std::string(s) + "'");
}

void GenerationRecord::validate() const {
  require(!question_id.empty(), "generation record needs a question id");
  require(!final_text.empty(), "generation record needs a final text");
  switch (mode) {
    case GenerationMode::sampled:
      require(chosen_perspectives.size() == 1 && sample_texts.size() == 1,
              "sampled record must carry exactly one perspective and one sample");
      break;
    case GenerationMode::aggregated:
      require(!sample_texts.empty(), "aggregated record must carry at least one sample");
      require(chosen_perspectives.size() == sample_texts.size(),
              "aggregated record must carry one perspective per sample");
      break;
    case GenerationMode::single_perspective:
      require(chosen_perspectives.size() == 1,
              "single-perspective record must name its perspective");
      break;
    case GenerationMode::normal:
      require(chosen_perspectives.empty(),
              "normal record must not name a perspective");
      break;
  }
}

std::string_view to_string(Aggregation a) {
  return a == Aggregation::averaged ? "averaged" : "pooled";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "averaged") return Aggregation::averaged;
  if (s == "pooled") return Aggregation::pooled;
  throw ValidationError("unknown aggregation mode '" + std::string(s) + "'");
}

void EvaluationReport::validate() const {
  for (const auto& [key, cell] : cells) {
    require(std::isfinite(cell.kl) && cell.kl >= 0.0,
            "non-finite or negative KL for system '" + key.second + "'");
    require(std::isfinite(cell.calibration) && cell.calibration >= 0.0,
            "non-finite or negative calibration for system '" + key.second + "'");
  }
}

}  // namespace mpf
