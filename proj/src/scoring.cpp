#include "mpf/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "httplib.h"

namespace mpf::scoring {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool any_prefix_of(const std::vector<std::string>& stems, const std::string& token) {
  for (const auto& stem : stems) {
    if (token.size() >= stem.size() && token.compare(0, stem.size(), stem) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

void ScorerConfig::validate() const {
  if (!(low < high)) throw ValidationError("scorer range requires low < high");
  if (bins < 2) throw ValidationError("scorer needs at least 2 bins");
  if (kind == Kind::lexicon && lexicon_path.empty()) {
    throw ValidationError("lexicon scorer needs a lexicon path");
  }
  if (kind == Kind::external && endpoint.empty()) {
    throw ValidationError("external scorer needs an endpoint");
  }
}

// ---------------------------------------------------------------------------
// LexiconScorer
// ---------------------------------------------------------------------------

LexiconScorer::LexiconScorer(std::vector<std::string> positive,
                             std::vector<std::string> negative, double low, double high)
    : positive_(std::move(positive)),
      negative_(std::move(negative)),
      low_(low),
      high_(high) {
  if (positive_.empty() || negative_.empty()) {
    throw ValidationError("lexicon needs both positive and negative stems");
  }
  if (!(low_ < high_)) throw ValidationError("scorer range requires low < high");
}

LexiconScorer LexiconScorer::from_stems(std::vector<std::string> positive,
                                        std::vector<std::string> negative,
                                        double low, double high) {
  return LexiconScorer(std::move(positive), std::move(negative), low, high);
}

LexiconScorer LexiconScorer::from_file(const std::string& path, double low, double high) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing lexicon file '" + path + "'");
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string>* section = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line == "#positive") {
      section = &positive;
      continue;
    }
    if (line == "#negative") {
      section = &negative;
      continue;
    }
    if (line.front() == '#') continue;
    if (section == nullptr) {
      throw ValidationError("lexicon entry before any #positive/#negative header");
    }
    std::string stem;
    for (char ch : line) {
      stem.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    section->push_back(std::move(stem));
  }
  return LexiconScorer(std::move(positive), std::move(negative), low, high);
}

double LexiconScorer::score_text(const std::string& text) const {
  if (text.empty()) throw ValidationError("cannot score empty text");
  long positive = 0;
  long negative = 0;
  for (const auto& token : tokenize(text)) {
    if (any_prefix_of(positive_, token)) ++positive;
    if (any_prefix_of(negative_, token)) ++negative;
  }
  const double raw = static_cast<double>(positive - negative) /
                     static_cast<double>(std::max(1l, positive + negative));
  return low_ + (raw + 1.0) / 2.0 * (high_ - low_);
}

// ---------------------------------------------------------------------------
// ExternalScorer
// ---------------------------------------------------------------------------

ExternalScorer::ExternalScorer(std::string endpoint, double low, double high,
                               double timeout_seconds)
    : endpoint_(std::move(endpoint)), low_(low), high_(high),
      timeout_seconds_(timeout_seconds) {}

double ExternalScorer::score_text(const std::string& text) const {
  if (text.empty()) throw ValidationError("cannot score empty text");
  const auto scheme = endpoint_.find("//");
  const auto slash = endpoint_.find('/', scheme == std::string::npos ? 0 : scheme + 2);
  const std::string host = endpoint_.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : endpoint_.substr(slash);

  httplib::Client client(host);
  client.set_connection_timeout(static_cast<time_t>(timeout_seconds_),
                                static_cast<time_t>(timeout_seconds_ * 1e6) % 1000000);
  client.set_read_timeout(static_cast<time_t>(timeout_seconds_), 0);

  nlohmann::json body{{"text", text}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw std::runtime_error("external scorer transport failure contacting " + endpoint_);
  }
  if (res->status != 200) {
    throw std::runtime_error("external scorer returned HTTP " + std::to_string(res->status));
  }
  const auto parsed = nlohmann::json::parse(res->body);
  const double score = parsed.at("score").get<double>();
  if (!(score >= low_ && score <= high_)) {
    throw std::runtime_error("external scorer returned out-of-range score");
  }
  return score;
}

std::unique_ptr<FeatureScorer> make_scorer(const ScorerConfig& config) {
  config.validate();
  if (config.kind == ScorerConfig::Kind::lexicon) {
    return std::make_unique<LexiconScorer>(
        LexiconScorer::from_file(config.lexicon_path, config.low, config.high));
  }
  return std::make_unique<ExternalScorer>(config.endpoint, config.low, config.high,
                                          config.timeout_seconds);
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

std::size_t bin_index(double score, const std::vector<double>& edges) {
  if (score < edges.front() || score > edges.back()) {
    throw ValidationError("score outside histogram range");
  }
  // Largest k with edges[k] <= score; the top edge closes into the last bin.
  auto it = std::upper_bound(edges.begin(), edges.end(), score);
  std::size_t idx = static_cast<std::size_t>(it - edges.begin());
  if (idx > 0) --idx;
  return std::min(idx, edges.size() - 2);
}

FeatureHistogram build_histogram(const std::vector<double>& scores,
                                 const ScorerConfig& config) {
  config.validate();
  if (scores.empty()) throw ValidationError("cannot build a histogram from no scores");
  const std::vector<double> edges = uniform_bin_edges(config.low, config.high, config.bins);
  std::vector<double> masses(static_cast<std::size_t>(config.bins), 0.0);
  for (double s : scores) masses[bin_index(s, edges)] += 1.0;
  for (double& m : masses) m /= static_cast<double>(scores.size());
  return FeatureHistogram::create(edges, std::move(masses));
}

// ---------------------------------------------------------------------------
// score_benchmark
// ---------------------------------------------------------------------------

std::map<std::string, ScoredConcept> score_benchmark(const Benchmark& benchmark,
                                                     const FeatureScorer& scorer,
                                                     const ScorerConfig& config) {
  config.validate();
  const auto& registry = benchmark.perspectives();
  const auto& by_perspective = benchmark.perspective_responses();
  const auto& baseline = benchmark.baseline_responses();

  auto response_score = [&](const std::string& perspective, const std::string& qid) {
    auto pit = by_perspective.find(perspective);
    if (pit == by_perspective.end()) {
      throw ValidationError("missing responses for perspective '" + perspective + "'");
    }
    auto qit = pit->second.find(qid);
    if (qit == pit->second.end()) {
      throw ValidationError("missing response for perspective '" + perspective +
                            "', question '" + qid + "'");
    }
    return scorer.score_text(qit->second);
  };
  auto baseline_score = [&](const std::string& qid) {
    auto it = baseline.find(qid);
    if (it == baseline.end()) {
      throw ValidationError("missing baseline response for question '" + qid + "'");
    }
    return scorer.score_text(it->second);
  };

  std::map<std::string, ScoredConcept> out;
  for (const auto& concept_name : benchmark.concepts()) {
    auto build_split = [&](Split split) -> std::optional<FeatureScores> {
      std::vector<std::string> qids;
      for (const Question* q : benchmark.questions_for(concept_name, split)) {
        qids.push_back(q->id);
      }
      if (qids.empty()) return std::nullopt;
      std::vector<std::vector<double>> matrix(registry.size());
      for (std::size_t i = 0; i < registry.size(); ++i) {
        for (const auto& qid : qids) {
          matrix[i].push_back(response_score(registry.at(i).name, qid));
        }
      }
      std::vector<double> base;
      for (const auto& qid : qids) base.push_back(baseline_score(qid));
      return FeatureScores::create(concept_name, qids, std::move(matrix),
                                   std::move(base), config.low, config.high);
    };

    std::optional<FeatureScores> decomposition = build_split(Split::decomposition);
    if (!decomposition) {
      throw ValidationError("concept '" + concept_name +
                            "' has no decomposition-split questions");
    }

    ScoredConcept scored{std::move(*decomposition), build_split(Split::validation), {}, {}};

    for (std::size_t i = 0; i < registry.size(); ++i) {
      std::vector<double> row(scored.decomposition.matrix()[i]);
      scored.perspective_histograms.push_back(build_histogram(row, config));
    }
    scored.baseline_histogram = build_histogram(scored.decomposition.baseline(), config);
    out.emplace(concept_name, std::move(scored));
  }
  return out;
}

}  // namespace mpf::scoring
