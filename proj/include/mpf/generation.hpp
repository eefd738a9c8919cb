#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mpf/core.hpp"
#include "mpf/rand.hpp"

namespace mpf::generation {

struct BackendConfig {
  enum class Kind { mock, http };

  Kind kind = Kind::mock;

  // mock
  std::string fixture_path;

  // http chat-completion
  std::string endpoint;
  std::string model;
  std::string api_key_env = "MPF_API_KEY";
  double temperature = 0.7;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int max_concurrent = 4;
  double backoff_base_seconds = 0.5;
  double backoff_factor = 2.0;

  void validate() const;
};

/// Chat-completion contract every backend fulfills.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete(const std::string& system_prompt,
                               const std::string& user_prompt) = 0;
};

/**
 * Fixed prompt pair used for aggregated generation: a constant system
 * instruction plus a user template with a `{samples}` slot that receives the
 * candidate answers, one per line, each prefixed "- ". The hash of both
 * texts is recorded on every aggregated record.
 */
struct AggregationPrompt {
  std::string system_prompt;
  std::string user_template;

  static AggregationPrompt defaults();
  /// Reads a replacement user template (plain text with a {samples} slot).
  static AggregationPrompt from_template_file(const std::string& path);

  std::string render_user(const std::vector<std::string>& samples) const;
  std::string hash_hex() const;
};

/**
 * Fixture-backed backend. Lookup key is the perspective the system prompt
 * belongs to (empty prompt = "normal") plus the question id resolved from
 * the user prompt text; a miss is an error. Calls carrying the aggregation
 * system prompt are answered by joining the listed samples, so aggregation
 * is deterministic and a single sample echoes through unchanged.
 */
class MockBackend : public Backend {
public:
  // (perspective name -> question id -> response text)
  using FixtureMap = std::map<std::string, std::map<std::string, std::string>>;

  MockBackend(FixtureMap fixtures, const PerspectiveRegistry& registry,
              const std::vector<Question>& questions,
              const AggregationPrompt& aggregation);

  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

private:
  FixtureMap fixtures_;
  std::map<std::string, std::string> prompt_to_name_;
  std::map<std::string, std::string> text_to_question_;
  std::string aggregation_system_prompt_;
};

/// OpenAI-style chat-completion client with bounded retries and exponential
/// backoff. The API key is read from the configured environment variable.
class HttpBackend : public Backend {
public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

private:
  BackendConfig config_;
  std::string api_key_;
};

/// Inverse-CDF categorical draw over the registry order; consumes exactly
/// one generator value.
std::size_t sample_perspective(std::span<const double> weights, SplitMix64& rng);
std::size_t sample_perspective(const Weights& weights, SplitMix64& rng);

GenerationRecord generate_sampled(const Question& question,
                                  const PerspectiveRegistry& registry,
                                  const Weights& weights, Backend& backend,
                                  std::uint64_t seed);

GenerationRecord generate_aggregated(const Question& question,
                                     const PerspectiveRegistry& registry,
                                     const Weights& weights, Backend& backend,
                                     int k, std::uint64_t seed,
                                     const AggregationPrompt& aggregation);

struct SuiteFailure {
  GenerationMode mode;
  std::string system;  // perspective name for single_perspective, else mode name
  std::string question_id;
  std::string message;
};

struct SuiteResult {
  std::vector<GenerationRecord> records;  // ordered by (mode, system, question id)
  std::vector<SuiteFailure> failures;
};

struct SuiteOptions {
  std::set<GenerationMode> modes = {GenerationMode::sampled, GenerationMode::aggregated,
                                    GenerationMode::normal,
                                    GenerationMode::single_perspective};
  std::set<Split> splits = {Split::decomposition, Split::validation};
  int k_samples = 3;
  std::uint64_t rng_seed = 42;
};

/**
 * One record per requested mode (single_perspective expands to one system
 * per registry entry) and per question in the selected splits. Seeds are
 * derived per (question, mode), so results do not depend on iteration
 * order. Backend failures are collected per question instead of aborting
 * the remaining work.
 */
SuiteResult generate_suite(const Benchmark& benchmark,
                           const std::map<std::string, Weights>& weights_by_concept,
                           Backend& backend, const AggregationPrompt& aggregation,
                           const SuiteOptions& options);

std::unique_ptr<Backend> make_backend(const BackendConfig& config,
                                      const Benchmark& benchmark,
                                      const AggregationPrompt& aggregation);

}  // namespace mpf::generation
