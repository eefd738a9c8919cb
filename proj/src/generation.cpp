#include "mpf/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "httplib.h"

namespace mpf::generation {

namespace {

constexpr std::string_view kSamplesSlot = "{samples}";

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void BackendConfig::validate() const {
  if (kind == Kind::mock) {
    if (fixture_path.empty()) throw ValidationError("mock backend needs a fixture file");
    return;
  }
  if (endpoint.empty() || model.empty()) {
    throw ValidationError("http backend needs endpoint and model");
  }
  if (max_retries < 0 || max_concurrent < 1) {
    throw ValidationError("http backend retry/concurrency settings out of range");
  }
}

// ---------------------------------------------------------------------------
// AggregationPrompt
// ---------------------------------------------------------------------------

AggregationPrompt AggregationPrompt::defaults() {
  AggregationPrompt p;
  p.system_prompt =
      "You are a careful editor. You will be given several candidate answers to the "
      "same question. Combine them into one balanced, single-paragraph response that "
      "stays faithful to the candidates, preserves their points of agreement and "
      "disagreement, and adds no new claims of your own.";
  p.user_template =
      "Candidate answers:\n{samples}\nCombine the candidate answers above into one "
      "balanced response.";
  return p;
}

AggregationPrompt AggregationPrompt::from_template_file(const std::string& path) {
  AggregationPrompt p = defaults();
  p.user_template = read_text_file(path);
  if (p.user_template.find(kSamplesSlot) == std::string::npos) {
    throw ValidationError("aggregation template is missing the {samples} slot");
  }
  return p;
}

std::string AggregationPrompt::render_user(const std::vector<std::string>& samples) const {
  std::string block;
  for (const auto& s : samples) {
    block += "- ";
    block += s;
    block += '\n';
  }
  std::string out = user_template;
  const auto pos = out.find(kSamplesSlot);
  if (pos == std::string::npos) {
    throw ValidationError("aggregation template is missing the {samples} slot");
  }
  out.replace(pos, kSamplesSlot.size(), block);
  return out;
}

std::string AggregationPrompt::hash_hex() const {
  const std::uint64_t h = fnv1a64(system_prompt + "\x1f" + user_template);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

MockBackend::MockBackend(FixtureMap fixtures, const PerspectiveRegistry& registry,
                         const std::vector<Question>& questions,
                         const AggregationPrompt& aggregation)
    : fixtures_(std::move(fixtures)),
      aggregation_system_prompt_(aggregation.system_prompt) {
  for (const auto& p : registry.all()) prompt_to_name_[p.system_prompt] = p.name;
  for (const auto& q : questions) {
    auto [it, inserted] = text_to_question_.emplace(q.text, q.id);
    if (!inserted) {
      throw ValidationError("mock backend requires distinct question texts; '" + q.id +
                            "' duplicates '" + it->second + "'");
    }
  }
}

std::string MockBackend::complete(const std::string& system_prompt,
                                  const std::string& user_prompt) {
  if (system_prompt == aggregation_system_prompt_) {
    // Deterministic aggregation: join the "- " sample lines in order.
    std::string joined;
    std::istringstream lines(user_prompt);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.rfind("- ", 0) == 0) {
        if (!joined.empty()) joined += ' ';
        joined += line.substr(2);
      }
    }
    if (joined.empty()) {
      throw std::runtime_error("mock aggregation saw no candidate samples");
    }
    return joined;
  }

  std::string name = "normal";
  if (!system_prompt.empty()) {
    auto it = prompt_to_name_.find(system_prompt);
    if (it == prompt_to_name_.end()) {
      throw std::runtime_error("mock backend: unrecognized system prompt");
    }
    name = it->second;
  }
  auto qit = text_to_question_.find(user_prompt);
  if (qit == text_to_question_.end()) {
    throw std::runtime_error("mock backend: unrecognized question text '" + user_prompt + "'");
  }

  auto pit = fixtures_.find(name);
  if (pit != fixtures_.end()) {
    auto rit = pit->second.find(qit->second);
    if (rit != pit->second.end()) return rit->second;
  }
  throw std::runtime_error("mock fixture miss for (" + name + ", " + qit->second + ")");
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  if (const char* key = std::getenv(config_.api_key_env.c_str())) {
    api_key_ = key;
  }
}

std::string HttpBackend::complete(const std::string& system_prompt,
                                  const std::string& user_prompt) {
  const auto scheme = config_.endpoint.find("//");
  const auto slash =
      config_.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 2);
  const std::string host = config_.endpoint.substr(0, slash);
  const std::string path =
      slash == std::string::npos ? "/v1/chat/completions" : config_.endpoint.substr(slash);

  nlohmann::json messages = nlohmann::json::array();
  if (!system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", user_prompt}});
  const nlohmann::json request{{"model", config_.model},
                               {"messages", messages},
                               {"temperature", config_.temperature}};
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_base_seconds *
                           std::pow(config_.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(host);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error contacting " + host;
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + host;
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    const auto parsed = nlohmann::json::parse(res->body);
    const std::string content =
        parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    if (content.empty()) {
      last_error = "empty completion content";
      continue;
    }
    return content;
  }
  throw std::runtime_error("chat completion failed after " +
                           std::to_string(config_.max_retries + 1) + " attempts: " +
                           last_error);
}

// ---------------------------------------------------------------------------
// Sampling and records
// ---------------------------------------------------------------------------

std::size_t sample_perspective(std::span<const double> weights, SplitMix64& rng) {
  const double u = rng.next_double();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative) return i;
  }
  return weights.size() - 1;  // u landed in the rounding gap below 1
}

std::size_t sample_perspective(const Weights& weights, SplitMix64& rng) {
  return sample_perspective(weights.values(), rng);
}

GenerationRecord generate_sampled(const Question& question,
                                  const PerspectiveRegistry& registry,
                                  const Weights& weights, Backend& backend,
                                  std::uint64_t seed) {
  if (weights.size() != registry.size()) {
    throw ValidationError("weights are not aligned with the perspective registry");
  }
  SplitMix64 rng(seed);
  const std::size_t idx = sample_perspective(weights, rng);
  const Perspective& p = registry.at(idx);

  GenerationRecord record;
  record.question_id = question.id;
  record.mode = GenerationMode::sampled;
  record.chosen_perspectives = {p.name};
  record.rng_seed_used = seed;
  try {
    record.sample_texts = {backend.complete(p.system_prompt, question.text)};
  } catch (const std::exception& e) {
    throw std::runtime_error("question '" + question.id + "': " + e.what());
  }
  record.final_text = record.sample_texts.front();
  record.validate();
  return record;
}

GenerationRecord generate_aggregated(const Question& question,
                                     const PerspectiveRegistry& registry,
                                     const Weights& weights, Backend& backend, int k,
                                     std::uint64_t seed,
                                     const AggregationPrompt& aggregation) {
  if (k < 1) throw ValidationError("aggregated generation needs k >= 1 samples");
  if (weights.size() != registry.size()) {
    throw ValidationError("weights are not aligned with the perspective registry");
  }
  SplitMix64 rng(seed);

  GenerationRecord record;
  record.question_id = question.id;
  record.mode = GenerationMode::aggregated;
  record.rng_seed_used = seed;
  record.template_hash = aggregation.hash_hex();
  try {
    for (int s = 0; s < k; ++s) {
      const Perspective& p = registry.at(sample_perspective(weights, rng));
      record.chosen_perspectives.push_back(p.name);
      record.sample_texts.push_back(backend.complete(p.system_prompt, question.text));
    }
    record.final_text = backend.complete(aggregation.system_prompt,
                                         aggregation.render_user(record.sample_texts));
  } catch (const std::exception& e) {
    throw std::runtime_error("question '" + question.id + "': " + e.what());
  }
  record.validate();
  return record;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

SuiteResult generate_suite(const Benchmark& benchmark,
                           const std::map<std::string, Weights>& weights_by_concept,
                           Backend& backend, const AggregationPrompt& aggregation,
                           const SuiteOptions& options) {
  const auto& registry = benchmark.perspectives();
  if (options.k_samples < 1) throw ValidationError("k_samples must be >= 1");

  // (mode, system) pairs in a fixed order: sampled, aggregated, normal, then
  // one single-perspective system per registry entry.
  std::vector<std::pair<GenerationMode, std::string>> systems;
  if (options.modes.count(GenerationMode::sampled)) {
    systems.emplace_back(GenerationMode::sampled, "sampled");
  }
  if (options.modes.count(GenerationMode::aggregated)) {
    systems.emplace_back(GenerationMode::aggregated, "aggregated");
  }
  if (options.modes.count(GenerationMode::normal)) {
    systems.emplace_back(GenerationMode::normal, "normal");
  }
  if (options.modes.count(GenerationMode::single_perspective)) {
    for (const auto& p : registry.all()) {
      systems.emplace_back(GenerationMode::single_perspective, "single:" + p.name);
    }
  }

  std::vector<const Question*> questions;
  for (const auto& q : benchmark.questions()) {
    if (options.splits.count(q.split)) questions.push_back(&q);
  }

  auto weights_for = [&](const std::string& concept_name) -> const Weights& {
    auto it = weights_by_concept.find(concept_name);
    if (it == weights_by_concept.end()) {
      throw ValidationError("no weights available for concept '" + concept_name + "'");
    }
    return it->second;
  };

  // Weighted modes need every referenced concept covered before any backend work.
  const bool needs_weights = options.modes.count(GenerationMode::sampled) ||
                             options.modes.count(GenerationMode::aggregated);
  if (needs_weights) {
    for (const Question* q : questions) (void)weights_for(q->concept_name);
  }

  SuiteResult out;
  for (const auto& [mode, system] : systems) {
    for (const Question* q : questions) {
      const std::uint64_t seed = derive_seed(options.rng_seed, q->id, system);
      try {
        switch (mode) {
          case GenerationMode::sampled:
            out.records.push_back(generate_sampled(*q, registry,
                                                   weights_for(q->concept_name),
                                                   backend, seed));
            break;
          case GenerationMode::aggregated:
            out.records.push_back(generate_aggregated(*q, registry,
                                                      weights_for(q->concept_name),
                                                      backend, options.k_samples, seed,
                                                      aggregation));
            break;
          case GenerationMode::normal: {
            GenerationRecord record;
            record.question_id = q->id;
            record.mode = GenerationMode::normal;
            record.rng_seed_used = seed;
            record.final_text = backend.complete("", q->text);
            record.validate();
            out.records.push_back(std::move(record));
            break;
          }
          case GenerationMode::single_perspective: {
            const std::string name = system.substr(std::string("single:").size());
            const auto idx = registry.index_of(name);
            GenerationRecord record;
            record.question_id = q->id;
            record.mode = GenerationMode::single_perspective;
            record.chosen_perspectives = {name};
            record.rng_seed_used = seed;
            record.final_text =
                backend.complete(registry.at(*idx).system_prompt, q->text);
            record.validate();
            out.records.push_back(std::move(record));
            break;
          }
        }
      } catch (const std::exception& e) {
        out.failures.push_back({mode, system, q->id, e.what()});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const BackendConfig& config,
                                      const Benchmark& benchmark,
                                      const AggregationPrompt& aggregation) {
  config.validate();
  if (config.kind == BackendConfig::Kind::http) {
    return std::make_unique<HttpBackend>(config);
  }
  const auto doc = nlohmann::json::parse(read_text_file(config.fixture_path));
  MockBackend::FixtureMap fixtures;
  for (const auto& [perspective, responses] : doc.at("fixtures").items()) {
    for (const auto& [qid, text] : responses.items()) {
      fixtures[perspective][qid] = text.get<std::string>();
    }
  }
  return std::make_unique<MockBackend>(std::move(fixtures), benchmark.perspectives(),
                                       benchmark.questions(), aggregation);
}

}  // namespace mpf::generation
