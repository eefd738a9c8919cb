#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpf/pipeline.hpp"

namespace mpf::pipeline {

using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

/// Rounds through "%.9g" so serialized reals are byte-stable at 9
/// significant digits.
double round9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw ValidationError("failed writing file '" + path + "'");
}

ordered_json parse_file(const std::string& path) {
  try {
    return ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("file '" + path + "' is not valid JSON: " + e.what());
  }
}

void check_schema(const ordered_json& doc, const std::string& path) {
  if (doc.value("schema_version", 0) != kSchemaVersion) {
    throw ValidationError("file '" + path + "' has an unsupported schema_version");
  }
}

void dump_to(const ordered_json& doc, const std::string& path) {
  write_file(path, doc.dump(2) + "\n");
}

ordered_json hyperparams_to_json(const HyperParams& hp) {
  return ordered_json{{"alpha", round9(hp.alpha)},
                      {"beta", round9(hp.beta)},
                      {"lambda_kl", round9(hp.lambda_kl)},
                      {"lambda_cal", round9(hp.lambda_cal)},
                      {"nonzero_epsilon", round9(hp.nonzero_epsilon)},
                      {"smoothing_epsilon", round9(hp.smoothing_epsilon)},
                      {"restarts", hp.restarts},
                      {"max_iterations", hp.max_iterations},
                      {"tolerance", round9(hp.tolerance)},
                      {"rng_seed", hp.rng_seed}};
}

HyperParams hyperparams_from_json(const ordered_json& j) {
  HyperParams hp;
  hp.alpha = j.value("alpha", hp.alpha);
  hp.beta = j.value("beta", hp.beta);
  hp.lambda_kl = j.value("lambda_kl", hp.lambda_kl);
  hp.lambda_cal = j.value("lambda_cal", hp.lambda_cal);
  hp.nonzero_epsilon = j.value("nonzero_epsilon", hp.nonzero_epsilon);
  hp.smoothing_epsilon = j.value("smoothing_epsilon", hp.smoothing_epsilon);
  hp.restarts = j.value("restarts", hp.restarts);
  hp.max_iterations = j.value("max_iterations", hp.max_iterations);
  hp.tolerance = j.value("tolerance", hp.tolerance);
  hp.rng_seed = j.value("rng_seed", hp.rng_seed);
  hp.validate();
  return hp;
}

}  // namespace

// ---------------------------------------------------------------------------
// Benchmark file
// ---------------------------------------------------------------------------

Benchmark load_benchmark(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);

  BenchmarkDocument out;
  if (!doc.contains("perspectives") || doc["perspectives"] == "default") {
    out.perspectives = default_perspectives().all();
  } else {
    for (const auto& p : doc["perspectives"]) {
      out.perspectives.push_back(
          {p.at("name").get<std::string>(), p.at("system_prompt").get<std::string>()});
    }
  }

  if (doc.contains("score_range")) {
    out.score_low = doc["score_range"].at(0).get<double>();
    out.score_high = doc["score_range"].at(1).get<double>();
  }

  for (const auto& c : doc.at("concepts")) {
    out.concepts.push_back(c.get<std::string>());
  }

  if (doc.contains("questions")) {
    for (const auto& q : doc["questions"]) {
      out.questions.push_back({q.at("id").get<std::string>(),
                               q.at("concept").get<std::string>(),
                               q.at("text").get<std::string>(),
                               split_from_string(q.at("split").get<std::string>())});
    }
  }

  if (doc.contains("templates")) {
    const std::string placeholder =
        doc.value("placeholder", std::string(kDefaultPlaceholder));
    std::vector<QuestionTemplate> templates;
    for (const auto& t : doc["templates"]) {
      templates.push_back({t.at("id").get<std::string>(), t.at("text").get<std::string>(),
                           split_from_string(t.at("split").get<std::string>())});
    }
    for (auto& q : expand_counterfactual(templates, out.concepts, placeholder)) {
      out.questions.push_back(std::move(q));
    }
  }

  if (doc.contains("baseline_responses")) {
    for (const auto& [qid, text] : doc["baseline_responses"].items()) {
      out.baseline_responses[qid] = text.get<std::string>();
    }
  }
  if (doc.contains("perspective_responses")) {
    for (const auto& [name, responses] : doc["perspective_responses"].items()) {
      for (const auto& [qid, text] : responses.items()) {
        out.perspective_responses[name][qid] = text.get<std::string>();
      }
    }
  }

  return validate_benchmark(out);
}

void save_benchmark(const Benchmark& benchmark, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["score_range"] = {round9(benchmark.score_low()), round9(benchmark.score_high())};
  ordered_json perspectives = ordered_json::array();
  for (const auto& p : benchmark.perspectives().all()) {
    perspectives.push_back({{"name", p.name}, {"system_prompt", p.system_prompt}});
  }
  doc["perspectives"] = std::move(perspectives);
  doc["concepts"] = benchmark.concepts();
  ordered_json questions = ordered_json::array();
  for (const auto& q : benchmark.questions()) {
    questions.push_back({{"id", q.id},
                         {"concept", q.concept_name},
                         {"text", q.text},
                         {"split", std::string(to_string(q.split))}});
  }
  doc["questions"] = std::move(questions);
  if (!benchmark.baseline_responses().empty()) {
    doc["baseline_responses"] = benchmark.baseline_responses();
  }
  if (!benchmark.perspective_responses().empty()) {
    doc["perspective_responses"] = benchmark.perspective_responses();
  }
  dump_to(doc, path);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

RunManifest load_manifest(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);

  RunManifest m;
  m.benchmark_path = doc.at("benchmark").get<std::string>();

  if (doc.contains("hyperparams_file")) {
    const ordered_json hp = parse_file(doc["hyperparams_file"].get<std::string>());
    m.hyperparams = hyperparams_from_json(hp);
  } else if (doc.contains("hyperparams")) {
    m.hyperparams = hyperparams_from_json(doc["hyperparams"]);
  }

  if (doc.contains("scorer")) {
    const auto& s = doc["scorer"];
    const std::string kind = s.value("kind", "lexicon");
    m.scorer.kind = kind == "external" ? scoring::ScorerConfig::Kind::external
                                       : scoring::ScorerConfig::Kind::lexicon;
    m.scorer.bins = s.value("bins", m.scorer.bins);
    m.scorer.lexicon_path = s.value("lexicon", m.scorer.lexicon_path);
    m.scorer.endpoint = s.value("endpoint", m.scorer.endpoint);
    m.scorer.timeout_seconds = s.value("timeout_seconds", m.scorer.timeout_seconds);
  }

  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    const std::string kind = b.value("kind", "mock");
    m.backend.kind = kind == "http" ? generation::BackendConfig::Kind::http
                                    : generation::BackendConfig::Kind::mock;
    m.backend.fixture_path = b.value("fixture", m.backend.fixture_path);
    m.backend.endpoint = b.value("endpoint", m.backend.endpoint);
    m.backend.model = b.value("model", m.backend.model);
    m.backend.api_key_env = b.value("api_key_env", m.backend.api_key_env);
    m.backend.temperature = b.value("temperature", m.backend.temperature);
    m.backend.timeout_seconds = b.value("timeout_seconds", m.backend.timeout_seconds);
    m.backend.max_retries = b.value("max_retries", m.backend.max_retries);
    m.backend.max_concurrent = b.value("max_concurrent", m.backend.max_concurrent);
    m.backend.backoff_base_seconds =
        b.value("backoff_base_seconds", m.backend.backoff_base_seconds);
    m.backend.backoff_factor = b.value("backoff_factor", m.backend.backoff_factor);
  }

  m.rng_seed = doc.value("rng_seed", m.rng_seed);
  m.hyperparams.rng_seed = m.rng_seed;
  m.out_dir = doc.value("out_dir", m.out_dir);
  m.aggregation_template_path = doc.value("aggregation_template", std::string());
  m.headline = aggregation_from_string(doc.value("headline", "averaged"));

  m.suite.rng_seed = m.rng_seed;
  m.suite.k_samples = doc.value("k_samples", m.suite.k_samples);
  if (doc.contains("modes")) {
    m.suite.modes.clear();
    for (const auto& mode : doc["modes"]) {
      const std::string name = mode.get<std::string>();
      if (name == "perspectives") {
        m.suite.modes.insert(GenerationMode::single_perspective);
      } else {
        m.suite.modes.insert(generation_mode_from_string(name));
      }
    }
  }
  return m;
}

std::string manifest_to_json(const RunManifest& m) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["benchmark"] = m.benchmark_path;
  doc["hyperparams"] = hyperparams_to_json(m.hyperparams);
  doc["scorer"] = ordered_json{
      {"kind", m.scorer.kind == scoring::ScorerConfig::Kind::external ? "external"
                                                                      : "lexicon"},
      {"bins", m.scorer.bins},
      {"lexicon", m.scorer.lexicon_path},
      {"endpoint", m.scorer.endpoint}};
  doc["backend"] = ordered_json{
      {"kind", m.backend.kind == generation::BackendConfig::Kind::http ? "http" : "mock"},
      {"fixture", m.backend.fixture_path},
      {"endpoint", m.backend.endpoint},
      {"model", m.backend.model},
      {"api_key_env", m.backend.api_key_env},
      {"temperature", round9(m.backend.temperature)}};
  doc["rng_seed"] = m.rng_seed;
  doc["out_dir"] = m.out_dir;
  doc["k_samples"] = m.suite.k_samples;
  ordered_json modes = ordered_json::array();
  for (const auto mode : m.suite.modes) {
    modes.push_back(std::string(to_string(mode)));
  }
  doc["modes"] = std::move(modes);
  doc["aggregation_template"] = m.aggregation_template_path;
  doc["headline"] = std::string(to_string(m.headline));
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Weights file
// ---------------------------------------------------------------------------

void save_weights_file(const WeightsFile& file, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["split_used"] = std::string(to_string(Split::decomposition));
  doc["hyperparams"] = hyperparams_to_json(file.hyperparams);
  doc["perspectives"] = file.perspective_names;
  ordered_json results = ordered_json::array();
  for (const auto& [concept_name, res] : file.results) {
    ordered_json weights = ordered_json::array();
    for (double w : res.weights) weights.push_back(round9(w));
    results.push_back(ordered_json{
        {"concept", concept_name},
        {"weights", std::move(weights)},
        {"objective", round9(res.breakdown.total)},
        {"breakdown", ordered_json{{"kl", round9(res.breakdown.kl)},
                                   {"calibration", round9(res.breakdown.calibration)},
                                   {"l2", round9(res.breakdown.l2)},
                                   {"sparsity", round9(res.breakdown.sparsity)}}},
        {"converged", res.converged},
        {"iterations_used", res.iterations_used},
        {"restart_index", res.restart_index}});
  }
  doc["results"] = std::move(results);
  dump_to(doc, path);
}

WeightsFile load_weights_file(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);
  WeightsFile out;
  out.hyperparams = hyperparams_from_json(doc.at("hyperparams"));
  for (const auto& name : doc.at("perspectives")) {
    out.perspective_names.push_back(name.get<std::string>());
  }
  for (const auto& r : doc.at("results")) {
    DecompositionResult res;
    res.concept_name = r.at("concept").get<std::string>();
    for (const auto& w : r.at("weights")) res.weights.push_back(w.get<double>());
    // 9-digit serialization can leave the sum off by ~1e-8; renormalize.
    res.weights = Weights::normalized(res.weights).vec();
    res.breakdown.kl = r.at("breakdown").at("kl").get<double>();
    res.breakdown.calibration = r.at("breakdown").at("calibration").get<double>();
    res.breakdown.l2 = r.at("breakdown").at("l2").get<double>();
    res.breakdown.sparsity = r.at("breakdown").at("sparsity").get<double>();
    res.breakdown.total = r.at("objective").get<double>();
    res.converged = r.at("converged").get<bool>();
    res.iterations_used = r.at("iterations_used").get<int>();
    res.restart_index = r.at("restart_index").get<int>();
    out.results.emplace(res.concept_name, std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records file
// ---------------------------------------------------------------------------

void save_records_file(const std::vector<GenerationRecord>& records,
                       const std::string& template_hash, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["aggregation_template_hash"] = template_hash;
  ordered_json list = ordered_json::array();
  for (const auto& r : records) {
    list.push_back(ordered_json{{"question_id", r.question_id},
                                {"mode", std::string(to_string(r.mode))},
                                {"chosen_perspectives", r.chosen_perspectives},
                                {"sample_texts", r.sample_texts},
                                {"final_text", r.final_text},
                                {"rng_seed_used", r.rng_seed_used},
                                {"template_hash", r.template_hash}});
  }
  doc["records"] = std::move(list);
  dump_to(doc, path);
}

std::vector<GenerationRecord> load_records_file(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);
  std::vector<GenerationRecord> out;
  for (const auto& r : doc.at("records")) {
    GenerationRecord record;
    record.question_id = r.at("question_id").get<std::string>();
    record.mode = generation_mode_from_string(r.at("mode").get<std::string>());
    for (const auto& p : r.at("chosen_perspectives")) {
      record.chosen_perspectives.push_back(p.get<std::string>());
    }
    for (const auto& s : r.at("sample_texts")) {
      record.sample_texts.push_back(s.get<std::string>());
    }
    record.final_text = r.at("final_text").get<std::string>();
    record.rng_seed_used = r.at("rng_seed_used").get<std::uint64_t>();
    record.template_hash = r.value("template_hash", std::string());
    record.validate();
    out.push_back(std::move(record));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scores file
// ---------------------------------------------------------------------------

void save_scores_file(const ScoreTable& table, const scoring::ScorerConfig& config,
                      const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scorer"] = ordered_json{
      {"kind",
       config.kind == scoring::ScorerConfig::Kind::external ? "external" : "lexicon"},
      {"bins", config.bins},
      {"range", {round9(config.low), round9(config.high)}}};
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    rows.push_back(ordered_json{{"question_id", row.question_id},
                                {"concept", row.concept_name},
                                {"split", std::string(to_string(row.split))},
                                {"system", row.system},
                                {"score", round9(row.score)}});
  }
  doc["rows"] = std::move(rows);
  dump_to(doc, path);
}

ScoreTable load_scores_file(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);
  ScoreTable out;
  for (const auto& r : doc.at("rows")) {
    out.rows.push_back({r.at("question_id").get<std::string>(),
                        r.at("concept").get<std::string>(),
                        split_from_string(r.at("split").get<std::string>()),
                        r.at("system").get<std::string>(),
                        r.at("score").get<double>()});
  }
  return out;
}

scoring::ScorerConfig load_scores_scorer_config(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);
  const auto& s = doc.at("scorer");
  scoring::ScorerConfig config;
  config.kind = s.value("kind", "lexicon") == "external"
                    ? scoring::ScorerConfig::Kind::external
                    : scoring::ScorerConfig::Kind::lexicon;
  config.bins = s.at("bins").get<int>();
  config.low = s.at("range").at(0).get<double>();
  config.high = s.at("range").at(1).get<double>();
  return config;
}

// ---------------------------------------------------------------------------
// Report file
// ---------------------------------------------------------------------------

namespace {

ordered_json report_to_json(const EvaluationReport& report) {
  ordered_json cells = ordered_json::array();
  for (const auto& [key, cell] : report.cells) {
    cells.push_back(ordered_json{{"split", key.first},
                                 {"system", key.second},
                                 {"kl", round9(cell.kl)},
                                 {"calibration", round9(cell.calibration)}});
  }
  return ordered_json{{"aggregation", std::string(to_string(report.aggregation_mode))},
                      {"cells", std::move(cells)}};
}

EvaluationReport report_from_json(const ordered_json& j) {
  EvaluationReport report;
  report.aggregation_mode = aggregation_from_string(j.at("aggregation").get<std::string>());
  for (const auto& c : j.at("cells")) {
    report.cells[{c.at("split").get<std::string>(), c.at("system").get<std::string>()}] =
        {c.at("kl").get<double>(), c.at("calibration").get<double>()};
  }
  report.validate();
  return report;
}

}  // namespace

void save_report_file(const ReportFile& report, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["seed"] = report.seed;
  doc["config_hash"] = report.config_hash;
  doc["headline"] = std::string(to_string(report.headline));
  doc["reports"] = ordered_json{{"averaged", report_to_json(report.averaged)},
                                {"pooled", report_to_json(report.pooled)}};
  dump_to(doc, path);
}

ReportFile load_report_file(const std::string& path) {
  const ordered_json doc = parse_file(path);
  check_schema(doc, path);
  ReportFile out;
  out.seed = doc.at("seed").get<std::uint64_t>();
  out.config_hash = doc.at("config_hash").get<std::string>();
  out.headline = aggregation_from_string(doc.at("headline").get<std::string>());
  out.averaged = report_from_json(doc.at("reports").at("averaged"));
  out.pooled = report_from_json(doc.at("reports").at("pooled"));
  return out;
}

}  // namespace mpf::pipeline
