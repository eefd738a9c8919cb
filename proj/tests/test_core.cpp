#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpf/core.hpp"
#include "mpf/rand.hpp"

using namespace mpf;

namespace {

BenchmarkDocument small_document() {
  BenchmarkDocument doc;
  doc.perspectives = {{"up", "look up"}, {"down", "look down"}};
  doc.concepts = {"beta", "alpha"};
  doc.questions = {
      {"q2", "beta", "about beta?", Split::decomposition},
      {"q1", "alpha", "about alpha?", Split::decomposition},
      {"q3", "alpha", "more alpha?", Split::validation},
      {"q4", "beta", "more beta?", Split::validation},
  };
  return doc;
}

}  // namespace

TEST_CASE("perspective registry") {
  SUBCASE("defaults ship five named perspectives in canonical order") {
    const auto registry = default_perspectives();
    REQUIRE(registry.size() == 5);
    const std::vector<std::string> expected = {"optimist", "realist", "empathetic",
                                               "cautious", "critical"};
    CHECK(registry.names() == expected);
    for (const auto& p : registry.all()) CHECK(!p.system_prompt.empty());
    CHECK(registry.index_of("cautious") == 3);
    CHECK(!registry.index_of("hr_baseline").has_value());
  }
  SUBCASE("hr persona is not a registry member") {
    const auto hr = hr_baseline_persona();
    CHECK(hr.name == "hr_baseline");
    CHECK(!hr.system_prompt.empty());
  }
  SUBCASE("duplicate names rejected") {
    CHECK_THROWS_AS(PerspectiveRegistry({{"a", "x"}, {"a", "y"}}), ValidationError);
  }
  SUBCASE("empty system prompt rejected") {
    CHECK_THROWS_AS(PerspectiveRegistry(std::vector<Perspective>{{"a", ""}}),
                    ValidationError);
  }
}

TEST_CASE("weights simplex validation") {
  SUBCASE("accepts a valid vector") {
    const auto w = Weights::simplex({0.25, 0.75});
    CHECK(w.size() == 2);
    CHECK(w[1] == 0.75);
  }
  SUBCASE("rejects sums off by more than 1e-9") {
    CHECK_THROWS_AS(Weights::simplex({0.5, 0.5 + 1e-7}), ValidationError);
  }
  SUBCASE("rejects negatives and values above one") {
    CHECK_THROWS_AS(Weights::simplex({-0.1, 1.1}), ValidationError);
    CHECK_THROWS_AS(Weights::simplex({1.5, -0.5}), ValidationError);
  }
  SUBCASE("rejects n=1") {
    CHECK_THROWS_AS(Weights::simplex({1.0}), ValidationError);
  }
  SUBCASE("normalize maps any non-negative non-zero vector onto the simplex") {
    SplitMix64 rng(7);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> v(4);
      for (double& x : v) x = rng.next_double() * 10.0;
      v[0] += 1e-6;
      const auto w = Weights::normalized(v);
      double sum = 0.0;
      for (double x : w.values()) sum += x;
      CHECK(std::abs(sum - 1.0) <= 1e-9);

      // idempotent
      const auto again = Weights::normalized(w.vec());
      for (std::size_t k = 0; k < w.size(); ++k) {
        CHECK(again[k] == doctest::Approx(w[k]).epsilon(1e-15));
      }
    }
  }
  SUBCASE("normalize rejects the zero vector") {
    CHECK_THROWS_AS(Weights::normalized({0.0, 0.0}), ValidationError);
  }
  SUBCASE("flooring zeroes small entries and renormalizes") {
    const auto w = Weights::simplex({0.9995, 0.0005});
    const auto f = w.floored(1e-3);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 0.0);
  }
}

TEST_CASE("feature histogram validation") {
  SUBCASE("edges must ascend strictly") {
    CHECK_THROWS_AS(FeatureHistogram::create({0.0, 0.0, 1.0}, {0.5, 0.5}),
                    ValidationError);
  }
  SUBCASE("masses must sum to one") {
    CHECK_THROWS_AS(FeatureHistogram::create({0.0, 0.5, 1.0}, {0.6, 0.6}),
                    ValidationError);
  }
  SUBCASE("at least two bins") {
    CHECK_THROWS_AS(FeatureHistogram::create({0.0, 1.0}, {1.0}), ValidationError);
  }
  SUBCASE("uniform edges cover the range exactly") {
    const auto edges = uniform_bin_edges(0.0, 1.0, 10);
    REQUIRE(edges.size() == 11);
    CHECK(edges.front() == 0.0);
    CHECK(edges.back() == 1.0);
    CHECK(edges[5] == 0.5);
  }
}

TEST_CASE("feature scores validation") {
  SUBCASE("dimension mismatches rejected") {
    CHECK_THROWS_AS(
        FeatureScores::create("c", {"q1", "q2"}, {{0.5}}, {0.5, 0.5}),
        ValidationError);
    CHECK_THROWS_AS(FeatureScores::create("c", {"q1"}, {{0.5}}, {0.5, 0.5}),
                    ValidationError);
  }
  SUBCASE("scores outside the range rejected") {
    CHECK_THROWS_AS(FeatureScores::create("c", {"q1"}, {{1.5}}, {0.5}),
                    ValidationError);
    CHECK_THROWS_AS(
        FeatureScores::create("c", {"q1"}, {{0.5}}, {-2.0}, -1.0, 1.0),
        ValidationError);
  }
  SUBCASE("custom range accepted") {
    const auto fs = FeatureScores::create("c", {"q1"}, {{-0.5}}, {0.25}, -1.0, 1.0);
    CHECK(fs.low() == -1.0);
    CHECK(fs.perspective_score(0, 0) == -0.5);
  }
}

TEST_CASE("hyperparams validation") {
  SUBCASE("defaults are valid") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    CHECK(hp.tolerance == 1e-6);
    CHECK(hp.max_iterations == 1000);
  }
  SUBCASE("degenerate objective rejected") {
    HyperParams hp;
    hp.alpha = hp.beta = hp.lambda_kl = hp.lambda_cal = 0.0;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
  }
  SUBCASE("optimizer controls out of range rejected") {
    HyperParams hp;
    hp.tolerance = 0.0;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    hp = HyperParams{};
    hp.max_iterations = 0;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
    hp = HyperParams{};
    hp.restarts = 0;
    CHECK_THROWS_AS(hp.validate(), ValidationError);
  }
}

TEST_CASE("validate_benchmark") {
  SUBCASE("well-formed document round-trips with sorted ordering") {
    const auto bench = validate_benchmark(small_document());
    CHECK(bench.questions().size() == 4);
    CHECK(bench.concepts() == std::vector<std::string>{"alpha", "beta"});
    CHECK(bench.questions().front().id == "q1");
    CHECK(bench.questions().back().id == "q4");
    CHECK(bench.questions_for("alpha", Split::decomposition).size() == 1);
    CHECK(bench.questions_for("alpha", Split::validation).size() == 1);
  }
  SUBCASE("validation is deterministic") {
    const auto a = validate_benchmark(small_document());
    const auto b = validate_benchmark(small_document());
    REQUIRE(a.questions().size() == b.questions().size());
    for (std::size_t i = 0; i < a.questions().size(); ++i) {
      CHECK(a.questions()[i].id == b.questions()[i].id);
    }
  }
  SUBCASE("unknown concept rejected") {
    auto doc = small_document();
    doc.questions.push_back({"q5", "gamma", "about gamma?", Split::decomposition});
    CHECK_THROWS_WITH_AS(validate_benchmark(doc),
                         doctest::Contains("unknown concept"), ValidationError);
  }
  SUBCASE("duplicate question id rejected") {
    auto doc = small_document();
    doc.questions.push_back({"q1", "alpha", "again?", Split::decomposition});
    CHECK_THROWS_WITH_AS(validate_benchmark(doc), doctest::Contains("duplicate id"),
                         ValidationError);
  }
  SUBCASE("empty question set rejected") {
    auto doc = small_document();
    doc.questions.clear();
    CHECK_THROWS_AS(validate_benchmark(doc), ValidationError);
  }
  SUBCASE("unknown perspective in response map rejected") {
    auto doc = small_document();
    doc.perspective_responses["sideways"]["q1"] = "text";
    CHECK_THROWS_WITH_AS(validate_benchmark(doc),
                         doctest::Contains("unknown perspective"), ValidationError);
  }
  SUBCASE("response map referencing unknown question rejected") {
    auto doc = small_document();
    doc.baseline_responses["q9"] = "text";
    CHECK_THROWS_AS(validate_benchmark(doc), ValidationError);
  }
}

TEST_CASE("generation record shape rules") {
  GenerationRecord r;
  r.question_id = "q1";
  r.final_text = "text";

  SUBCASE("sampled requires exactly one perspective and one sample") {
    r.mode = GenerationMode::sampled;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    r.chosen_perspectives = {"optimist"};
    r.sample_texts = {"text"};
    CHECK_NOTHROW(r.validate());
    r.sample_texts.push_back("extra");
    CHECK_THROWS_AS(r.validate(), ValidationError);
  }
  SUBCASE("aggregated requires k samples and matching perspectives") {
    r.mode = GenerationMode::aggregated;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    r.chosen_perspectives = {"optimist", "cautious", "cautious"};
    r.sample_texts = {"a", "b", "c"};
    CHECK_NOTHROW(r.validate());
  }
  SUBCASE("normal carries no perspectives") {
    r.mode = GenerationMode::normal;
    CHECK_NOTHROW(r.validate());
    r.chosen_perspectives = {"optimist"};
    CHECK_THROWS_AS(r.validate(), ValidationError);
  }
}

TEST_CASE("portable rng") {
  SUBCASE("same seed gives the same stream") {
    SplitMix64 a(123);
    SplitMix64 b(123);
    for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  }
  SUBCASE("doubles live in [0, 1)") {
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double u = rng.next_double();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }
  SUBCASE("derive_seed ignores iteration order") {
    CHECK(derive_seed(1, "q1", "sampled") == derive_seed(1, "q1", "sampled"));
    CHECK(derive_seed(1, "q1", "sampled") != derive_seed(1, "q2", "sampled"));
    CHECK(derive_seed(1, "q1", "sampled") != derive_seed(1, "q1", "aggregated"));
    CHECK(derive_seed(1, "q1", "sampled") != derive_seed(2, "q1", "sampled"));
  }
  SUBCASE("dirichlet draws lie on the simplex") {
    SplitMix64 rng(9);
    for (int i = 0; i < 100; ++i) {
      const auto w = dirichlet_uniform(5, rng);
      double sum = 0.0;
      for (double x : w) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}
