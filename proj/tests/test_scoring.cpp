#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpf/scoring.hpp"

using namespace mpf;
namespace sc = mpf::scoring;

namespace {

sc::LexiconScorer tiny_scorer(double low = 0.0, double high = 1.0) {
  return sc::LexiconScorer::from_stems({"excellent", "superb", "thriv", "strong"},
                                       {"decline", "failure", "weak"}, low, high);
}

sc::ScorerConfig bins_config(int bins, double low = 0.0, double high = 1.0) {
  sc::ScorerConfig config;
  config.bins = bins;
  config.low = low;
  config.high = high;
  return config;
}

}  // namespace

TEST_CASE("lexicon score_text") {
  const auto scorer = tiny_scorer();

  SUBCASE("all-positive text saturates at the high endpoint") {
    CHECK(scorer.score_text("excellent superb") == 1.0);
  }
  SUBCASE("no hits maps to the midpoint") {
    CHECK(scorer.score_text("the campus sits beside the river") == 0.5);
  }
  SUBCASE("three positive and one negative hit give 0.75") {
    CHECK(scorer.score_text("excellent superb strong term despite one weak area") ==
          doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("stems match by prefix, case-insensitively") {
    CHECK(scorer.score_text("Thriving programs") == 1.0);
    CHECK(scorer.score_text("a DECLINE in enrollment") == 0.0);
  }
  SUBCASE("deterministic across calls") {
    const std::string text = "excellent momentum despite weak spots";
    CHECK(scorer.score_text(text) == scorer.score_text(text));
  }
  SUBCASE("custom range is mapped affinely") {
    const auto wide = tiny_scorer(-1.0, 1.0);
    CHECK(wide.score_text("excellent superb strong term despite one weak area") ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(wide.score_text("no markers here") == 0.0);
  }
  SUBCASE("empty text rejected") {
    CHECK_THROWS_AS(scorer.score_text(""), ValidationError);
  }
}

TEST_CASE("shipped lexicon file") {
  SUBCASE("loads with both sections well-populated") {
    const auto scorer = sc::LexiconScorer::from_file("data/lexicon.txt", 0.0, 1.0);
    CHECK(scorer.positive_count() >= 150);
    CHECK(scorer.negative_count() >= 150);
    CHECK(scorer.score_text("an excellent and thriving faculty") == 1.0);
    CHECK(scorer.score_text("a troubled and mismanaged office") == 0.0);
  }
  SUBCASE("no stem is a prefix of another") {
    const auto scorer = sc::LexiconScorer::from_file("data/lexicon.txt", 0.0, 1.0);
    std::vector<std::string> all = scorer.positive_stems();
    all.insert(all.end(), scorer.negative_stems().begin(),
               scorer.negative_stems().end());
    for (const auto& a : all) {
      for (const auto& b : all) {
        if (&a == &b) continue;
        CHECK(!(b.size() > a.size() && b.compare(0, a.size(), a) == 0));
      }
    }
  }
  SUBCASE("missing file reported") {
    CHECK_THROWS_WITH_AS(sc::LexiconScorer::from_file("data/nope.txt", 0, 1),
                         doctest::Contains("missing lexicon"), ValidationError);
  }
}

TEST_CASE("build_histogram") {
  SUBCASE("right-open bins, closed top") {
    const auto h = sc::build_histogram({0.0, 0.5, 1.0}, bins_config(2));
    CHECK(h.masses[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(h.masses[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  }
  SUBCASE("identical scores form a point mass") {
    const auto h = sc::build_histogram({0.42, 0.42, 0.42}, bins_config(10));
    double max_mass = 0.0;
    for (double m : h.masses) max_mass = std::max(max_mass, m);
    CHECK(max_mass == 1.0);
  }
  SUBCASE("one score per bin gives uniform masses") {
    const auto h = sc::build_histogram({0.1, 0.3, 0.5, 0.7, 0.9}, bins_config(5));
    for (double m : h.masses) CHECK(m == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("interior edge goes to the higher bin, top edge to the last") {
    const auto edges = uniform_bin_edges(0.0, 1.0, 4);  // 0.25, 0.5, 0.75 exact
    CHECK(sc::bin_index(0.25, edges) == 1);
    CHECK(sc::bin_index(0.5, edges) == 2);
    CHECK(sc::bin_index(0.75, edges) == 3);
    CHECK(sc::bin_index(1.0, edges) == 3);
    CHECK(sc::bin_index(0.0, edges) == 0);
    CHECK(sc::bin_index(0.2499999, edges) == 0);
  }
  SUBCASE("mass conservation") {
    const auto h = sc::build_histogram({0.05, 0.15, 0.15, 0.8, 0.99, 1.0, 0.33},
                                       bins_config(10));
    double sum = 0.0;
    for (double m : h.masses) sum += m;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(sc::build_histogram({}, bins_config(4)), ValidationError);
    CHECK_THROWS_AS(sc::build_histogram({1.5}, bins_config(4)), ValidationError);
    CHECK_THROWS_AS(sc::build_histogram({-0.1}, bins_config(4)), ValidationError);
  }
}

namespace {

Benchmark response_benchmark() {
  BenchmarkDocument doc;
  doc.perspectives = {{"sunny", "always sunny"}, {"gloomy", "always gloomy"}};
  doc.concepts = {"acme", "zenith"};
  doc.questions = {
      {"q1::acme", "acme", "about acme one?", Split::decomposition},
      {"q2::acme", "acme", "about acme two?", Split::decomposition},
      {"q3::acme", "acme", "about acme three?", Split::validation},
      {"q1::zenith", "zenith", "about zenith one?", Split::decomposition},
      {"q2::zenith", "zenith", "about zenith two?", Split::decomposition},
  };
  for (const auto& q : doc.questions) {
    doc.baseline_responses[q.id] =
        "excellent superb strong term despite one weak corner";              // 0.75
    doc.perspective_responses["sunny"][q.id] = "excellent superb thriving";  // 1.0
    doc.perspective_responses["gloomy"][q.id] = "decline and failure";       // 0.0
  }
  return validate_benchmark(doc);
}

}  // namespace

TEST_CASE("score_benchmark") {
  const auto bench = response_benchmark();
  const auto scorer = tiny_scorer();
  const auto config = bins_config(4);

  SUBCASE("hand-scored fixture matrix") {
    const auto scored = sc::score_benchmark(bench, scorer, config);
    REQUIRE(scored.size() == 2);
    const auto& acme = scored.at("acme");
    CHECK(acme.decomposition.question_count() == 2);
    CHECK(acme.decomposition.perspective_score(0, 0) == 1.0);   // sunny
    CHECK(acme.decomposition.perspective_score(1, 0) == 0.0);   // gloomy
    CHECK(acme.decomposition.baseline()[0] == doctest::Approx(0.75));
    REQUIRE(acme.validation.has_value());
    CHECK(acme.validation->question_count() == 1);
    CHECK(acme.validation->question_ids()[0] == "q3::acme");

    // point masses at the saturation bins
    CHECK(acme.perspective_histograms[0].masses[3] == 1.0);
    CHECK(acme.perspective_histograms[1].masses[0] == 1.0);
    CHECK(acme.baseline_histogram.masses[3] == 1.0);  // 0.75 closes into the top bin
  }
  SUBCASE("concepts with no validation questions are detected") {
    const auto scored = sc::score_benchmark(bench, scorer, config);
    CHECK(!scored.at("zenith").validation.has_value());
  }
  SUBCASE("disjoint concepts do not influence each other") {
    auto doc_changed = response_benchmark();
    const auto before = sc::score_benchmark(bench, scorer, config);
    // rebuild with different zenith texts; acme output must not move
    BenchmarkDocument doc;
    doc.perspectives = {{"sunny", "always sunny"}, {"gloomy", "always gloomy"}};
    doc.concepts = {"acme", "zenith"};
    doc.questions = bench.questions();
    for (const auto& q : doc.questions) {
      const bool zenith = q.concept_name == "zenith";
      doc.baseline_responses[q.id] =
          zenith ? "failure everywhere"
                 : "excellent superb strong term despite one weak corner";
      doc.perspective_responses["sunny"][q.id] =
          zenith ? "strong yet weak" : "excellent superb thriving";
      doc.perspective_responses["gloomy"][q.id] = "decline and failure";
    }
    const auto after =
        sc::score_benchmark(validate_benchmark(doc), scorer, config);
    CHECK(after.at("acme").decomposition.baseline() ==
          before.at("acme").decomposition.baseline());
    CHECK(after.at("zenith").decomposition.baseline() !=
          before.at("zenith").decomposition.baseline());
  }
  SUBCASE("identical texts everywhere give identical point-mass histograms") {
    BenchmarkDocument doc;
    doc.perspectives = {{"sunny", "always sunny"}, {"gloomy", "always gloomy"}};
    doc.concepts = {"acme"};
    doc.questions = {{"q1", "acme", "one?", Split::decomposition},
                     {"q2", "acme", "two?", Split::decomposition}};
    for (const auto& q : doc.questions) {
      doc.baseline_responses[q.id] = "the same text";
      doc.perspective_responses["sunny"][q.id] = "the same text";
      doc.perspective_responses["gloomy"][q.id] = "the same text";
    }
    const auto scored =
        sc::score_benchmark(validate_benchmark(doc), scorer, config);
    const auto& acme = scored.at("acme");
    CHECK(acme.perspective_histograms[0] == acme.perspective_histograms[1]);
    CHECK(acme.perspective_histograms[0] == acme.baseline_histogram);
    CHECK(acme.decomposition.baseline() ==
          std::vector<double>{0.5, 0.5});
  }
  SUBCASE("missing responses rejected") {
    BenchmarkDocument doc;
    doc.perspectives = {{"sunny", "always sunny"}};
    doc.concepts = {"acme"};
    doc.questions = {{"q1", "acme", "one?", Split::decomposition}};
    doc.baseline_responses["q1"] = "text";
    CHECK_THROWS_WITH_AS(
        sc::score_benchmark(validate_benchmark(doc), scorer, config),
        doctest::Contains("missing response"), ValidationError);
  }
}

TEST_CASE("scorer config and factory") {
  SUBCASE("invalid ranges and bins rejected") {
    CHECK_THROWS_AS(bins_config(1).validate(), ValidationError);
    CHECK_THROWS_AS(bins_config(4, 1.0, 0.0).validate(), ValidationError);
  }
  SUBCASE("factory loads the shipped lexicon") {
    sc::ScorerConfig config;
    const auto scorer = sc::make_scorer(config);
    CHECK(scorer->score_text("excellent outcome") > 0.9);
  }
  SUBCASE("external scorer surfaces transport failures") {
    const sc::ExternalScorer scorer("http://127.0.0.1:1/score", 0.0, 1.0, 0.2);
    CHECK_THROWS_AS(scorer.score_text("anything"), std::runtime_error);
  }
}
