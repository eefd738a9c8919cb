#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpf/metrics.hpp"
#include "mpf/rand.hpp"

using namespace mpf;
namespace mm = mpf::metrics;

namespace {

FeatureHistogram hist(std::vector<double> masses) {
  const int bins = static_cast<int>(masses.size());
  return FeatureHistogram::create(uniform_bin_edges(0.0, 1.0, bins), std::move(masses));
}

FeatureHistogram random_hist(std::size_t bins, SplitMix64& rng) {
  std::vector<double> masses(bins);
  double sum = 0.0;
  for (double& m : masses) {
    m = 0.05 + rng.next_double();
    sum += m;
  }
  for (double& m : masses) m /= sum;
  return hist(std::move(masses));
}

std::vector<double> random_simplex(std::size_t n, SplitMix64& rng) {
  return dirichlet_uniform(n, rng);
}

FeatureScores two_question_scores() {
  return FeatureScores::create("c", {"q1", "q2"}, {{0.8, 0.6}, {0.2, 0.4}}, {0.5, 0.5});
}

}  // namespace

TEST_CASE("compose_histogram mixes masses over shared bins") {
  const auto p1 = hist({0.3, 0.7});
  const auto p2 = hist({1.0, 0.0});
  const auto p3 = hist({0.0, 1.0});

  SUBCASE("identity weight returns the component") {
    const auto out = mm::compose_histogram(std::vector<double>{1.0, 0.0}, {p1, p2});
    CHECK(out.masses[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(out.masses[1] == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("even mixture of point masses") {
    const auto out = mm::compose_histogram(std::vector<double>{0.5, 0.5}, {p2, p3});
    CHECK(out.masses[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.masses[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("identical components are a fixed point for any weights") {
    SplitMix64 rng(11);
    for (int i = 0; i < 20; ++i) {
      const auto w = random_simplex(2, rng);
      const auto out = mm::compose_histogram(w, {p1, p1});
      CHECK(out.masses[0] == doctest::Approx(p1.masses[0]).epsilon(1e-12));
      CHECK(out.masses[1] == doctest::Approx(p1.masses[1]).epsilon(1e-12));
    }
  }
  SUBCASE("mismatched bin edges rejected") {
    const auto other = FeatureHistogram::create(uniform_bin_edges(0, 2, 2), {0.5, 0.5});
    CHECK_THROWS_AS(mm::compose_histogram(std::vector<double>{0.5, 0.5}, {p1, other}),
                    ValidationError);
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(mm::compose_histogram(std::vector<double>{1.0}, {p1, p2}),
                    ValidationError);
  }
  SUBCASE("mass conservation for random simplex weights") {
    SplitMix64 rng(12);
    for (int i = 0; i < 50; ++i) {
      std::vector<FeatureHistogram> comps;
      for (int k = 0; k < 4; ++k) comps.push_back(random_hist(8, rng));
      const auto out = mm::compose_histogram(random_simplex(4, rng), comps);
      double sum = 0.0;
      for (double m : out.masses) sum += m;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("kl_divergence") {
  SUBCASE("identity is zero") {
    const auto p = hist({0.25, 0.75});
    CHECK(mm::kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-13));
  }
  SUBCASE("hand-evaluated two-bin value") {
    // 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75) = 0.14384...
    const double kl = mm::kl_divergence(hist({0.5, 0.5}), hist({0.25, 0.75}));
    CHECK(kl == doctest::Approx(0.14384).epsilon(1e-3));
    CHECK(std::abs(kl - 0.5 * std::log(2.0) - 0.5 * std::log(2.0 / 3.0)) < 1e-6);
  }
  SUBCASE("disjoint support stays finite under smoothing") {
    const double eps = 1e-9;
    const double kl = mm::kl_divergence(hist({1.0, 0.0}), hist({0.0, 1.0}), eps);
    CHECK(std::isfinite(kl));
    CHECK(kl > 0.9 * std::log(1.0 / eps));
    CHECK(kl < 1.05 * std::log(1.0 / eps));
  }
  SUBCASE("self-distance is zero for random histograms") {
    SplitMix64 rng(21);
    for (int i = 0; i < 100; ++i) {
      const auto p = random_hist(10, rng);
      CHECK(std::abs(mm::kl_divergence(p, p)) <= 1e-12);
    }
  }
  SUBCASE("non-negative for random pairs") {
    SplitMix64 rng(22);
    for (int i = 0; i < 100; ++i) {
      const auto p = random_hist(10, rng);
      const auto q = random_hist(10, rng);
      CHECK(mm::kl_divergence(p, q) >= -1e-12);
    }
  }
  SUBCASE("mismatched bins rejected") {
    CHECK_THROWS_AS(mm::kl_divergence(hist({0.5, 0.5}), hist({0.3, 0.3, 0.4})),
                    ValidationError);
  }
}

TEST_CASE("calibration_error") {
  const auto scores = two_question_scores();

  SUBCASE("composition matching baseline gives zero") {
    CHECK(mm::calibration_error(std::vector<double>{0.5, 0.5}, scores) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("hand-derived offset baseline") {
    const auto shifted =
        FeatureScores::create("c", {"q1", "q2"}, {{0.8, 0.6}, {0.2, 0.4}}, {0.6, 0.4});
    CHECK(mm::calibration_error(std::vector<double>{0.5, 0.5}, shifted) ==
          doctest::Approx(0.1).epsilon(1e-9));
  }
  SUBCASE("single perspective equal to baseline") {
    const auto solo = FeatureScores::create("c", {"q1", "q2"}, {{0.3, 0.9}}, {0.3, 0.9});
    CHECK(mm::calibration_error(std::vector<double>{1.0}, solo) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch rejected") {
    CHECK_THROWS_AS(mm::calibration_error(std::vector<double>{1.0}, scores),
                    ValidationError);
  }
  SUBCASE("convex and piecewise-linear in the weights") {
    SplitMix64 rng(31);
    for (int i = 0; i < 50; ++i) {
      std::vector<std::vector<double>> matrix(3);
      std::vector<double> base;
      for (int j = 0; j < 5; ++j) {
        for (auto& row : matrix) row.push_back(rng.next_double());
        base.push_back(rng.next_double());
      }
      const auto fs = FeatureScores::create("c", {"a", "b", "c", "d", "e"}, matrix, base);
      const auto w1 = random_simplex(3, rng);
      const auto w2 = random_simplex(3, rng);
      const double t = rng.next_double();
      std::vector<double> mixed(3);
      for (int k = 0; k < 3; ++k) mixed[k] = t * w1[k] + (1 - t) * w2[k];
      const double lhs = mm::calibration_error(mixed, fs);
      const double rhs = t * mm::calibration_error(w1, fs) +
                         (1 - t) * mm::calibration_error(w2, fs);
      CHECK(lhs <= rhs + 1e-9);
    }
  }
}

TEST_CASE("l2_regularizer") {
  SUBCASE("zero exactly at uniform") {
    for (std::size_t n : {2u, 3u, 5u, 9u}) {
      std::vector<double> w(n, 1.0 / static_cast<double>(n));
      CHECK(mm::l2_regularizer(w) == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
  SUBCASE("one-hot values") {
    CHECK(mm::l2_regularizer(std::vector<double>{1.0, 0.0}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mm::l2_regularizer(std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}) ==
          doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("positive away from uniform") {
    SplitMix64 rng(41);
    for (int i = 0; i < 50; ++i) {
      const auto w = random_simplex(4, rng);
      const double v = mm::l2_regularizer(w);
      CHECK(v >= 0.0);
      bool uniform = true;
      for (double x : w) uniform = uniform && std::abs(x - 0.25) < 1e-12;
      if (!uniform) CHECK(v > 0.0);
    }
  }
}

TEST_CASE("sparsity_penalty") {
  const double eps = 1e-3;
  SUBCASE("one-hot n=5") {
    CHECK(mm::sparsity_penalty(std::vector<double>{1, 0, 0, 0, 0}, eps) ==
          doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("uniform n=5") {
    CHECK(mm::sparsity_penalty(std::vector<double>(5, 0.2), eps) ==
          doctest::Approx(1.8).epsilon(1e-12));
  }
  SUBCASE("half-half n=5") {
    CHECK(mm::sparsity_penalty(std::vector<double>{0.5, 0.5, 0, 0, 0}, eps) ==
          doctest::Approx(0.9).epsilon(1e-12));
  }
  SUBCASE("minimum over a simplex grid sits at the vertices") {
    // Exhaustive lattice check for n = 2..4 at step 0.05.
    for (std::size_t n = 2; n <= 4; ++n) {
      const double vertex_value =
          mm::sparsity_penalty([&] {
            std::vector<double> v(n, 0.0);
            v[0] = 1.0;
            return v;
          }(), eps);
      CHECK(vertex_value == doctest::Approx(1.0 / static_cast<double>(n)));

      const long m = 20;
      std::vector<long> counts(n, 0);
      std::function<void(std::size_t, long)> visit = [&](std::size_t i, long rem) {
        if (i + 1 == n) {
          counts[i] = rem;
          std::vector<double> w(n);
          for (std::size_t k = 0; k < n; ++k) w[k] = counts[k] / 20.0;
          bool is_vertex = false;
          for (double x : w) is_vertex = is_vertex || x == 1.0;
          const double v = mm::sparsity_penalty(w, eps);
          if (is_vertex) {
            CHECK(v == doctest::Approx(vertex_value));
          } else {
            CHECK(v > vertex_value);
          }
          return;
        }
        for (long c = rem; c >= 0; --c) {
          counts[i] = c;
          visit(i + 1, rem - c);
        }
      };
      visit(0, m);
    }
  }
  SUBCASE("epsilon outside (0, 1/n) rejected") {
    CHECK_THROWS_AS(mm::sparsity_penalty(std::vector<double>{0.5, 0.5}, 0.6),
                    ValidationError);
  }
}

TEST_CASE("objective recombination") {
  HyperParams hp;
  hp.lambda_kl = 0.2;
  hp.lambda_cal = 0.8;
  hp.alpha = 0.0;
  hp.beta = 1.0;

  SUBCASE("pure KL at the target is zero") {
    HyperParams kl_only = hp;
    kl_only.lambda_kl = 1.0;
    kl_only.lambda_cal = 0.0;
    kl_only.beta = 0.0;
    const auto p1 = hist({1.0, 0.0});
    const auto p2 = hist({0.0, 1.0});
    const auto target = hist({0.5, 0.5});
    const auto scores = two_question_scores();
    const auto b = mm::objective(std::vector<double>{0.5, 0.5}, {p1, p2}, target,
                                 scores, kl_only);
    CHECK(b.total == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("pure alpha at uniform is zero") {
    HyperParams alpha_only = hp;
    alpha_only.lambda_kl = 0.0;
    alpha_only.lambda_cal = 0.0;
    alpha_only.alpha = 1.0;
    alpha_only.beta = 0.0;
    const auto p = hist({0.5, 0.5});
    const auto scores = two_question_scores();
    const auto b =
        mm::objective(std::vector<double>{0.5, 0.5}, {p, p}, p, scores, alpha_only);
    CHECK(b.total == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("total recombines the example term values") {
    const auto p1 = hist({0.5, 0.5});
    const auto p2 = hist({0.25, 0.75});
    const auto target = hist({0.25, 0.75});
    const auto scores = two_question_scores();
    const auto b =
        mm::objective(std::vector<double>{1.0, 0.0}, {p1, p2}, target, scores, hp);
    CHECK(b.total ==
          doctest::Approx(0.2 * b.kl + 0.8 * b.calibration + 1.0 * b.sparsity)
              .epsilon(1e-12));
    CHECK(b.kl == doctest::Approx(0.14384).epsilon(1e-3));
  }
  SUBCASE("identity holds on random inputs") {
    SplitMix64 rng(51);
    for (int i = 0; i < 50; ++i) {
      std::vector<FeatureHistogram> comps;
      for (int k = 0; k < 3; ++k) comps.push_back(random_hist(6, rng));
      const auto target = random_hist(6, rng);
      std::vector<std::vector<double>> matrix(3);
      std::vector<double> base;
      for (int j = 0; j < 4; ++j) {
        for (auto& row : matrix) row.push_back(rng.next_double());
        base.push_back(rng.next_double());
      }
      const auto fs = FeatureScores::create("c", {"a", "b", "c", "d"}, matrix, base);
      HyperParams random_hp = hp;
      random_hp.alpha = rng.next_double();
      random_hp.beta = rng.next_double();
      random_hp.lambda_kl = rng.next_double();
      random_hp.lambda_cal = rng.next_double() + 0.01;
      const auto w = random_simplex(3, rng);
      const auto b = mm::objective(w, comps, target, fs, random_hp);
      const double expect = random_hp.lambda_kl * b.kl +
                            random_hp.lambda_cal * b.calibration +
                            random_hp.alpha * b.l2 + random_hp.beta * b.sparsity;
      CHECK(b.total == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}
