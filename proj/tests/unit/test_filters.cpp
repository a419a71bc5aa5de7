#include <doctest.h>

#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scopegen/errors.hpp"
#include "scopegen/filters.hpp"
#include "support/oracles.hpp"

using namespace scopegen;

namespace {

Output point(std::int64_t token, std::uint64_t id, double quality = 1.0) {
  Output o;
  o.id = id;
  o.token = token;
  o.quality = quality;
  return o;
}

PredictionSet set_of(std::vector<Output> items) {
  PredictionSet s;
  s.items = std::move(items);
  return s;
}

double abs_distance(const Output& a, const Output& b) {
  return std::abs(static_cast<double>(a.token - b.token));
}

std::vector<std::int64_t> tokens(const PredictionSet& s) {
  std::vector<std::int64_t> out;
  for (const auto& o : s.items) out.push_back(o.token);
  return out;
}

}  // namespace

TEST_CASE("farthest-point pick") {
  const auto previous = set_of({point(0, 0), point(3, 1), point(10, 2)});

  CHECK(sub_sample_diversity(set_of({point(10, 2)}), previous, abs_distance, 1).token == 0);
  CHECK(sub_sample_diversity(set_of({point(0, 0), point(10, 2)}), previous, abs_distance, 1)
            .token == 3);

  const auto single = set_of({point(7, 0)});
  for (Seed s = 0; s < 10; ++s) CHECK(sub_sample_diversity({}, single, abs_distance, s).token == 7);

  CHECK_THROWS_AS(sub_sample_diversity(previous, previous, abs_distance, 1), NoCandidates);
}

TEST_CASE("first diversity pick is seeded and covers every element") {
  const auto previous = set_of({point(0, 0), point(1, 1), point(2, 2), point(3, 3)});
  std::vector<int> hits(4, 0);
  for (Seed s = 0; s < 400; ++s) {
    const auto a = sub_sample_diversity({}, previous, abs_distance, s);
    REQUIRE(a.id == sub_sample_diversity({}, previous, abs_distance, s).id);
    ++hits[a.id];
  }
  for (int h : hits) CHECK(h > 50);
}

TEST_CASE("max-quality pick") {
  const auto a = point(1, 0, 0.9);
  const auto b = point(2, 1, 0.4);
  const auto c = point(3, 2, 0.7);
  const auto previous = set_of({a, b, c});

  CHECK(sub_sample_quality(set_of({a}), previous, {}).id == c.id);
  CHECK(sub_sample_quality({}, previous, {}).id == a.id);

  const auto flat = set_of({point(5, 0, 0.3), point(6, 1, 0.3), point(7, 2, 0.3)});
  CHECK(sub_sample_quality(set_of({flat.items[0]}), flat, {}).id == 1);

  CHECK_THROWS_AS(sub_sample_quality(previous, previous, {}), NoCandidates);
}

TEST_CASE("dedup keeps the first occurrence") {
  const auto x = set_of({point(1, 0), point(2, 1), point(1, 2), point(3, 3)});
  const auto once = dedup(x);
  CHECK(tokens(once) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(once.items[0].id == 0);

  CHECK(tokens(dedup(set_of({point(4, 0)}))) == std::vector<std::int64_t>{4});

  Output hello = point(0, 0);
  hello.text = "Hello, World";
  Output lower = point(0, 1);
  lower.text = "hello world";
  const auto loose = [](const Output& p, const Output& q) {
    auto norm = [](std::string s) {
      std::string out;
      for (char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
          out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
      }
      return out;
    };
    return norm(p.text) == norm(q.text);
  };
  const auto merged = dedup(set_of({hello, lower}), loose);
  REQUIRE(merged.size() == 1);
  CHECK(merged.items[0].id == 0);
  CHECK(dedup(set_of({hello, lower})).size() == 2);
}

TEST_CASE("dedup is idempotent and shrinking") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Output> items;
    const int n = std::uniform_int_distribution<int>(0, 15)(rng);
    for (int i = 0; i < n; ++i) {
      items.push_back(point(std::uniform_int_distribution<int>(0, 5)(rng), i));
    }
    const auto once = dedup(set_of(items));
    const auto twice = dedup(once);
    REQUIRE(tokens(once) == tokens(twice));
    REQUIRE(once.size() <= items.size());
  }
}

TEST_CASE("LCS similarity") {
  CHECK(lcs_similarity("a b c", "a c") == doctest::Approx(0.8));
  CHECK(lcs_similarity("a b c", "a b c") == 1.0);
  CHECK(lcs_similarity("a b", "c d") == 0.0);
  CHECK(lcs_similarity("", "a") == 0.0);
  CHECK(lcs_similarity("", "") == 0.0);

  std::mt19937_64 rng(5);
  const std::vector<std::string> alphabet = {"x", "y", "z", "w"};
  for (int trial = 0; trial < 1000; ++trial) {
    auto sentence = [&] {
      std::vector<std::string> words;
      const int n = std::uniform_int_distribution<int>(1, 6)(rng);
      for (int i = 0; i < n; ++i) {
        words.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, 3)(rng)]);
      }
      return words;
    };
    const auto a = sentence();
    const auto b = sentence();
    const double ab = lcs_similarity(std::span<const std::string>(a), std::span<const std::string>(b));
    const double ba = lcs_similarity(std::span<const std::string>(b), std::span<const std::string>(a));
    REQUIRE(ab == doctest::Approx(ba));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    REQUIRE((ab == doctest::Approx(1.0)) == (a == b));
  }
}

TEST_CASE("distance transforms") {
  Output a = point(0, 0);
  a.text = "a b c";
  Output b = point(0, 1);
  b.text = "a c";
  CHECK(negated_lcs_distance()(a, b) == doctest::Approx(-0.8));

  const auto bounded = bounded_distance(abs_distance);
  CHECK(bounded(point(0, 0), point(0, 1)) == -1.0);
  CHECK(bounded(point(0, 0), point(3, 1)) == doctest::Approx(-0.25));
  // monotone in the raw distance and bounded in [-1, 0)
  double last = -1.0;
  for (int d = 1; d < 50; ++d) {
    const double v = bounded(point(0, 0), point(d, 1));
    REQUIRE(v > last);
    REQUIRE(v < 0.0);
    last = v;
  }
}

TEST_CASE("greedy diversity order matches brute force on small sets") {
  std::mt19937_64 rng(21);
  const std::function<double(const Output&, const Output&)> d = abs_distance;
  const auto spec = FilterSpec::diversity(abs_distance, 100.0);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    std::vector<Output> pts;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back(point(std::uniform_int_distribution<int>(0, 12)(rng), i));
    }
    const auto source = set_of(pts);
    const Seed seed = rng();

    GreedySampler sampler(source, spec, seed);
    std::vector<std::size_t> order;
    while (!sampler.exhausted()) order.push_back(sampler.next());
    CHECK_THROWS_AS(sampler.next(), NoCandidates);

    REQUIRE(order == testing::reference_fps(pts, order.front(), d));

    // the stateless step function agrees pick by pick
    PredictionSet current;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto pick = sub_sample_diversity(current, source, abs_distance, seed);
      REQUIRE(pick.id == pts[order[k]].id);
      current.items.push_back(pick);
    }
  }
}

TEST_CASE("greedy quality order is a stable descending sort") {
  std::mt19937_64 rng(8);
  const auto spec = FilterSpec::quality();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    std::vector<Output> pts;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back(point(0, i, std::uniform_int_distribution<int>(1, 4)(rng) * 0.25));
    }
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), 0);
    std::stable_sort(expected.begin(), expected.end(),
                     [&](std::size_t a, std::size_t b) { return pts[a].quality > pts[b].quality; });

    const auto source = set_of(pts);
    GreedySampler sampler(source, spec, 0);
    std::vector<std::size_t> order;
    while (!sampler.exhausted()) order.push_back(sampler.next());
    REQUIRE(order == expected);
  }
}

TEST_CASE("dedup is not a greedy filter") {
  const auto source = set_of({point(1, 0)});
  const auto spec = FilterSpec::dedup();
  CHECK_FALSE(spec.calibrated());
  CHECK_THROWS_AS(GreedySampler(source, spec, 0), InvalidInput);
}
