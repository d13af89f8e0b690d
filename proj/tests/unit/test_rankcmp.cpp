#include <doctest.h>

#include <random>

#include "attnsel/common.hpp"
#include "attnsel/rankcmp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace attnsel;
using namespace attnsel::rankcmp;

namespace {

using List = std::vector<std::string>;

List random_list(std::mt19937_64& rng, std::size_t universe) {
  const std::size_t len = 1 + fixtures::below(rng, 30);
  List pool;
  for (std::size_t i = 0; i < universe; ++i) pool.push_back("t" + std::to_string(i));
  for (std::size_t k = pool.size(); k > 1; --k) std::swap(pool[k - 1], pool[fixtures::below(rng, k)]);
  pool.resize(std::min(len, pool.size()));
  return pool;
}

}  // namespace

TEST_CASE("rbo of identical and disjoint lists") {
  const List a{"a", "b", "c", "d"};
  for (double p : {0.5, 0.9, 0.99}) {
    CHECK(rbo(a, a, {p, {}}).ext == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rbo(a, List{"w", "x", "y", "z"}, {p, {}}).ext == 0.0);
  }
}

TEST_CASE("rbo of a swapped pair matches the series oracle") {
  const List a{"a", "b", "c"}, b{"a", "c", "b"};
  const auto r = rbo(a, b, {0.9, {}});
  CHECK(r.ext == doctest::Approx(oracle::rbo_ext(a, b, 0.9)).epsilon(1e-12));
  // (1-p)(1 + p/2 + p^2) + p^3 by hand.
  CHECK(r.ext == doctest::Approx(0.1 * (1 + 0.45 + 0.81) + 0.729).epsilon(1e-12));
  CHECK(r.residual == doctest::Approx(0.729));
  CHECK(r.min <= r.ext);
}

TEST_CASE("property: rbo bounds, symmetry and oracle agreement") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_list(rng, 40), b = random_list(rng, 40);
    const double p = 0.5 + 0.49 * fixtures::unit(rng);
    const auto ab = rbo(a, b, {p, {}});
    const auto ba = rbo(b, a, {p, {}});
    CHECK(ab.ext == doctest::Approx(ba.ext).epsilon(1e-12));
    CHECK(ab.min >= 0.0);
    CHECK(ab.min <= ab.ext + 1e-12);
    CHECK(ab.ext <= 1.0 + 1e-12);
    CHECK(ab.min + ab.residual <= 1.0 + 1e-12);
    CHECK(std::abs(ab.ext - oracle::rbo_ext(a, b, p)) < 1e-9);
  }
}

TEST_CASE("rbo rejects bad input") {
  CHECK_THROWS_AS(rbo(List{}, List{"a"}, {0.9, {}}), Error);
  CHECK_THROWS_AS(rbo(List{"a"}, List{"a"}, {1.0, {}}), Error);
}

TEST_CASE("prefix weight") {
  CHECK(rbo_prefix_weight(10, 0.9) == doctest::Approx(oracle::prefix_weight(10, 0.9, 2000)).epsilon(1e-9));
  CHECK(rbo_prefix_weight(1, 0.9) == doctest::Approx(oracle::prefix_weight(1, 0.9, 2000)).epsilon(1e-9));
  double prev = 0.0;
  for (std::size_t d = 1; d < 200; ++d) {
    const double w = rbo_prefix_weight(d, 0.95);
    CHECK(w > prev);
    CHECK(w < 1.0);
    prev = w;
  }
  CHECK(rbo_prefix_weight(5000, 0.9) == doctest::Approx(1.0));
}

TEST_CASE("overlap at k") {
  using featsel::TermRanking;
  const TermRanking a({}, {{"x", 3}, {"y", 2}, {"z", 1}});
  const TermRanking b({}, {{"y", 3}, {"x", 2}, {"q", 1}});
  CHECK(overlap_at_k(a, b, 2) == 1.0);
  CHECK(overlap_at_k(a, b, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(overlap_at_k(a, b, 6) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("jaccard and stability") {
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard({"a"}, {"b"}) == 0.0);
  CHECK(jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
  const auto s = stability({{"a", "b"}, {"a", "b"}, {"a", "c"}}, "chi");
  CHECK(s.mean_jaccard == doctest::Approx((1.0 + 1.0 / 3.0 + 1.0 / 3.0) / 3.0));
  CHECK(s.pairwise[0][0] == 1.0);
  CHECK(s.pairwise[1][2] == s.pairwise[2][1]);
  CHECK_THROWS_AS(stability({{"a"}}, "chi"), Error);
}

TEST_CASE("property: truncation, relabeling and the jaccard triangle inequality") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_list(rng, 30), b = random_list(rng, 30);
    const std::size_t depth = 1 + fixtures::below(rng, std::min(a.size(), b.size()));
    const List ta(a.begin(), a.begin() + depth), tb(b.begin(), b.begin() + depth);
    CHECK(rbo(a, b, {0.9, depth}).min == doctest::Approx(rbo(ta, tb, {0.9, depth}).min).epsilon(1e-12));

    auto relabel = [](const List& l) {
      List out;
      for (const auto& t : l) out.push_back("x" + t + "y");
      return out;
    };
    CHECK(rbo(relabel(a), relabel(b), {0.8, {}}).ext == doctest::Approx(rbo(a, b, {0.8, {}}).ext).epsilon(1e-12));

    const auto c = random_list(rng, 30);
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end()), sc(c.begin(), c.end());
    CHECK(1 - jaccard(sa, sc) <= (1 - jaccard(sa, sb)) + (1 - jaccard(sb, sc)) + 1e-12);
  }
}
