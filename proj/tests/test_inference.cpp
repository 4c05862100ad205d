#include <doctest.h>

#include <cmath>

#include "btpredict/inference.hpp"
#include "btpredict/rng.hpp"
#include "support/oracle.hpp"
#include "support/toys.hpp"

using namespace btp;

namespace {

// Four-tree chain model with hand-set statistics, used wherever a fully
// hand-checkable posterior is needed.
test::ToyModel chain_toy() {
  TechDag dag = test::chain_dag();
  ModelConfig config;
  config.t_max_s = 600;
  std::vector<test::RawEntry> raw;
  raw.push_back({BuildTree{}, {40, 60, 50}, 2});
  raw.push_back({test::make_tree(dag, "a"), {90, 110, 100}, 1});
  raw.push_back({test::make_tree(dag, "a,b"), {190, 210, 200}, 1});
  raw.push_back({test::make_tree(dag, "a,b,c"), {280, 320, 300}, 4});
  Model model = test::model_from_raw(dag, config, raw);
  return {std::move(dag), config, std::move(raw), std::move(model)};
}

double max_abs_error(const Posterior& got, const std::map<BuildTree, double>& expected) {
  double worst = 0;
  std::map<BuildTree, double> got_map;
  for (const auto& item : got.entries) got_map[item.tree] = item.probability;
  for (const auto& [tree, p] : expected)
    worst = std::max(worst, std::abs(p - (got_map.contains(tree) ? got_map[tree] : 0.0)));
  for (const auto& [tree, p] : got_map)
    if (!expected.contains(tree)) worst = std::max(worst, p);
  return worst;
}

}  // namespace

TEST_CASE("posterior over a single compatible tree is certain") {
  test::ToyModel toy = chain_toy();
  // only {a,b,c} contains c
  ObservationVector obs = test::make_tree(toy.dag, "c");
  Posterior p = posterior(toy.model, 300, obs);
  REQUIRE(p.entries.size() == 1);
  CHECK(p.entries[0].tree == test::make_tree(toy.dag, "a,b,c"));
  CHECK(p.entries[0].probability == doctest::Approx(1.0));
  CHECK(p.compatible_count == 1);
}

TEST_CASE("posterior matches the brute-force oracle on the chain toy") {
  test::ToyModel toy = chain_toy();
  for (std::uint32_t t : {1u, 50u, 100u, 175u, 300u, 599u}) {
    for (const char* obs_text : {"-", "a", "a,b"}) {
      CAPTURE(t);
      CAPTURE(obs_text);
      ObservationVector obs = parse_counts(obs_text, toy.dag);
      Posterior got = posterior(toy.model, t, obs);
      auto expected = test::oracle_posterior(toy.raw, toy.config, t, obs);
      CHECK(max_abs_error(got, expected) <= 1e-12);
      // every listed tree is compatible and probabilities sum to 1
      double sum = 0;
      for (const auto& item : got.entries) {
        CHECK(compatible(item.tree, obs));
        CHECK(item.probability > 0.0);
        sum += item.probability;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("posterior ranks the true tree first at its learned time") {
  test::ToyModel toy = chain_toy();
  BuildTree truth = test::make_tree(toy.dag, "a,b");
  Posterior p = posterior(toy.model, 200, truth);
  // among trees of its own size, the observed tree wins
  for (const auto& item : p.entries)
    if (item.tree.total() == truth.total()) {
      CHECK(item.tree == truth);
      break;
    }
  CHECK(most_probable(p) == truth);
}

TEST_CASE("posterior rejects out-of-horizon times") {
  test::ToyModel toy = chain_toy();
  CHECK_THROWS_AS(posterior(toy.model, 0, {}), Error);
  CHECK_THROWS_AS(posterior(toy.model, 601, {}), Error);
}

TEST_CASE("incompatible observations raise NoCompatibleTreeError") {
  TechDag dag = test::protoss_toy_dag();
  ModelConfig config;
  config.t_max_s = 600;
  std::vector<test::RawEntry> raw;
  raw.push_back({test::make_tree(dag, "pylon"), {100}, 0});
  raw.push_back({test::make_tree(dag, "pylon,gateway"), {200}, 0});
  Model model = test::model_from_raw(dag, config, raw);
  CHECK_THROWS_AS(posterior(model, 300, test::make_tree(dag, "forge")), NoCompatibleTreeError);
  CHECK_THROWS_AS(reconstruct(model, 300, test::make_tree(dag, "forge")), NoCompatibleTreeError);
}

TEST_CASE("most_probable breaks exact ties canonically") {
  TechDag dag = test::protoss_toy_dag();
  ModelConfig config;
  config.t_max_s = 600;
  std::vector<test::RawEntry> raw;
  // identical stats and priors: exactly equal weights
  raw.push_back({test::make_tree(dag, "pylon,gateway"), {150, 250, 200}, 1});
  raw.push_back({test::make_tree(dag, "pylon,forge"), {150, 250, 200}, 1});
  Model model = test::model_from_raw(dag, config, raw);
  Posterior p = posterior(model, 200, test::make_tree(dag, "pylon"));
  REQUIRE(p.entries.size() == 2);
  CHECK(p.entries[0].probability == doctest::Approx(p.entries[1].probability));
  // gateway has the smaller id, so {pylon,gateway} is canonically smaller
  CHECK(most_probable(p) == test::make_tree(dag, "pylon,gateway"));
}

TEST_CASE("expected_distance hand values") {
  test::ToyModel toy = chain_toy();
  BuildTree truth = test::make_tree(toy.dag, "a,b,c");
  Posterior certain = posterior(toy.model, 300, test::make_tree(toy.dag, "c"));
  CHECK(expected_distance(certain, truth) == doctest::Approx(0.0));

  // two-entry posterior with probabilities ~0.5 at distances 1 and 3:
  // expected distance 2
  TechDag dag = test::protoss_toy_dag();
  ModelConfig config;
  config.t_max_s = 600;
  std::vector<test::RawEntry> raw;
  raw.push_back({test::make_tree(dag, "pylon,gateway"), {150, 250, 200}, 0});
  raw.push_back({test::make_tree(dag, "pylon,forge"), {150, 250, 200}, 0});
  Model model = test::model_from_raw(dag, config, raw);
  Posterior even = posterior(model, 200, test::make_tree(dag, "pylon"));
  BuildTree real = test::make_tree(dag, "pylon,gateway,cybernetics_core");
  // d({p,g}, real) = 1, d({p,f}, real) = 2 + 1 = 3
  CHECK(expected_distance(even, real) == doctest::Approx(2.0));

  // against the oracle
  auto expected = test::oracle_posterior(toy.raw, toy.config, 175, {});
  Posterior got = posterior(toy.model, 175, {});
  double want = 0;
  for (const auto& [tree, p] : expected) want += p * static_cast<double>(distance(tree, truth));
  CHECK(expected_distance(got, truth) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("reconstruct recovers the tree behind a partial observation") {
  test::ToyModel toy = chain_toy();
  BuildTree truth = test::make_tree(toy.dag, "a,b,c");
  // deepest building hidden, query at the learned time of the truth
  ObservationVector partial = test::make_tree(toy.dag, "a,b");
  CHECK(reconstruct(toy.model, 300, partial) == truth);
  // the superset guarantee holds whatever the time
  for (std::uint32_t t : {1u, 100u, 300u, 600u})
    CHECK(compatible(reconstruct(toy.model, t, partial), partial));
  // empty observation at t=1: the earliest tree wins
  CHECK(reconstruct(toy.model, 1, {}) == BuildTree{});
}

TEST_CASE("posterior entries are sorted by probability") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    test::ToyModel toy = test::random_toy_model(rng.next(), 8, 60);
    std::uint32_t t = 1 + static_cast<std::uint32_t>(rng.next_below(toy.config.t_max_s));
    Posterior p = posterior(toy.model, t, {});
    for (std::size_t i = 1; i < p.entries.size(); ++i)
      CHECK(p.entries[i - 1].probability >= p.entries[i].probability);
  }
}

TEST_CASE("posterior matches the oracle on random toy models") {
  SplitMix64 rng(56);
  for (int trial = 0; trial < 12; ++trial) {
    test::ToyModel toy = test::random_toy_model(rng.next());
    for (int q = 0; q < 6; ++q) {
      std::uint32_t t = 1 + static_cast<std::uint32_t>(rng.next_below(toy.config.t_max_s));
      const BuildTree& source = toy.raw[rng.next_below(toy.raw.size())].tree;
      ObservationVector obs = test::random_observation_of(rng, source);
      Posterior got = posterior(toy.model, t, obs);
      auto expected = test::oracle_posterior(toy.raw, toy.config, t, obs);
      CHECK(max_abs_error(got, expected) <= 1e-12);
    }
  }
}

TEST_CASE("hard filter leaves zero mass on incompatible trees") {
  SplitMix64 rng(57);
  for (int trial = 0; trial < 30; ++trial) {
    test::ToyModel toy = test::random_toy_model(rng.next(), 10, 80);
    const BuildTree& source = toy.raw[rng.next_below(toy.raw.size())].tree;
    ObservationVector obs = test::random_observation_of(rng, source);
    std::uint32_t t = 1 + static_cast<std::uint32_t>(rng.next_below(toy.config.t_max_s));
    Posterior p = posterior(toy.model, t, obs);
    std::map<BuildTree, double> mass;
    for (const auto& item : p.entries) mass[item.tree] = item.probability;
    for (const test::RawEntry& e : toy.raw)
      if (!compatible(e.tree, obs)) CHECK(!mass.contains(e.tree));
  }
}

TEST_CASE("adding consistent evidence never hurts the witness tree") {
  SplitMix64 rng(58);
  int checked = 0;
  while (checked < 200) {
    test::ToyModel toy = test::random_toy_model(rng.next(), 10, 80);
    const BuildTree& witness = toy.raw[rng.next_below(toy.raw.size())].tree;
    if (witness.empty()) continue;
    ObservationVector obs = test::random_observation_of(rng, witness);
    // one more instance of the witness, still a sub-multiset of it
    ObservationVector more = obs;
    std::vector<BuildingCounts::Entry> candidates;
    for (const auto& [id, c] : witness.entries())
      if (obs.count(id) < c) candidates.push_back({id, c});
    if (candidates.empty()) continue;
    more.add(candidates[rng.next_below(candidates.size())].first);

    std::uint32_t t = 1 + static_cast<std::uint32_t>(rng.next_below(toy.config.t_max_s));
    auto probability_of = [&](const ObservationVector& o) {
      Posterior p = posterior(toy.model, t, o);
      for (const auto& item : p.entries)
        if (item.tree == witness) return item.probability;
      return 0.0;
    };
    CHECK(probability_of(more) >= probability_of(obs) - 1e-12);
    ++checked;
  }
}
