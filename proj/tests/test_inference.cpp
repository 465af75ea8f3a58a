#include <doctest.h>

#include <numeric>

#include "bornseq/errors.hpp"
#include "bornseq/inference.hpp"
#include "bornseq/linalg.hpp"
#include "oracles.hpp"

using namespace bornseq;

namespace {

struct Fixture {
  IsometricMps mps;
  Povm povm;
  std::vector<double> probs;
  int n, v;

  Fixture(int n_, int v_, int p, int d, std::uint64_t seed)
      : mps(init_random_mps(n_, p, d, seed)),
        povm(build_povm(EmbeddingParams::random(v_, p, seed + 1))),
        probs(oracle::all_probabilities(mps, povm.effects)),
        n(n_),
        v(v_) {}
};

std::map<int, int> random_assignment(int n, int v, Rng& rng, int max_size) {
  std::map<int, int> fixed;
  const int size = static_cast<int>(rng.below(max_size + 1));
  while (static_cast<int>(fixed.size()) < size) fixed[static_cast<int>(rng.below(n))] = static_cast<int>(rng.below(v));
  return fixed;
}

}  // namespace

TEST_CASE("joint_marginal matches enumeration") {
  Fixture f(4, 3, 2, 2, 5);
  Rng rng(1);
  CHECK(joint_marginal(f.mps, f.povm, PartialAssignment(4)) == 1.0);
  for (int k = 0; k < 60; ++k) {
    const auto fixed = random_assignment(4, 3, rng, 4);
    const double ref = oracle::brute_marginal(f.probs, 4, 3, fixed);
    CHECK(joint_marginal(f.mps, f.povm, PartialAssignment(4, fixed)) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("conditional_distribution matches enumeration") {
  Fixture f(5, 2, 3, 3, 7);
  Rng rng(2);
  for (int k = 0; k < 40; ++k) {
    auto fixed = random_assignment(5, 2, rng, 4);
    int site = static_cast<int>(rng.below(5));
    while (fixed.count(site)) site = (site + 1) % 5;
    const auto cond = conditional_distribution(f.mps, f.povm, PartialAssignment(5, fixed), site);
    const double denom = oracle::brute_marginal(f.probs, 5, 2, fixed);
    double total = 0.0;
    for (int x = 0; x < 2; ++x) {
      auto with = fixed;
      with[site] = x;
      CHECK(std::abs(cond[x] - oracle::brute_marginal(f.probs, 5, 2, with) / denom) < 1e-10);
      total += cond[x];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("conditional errors") {
  Fixture f(3, 2, 2, 2, 1);
  CHECK_THROWS_AS(conditional_distribution(f.mps, f.povm, PartialAssignment(3, {{0, 1}}), 0), InputError);
  CHECK_THROWS_AS(conditional_distribution(f.mps, f.povm, PartialAssignment(3), 3), InputError);
  CHECK_THROWS_AS(joint_marginal(f.mps, f.povm, PartialAssignment(3, {{0, 2}})), InputError);
  CHECK_THROWS_AS(joint_marginal(f.mps, f.povm, PartialAssignment(4)), InputError);

  // product state |00> under one-hot: token 1 at site 0 is a null event
  std::vector<ComplexTensor> ts;
  for (int i = 0; i < 2; ++i) {
    ComplexTensor t({1, 2, 1});
    t.at({0, 0, 0}) = 1.0;
    ts.push_back(t);
  }
  const auto prod = IsometricMps::from_tensors(ts);
  CHECK_THROWS_AS(conditional_distribution(prod, one_hot_povm(2), PartialAssignment(2, {{0, 1}}), 1), NullEventError);
  CHECK_THROWS_AS(CollapsedState(prod, one_hot_povm(2), PartialAssignment(2, {{0, 1}})), NullEventError);
}

TEST_CASE("collapsed state is normalized and reproduces conditionals") {
  Fixture f(4, 3, 2, 2, 11);
  const PartialAssignment a(4, {{1, 2}, {3, 0}});
  const auto st = collapsed_state(f.mps, f.povm, a);
  CHECK(st.normalization() == doctest::Approx(joint_marginal(f.mps, f.povm, a)).epsilon(1e-12));
  CHECK(st.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
  const auto cond = conditional_distribution(f.mps, f.povm, a, 0);
  for (int x = 0; x < 3; ++x) {
    // <Psi(x_A)| M(x_0) |Psi(x_A)> = p(x_0 | x_A)
    CHECK(st.expectation(f.povm, PartialAssignment(4, {{0, x}})) == doctest::Approx(cond[x]).epsilon(1e-10));
  }
  CHECK(st.expectation(f.povm, PartialAssignment(4)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(collapsed_state(f.mps, f.povm, PartialAssignment(4)).normalization() == 1.0);
}

TEST_CASE("draw_from inverse CDF") {
  const std::vector<double> probs{0.0, 0.25, 0.0, 0.75};
  CHECK(draw_from(probs, 0.0) == 1);
  CHECK(draw_from(probs, 0.1) == 1);
  CHECK(draw_from(probs, 0.25) == 1);
  CHECK(draw_from(probs, 0.2500001) == 3);
  CHECK(draw_from(probs, 0.9999999) == 3);
  const std::vector<double> short_mass{0.3, 0.3, 0.0};
  CHECK(draw_from(short_mass, 0.99) == 1);  // rounding shortfall goes to the last positive entry
  CHECK_THROWS_AS(draw_from(std::vector<double>{0.0, 0.0}, 0.5), NullEventError);
}

TEST_CASE("chain rule along any order equals the joint probability") {
  Fixture f(4, 3, 2, 2, 13);
  Rng rng(3);
  std::vector<int> order{0, 1, 2, 3};
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(order);
    const auto x = oracle::decode(rng.below(f.probs.size()), 4, 3);
    const double p = sequence_probability(f.mps, f.povm, x);
    CHECK(chain_rule_probability(f.mps, f.povm, x, order) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("sample validates the order and is seeded") {
  Fixture f(3, 2, 2, 2, 17);
  Rng rng(1);
  CHECK_THROWS_AS(sample(f.mps, f.povm, std::vector<int>{0, 1}, rng), InputError);
  CHECK_THROWS_AS(sample(f.mps, f.povm, std::vector<int>{0, 1, 1}, rng), InputError);
  CHECK_THROWS_AS(sample(f.mps, f.povm, std::vector<int>{0, 1, 3}, rng), InputError);
  Rng a(9), b(9);
  const std::vector<int> order{2, 0, 1};
  for (int k = 0; k < 20; ++k) CHECK(sample(f.mps, f.povm, order, a) == sample(f.mps, f.povm, order, b));
}

TEST_CASE("sample frequencies follow the model in shuffled orders") {
  Fixture f(3, 2, 2, 2, 19);
  Rng rng(4);
  std::vector<double> counts(f.probs.size(), 0.0);
  std::vector<int> order{0, 1, 2};
  const int draws = 40000;
  for (int k = 0; k < draws; ++k) {
    rng.shuffle(order);
    const auto x = sample(f.mps, f.povm, order, rng);
    counts[(x[0] * 2 + x[1]) * 2 + x[2]] += 1.0 / draws;
  }
  CHECK(oracle::total_variation(counts, f.probs) < 0.02);
}

TEST_CASE("masked_fill keeps fixed positions") {
  Fixture f(4, 3, 2, 2, 23);
  Rng rng(5);
  const std::vector<int> tmpl{kHole, 2, kHole, kHole};
  for (int k = 0; k < 30; ++k) CHECK(masked_fill(f.mps, f.povm, tmpl, rng, FillMode::stochastic)[1] == 2);
  const std::vector<int> full{0, 1, 2, 0};
  CHECK(masked_fill(f.mps, f.povm, full, rng, FillMode::greedy) == full);
  CHECK_THROWS_AS(masked_fill(f.mps, f.povm, std::vector<int>{0, 0}, rng, FillMode::greedy), InputError);
  CHECK_THROWS_AS(masked_fill(f.mps, f.povm, std::vector<int>{0, 0, 5, 0}, rng, FillMode::greedy), InputError);
}

TEST_CASE("greedy fill takes the left-to-right argmax") {
  Fixture f(4, 3, 2, 2, 29);
  Rng rng(6);
  const std::vector<int> tmpl{kHole, kHole, 1, kHole};
  const auto out = masked_fill(f.mps, f.povm, tmpl, rng, FillMode::greedy);
  std::map<int, int> fixed{{2, 1}};
  for (int site : {0, 1, 3}) {
    const auto cond = conditional_distribution(f.mps, f.povm, PartialAssignment(4, fixed), site);
    const int best = static_cast<int>(std::max_element(cond.begin(), cond.end()) - cond.begin());
    CHECK(out[site] == best);
    fixed[site] = best;
  }
}

TEST_CASE("marginal and conditional hand cases") {
  Fixture f(4, 2, 2, 2, 31);
  const PartialAssignment a(4, {{1, 0}});
  double completions = 0.0;
  for (int x0 = 0; x0 < 2; ++x0)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int x3 = 0; x3 < 2; ++x3)
        completions += sequence_probability(f.mps, f.povm, std::vector<int>{x0, 0, x2, x3});
  CHECK(std::abs(joint_marginal(f.mps, f.povm, a) - completions) < 1e-10);

  const std::vector<int> full{1, 0, 1, 1};
  CHECK(joint_marginal(f.mps, f.povm, PartialAssignment(4, {{0, 1}, {1, 0}, {2, 1}, {3, 1}})) ==
        doctest::Approx(sequence_probability(f.mps, f.povm, full)).epsilon(1e-13));

  const auto cond = conditional_distribution(f.mps, f.povm, PartialAssignment(4), 2);
  for (int x = 0; x < 2; ++x)
    CHECK(cond[x] == doctest::Approx(joint_marginal(f.mps, f.povm, PartialAssignment(4, {{2, x}}))).epsilon(1e-12));
}

TEST_CASE("deterministic model samples and fills its own sequence") {
  const std::vector<int> target{1, 0, 2, 2};
  std::vector<ComplexTensor> ts;
  for (int s : target) {
    ComplexTensor t({1, 3, 1});
    t[s] = 1.0;
    ts.push_back(t);
  }
  const auto mps = IsometricMps::from_tensors(ts);
  const Povm povm = one_hot_povm(3);
  Rng rng(1);
  for (const auto& order : {std::vector<int>{0, 1, 2, 3}, {3, 1, 0, 2}}) CHECK(sample(mps, povm, order, rng) == target);
  const auto delta = conditional_distribution(mps, povm, PartialAssignment(4), 2);
  CHECK(delta == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(masked_fill(mps, povm, std::vector<int>{kHole, 0, kHole, kHole}, rng, FillMode::stochastic) == target);
  CHECK(masked_fill(mps, povm, std::vector<int>{kHole, kHole, kHole, kHole}, rng, FillMode::greedy) == target);
  CHECK_THROWS_AS(masked_fill(mps, povm, std::vector<int>{kHole, 1, kHole, kHole}, rng, FillMode::stochastic),
                  NullEventError);
}
