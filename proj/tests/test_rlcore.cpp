#include "doctest.h"

#include <cmath>
#include <numeric>

#include "funrl/rlcore.hpp"
#include "funrl/rng.hpp"

using namespace funrl;
using namespace funrl::rl;

namespace {

std::vector<double> adv(std::vector<double> r) { return group_advantages(r); }

Rollout cot_rollout(std::vector<double> probs) {
  Rollout r;
  r.cot = {1, 1 + probs.size()};
  r.tokens.assign(probs.size() + 2, 7);
  r.chosen_prob.assign(probs.size() + 2, 1.0);
  for (std::size_t i = 0; i < probs.size(); ++i) r.chosen_prob[1 + i] = probs[i];
  return r;
}

}  // namespace

TEST_CASE("group advantages") {
  CHECK(adv({1, 0, 0, 1}) == std::vector<double>{1, -1, -1, 1});
  CHECK(adv({1, 1, 1, 1}) == std::vector<double>{0, 0, 0, 0});
  CHECK(adv({1, 0}) == std::vector<double>{1, -1});
  CHECK_THROWS_AS(adv({1}), DegenerateGroup);
}

TEST_CASE("group advantages are standardized") {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r(2 + rng.below(15));
    for (auto& x : r) x = rng.uniform() * 10 - 5;
    auto a = group_advantages(r);
    long double m = 0, v = 0;
    for (double x : a) m += x;
    m /= a.size();
    for (double x : a) v += (x - m) * (x - m);
    CHECK(std::fabs(static_cast<double>(m)) < 1e-12);
    CHECK(std::fabs(std::sqrt(static_cast<double>(v / a.size())) - 1.0) < 1e-9);
  }
}

TEST_CASE("group advantages are permutation equivariant") {
  std::vector<double> r = {0.3, 1, 0, 0.7, 0.2};
  auto a = group_advantages(r);
  std::vector<double> p = {r[4], r[2], r[0], r[3], r[1]};
  auto b = group_advantages(p);
  CHECK(b[0] == a[4]);
  CHECK(b[1] == a[2]);
  CHECK(b[2] == a[0]);
  CHECK(b[3] == a[3]);
  CHECK(b[4] == a[1]);
}

TEST_CASE("plugin entropy") {
  std::vector<Rollout> g = {cot_rollout({0.25, 0.25, 0.25})};
  const double expected = 3 * (-0.25 * std::log(0.25));
  CHECK(cot_entropy(g, EntropyMode::Plugin, EntropyAggregation::Sum) == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK(std::fabs(cot_entropy(g, EntropyMode::Plugin, EntropyAggregation::Sum) - expected) < 1e-12);
  CHECK(std::fabs(cot_entropy(g, EntropyMode::Plugin, EntropyAggregation::MeanPerToken) - expected / 3) < 1e-12);
  auto doubled = g;
  doubled.push_back(g[0]);
  CHECK(std::fabs(cot_entropy(doubled, EntropyMode::Plugin, EntropyAggregation::Sum) - 2 * expected) < 1e-12);
}

TEST_CASE("full entropy of a uniform distribution is ln V") {
  for (int V : {2, 5, 57}) {
    Rollout r = cot_rollout({1.0 / V, 1.0 / V});
    r.step_dists.assign(r.tokens.size(), std::vector<double>(V, 1.0 / V));
    std::vector<Rollout> g = {r};
    CHECK(std::fabs(cot_entropy(g, EntropyMode::Full, EntropyAggregation::MeanPerToken) - std::log(V)) < 1e-9);
  }
}

TEST_CASE("deterministic traces have zero entropy") {
  Rollout r = cot_rollout({1.0, 1.0, 1.0});
  std::vector<double> onehot(4, 0.0);
  onehot[2] = 1.0;
  r.step_dists.assign(r.tokens.size(), onehot);
  std::vector<Rollout> g = {r, r};
  for (auto mode : {EntropyMode::Plugin, EntropyMode::Full})
    for (auto agg : {EntropyAggregation::Sum, EntropyAggregation::MeanPerToken}) CHECK(cot_entropy(g, mode, agg) == 0.0);
}

TEST_CASE("empty CoT has zero entropy") {
  std::vector<Rollout> g = {cot_rollout({})};
  CHECK(cot_entropy(g, EntropyMode::Plugin, EntropyAggregation::MeanPerToken) == 0.0);
}

TEST_CASE("advantage adjustment") {
  std::vector<double> a = {1.0};
  CHECK(adjust_advantages(a, 0.3, 2.0, 0.1)[0] == 1.6);
  std::vector<double> b = {-0.5};
  CHECK(adjust_advantages(b, 50.0, 2.0, 2.0)[0] == -0.25);
  std::vector<double> c = {0.7, -0.3, 0.0};
  CHECK(adjust_advantages(c, 0.0, 2.0, 0.1) == c);
  // Zero advantage stays zero: min(lambda E, 0) = 0.
  CHECK(adjust_advantages(c, 5.0, 2.0, 0.1)[2] == 0.0);
}

TEST_CASE("adjustment preserves sign for alpha >= 1") {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> a = {rng.uniform() * 6 - 3};
    if (a[0] == 0.0) continue;
    const double e = rng.uniform() * 10, lambda = rng.uniform() * 10, alpha = 1.0 + rng.uniform() * 9;
    const double out = adjust_advantages(a, e, lambda, alpha)[0];
    CHECK((out > 0) == (a[0] > 0));
  }
}

TEST_CASE("adjustment can flip negative advantages when alpha < 1") {
  std::vector<double> a = {-0.5};
  CHECK(adjust_advantages(a, 1.0, 2.0, 0.1)[0] > 0);
}

TEST_CASE("adjustment is monotone in entropy") {
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> a = {rng.uniform() * 4 - 2};
    const double e1 = rng.uniform() * 3, e2 = e1 + rng.uniform();
    CHECK(adjust_advantages(a, e1, 2.0, 0.1)[0] <= adjust_advantages(a, e2, 2.0, 0.1)[0]);
  }
}

TEST_CASE("advantage report") {
  std::vector<double> r = {1, 0, 0, 1};
  auto rep = advantage_report(r, 0.3, 2.0, 0.1);
  CHECK(rep.base == std::vector<double>{1, -1, -1, 1});
  CHECK(rep.adjusted == std::vector<double>{1.6, -0.4, -0.4, 1.6});
  CHECK(rep.clip_bound_hits == 0);
  auto clipped = advantage_report(r, 100.0, 2.0, 0.1);
  CHECK(clipped.clip_bound_hits == 4);
  auto off = advantage_report(r, 0.3, 0.0, 0.1);
  CHECK(off.adjusted == off.base);
}

TEST_CASE("categorical KL") {
  std::vector<double> p = {0.2, 0.3, 0.5};
  CHECK(categorical_kl(p, p) == 0.0);
  std::vector<double> one = {1, 0}, half = {0.5, 0.5};
  CHECK(std::fabs(categorical_kl(one, half) - std::log(2.0)) < 1e-15);
  CHECK_THROWS_AS(categorical_kl(half, one), SupportMismatch);
  CHECK_THROWS_AS(categorical_kl(p, half), SupportMismatch);
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(5), b(5);
    double sa = 0, sb = 0;
    for (int k = 0; k < 5; ++k) sa += a[k] = rng.uniform() + 1e-3, sb += b[k] = rng.uniform() + 1e-3;
    for (int k = 0; k < 5; ++k) a[k] /= sa, b[k] /= sb;
    CHECK(categorical_kl(a, b) >= 0.0);
  }
}

TEST_CASE("clipped surrogate") {
  auto one = [](double rho, double a) {
    std::vector<double> r = {rho}, ad = {a}, kl = {0.0};
    return clipped_surrogate(r, ad, 0.2, kl, 0.0);
  };
  CHECK(one(1.0, 1.0) == 1.0);
  CHECK(one(1.5, 1.0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(one(0.5, -1.0) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(surrogate_clipped(1.5, 1.0, 0.2));
  CHECK(surrogate_clipped(0.5, -1.0, 0.2));
  CHECK_FALSE(surrogate_clipped(0.5, 1.0, 0.2));

  std::vector<double> ratios(6, 1.0), advs = {0.5, -1, 2, 0.25, 3, -0.75}, kl(6, 0.4);
  CHECK(clipped_surrogate(ratios, advs, 0.2, kl, 0.0) ==
        std::accumulate(advs.begin(), advs.end(), 0.0) / 6.0);
  CHECK(clipped_surrogate(ratios, advs, 0.2, kl, 0.5) ==
        doctest::Approx(std::accumulate(advs.begin(), advs.end(), 0.0) / 6.0 - 0.2));
  std::vector<double> short_ratios = {1.0};
  CHECK_THROWS_AS(clipped_surrogate(short_ratios, advs, 0.2, kl, 0.0), LengthMismatch);
}
