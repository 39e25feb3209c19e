#include <cmath>
#include <random>

#include "doctest.h"
#include "hgt/chart.hpp"
#include "hgt/estimator.hpp"
#include "hgt/kbest.hpp"
#include "hgt/oracle.hpp"
#include "support/random_grammar.hpp"

using namespace hgt;

namespace {

Grammar toy(double q) {
  return Grammar::build({{"S", {"S", "S"}, q, 1}, {"S", {"a"}, 1 - q, 2}});
}

Sentence as(int n) { return Sentence(n, "a"); }

Corpus omega() { return {{as(2), std::nullopt}, {as(4), std::nullopt}}; }

constexpr RuleId SS = 0, Sa = 1;

bool rel_close(double a, double b, double tol) {
  const double d = std::abs(a - b);
  return d <= tol || d <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (RefMode m : {RefMode::viterbi, RefMode::nbest, RefMode::bracketed_viterbi})
    CHECK(parse_ref_mode(to_string(m)) == m);
  for (CompMode m : {CompMode::all, CompMode::nbest, CompMode::bracketed_all})
    CHECK(parse_comp_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_ref_mode("best"), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  HParams p;
  p.h = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.h = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.eta = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.epsilon = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  DeltaSpec s{RefMode::nbest, 3, CompMode::nbest, 2};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.n_comp = 3;
  CHECK_NOTHROW(s.validate());
  s.n_ref = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("scaled_set_logprob examples") {
  const Grammar g = toy(0.5);
  const auto tokens = encode(g, as(4));
  const DerivationSet all{{}, Bracketing{}};
  CHECK(*scaled_set_logprob(g, tokens, all, 1.0) == doctest::Approx(std::log(5.0 / 128)));
  CHECK(*scaled_set_logprob(g, tokens, all, 2.0) ==
        doctest::Approx(std::log(5.0 / (128.0 * 128.0))));
  const Derivation d = *viterbi(g, tokens);
  CHECK(*scaled_set_logprob(g, {d}, 0.3) == doctest::Approx(0.3 * d.log_prob));
  CHECK_FALSE(scaled_set_logprob(g, std::vector<Derivation>{}, 1.0));
  CHECK_FALSE(scaled_set_logprob(g, tokens, DerivationSet{}, 1.0));
  // Listed derivations plus an implicit bracketed part that excludes them.
  const auto five = nbest(g, tokens, 5).derivations;
  const DerivationSet mix{{five[0]}, Bracketing({{0, 2}}, 4)};
  const auto filtered =
      oracle::filter_compatible(oracle::enumerate_derivations(g, as(4)), Bracketing({{0, 2}}, 4));
  const bool listed_inside =
      std::find(filtered.derivations.begin(), filtered.derivations.end(), five[0]) !=
      filtered.derivations.end();
  const double expect = (listed_inside ? 2.0 : 3.0) / 128;
  CHECK(*scaled_set_logprob(g, tokens, mix, 1.0) == doctest::Approx(std::log(expect)));
}

TEST_CASE("accumulate examples") {
  const Grammar g = toy(0.4);
  const Accumulators acc = accumulate(g, omega(), {}, 1.0);
  CHECK(acc.d_rule_ref[SS] == 4.0);
  CHECK(acc.d_rule_comp[SS] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(acc.d_nt_ref[0] == 10.0);
  CHECK(acc.d_nt_comp[0] == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(acc.sentences == 2);

  const Grammar one = parse_grammar("S -> a 1.0\n");
  const Accumulators a1 = accumulate(one, {{{"a"}, std::nullopt}}, {}, 1.0);
  CHECK(a1.d_rule_ref[0] == 1.0);
  CHECK(a1.d_rule_comp[0] == 1.0);

  const DeltaSpec nb2{RefMode::viterbi, 1, CompMode::nbest, 2};
  const Accumulators a2 = accumulate(toy(0.5), {{as(4), std::nullopt}}, nb2, 1.0);
  CHECK(a2.d_rule_ref[SS] == 3.0);
  CHECK(a2.d_rule_comp[SS] == doctest::Approx(3.0).epsilon(1e-14));
  const auto o2 = oracle::oracle_accumulate(toy(0.5), {{as(4), std::nullopt}}, nb2, 1.0);
  CHECK(o2.d_rule_comp[SS] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("accumulate errors and skip policy") {
  const Grammar g = parse_grammar("S -> A A 1\nA -> a 1\nB -> b 1\n");
  CHECK_THROWS_AS(accumulate(g, Corpus{}, {}, 1.0), EstimatorError);
  CHECK_THROWS_AS(accumulate(g, {{{"b"}, std::nullopt}}, {}, 1.0), EstimatorError);
  const Accumulators acc =
      accumulate(g, {{{"b"}, std::nullopt}, {{"a", "a"}, std::nullopt}}, {}, 1.0);
  CHECK(acc.skipped == 1);
  CHECK(acc.sentences == 1);
  // Bracketed modes need bracketed entries.
  const DeltaSpec br{RefMode::bracketed_viterbi, 1, CompMode::all, 1};
  CHECK_THROWS_AS(accumulate(toy(0.5), omega(), br, 1.0), EstimatorError);
}

TEST_CASE("select_deltas flags degenerate sets") {
  const Grammar g = toy(0.4);
  const auto deltas = select_deltas(g, omega(), {});
  CHECK(deltas[0].degenerate);  // aa has a single derivation
  CHECK_FALSE(deltas[1].degenerate);
  const DeltaSpec same{RefMode::nbest, 2, CompMode::nbest, 2};
  CHECK(select_deltas(g, omega(), same)[1].degenerate);
}

TEST_CASE("accumulator identity and merge") {
  std::mt19937 rng(29);
  for (int t = 0; t < 50; ++t) {
    const Grammar g = testing::random_grammar(rng);
    const Corpus c = testing::as_corpus(testing::random_sentences(rng, g, 4, 6));
    if (c.size() < 2) continue;
    const DeltaSpec spec{RefMode::nbest, 2, CompMode::all, 1};
    const Accumulators full = accumulate(g, c, spec, 1.3);
    for (SymbolId a = 0; a < static_cast<SymbolId>(g.num_nonterminals()); ++a) {
      double ref = 0.0, comp = 0.0;
      for (RuleId r : g.rules_of(a)) {
        ref += full.d_rule_ref[r];
        comp += full.d_rule_comp[r];
      }
      CHECK(rel_close(full.d_nt_ref[a], ref, 1e-9));
      CHECK(rel_close(full.d_nt_comp[a], comp, 1e-9));
    }
    CHECK((full.d_rule_ref.array() >= 0).all());
    CHECK((full.d_rule_comp.array() >= 0).all());

    const Corpus head(c.begin(), c.begin() + 1), tail(c.begin() + 1, c.end());
    Accumulators ab = accumulate(g, head, spec, 1.3);
    ab += accumulate(g, tail, spec, 1.3);
    Accumulators ba = accumulate(g, tail, spec, 1.3);
    ba += accumulate(g, head, spec, 1.3);
    CHECK(ab.d_rule_ref == ba.d_rule_ref);
    CHECK(ab.d_rule_comp == ba.d_rule_comp);
    CHECK(ab.sentences == full.sentences);
    for (Eigen::Index r = 0; r < ab.d_rule_comp.size(); ++r)
      CHECK(rel_close(ab.d_rule_comp[r], full.d_rule_comp[r], 1e-12));
  }
}

TEST_CASE("compute_ctilde examples") {
  const Grammar g = toy(0.5);
  const Accumulators acc = accumulate(g, omega(), {}, 1.0);
  CHECK(compute_ctilde(acc, g, 0.0, 1e-6) == 1e-6);
  CHECK(compute_ctilde(acc, g, 1.0, 1e-6) == doctest::Approx(1e-6).epsilon(1e-6));

  const Grammar g4 = parse_grammar("S -> S S 0.75\nS -> a 0.25\n");
  Accumulators a = Accumulators::zeros(g4);
  a.d_rule_comp[Sa] = 2.0;
  a.d_nt_comp[0] = 2.0;
  CHECK(compute_ctilde(a, g4, 0.5, 1e-6) == doctest::Approx(4.0 + 1e-6));
}

TEST_CASE("growth_step examples") {
  for (double q : {0.3, 0.5}) {
    const Grammar g = toy(q);
    const Accumulators acc = accumulate(g, omega(), {}, 1.0);
    for (double h : {0.0, 0.5}) {
      const double c = 2.0;
      const Grammar next = growth_step(g, acc, h, c);
      CHECK(next.prob(SS) ==
            doctest::Approx((4 * (1 - h) + q * c) / (10 * (1 - h) + c)).epsilon(1e-12));
      CHECK(next.prob(Sa) ==
            doctest::Approx((6 * (1 - h) + (1 - q) * c) / (10 * (1 - h) + c)).epsilon(1e-12));
    }
  }
  // An unused nonterminal keeps its probabilities.
  const Grammar g = parse_grammar("S -> S S 0.4\nS -> a 0.6\nB -> a 0.3\nB -> b 0.7\n");
  const Grammar next = growth_step(g, accumulate(g, omega(), {}, 1.0), 0.0, 1e-3);
  CHECK(next.prob(2) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(next.prob(3) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("transformed_probabilities rejects nonpositive terms") {
  const Grammar g = toy(0.5);
  Accumulators a = Accumulators::zeros(g);
  a.d_rule_comp[Sa] = 2.0;
  a.d_nt_comp[0] = 2.0;
  CHECK_THROWS_AS(transformed_probabilities(g, a, 0.5, 1.0), EstimatorError);
}

TEST_CASE("apply_growth floors tiny probabilities") {
  const Grammar g = toy(0.5);
  Accumulators a = Accumulators::zeros(g);
  a.d_rule_ref[Sa] = 1.0;
  a.d_nt_ref[0] = 1.0;
  const GrowthResult r = apply_growth(g, a, 0.0, 1e-20, 1e-12);
  CHECK(r.floored == 1);
  CHECK(r.grammar.prob(SS) > 0.0);
  CHECK(r.grammar.prob(SS) + r.grammar.prob(Sa) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("objective examples") {
  const Grammar g = toy(0.5);
  HParams p;
  CHECK(objective(g, omega(), {}, p) == doctest::Approx(std::log(1.0 / 8 / 128)));
  CHECK(objective(g, select_deltas(g, omega(), {}), 1.0, 1.0) ==
        doctest::Approx(std::log(0.2)));
  const DeltaSpec mle{RefMode::nbest, 5, CompMode::all, 1};
  CHECK(objective(g, omega(), mle, p) ==
        doctest::Approx(inside(g, as(2)).total() + inside(g, as(4)).total()));
}

TEST_CASE("train: Viterbi-score fixed point") {
  HParams p;
  p.max_iters = 50;
  for (double q0 : {0.3, 0.4}) {
    const TrainReport rep = train(toy(q0), omega(), {}, p);
    CHECK(rep.grammar.prob(SS) == doctest::Approx(0.4).epsilon(1e-4));
    CHECK(rep.records.front().iter == 0);
    for (std::size_t i = 1; i < rep.records.size(); ++i)
      CHECK(rep.records[i].log_objective >= rep.records[i - 1].log_objective - 1e-9);
  }
}

TEST_CASE("train: stationary start moves by less than 1e-12") {
  HParams p;
  p.max_iters = 1;
  const TrainReport rep = train(toy(0.4), omega(), {}, p);
  REQUIRE(rep.records.size() == 2);
  CHECK(rep.records[1].max_delta_p < 1e-12);
}

TEST_CASE("train: zero iterations returns the input grammar") {
  HParams p;
  p.max_iters = 0;
  const Grammar g = toy(0.3);
  const TrainReport rep = train(g, omega(), {}, p);
  CHECK(rep.records.size() == 1);
  CHECK(serialize(rep.grammar) == serialize(g));
  const std::string csv = report_csv(rep);
  CHECK(csv.rfind("iter,log_objective,ctilde,max_delta_p,spectral_radius,skipped\n0,", 0) == 0);
}

TEST_CASE("train: bracketed modes") {
  const Grammar g = toy(0.3);
  Corpus c{{as(4), Bracketing({{0, 2}, {2, 4}}, 4)}, {as(3), Bracketing({{0, 2}}, 3)}};
  const DeltaSpec spec{RefMode::bracketed_viterbi, 1, CompMode::all, 1};
  HParams p;
  p.h = 0.5;
  p.max_iters = 20;
  const TrainReport rep = train(g, c, spec, p);
  for (std::size_t i = 1; i < rep.records.size(); ++i)
    CHECK(rep.records[i].log_objective >= rep.records[i - 1].log_objective - 1e-9);
  const auto acc = accumulate(g, c, {RefMode::viterbi, 1, CompMode::bracketed_all, 1}, 1.0);
  const auto oacc =
      oracle::oracle_accumulate(g, c, {RefMode::viterbi, 1, CompMode::bracketed_all, 1}, 1.0);
  for (Eigen::Index r = 0; r < acc.d_rule_comp.size(); ++r)
    CHECK(rel_close(acc.d_rule_comp[r], oacc.d_rule_comp[r], 1e-10));
}
