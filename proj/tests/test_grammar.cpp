#include <cmath>
#include <random>

#include "doctest.h"
#include "hgt/grammar.hpp"
#include "support/random_grammar.hpp"

using namespace hgt;

namespace {

Grammar toy(double q) {
  return parse_grammar("S -> S S " + std::to_string(q) + "\nS -> a " + std::to_string(1 - q) +
                       "\n");
}

std::size_t error_line(std::string_view text) {
  try {
    parse_grammar(text);
  } catch (const GrammarError& e) {
    return e.line();
  }
  FAIL("expected GrammarError");
  return 0;
}

}  // namespace

TEST_CASE("parse_grammar: toy grammar") {
  const Grammar g = parse_grammar("S -> S S 0.4\nS -> a 0.6\n");
  CHECK(g.num_rules() == 2);
  CHECK(g.rules_of(g.start()).size() == 2);
  CHECK(g.nonterminal_name(g.start()) == "S");
  CHECK(g.rule(0).binary());
  CHECK_FALSE(g.rule(1).binary());
  CHECK(g.prob(0) == 0.4);
  CHECK(g.prob(1) == 0.6);
}

TEST_CASE("parse_grammar: single rule, comments and blank lines") {
  const Grammar g = parse_grammar("# header\n\nS -> a 1.0   # trailing\n");
  CHECK(g.num_rules() == 1);
  CHECK(g.prob(0) == 1.0);
}

TEST_CASE("parse_grammar: %start overrides the first LHS") {
  const Grammar g = parse_grammar("A -> a 1\n%start S\nS -> A A 1\n");
  CHECK(g.nonterminal_name(g.start()) == "S");
  CHECK(serialize(g).rfind("%start S\n", 0) == 0);
}

TEST_CASE("parse_grammar: diagnostics carry the line number") {
  CHECK(error_line("S -> S S 0.3\nS -> a 0.6\n") == 1);         // sum 0.9
  CHECK(error_line("S -> a 0.5\nS -> a 0.5\n") == 2);           // duplicate
  CHECK(error_line("S -> a 1\nS -> A 1\n") == 2);                // unit rule
  CHECK(error_line("S -> a 1\nS -> a b 1\n") == 2);              // terminal pair
  CHECK(error_line("S -> a 1\nS -> A B C 1\n") == 2);            // three symbols
  CHECK(error_line("S -> a 1\nx -> a 1\n") == 2);                // terminal LHS
  CHECK(error_line("S -> a 1.5\n") == 1);                        // > 1
  CHECK(error_line("S -> a 0\n") == 1);                          // not > 0
  CHECK(error_line("S -> a -0.2\n") == 1);
  CHECK(error_line("S -> a p\n") == 1);
  CHECK(error_line("S a 1\n") == 1);
  CHECK(error_line("%begin S\nS -> a 1\n") == 1);
  CHECK_THROWS_AS(parse_grammar("%start T\nS -> a 1\n"), GrammarError);
  CHECK_THROWS_AS(parse_grammar("# nothing\n"), GrammarError);
}

TEST_CASE("parse_grammar: properness tolerance then renormalization") {
  const Grammar g = parse_grammar("S -> S S 0.4000000001\nS -> a 0.6\n");
  CHECK(std::abs(g.prob(0) + g.prob(1) - 1.0) <= exact_sum_slack(2));
  CHECK_THROWS_AS(parse_grammar("S -> S S 0.40001\nS -> a 0.6\n"), GrammarError);
}

TEST_CASE("serialize/parse round-trip is bit-exact") {
  std::mt19937 rng(7);
  for (int t = 0; t < 200; ++t) {
    const Grammar g = testing::random_grammar(rng);
    const Grammar back = parse_grammar(serialize(g));
    REQUIRE(back.num_rules() == g.num_rules());
    CHECK(back.start() == g.start());
    for (const Rule& r : g.rules()) {
      CHECK(back.rule_string(r.id) == g.rule_string(r.id));
      CHECK(back.prob(r.id) == g.prob(r.id));
    }
  }
}

TEST_CASE("with_probabilities validates like file input") {
  const Grammar g = toy(0.4);
  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  CHECK(g.with_probabilities(p).prob(0) == 0.7);
  p << 0.7, 0.0;
  CHECK_THROWS_AS(g.with_probabilities(p), GrammarError);
  p << 0.7, 0.2;
  CHECK_THROWS_AS(g.with_probabilities(p), GrammarError);
  CHECK_THROWS_AS(g.with_probabilities(Eigen::VectorXd::Ones(3)), GrammarError);
}

TEST_CASE("expectation_matrix examples") {
  CHECK(expectation_matrix(toy(0.4))(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(expectation_matrix(toy(0.6))(0, 0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(expectation_matrix(parse_grammar("S -> a 1.0\n"))(0, 0) == 0.0);

  const Grammar g = parse_grammar("S -> A B 0.5\nS -> a 0.5\nA -> A A 0.25\nA -> a 0.75\nB -> b 1\n");
  const Eigen::MatrixXd m = expectation_matrix(g);
  CHECK(m(0, 1) == 0.5);  // S -> A
  CHECK(m(0, 2) == 0.5);  // S -> B
  CHECK(m(1, 1) == 0.5);  // A -> A A counts A twice
  CHECK(m.row(2).sum() == 0.0);
}

TEST_CASE("expectation_matrix: nonnegative, rows bounded by 2 * binary mass") {
  std::mt19937 rng(11);
  for (int t = 0; t < 100; ++t) {
    const Grammar g = testing::random_grammar(rng);
    const Eigen::MatrixXd m = expectation_matrix(g);
    CHECK((m.array() >= 0.0).all());
    for (SymbolId a = 0; a < static_cast<SymbolId>(g.num_nonterminals()); ++a) {
      double binary = 0.0;
      for (RuleId r : g.rules_of(a))
        if (g.rule(r).binary()) binary += g.prob(r);
      CHECK(m.row(a).sum() <= 2.0 * binary + 1e-15);
    }
  }
}

TEST_CASE("check_consistency examples") {
  const auto inc = check_consistency(toy(0.6));
  CHECK(inc.verdict == Verdict::inconsistent);
  CHECK(inc.spectral_radius == doctest::Approx(1.2).epsilon(1e-12));

  const auto con = check_consistency(toy(0.4));
  CHECK(con.verdict == Verdict::consistent);
  CHECK(con.spectral_radius == doctest::Approx(0.8).epsilon(1e-12));

  const auto single = check_consistency(parse_grammar("S -> a 1.0\n"));
  CHECK(single.verdict == Verdict::consistent);
  CHECK(single.spectral_radius == 0.0);

  CHECK(check_consistency(toy(0.5)).verdict == Verdict::borderline);
}

TEST_CASE("check_consistency: periodic expectation matrix converges") {
  // M = [[0, 1.6], [0.9, 0]] has eigenvalues +-1.2; plain power iteration
  // from a non-eigenvector start would oscillate.
  const Grammar g = parse_grammar("S -> A C 0.8\nS -> a 0.2\nA -> S D 0.9\nA -> a 0.1\n"
                                  "C -> c 1\nD -> d 1\n");
  Eigen::MatrixXd m = expectation_matrix(g).topLeftCorner(2, 2);
  CHECK(m(0, 1) == 0.8);
  const auto rep = check_consistency(g);
  CHECK(rep.converged);
  CHECK(rep.spectral_radius == doctest::Approx(std::sqrt(0.8 * 0.9)).epsilon(1e-9));
  CHECK(rep.verdict == Verdict::consistent);
}

TEST_CASE("check_consistency: iteration cap yields borderline") {
  const Grammar g = parse_grammar("S -> A C 0.8\nS -> a 0.2\nA -> S D 0.9\nA -> a 0.1\n"
                                  "C -> c 1\nD -> d 1\n");
  const auto rep = check_consistency(g, 1e-9, {2, 1e-12});
  CHECK_FALSE(rep.converged);
  CHECK(rep.verdict == Verdict::borderline);
}
