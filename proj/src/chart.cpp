#include "hgt/chart.hpp"

#include <cmath>
#include <limits>

namespace hgt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// admissible[i * (n + 1) + j] for span [i, j).
std::vector<char> admissible_spans(const Bracketing& b, int n) {
  std::vector<char> ok(static_cast<std::size_t>(n + 1) * (n + 1), 1);
  if (b.empty()) return ok;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j <= n; ++j) ok[i * (n + 1) + j] = b.admits({i, j}) ? 1 : 0;
  return ok;
}

}  // namespace

InsideChart::InsideChart(int sentence_len, std::size_t num_nonterminals, SymbolId start)
    : n_(sentence_len),
      nt_(num_nonterminals),
      start_(start),
      table_(static_cast<std::size_t>(sentence_len + 1) * (sentence_len + 1) * num_nonterminals,
             kNegInf) {}

bool InsideChart::in_language() const { return std::isfinite(total()); }

double log_add(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void check_brackets(const Bracketing& brackets, std::size_t sentence_len) {
  if (!brackets.empty() && brackets.sentence_len() != static_cast<int>(sentence_len))
    throw std::invalid_argument("bracketing built for length " +
                                std::to_string(brackets.sentence_len()) +
                                ", sentence has length " + std::to_string(sentence_len));
}

InsideChart weighted_inside(const Grammar& g, std::span<const SymbolId> tokens,
                            const Bracketing& brackets, const Eigen::VectorXd& log_weights) {
  const int n = static_cast<int>(tokens.size());
  check_brackets(brackets, tokens.size());
  InsideChart chart(n, g.num_nonterminals(), g.start());
  const auto ok = admissible_spans(brackets, n);

  for (int i = 0; i < n; ++i)
    for (RuleId r : g.lexical_rules(tokens[i])) {
      double& cell = chart.log_mass({i, i + 1}, g.rule(r).lhs);
      cell = log_add(cell, log_weights(r));
    }

  for (int len = 2; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      if (!ok[i * (n + 1) + j]) continue;
      for (int k = i + 1; k < j; ++k) {
        for (RuleId r : g.binary_rules()) {
          const Rule& rule = g.rule(r);
          const double l = chart.log_mass({i, k}, rule.left);
          if (l == kNegInf) continue;
          const double rt = chart.log_mass({k, j}, rule.right);
          if (rt == kNegInf) continue;
          double& cell = chart.log_mass({i, j}, rule.lhs);
          cell = log_add(cell, l + rt + log_weights(r));
        }
      }
    }
  }
  return chart;
}

Eigen::VectorXd expected_rule_counts(const Grammar& g, std::span<const SymbolId> tokens,
                                     const Bracketing& brackets,
                                     const Eigen::VectorXd& log_weights,
                                     const InsideChart& chart) {
  const int n = static_cast<int>(tokens.size());
  if (!chart.in_language())
    throw std::invalid_argument("expected counts requested for a sentence outside the language");
  const double z = chart.total();
  const auto ok = admissible_spans(brackets, n);

  InsideChart outside(n, g.num_nonterminals(), g.start());
  outside.log_mass({0, n}, g.start()) = 0.0;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_rules()));

  for (int len = n; len >= 2; --len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      if (!ok[i * (n + 1) + j]) continue;
      for (RuleId r : g.binary_rules()) {
        const Rule& rule = g.rule(r);
        const double out = outside.log_mass({i, j}, rule.lhs);
        if (out == kNegInf) continue;
        const double top = out + log_weights(r);
        for (int k = i + 1; k < j; ++k) {
          const double l = chart.log_mass({i, k}, rule.left);
          const double rt = chart.log_mass({k, j}, rule.right);
          if (l == kNegInf || rt == kNegInf) continue;
          double& ol = outside.log_mass({i, k}, rule.left);
          ol = log_add(ol, top + rt);
          double& orr = outside.log_mass({k, j}, rule.right);
          orr = log_add(orr, top + l);
          counts(r) += std::exp(top + l + rt - z);
        }
      }
    }
  }

  for (int i = 0; i < n; ++i)
    for (RuleId r : g.lexical_rules(tokens[i])) {
      const double out = outside.log_mass({i, i + 1}, g.rule(r).lhs);
      if (out == kNegInf) continue;
      counts(r) += std::exp(out + log_weights(r) - z);
    }
  return counts;
}

InsideChart inside(const Grammar& g, const Sentence& sentence, const Bracketing& brackets) {
  const auto tokens = encode(g, sentence);
  return weighted_inside(g, tokens, brackets, g.log_probs());
}

namespace {

struct Best {
  double score = kNegInf;
  RuleId rule = -1;
  int split = -1;
};

void backtrace(const Grammar& g, const std::vector<Best>& best, int n, Span s, SymbolId a,
               std::vector<RuleId>& out) {
  const std::size_t nt = g.num_nonterminals();
  const Best& b = best[(static_cast<std::size_t>(s.begin) * (n + 1) + s.end) * nt + a];
  out.push_back(b.rule);
  const Rule& rule = g.rule(b.rule);
  if (rule.binary()) {
    backtrace(g, best, n, {s.begin, b.split}, rule.left, out);
    backtrace(g, best, n, {b.split, s.end}, rule.right, out);
  }
}

}  // namespace

std::optional<Derivation> viterbi(const Grammar& g, std::span<const SymbolId> tokens,
                                  const Bracketing& brackets) {
  const int n = static_cast<int>(tokens.size());
  check_brackets(brackets, tokens.size());
  const std::size_t nt = g.num_nonterminals();
  const auto ok = admissible_spans(brackets, n);
  std::vector<Best> best(static_cast<std::size_t>(n + 1) * (n + 1) * nt);
  auto cell = [&](int i, int j, SymbolId a) -> Best& {
    return best[(static_cast<std::size_t>(i) * (n + 1) + j) * nt + a];
  };
  // A candidate replaces the incumbent only when strictly better beyond the
  // tie tolerance, so the first (smallest split, rule id) wins among ties.
  auto offer = [](Best& b, double score, RuleId r, int split) {
    if (b.rule < 0 || (score > b.score && !log_tied(score, b.score))) b = {score, r, split};
  };

  for (int i = 0; i < n; ++i)
    for (RuleId r : g.lexical_rules(tokens[i])) offer(cell(i, i + 1, g.rule(r).lhs), g.log_probs()(r), r, i + 1);

  for (int len = 2; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      if (!ok[i * (n + 1) + j]) continue;
      for (int k = i + 1; k < j; ++k) {
        for (RuleId r : g.binary_rules()) {
          const Rule& rule = g.rule(r);
          const Best& l = cell(i, k, rule.left);
          const Best& rt = cell(k, j, rule.right);
          if (l.rule < 0 || rt.rule < 0) continue;
          offer(cell(i, j, rule.lhs), l.score + rt.score + g.log_probs()(r), r, k);
        }
      }
    }
  }

  if (cell(0, n, g.start()).rule < 0) return std::nullopt;
  Derivation d;
  d.sentence_len = n;
  backtrace(g, best, n, {0, n}, g.start(), d.rules);
  d.log_prob = derivation_probability(g, d);
  return d;
}

std::optional<Derivation> viterbi(const Grammar& g, const Sentence& sentence,
                                  const Bracketing& brackets) {
  const auto tokens = encode(g, sentence);
  return viterbi(g, std::span<const SymbolId>(tokens), brackets);
}

}  // namespace hgt
