// Derivations, rule counts, bracketings and sentence encoding.

#ifndef HGT_DERIVATION_HPP
#define HGT_DERIVATION_HPP

#include <compare>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgt/grammar.hpp"

namespace hgt {

using Sentence = std::vector<std::string>;

/// Unknown token or malformed sentence input.
class SentenceError : public std::runtime_error {
public:
  SentenceError(std::size_t position, const std::string& what);
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

/// Maps tokens to terminal ids; throws SentenceError naming the first
/// unknown token and its position.
std::vector<SymbolId> encode(const Grammar& g, const Sentence& sentence);

/// Half-open token span [begin, end).
struct Span {
  int begin = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};

/// True when the spans overlap without nesting.
constexpr bool crosses(Span a, Span b) noexcept {
  return (a.begin < b.begin && b.begin < a.end && a.end < b.end) ||
         (b.begin < a.begin && a.begin < b.end && b.end < a.end);
}

/// Set of pairwise non-crossing spans over a sentence of known length.
class Bracketing {
public:
  Bracketing() = default;
  /// Throws std::invalid_argument on out-of-range, empty or crossing spans.
  Bracketing(std::vector<Span> spans, int sentence_len);

  const std::vector<Span>& spans() const noexcept { return spans_; }
  bool empty() const noexcept { return spans_.empty(); }
  int sentence_len() const noexcept { return sentence_len_; }

  /// A chart span is admissible when it crosses no bracket.
  bool admits(Span s) const noexcept;

private:
  std::vector<Span> spans_;
  int sentence_len_ = 0;
};

/// Left-derivation: rule ids in the order the leftmost nonterminal is
/// rewritten (pre-order over the parse tree).
struct Derivation {
  std::vector<RuleId> rules;
  int sentence_len = 0;
  double log_prob = 0.0;

  bool operator==(const Derivation& o) const noexcept { return rules == o.rules; }
};

struct RuleCounts {
  std::vector<long> per_rule;
  std::vector<long> per_nonterminal;
};

/// Sum over rules of N(rule, d) * log p(rule), accumulated in rule-id order
/// so that derivations with equal counts get bit-identical values.  Throws
/// std::out_of_range on an unknown rule id.
double derivation_probability(const Grammar& g, const Derivation& d);

RuleCounts rule_counts(const Grammar& g, const Derivation& d);

/// Parse tree node; children are indices into the node vector, -1 for none.
struct TreeNode {
  RuleId rule = 0;
  Span span;
  int left = -1;
  int right = -1;
};

/// Rebuilds the tree of a left-derivation rooted at the start symbol.  Node
/// 0 is the root; nodes are in pre-order.  Throws std::invalid_argument if
/// the sequence is not a complete leftmost derivation.
std::vector<TreeNode> derivation_tree(const Grammar& g, const Derivation& d);

/// Checks that the derivation yields exactly `tokens`.
bool derives(const Grammar& g, const Derivation& d, std::span<const SymbolId> tokens);

/// Constituent spans of the derivation's tree, pre-order.
std::vector<Span> constituent_spans(const Grammar& g, const Derivation& d);

bool compatible(const Grammar& g, const Derivation& d, const Bracketing& b);

/// `(S:0 (S:1 a) (S:1 a))` with rule ids after the colon.
std::string format_tree(const Grammar& g, const Derivation& d);

/// Tie-break key: pre-order (split, rule) pairs; a lexical node uses its
/// end position as split.
using DerivationKey = std::vector<std::pair<int, RuleId>>;

DerivationKey derivation_key(const Grammar& g, const Derivation& d);

/// Ranking order: higher log_prob first; equal log_prob falls back to the
/// smaller key.
bool ranks_before(double lp_a, const DerivationKey& key_a, double lp_b,
                  const DerivationKey& key_b) noexcept;

/// Relative tolerance under which dynamic-programming scores count as tied.
constexpr double kTieTolerance = 1e-12;

bool log_tied(double a, double b) noexcept;

}  // namespace hgt

#endif  // HGT_DERIVATION_HPP
