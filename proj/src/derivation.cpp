#include "hgt/derivation.hpp"

#include <algorithm>
#include <cmath>

namespace hgt {

SentenceError::SentenceError(std::size_t position, const std::string& what)
    : std::runtime_error(what), position_(position) {}

std::vector<SymbolId> encode(const Grammar& g, const Sentence& sentence) {
  if (sentence.empty()) throw SentenceError(0, "empty sentence");
  std::vector<SymbolId> ids;
  ids.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    auto t = g.find_terminal(sentence[i]);
    if (!t)
      throw SentenceError(i, "unknown token '" + sentence[i] + "' at position " +
                                 std::to_string(i));
    ids.push_back(*t);
  }
  return ids;
}

Bracketing::Bracketing(std::vector<Span> spans, int sentence_len)
    : spans_(std::move(spans)), sentence_len_(sentence_len) {
  std::sort(spans_.begin(), spans_.end());
  spans_.erase(std::unique(spans_.begin(), spans_.end()), spans_.end());
  for (const Span& s : spans_)
    if (s.begin < 0 || s.end > sentence_len || s.begin >= s.end)
      throw std::invalid_argument("bracket [" + std::to_string(s.begin) + "," +
                                  std::to_string(s.end) + ") outside sentence of length " +
                                  std::to_string(sentence_len));
  for (std::size_t i = 0; i < spans_.size(); ++i)
    for (std::size_t j = i + 1; j < spans_.size(); ++j)
      if (crosses(spans_[i], spans_[j]))
        throw std::invalid_argument("crossing brackets");
}

bool Bracketing::admits(Span s) const noexcept {
  return std::none_of(spans_.begin(), spans_.end(),
                      [&](const Span& b) { return crosses(s, b); });
}

double derivation_probability(const Grammar& g, const Derivation& d) {
  const RuleCounts c = rule_counts(g, d);
  double lp = 0.0;
  for (std::size_t r = 0; r < c.per_rule.size(); ++r)
    if (c.per_rule[r] != 0)
      lp += static_cast<double>(c.per_rule[r]) * g.log_probs()(static_cast<Eigen::Index>(r));
  return lp;
}

RuleCounts rule_counts(const Grammar& g, const Derivation& d) {
  RuleCounts c;
  c.per_rule.assign(g.num_rules(), 0);
  c.per_nonterminal.assign(g.num_nonterminals(), 0);
  for (RuleId r : d.rules) {
    if (r < 0 || static_cast<std::size_t>(r) >= g.num_rules())
      throw std::out_of_range("rule id " + std::to_string(r) + " out of range");
    ++c.per_rule[r];
    ++c.per_nonterminal[g.rule(r).lhs];
  }
  return c;
}

namespace {

class TreeBuilder {
public:
  TreeBuilder(const Grammar& g, const Derivation& d) : g_(g), d_(d) {}

  std::vector<TreeNode> run() {
    if (d_.rules.empty()) throw std::invalid_argument("empty derivation");
    expand(g_.start(), 0);
    if (next_ != d_.rules.size())
      throw std::invalid_argument("derivation has trailing rules");
    return std::move(nodes_);
  }

private:
  // Returns the node index; `pos` is the first token position of the subtree.
  int expand(SymbolId expected, int pos) {
    if (next_ >= d_.rules.size()) throw std::invalid_argument("derivation is incomplete");
    const RuleId r = d_.rules[next_++];
    if (r < 0 || static_cast<std::size_t>(r) >= g_.num_rules())
      throw std::out_of_range("rule id " + std::to_string(r) + " out of range");
    const Rule& rule = g_.rule(r);
    if (rule.lhs != expected)
      throw std::invalid_argument("rule " + g_.rule_string(r) + " does not rewrite " +
                                  g_.nonterminal_name(expected));
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({r, {pos, pos + 1}, -1, -1});
    if (rule.binary()) {
      const int l = expand(rule.left, pos);
      const int rr = expand(rule.right, nodes_[l].span.end);
      nodes_[idx].left = l;
      nodes_[idx].right = rr;
      nodes_[idx].span.end = nodes_[rr].span.end;
    }
    return idx;
  }

  const Grammar& g_;
  const Derivation& d_;
  std::size_t next_ = 0;
  std::vector<TreeNode> nodes_;
};

void format_node(const Grammar& g, const std::vector<TreeNode>& t, int i, std::string& out) {
  const TreeNode& n = t[i];
  const Rule& r = g.rule(n.rule);
  out += '(';
  out += g.nonterminal_name(r.lhs);
  out += ':';
  out += std::to_string(n.rule);
  out += ' ';
  if (r.binary()) {
    format_node(g, t, n.left, out);
    out += ' ';
    format_node(g, t, n.right, out);
  } else {
    out += g.terminal_name(r.terminal);
  }
  out += ')';
}

}  // namespace

std::vector<TreeNode> derivation_tree(const Grammar& g, const Derivation& d) {
  return TreeBuilder(g, d).run();
}

bool derives(const Grammar& g, const Derivation& d, std::span<const SymbolId> tokens) {
  std::vector<TreeNode> t;
  try {
    t = derivation_tree(g, d);
  } catch (const std::exception&) {
    return false;
  }
  if (t.front().span.end != static_cast<int>(tokens.size())) return false;
  for (const TreeNode& n : t) {
    const Rule& r = g.rule(n.rule);
    if (!r.binary() && r.terminal != tokens[n.span.begin]) return false;
  }
  return true;
}

std::vector<Span> constituent_spans(const Grammar& g, const Derivation& d) {
  std::vector<Span> spans;
  for (const TreeNode& n : derivation_tree(g, d)) spans.push_back(n.span);
  return spans;
}

bool compatible(const Grammar& g, const Derivation& d, const Bracketing& b) {
  if (b.empty()) return true;
  for (const TreeNode& n : derivation_tree(g, d))
    if (!b.admits(n.span)) return false;
  return true;
}

std::string format_tree(const Grammar& g, const Derivation& d) {
  const auto t = derivation_tree(g, d);
  std::string out;
  format_node(g, t, 0, out);
  return out;
}

DerivationKey derivation_key(const Grammar& g, const Derivation& d) {
  DerivationKey key;
  const auto t = derivation_tree(g, d);
  key.reserve(t.size());
  for (const TreeNode& n : t)
    key.emplace_back(n.left >= 0 ? t[n.left].span.end : n.span.end, n.rule);
  return key;
}

bool ranks_before(double lp_a, const DerivationKey& key_a, double lp_b,
                  const DerivationKey& key_b) noexcept {
  if (lp_a != lp_b) return lp_a > lp_b;
  return key_a < key_b;
}

bool log_tied(double a, double b) noexcept {
  if (a == b) return true;
  return std::abs(a - b) <= kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace hgt
