#include "hgt/kbest.hpp"

#include <algorithm>
#include <stdexcept>

#include "hgt/chart.hpp"

namespace hgt {

namespace {

struct Entry {
  double score;
  RuleId rule;
  int split;  // end position for lexical entries
  int left_rank;
  int right_rank;
};

class KBestChart {
public:
  KBestChart(const Grammar& g, std::span<const SymbolId> tokens, int n,
             const Bracketing& brackets)
      : g_(g), tokens_(tokens), len_(static_cast<int>(tokens.size())), n_(n),
        cells_(static_cast<std::size_t>(len_ + 1) * (len_ + 1) * g.num_nonterminals()),
        binary_by_lhs_(g.num_nonterminals()) {
    for (RuleId r : g.binary_rules()) binary_by_lhs_[g.rule(r).lhs].push_back(r);
    fill(brackets);
  }

  const std::vector<Entry>& cell(Span s, SymbolId a) const { return cells_[index(s, a)]; }

  void backtrace(Span s, SymbolId a, int rank, std::vector<RuleId>& out) const {
    const Entry& e = cell(s, a)[rank];
    out.push_back(e.rule);
    const Rule& rule = g_.rule(e.rule);
    if (rule.binary()) {
      backtrace({s.begin, e.split}, rule.left, e.left_rank, out);
      backtrace({e.split, s.end}, rule.right, e.right_rank, out);
    }
  }

private:
  std::size_t index(Span s, SymbolId a) const noexcept {
    return (static_cast<std::size_t>(s.begin) * (len_ + 1) + s.end) * g_.num_nonterminals() + a;
  }

  // Pre-order key comparison of two entries rooted at the same cell.
  int compare_keys(Span s, const Entry& x, const Entry& y) const {
    if (x.split != y.split) return x.split < y.split ? -1 : 1;
    if (x.rule != y.rule) return x.rule < y.rule ? -1 : 1;
    const Rule& rule = g_.rule(x.rule);
    if (!rule.binary()) return 0;
    const auto& left = cell({s.begin, x.split}, rule.left);
    if (int c = compare_keys({s.begin, x.split}, left[x.left_rank], left[y.left_rank]); c != 0)
      return c;
    const auto& right = cell({x.split, s.end}, rule.right);
    return compare_keys({x.split, s.end}, right[x.right_rank], right[y.right_rank]);
  }

  void fill(const Bracketing& brackets) {
    for (int i = 0; i < len_; ++i)
      for (RuleId r : g_.lexical_rules(tokens_[i]))
        cells_[index({i, i + 1}, g_.rule(r).lhs)].push_back({g_.log_probs()(r), r, i + 1, -1, -1});

    std::vector<Entry> cands;
    for (int width = 2; width <= len_; ++width) {
      for (int i = 0; i + width <= len_; ++i) {
        const Span s{i, i + width};
        if (!brackets.empty() && !brackets.admits(s)) continue;
        for (SymbolId a = 0; a < static_cast<SymbolId>(g_.num_nonterminals()); ++a) {
          cands.clear();
          for (int k = s.begin + 1; k < s.end; ++k) {
            for (RuleId r : binary_by_lhs_[a]) {
              const Rule& rule = g_.rule(r);
              const auto& left = cell({s.begin, k}, rule.left);
              const auto& right = cell({k, s.end}, rule.right);
              // (a, b) is preceded by every (a', b') <= (a, b), so it can only
              // make the top n when (a + 1) * (b + 1) <= n.
              for (int lr = 0; lr < static_cast<int>(left.size()) && lr + 1 <= n_; ++lr)
                for (int rr = 0; rr < static_cast<int>(right.size()) && (lr + 1) * (rr + 1) <= n_;
                     ++rr)
                  cands.push_back({left[lr].score + right[rr].score + g_.log_probs()(r), r, k, lr,
                                   rr});
            }
          }
          if (cands.empty()) continue;
          std::sort(cands.begin(), cands.end(), [&](const Entry& x, const Entry& y) {
            if (!log_tied(x.score, y.score)) return x.score > y.score;
            return compare_keys(s, x, y) < 0;
          });
          if (static_cast<int>(cands.size()) > n_) cands.resize(n_);
          cells_[index(s, a)] = cands;
        }
      }
    }
  }

  const Grammar& g_;
  std::span<const SymbolId> tokens_;
  int len_;
  int n_;
  std::vector<std::vector<Entry>> cells_;
  std::vector<std::vector<RuleId>> binary_by_lhs_;
};

}  // namespace

KBestList nbest(const Grammar& g, std::span<const SymbolId> tokens, int n,
                const Bracketing& brackets) {
  if (n < 1) throw std::invalid_argument("n-best requires n >= 1");
  if (tokens.empty()) throw SentenceError(0, "empty sentence");
  check_brackets(brackets, tokens.size());

  KBestList out;
  out.n_requested = n;
  const KBestChart chart(g, tokens, n, brackets);
  const Span full{0, static_cast<int>(tokens.size())};
  const auto& root = chart.cell(full, g.start());
  out.in_language = !root.empty();

  std::vector<std::pair<Derivation, DerivationKey>> ranked;
  for (int rank = 0; rank < static_cast<int>(root.size()); ++rank) {
    Derivation d;
    d.sentence_len = full.end;
    chart.backtrace(full, g.start(), rank, d.rules);
    d.log_prob = derivation_probability(g, d);
    DerivationKey key = derivation_key(g, d);
    ranked.emplace_back(std::move(d), std::move(key));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return ranks_before(x.first.log_prob, x.second, y.first.log_prob, y.second);
  });
  for (auto& [d, key] : ranked) out.derivations.push_back(std::move(d));
  return out;
}

KBestList nbest(const Grammar& g, const Sentence& sentence, int n, const Bracketing& brackets) {
  const auto tokens = encode(g, sentence);
  return nbest(g, std::span<const SymbolId>(tokens), n, brackets);
}

}  // namespace hgt
