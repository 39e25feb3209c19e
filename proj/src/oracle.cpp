#include "hgt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace hgt::oracle {

namespace {

struct Subtree {
  std::vector<RuleId> rules;
  DerivationKey key;
  std::vector<Span> spans;
};

class Enumerator {
public:
  Enumerator(const Grammar& g, const std::vector<SymbolId>& tokens) : g_(g), x_(tokens) {}

  const std::vector<Subtree>& expand(SymbolId a, int i, int j) {
    const auto memo_key = std::make_tuple(a, i, j);
    if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;

    std::vector<Subtree> out;
    for (RuleId r : g_.rules_of(a)) {
      const Rule& rule = g_.rule(r);
      if (!rule.binary() && j == i + 1 && rule.terminal == x_[i])
        out.push_back({{r}, {{j, r}}, {{i, j}}});
    }
    // Split-major order over binary rules.
    for (int k = i + 1; k < j; ++k) {
      for (RuleId r : g_.rules_of(a)) {
        const Rule& rule = g_.rule(r);
        if (!rule.binary()) continue;
        const auto& lefts = expand(rule.left, i, k);
        if (lefts.empty()) continue;
        const auto& rights = expand(rule.right, k, j);
        for (const Subtree& l : lefts)
          for (const Subtree& rt : rights) {
            if (++produced_ > kMaxDerivations)
              throw std::length_error("derivation enumeration exceeds " +
                                      std::to_string(kMaxDerivations) + " subtrees");
            Subtree t;
            t.rules.push_back(r);
            t.rules.insert(t.rules.end(), l.rules.begin(), l.rules.end());
            t.rules.insert(t.rules.end(), rt.rules.begin(), rt.rules.end());
            t.key.emplace_back(k, r);
            t.key.insert(t.key.end(), l.key.begin(), l.key.end());
            t.key.insert(t.key.end(), rt.key.begin(), rt.key.end());
            t.spans.push_back({i, j});
            t.spans.insert(t.spans.end(), l.spans.begin(), l.spans.end());
            t.spans.insert(t.spans.end(), rt.spans.begin(), rt.spans.end());
            out.push_back(std::move(t));
          }
      }
    }
    return memo_.emplace(memo_key, std::move(out)).first->second;
  }

private:
  const Grammar& g_;
  const std::vector<SymbolId>& x_;
  std::map<std::tuple<SymbolId, int, int>, std::vector<Subtree>> memo_;
  std::size_t produced_ = 0;
};

double log_prob_of(const Grammar& g, const std::vector<RuleId>& rules) {
  std::vector<long> n(g.num_rules(), 0);
  for (RuleId r : rules) ++n[r];
  double lp = 0.0;
  for (std::size_t r = 0; r < n.size(); ++r)
    if (n[r] != 0) lp += static_cast<double>(n[r]) * std::log(g.prob(static_cast<RuleId>(r)));
  return lp;
}

double log_sum(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Enumeration subset(const Enumeration& e, const std::vector<std::size_t>& keep) {
  Enumeration out;
  std::vector<double> lps;
  for (std::size_t i : keep) {
    out.derivations.push_back(e.derivations[i]);
    out.keys.push_back(e.keys[i]);
    out.spans.push_back(e.spans[i]);
    lps.push_back(e.derivations[i].log_prob);
  }
  out.total_log_prob = log_sum(lps);
  return out;
}

Enumeration prefix(const Enumeration& e, int n) {
  std::vector<std::size_t> keep(std::min<std::size_t>(n, e.derivations.size()));
  std::iota(keep.begin(), keep.end(), 0);
  return subset(e, keep);
}

bool admits(const std::vector<Span>& spans, const Bracketing& b) {
  for (const Span& s : spans)
    for (const Span& br : b.spans())
      if ((s.begin < br.begin && br.begin < s.end && s.end < br.end) ||
          (br.begin < s.begin && s.begin < br.end && br.end < s.end))
        return false;
  return true;
}

// Literal D sums for one set, added to `rule` / `nt`.
void add_set(const Grammar& g, const Enumeration& set, double eta, Eigen::VectorXd& rule,
             Eigen::VectorXd& nt) {
  std::vector<double> scaled;
  for (const auto& d : set.derivations) scaled.push_back(eta * d.log_prob);
  const double z = log_sum(scaled);
  for (std::size_t k = 0; k < set.derivations.size(); ++k) {
    const double w = std::exp(scaled[k] - z);
    std::vector<long> nr(g.num_rules(), 0), na(g.num_nonterminals(), 0);
    for (RuleId r : set.derivations[k].rules) {
      ++nr[r];
      ++na[g.rule(r).lhs];
    }
    for (std::size_t r = 0; r < nr.size(); ++r) rule(static_cast<Eigen::Index>(r)) += nr[r] * w;
    for (std::size_t a = 0; a < na.size(); ++a) nt(static_cast<Eigen::Index>(a)) += na[a] * w;
  }
}

}  // namespace

Enumeration enumerate_derivations(const Grammar& g, const Sentence& x, int cap) {
  if (static_cast<int>(x.size()) > cap)
    throw std::invalid_argument("sentence length " + std::to_string(x.size()) +
                                " exceeds enumeration cap " + std::to_string(cap));
  const auto tokens = encode(g, x);
  Enumerator en(g, tokens);
  const auto& trees = en.expand(g.start(), 0, static_cast<int>(tokens.size()));

  std::vector<std::size_t> order(trees.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> lps;
  for (const auto& t : trees) lps.push_back(log_prob_of(g, t.rules));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lps[a] != lps[b]) return lps[a] > lps[b];
    return trees[a].key < trees[b].key;
  });

  Enumeration e;
  for (std::size_t i : order) {
    e.derivations.push_back({trees[i].rules, static_cast<int>(tokens.size()), lps[i]});
    e.keys.push_back(trees[i].key);
    e.spans.push_back(trees[i].spans);
  }
  e.total_log_prob = log_sum(lps);
  return e;
}

Enumeration filter_compatible(const Enumeration& e, const Bracketing& b) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < e.derivations.size(); ++i)
    if (admits(e.spans[i], b)) keep.push_back(i);
  return subset(e, keep);
}

Accumulators oracle_accumulate(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                               double eta, int cap) {
  Accumulators acc = Accumulators::zeros(g);
  for (const CorpusEntry& entry : corpus) {
    const Enumeration all = enumerate_derivations(g, entry.sentence, cap);
    const auto compatible_only = [&] { return filter_compatible(all, *entry.brackets); };

    Enumeration ref;
    switch (spec.ref) {
      case RefMode::viterbi: ref = prefix(all, 1); break;
      case RefMode::nbest: ref = prefix(all, spec.n_ref); break;
      case RefMode::bracketed_viterbi: ref = prefix(compatible_only(), 1); break;
    }
    Enumeration comp;
    switch (spec.comp) {
      case CompMode::all: comp = all; break;
      case CompMode::nbest: comp = prefix(all, spec.n_comp); break;
      case CompMode::bracketed_all: comp = compatible_only(); break;
    }
    if (spec.enforce_subset)
      for (std::size_t i = 0; i < ref.derivations.size(); ++i)
        if (std::find(comp.derivations.begin(), comp.derivations.end(), ref.derivations[i]) ==
            comp.derivations.end()) {
          comp.derivations.push_back(ref.derivations[i]);
          comp.keys.push_back(ref.keys[i]);
          comp.spans.push_back(ref.spans[i]);
        }

    if (ref.derivations.empty() || comp.derivations.empty()) {
      ++acc.skipped;
      continue;
    }
    add_set(g, ref, eta, acc.d_rule_ref, acc.d_nt_ref);
    add_set(g, comp, eta, acc.d_rule_comp, acc.d_nt_comp);
    ++acc.sentences;
    if (comp.derivations.size() == ref.derivations.size()) ++acc.degenerate;
  }
  return acc;
}

}  // namespace hgt::oracle
