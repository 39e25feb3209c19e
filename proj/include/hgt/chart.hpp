// CYK-style chart parsing over CNF grammars in log space: Inside, Viterbi and
// expected rule counts, optionally restricted to bracket-compatible spans.

#ifndef HGT_CHART_HPP
#define HGT_CHART_HPP

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hgt/derivation.hpp"
#include "hgt/grammar.hpp"

namespace hgt {

/// Log inside masses indexed by (span, nonterminal).  Entries are -inf for
/// spans with no admissible derivation.
class InsideChart {
public:
  InsideChart(int sentence_len, std::size_t num_nonterminals, SymbolId start);

  int sentence_len() const noexcept { return n_; }
  double log_mass(Span s, SymbolId a) const { return table_[index(s, a)]; }
  double& log_mass(Span s, SymbolId a) { return table_[index(s, a)]; }

  /// Log mass of the start symbol over the whole sentence.
  double total() const { return log_mass({0, n_}, start_); }
  bool in_language() const;

private:
  std::size_t index(Span s, SymbolId a) const noexcept {
    return (static_cast<std::size_t>(s.begin) * (n_ + 1) + s.end) * nt_ + a;
  }

  int n_;
  std::size_t nt_;
  SymbolId start_;
  std::vector<double> table_;
};

double log_add(double a, double b) noexcept;

/// Inside pass with arbitrary per-rule log weights (log p, or eta * log p).
/// An empty bracketing leaves every span admissible.
InsideChart weighted_inside(const Grammar& g, std::span<const SymbolId> tokens,
                            const Bracketing& brackets, const Eigen::VectorXd& log_weights);

/// Posterior-weighted rule counts: sum over admissible derivations d of
/// N(rule, d) * w(d) / sum_d w(d), where w(d) is the product of rule weights.
/// Computed with an outside pass over `chart`, which must come from
/// weighted_inside with the same arguments and be in the language.
Eigen::VectorXd expected_rule_counts(const Grammar& g, std::span<const SymbolId> tokens,
                                     const Bracketing& brackets,
                                     const Eigen::VectorXd& log_weights,
                                     const InsideChart& chart);

/// log P(x) = log of the sum over (bracket-compatible) derivations.  Throws
/// SentenceError for unknown tokens; a sentence outside the language yields
/// a chart whose in_language() is false.
InsideChart inside(const Grammar& g, const Sentence& sentence, const Bracketing& brackets = {});

/// Best derivation with deterministic tie-breaking: among tied back-pointers
/// the smallest (split, rule id) wins.  nullopt when no derivation exists.
std::optional<Derivation> viterbi(const Grammar& g, std::span<const SymbolId> tokens,
                                  const Bracketing& brackets = {});

std::optional<Derivation> viterbi(const Grammar& g, const Sentence& sentence,
                                  const Bracketing& brackets = {});

/// Throws std::invalid_argument if a non-empty bracketing was built for a
/// different sentence length.
void check_brackets(const Bracketing& brackets, std::size_t sentence_len);

}  // namespace hgt

#endif  // HGT_CHART_HPP
