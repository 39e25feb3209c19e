// Brute-force reference implementations for small instances: exhaustive
// derivation enumeration and literal evaluation of the accumulator sums.
// Shares no parsing code with the chart parser, k-best or estimator.

#ifndef HGT_ORACLE_HPP
#define HGT_ORACLE_HPP

#include <cstddef>
#include <vector>

#include "hgt/derivation.hpp"
#include "hgt/estimator.hpp"
#include "hgt/grammar.hpp"

namespace hgt::oracle {

constexpr int kDefaultCap = 10;
constexpr std::size_t kMaxDerivations = 1'000'000;

struct Enumeration {
  /// Every derivation of the sentence, in ranking order (descending
  /// probability, ties by derivation key).
  std::vector<Derivation> derivations;
  std::vector<DerivationKey> keys;
  /// Constituent spans of each derivation, pre-order.
  std::vector<std::vector<Span>> spans;
  /// log sum_d P(x, d); -inf for a sentence outside the language.
  double total_log_prob = 0.0;
};

/// Throws std::invalid_argument when |x| > cap and std::length_error past
/// kMaxDerivations.
Enumeration enumerate_derivations(const Grammar& g, const Sentence& x, int cap = kDefaultCap);

/// Keeps derivations whose constituents cross no bracket (ranking preserved).
Enumeration filter_compatible(const Enumeration& e, const Bracketing& b);

/// D sums by literal summation over enumerated sets; skip and subset rules
/// match estimator::select_deltas.
Accumulators oracle_accumulate(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                               double eta, int cap = kDefaultCap);

}  // namespace hgt::oracle

#endif  // HGT_ORACLE_HPP
