// n-best derivations by eager per-cell k-best lists.

#ifndef HGT_KBEST_HPP
#define HGT_KBEST_HPP

#include <span>
#include <vector>

#include "hgt/derivation.hpp"
#include "hgt/grammar.hpp"

namespace hgt {

struct KBestList {
  /// Descending log_prob; ties ordered by derivation_key.
  std::vector<Derivation> derivations;
  int n_requested = 0;
  bool in_language = true;
};

/// The n most probable (bracket-compatible) derivations, distinct as rule
/// sequences.  Fewer than n are returned only if fewer exist.
KBestList nbest(const Grammar& g, std::span<const SymbolId> tokens, int n,
                const Bracketing& brackets = {});

KBestList nbest(const Grammar& g, const Sentence& sentence, int n,
                const Bracketing& brackets = {});

}  // namespace hgt

#endif  // HGT_KBEST_HPP
