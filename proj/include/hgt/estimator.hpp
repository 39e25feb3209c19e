// Discriminative reestimation of PCFG rule probabilities by growth
// transformations under the (generalized) H-criterion.
//
// For every sentence x two derivation sets are chosen: a reference set R_x
// and a competing set C_x containing it.  The objective is
//
//     F(p) = prod_x  P^eta(x, R_x) / P(x, C_x)^h,     0 <= h < 1, eta > 0,
//
// where P^eta(x, S) = sum_{d in S} P(x, d)^eta.  One growth step maps
//
//     p'(A -> a) = (D_{A->a}(R) - h D_{A->a}(C) + p(A -> a) Ct)
//                / (D_A(R)      - h D_A(C)      + Ct)
//
// with D_{A->a}(S) the eta-posterior-weighted usage count of A -> a over S,
// summed over the corpus, and Ct the smallest offset keeping every numerator
// positive plus epsilon.  h = 0, eta = 1, R_x = {best derivation} is
// Viterbi-score reestimation.

#ifndef HGT_ESTIMATOR_HPP
#define HGT_ESTIMATOR_HPP

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hgt/derivation.hpp"
#include "hgt/grammar.hpp"

namespace hgt {

class EstimatorError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A sentence and, for bracketed training modes, its bracketing.
struct CorpusEntry {
  Sentence sentence;
  std::optional<Bracketing> brackets;
};

using Corpus = std::vector<CorpusEntry>;

enum class RefMode { viterbi, nbest, bracketed_viterbi };
enum class CompMode { all, nbest, bracketed_all };

std::string_view to_string(RefMode m) noexcept;
std::string_view to_string(CompMode m) noexcept;
RefMode parse_ref_mode(std::string_view s);
CompMode parse_comp_mode(std::string_view s);

/// How the reference and competing sets are realized per sentence.
struct DeltaSpec {
  RefMode ref = RefMode::viterbi;
  int n_ref = 1;
  CompMode comp = CompMode::all;
  int n_comp = 1;
  /// Extend the competing set with any reference derivation it lacks.
  bool enforce_subset = true;

  bool needs_brackets() const noexcept {
    return ref == RefMode::bracketed_viterbi || comp == CompMode::bracketed_all;
  }
  /// Throws std::invalid_argument (n < 1, or n_ref > n_comp in nbest/nbest).
  void validate() const;
};

struct HParams {
  double h = 0.0;
  double eta = 1.0;
  double epsilon = 1e-6;
  int max_iters = 100;
  double rel_tol = 1e-8;
  double min_prob = 1e-12;
  /// Double Ct while a step would lower the objective on the fixed sets.
  bool monotone_guard = true;
  int max_escalations = 64;

  /// Throws std::invalid_argument unless 0 <= h < 1, eta > 0, epsilon > 0.
  void validate() const;
};

/// A realized derivation set: explicitly listed derivations, plus optionally
/// every derivation compatible with a bracketing (an empty bracketing admits
/// all of D_x).  Listed derivations never belong to the implicit part.
struct DerivationSet {
  std::vector<Derivation> listed;
  std::optional<Bracketing> implicit;

  bool empty() const noexcept { return listed.empty() && !implicit; }
};

struct SentenceDeltas {
  std::vector<SymbolId> tokens;
  DerivationSet ref;
  DerivationSet comp;
  bool skipped = false;
  /// Reference and competing sets coincide.
  bool degenerate = false;
};

/// Selects both sets for every sentence under grammar g.  Sentences whose
/// reference or competing set comes out empty are marked skipped.
std::vector<SentenceDeltas> select_deltas(const Grammar& g, const Corpus& corpus,
                                          const DeltaSpec& spec);

/// log sum_{d in set} P(x, d)^eta, or nullopt for an empty set.
std::optional<double> scaled_set_logprob(const Grammar& g, std::span<const SymbolId> tokens,
                                         const DerivationSet& set, double eta);

std::optional<double> scaled_set_logprob(const Grammar& g, const std::vector<Derivation>& set,
                                         double eta);

struct Accumulators {
  Eigen::VectorXd d_rule_ref;
  Eigen::VectorXd d_rule_comp;
  Eigen::VectorXd d_nt_ref;
  Eigen::VectorXd d_nt_comp;
  int sentences = 0;
  int skipped = 0;
  int degenerate = 0;

  static Accumulators zeros(const Grammar& g);
  /// Commutative, associative merge of partial accumulators.
  Accumulators& operator+=(const Accumulators& o);
};

/// Posterior-weighted counts over already selected sets.
Accumulators accumulate(const Grammar& g, std::span<const SentenceDeltas> deltas, double eta);

/// Selects sets under g, then accumulates.  Throws EstimatorError for an
/// empty corpus or when every sentence is skipped.
Accumulators accumulate(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                        double eta);

/// max(max_r -(D_r(R) - h D_r(C)) / p_r, 0) + epsilon at the current p.
double compute_ctilde(const Accumulators& acc, const Grammar& g, double h, double epsilon);

/// Transformed probabilities before flooring and renormalization.  Throws
/// EstimatorError if a numerator or denominator is not positive.
Eigen::VectorXd transformed_probabilities(const Grammar& g, const Accumulators& acc, double h,
                                          double ctilde);

struct GrowthResult {
  Grammar grammar;
  Eigen::VectorXd raw;
  int floored = 0;
};

/// One growth transformation, floored at min_prob and renormalized.
GrowthResult apply_growth(const Grammar& g, const Accumulators& acc, double h, double ctilde,
                          double min_prob = 1e-12);

Grammar growth_step(const Grammar& g, const Accumulators& acc, double h, double ctilde,
                    double min_prob = 1e-12);

struct GuardedStep {
  GrowthResult result;
  double ctilde = 0.0;
  int escalations = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

/// Growth step starting from compute_ctilde's offset.  With
/// params.monotone_guard the offset is doubled until the objective over
/// `deltas` does not decrease (a large enough offset always gives growth).
GuardedStep guarded_growth_step(const Grammar& g, std::span<const SentenceDeltas> deltas,
                                const Accumulators& acc, const HParams& params);

/// Log objective over fixed sets: sum_x log P^eta(x, R_x) - h log P(x, C_x),
/// skipped sentences excluded.
double objective(const Grammar& g, std::span<const SentenceDeltas> deltas, double h,
                 double eta);

/// Log objective with sets selected under g.
double objective(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                 const HParams& params);

struct IterationRecord {
  int iter = 0;
  double log_objective = 0.0;
  double ctilde = 0.0;
  double max_delta_p = 0.0;
  double spectral_radius = 0.0;
  int skipped = 0;
  int degenerate = 0;
  int floored = 0;
  int escalations = 0;
};

struct TrainReport {
  std::vector<IterationRecord> records;  // records[0] describes the initial grammar
  Grammar grammar;
  bool converged = false;
};

/// Iterates select -> accumulate -> Ct -> growth step until the relative
/// change of the log objective drops below rel_tol or max_iters is reached.
TrainReport train(const Grammar& g0, const Corpus& corpus, const DeltaSpec& spec,
                  const HParams& params);

/// CSV: iter,log_objective,ctilde,max_delta_p,spectral_radius,skipped
std::string report_csv(const TrainReport& report);

}  // namespace hgt

#endif  // HGT_ESTIMATOR_HPP
