#include "hgt/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hgt/chart.hpp"
#include "hgt/kbest.hpp"

namespace hgt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(RefMode m) noexcept {
  switch (m) {
    case RefMode::viterbi: return "viterbi";
    case RefMode::nbest: return "nbest";
    case RefMode::bracketed_viterbi: return "bracketed-viterbi";
  }
  return "?";
}

std::string_view to_string(CompMode m) noexcept {
  switch (m) {
    case CompMode::all: return "all";
    case CompMode::nbest: return "nbest";
    case CompMode::bracketed_all: return "bracketed-all";
  }
  return "?";
}

RefMode parse_ref_mode(std::string_view s) {
  if (s == "viterbi") return RefMode::viterbi;
  if (s == "nbest") return RefMode::nbest;
  if (s == "bracketed-viterbi") return RefMode::bracketed_viterbi;
  throw std::invalid_argument("unknown reference mode '" + std::string(s) + "'");
}

CompMode parse_comp_mode(std::string_view s) {
  if (s == "all") return CompMode::all;
  if (s == "nbest") return CompMode::nbest;
  if (s == "bracketed-all") return CompMode::bracketed_all;
  throw std::invalid_argument("unknown competing mode '" + std::string(s) + "'");
}

void DeltaSpec::validate() const {
  if (ref == RefMode::nbest && n_ref < 1) throw std::invalid_argument("n_ref must be >= 1");
  if (comp == CompMode::nbest && n_comp < 1) throw std::invalid_argument("n_comp must be >= 1");
  if (ref == RefMode::nbest && comp == CompMode::nbest && n_ref > n_comp)
    throw std::invalid_argument("n_ref must not exceed n_comp");
}

void HParams::validate() const {
  if (!(h >= 0.0 && h < 1.0)) throw std::invalid_argument("h must lie in [0,1)");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("rel_tol must be >= 0");
  if (!(min_prob > 0.0 && min_prob < 1.0)) throw std::invalid_argument("min_prob must lie in ]0,1[");
}

// ---------------------------------------------------------------------------
// Set selection

namespace {

bool contains(const Grammar& g, const DerivationSet& set, const Derivation& d) {
  if (set.implicit && compatible(g, d, *set.implicit)) return true;
  return std::find(set.listed.begin(), set.listed.end(), d) != set.listed.end();
}

std::vector<Derivation> reference_set(const Grammar& g, std::span<const SymbolId> tokens,
                                      const CorpusEntry& entry, const DeltaSpec& spec) {
  std::optional<Derivation> best;
  switch (spec.ref) {
    case RefMode::viterbi: best = viterbi(g, tokens); break;
    case RefMode::bracketed_viterbi: best = viterbi(g, tokens, *entry.brackets); break;
    case RefMode::nbest: return nbest(g, tokens, spec.n_ref).derivations;
  }
  if (!best) return {};
  return {*std::move(best)};
}

DerivationSet competing_set(const Grammar& g, std::span<const SymbolId> tokens,
                            const CorpusEntry& entry, const DeltaSpec& spec) {
  DerivationSet set;
  if (spec.comp == CompMode::nbest) {
    set.listed = nbest(g, tokens, spec.n_comp).derivations;
    return set;
  }
  Bracketing b = spec.comp == CompMode::bracketed_all ? *entry.brackets : Bracketing{};
  if (weighted_inside(g, tokens, b, g.log_probs()).in_language()) set.implicit = std::move(b);
  return set;
}

// Number of members of `set`, counting at most `cap`.
std::size_t capped_size(const Grammar& g, std::span<const SymbolId> tokens,
                        const DerivationSet& set, std::size_t cap) {
  std::size_t n = set.listed.size();
  if (set.implicit && n < cap)
    n += nbest(g, tokens, static_cast<int>(cap - n), *set.implicit).derivations.size();
  return std::min(n, cap);
}

}  // namespace

std::vector<SentenceDeltas> select_deltas(const Grammar& g, const Corpus& corpus,
                                          const DeltaSpec& spec) {
  spec.validate();
  std::vector<SentenceDeltas> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CorpusEntry& entry = corpus[i];
    if (spec.needs_brackets() && !entry.brackets)
      throw EstimatorError("sentence " + std::to_string(i) +
                           ": bracketed mode requires a bracketing");
    SentenceDeltas sd;
    sd.tokens = encode(g, entry.sentence);
    sd.ref.listed = reference_set(g, sd.tokens, entry, spec);
    sd.comp = competing_set(g, sd.tokens, entry, spec);
    if (spec.enforce_subset)
      for (const Derivation& d : sd.ref.listed)
        if (!contains(g, sd.comp, d)) sd.comp.listed.push_back(d);

    sd.skipped = sd.ref.empty() || sd.comp.empty();
    if (!sd.skipped) {
      const std::size_t r = sd.ref.listed.size();
      const bool nested = std::all_of(sd.ref.listed.begin(), sd.ref.listed.end(),
                                      [&](const Derivation& d) { return contains(g, sd.comp, d); });
      sd.degenerate = nested && capped_size(g, sd.tokens, sd.comp, r + 1) == r;
    }
    out.push_back(std::move(sd));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Set masses and posterior counts

namespace {

struct SetStats {
  double log_mass = kNegInf;
  Eigen::VectorXd counts;  // posterior-weighted rule counts
};

Eigen::VectorXd scaled_weights(const Grammar& g, double eta) {
  return eta == 1.0 ? g.log_probs() : Eigen::VectorXd(eta * g.log_probs());
}

std::optional<SetStats> set_stats(const Grammar& g, std::span<const SymbolId> tokens,
                                  const DerivationSet& set, double eta, bool with_counts) {
  std::vector<double> scores;
  scores.reserve(set.listed.size());
  double mass = kNegInf;
  for (const Derivation& d : set.listed) {
    scores.push_back(eta * derivation_probability(g, d));
    mass = log_add(mass, scores.back());
  }

  std::optional<InsideChart> chart;
  Eigen::VectorXd weights;
  if (set.implicit) {
    weights = scaled_weights(g, eta);
    chart = weighted_inside(g, tokens, *set.implicit, weights);
    if (chart->in_language())
      mass = log_add(mass, chart->total());
    else
      chart.reset();
  }
  if (mass == kNegInf) return std::nullopt;

  SetStats st;
  st.log_mass = mass;
  if (!with_counts) return st;

  st.counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_rules()));
  for (std::size_t k = 0; k < set.listed.size(); ++k) {
    const double w = std::exp(scores[k] - mass);
    for (RuleId r : set.listed[k].rules) st.counts(r) += w;
  }
  if (chart)
    st.counts += std::exp(chart->total() - mass) *
                 expected_rule_counts(g, tokens, *set.implicit, weights, *chart);
  return st;
}

Eigen::VectorXd per_nonterminal(const Grammar& g, const Eigen::VectorXd& per_rule) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_nonterminals()));
  for (const Rule& r : g.rules()) out(r.lhs) += per_rule(r.id);
  return out;
}

}  // namespace

std::optional<double> scaled_set_logprob(const Grammar& g, std::span<const SymbolId> tokens,
                                         const DerivationSet& set, double eta) {
  auto st = set_stats(g, tokens, set, eta, false);
  if (!st) return std::nullopt;
  return st->log_mass;
}

std::optional<double> scaled_set_logprob(const Grammar& g, const std::vector<Derivation>& set,
                                         double eta) {
  DerivationSet s;
  s.listed = set;
  return scaled_set_logprob(g, {}, s, eta);
}

// ---------------------------------------------------------------------------
// Accumulation

Accumulators Accumulators::zeros(const Grammar& g) {
  const auto r = static_cast<Eigen::Index>(g.num_rules());
  const auto n = static_cast<Eigen::Index>(g.num_nonterminals());
  return {Eigen::VectorXd::Zero(r), Eigen::VectorXd::Zero(r), Eigen::VectorXd::Zero(n),
          Eigen::VectorXd::Zero(n), 0, 0, 0};
}

Accumulators& Accumulators::operator+=(const Accumulators& o) {
  d_rule_ref += o.d_rule_ref;
  d_rule_comp += o.d_rule_comp;
  d_nt_ref += o.d_nt_ref;
  d_nt_comp += o.d_nt_comp;
  sentences += o.sentences;
  skipped += o.skipped;
  degenerate += o.degenerate;
  return *this;
}

Accumulators accumulate(const Grammar& g, std::span<const SentenceDeltas> deltas, double eta) {
  Accumulators acc = Accumulators::zeros(g);
  for (const SentenceDeltas& sd : deltas) {
    if (sd.skipped) {
      ++acc.skipped;
      continue;
    }
    auto ref = set_stats(g, sd.tokens, sd.ref, eta, true);
    auto comp = set_stats(g, sd.tokens, sd.comp, eta, true);
    if (!ref || !comp) {
      ++acc.skipped;
      continue;
    }
    acc.d_rule_ref += ref->counts;
    acc.d_rule_comp += comp->counts;
    ++acc.sentences;
    if (sd.degenerate) ++acc.degenerate;
  }
  acc.d_nt_ref = per_nonterminal(g, acc.d_rule_ref);
  acc.d_nt_comp = per_nonterminal(g, acc.d_rule_comp);
  return acc;
}

Accumulators accumulate(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                        double eta) {
  if (corpus.empty()) throw EstimatorError("empty corpus");
  const auto deltas = select_deltas(g, corpus, spec);
  Accumulators acc = accumulate(g, deltas, eta);
  if (acc.sentences == 0) throw EstimatorError("every sentence was skipped");
  return acc;
}

// ---------------------------------------------------------------------------
// Growth transformation

double compute_ctilde(const Accumulators& acc, const Grammar& g, double h, double epsilon) {
  double worst = 0.0;
  for (const Rule& r : g.rules()) {
    const double cand = -(acc.d_rule_ref(r.id) - h * acc.d_rule_comp(r.id)) / g.prob(r.id);
    worst = std::max(worst, cand);
  }
  return worst + epsilon;
}

Eigen::VectorXd transformed_probabilities(const Grammar& g, const Accumulators& acc, double h,
                                          double ctilde) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(g.num_rules()));
  for (const Rule& r : g.rules()) {
    const double num = acc.d_rule_ref(r.id) - h * acc.d_rule_comp(r.id) + g.prob(r.id) * ctilde;
    const double den = acc.d_nt_ref(r.lhs) - h * acc.d_nt_comp(r.lhs) + ctilde;
    if (!(den > 0.0))
      throw EstimatorError("non-positive denominator for " + g.nonterminal_name(r.lhs) +
                           " (offset constant too small)");
    if (!(num > 0.0))
      throw EstimatorError("non-positive numerator for " + g.rule_string(r.id) +
                           " (offset constant too small)");
    out(r.id) = num / den;
  }
  return out;
}

GrowthResult apply_growth(const Grammar& g, const Accumulators& acc, double h, double ctilde,
                          double min_prob) {
  Eigen::VectorXd raw = transformed_probabilities(g, acc, h, ctilde);
  Eigen::VectorXd p = raw;
  int floored = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) < min_prob) {
      p(i) = min_prob;
      ++floored;
    }
  for (SymbolId a = 0; a < static_cast<SymbolId>(g.num_nonterminals()); ++a) {
    const auto& ids = g.rules_of(a);
    double sum = 0.0;
    for (RuleId r : ids) sum += p(r);
    if (!ids.empty() && std::abs(sum - 1.0) > exact_sum_slack(ids.size()))
      for (RuleId r : ids) p(r) /= sum;
  }
  return {g.with_probabilities(p), std::move(raw), floored};
}

Grammar growth_step(const Grammar& g, const Accumulators& acc, double h, double ctilde,
                    double min_prob) {
  return apply_growth(g, acc, h, ctilde, min_prob).grammar;
}

// ---------------------------------------------------------------------------
// Objective and training

double objective(const Grammar& g, std::span<const SentenceDeltas> deltas, double h,
                 double eta) {
  double total = 0.0;
  int used = 0;
  for (const SentenceDeltas& sd : deltas) {
    if (sd.skipped) continue;
    auto ref = scaled_set_logprob(g, sd.tokens, sd.ref, eta);
    auto comp = scaled_set_logprob(g, sd.tokens, sd.comp, 1.0);
    if (!ref || !comp) continue;
    total += *ref - h * *comp;
    ++used;
  }
  if (used == 0) throw EstimatorError("objective over an empty effective corpus");
  return total;
}

double objective(const Grammar& g, const Corpus& corpus, const DeltaSpec& spec,
                 const HParams& params) {
  if (corpus.empty()) throw EstimatorError("empty corpus");
  const auto deltas = select_deltas(g, corpus, spec);
  return objective(g, deltas, params.h, params.eta);
}

GuardedStep guarded_growth_step(const Grammar& g, std::span<const SentenceDeltas> deltas,
                                const Accumulators& acc, const HParams& params) {
  const double ct = compute_ctilde(acc, g, params.h, params.epsilon);
  GuardedStep out{apply_growth(g, acc, params.h, ct, params.min_prob), ct, 0, 0.0, 0.0};
  if (!params.monotone_guard) return out;

  out.objective_before = objective(g, deltas, params.h, params.eta);
  out.objective_after = objective(out.result.grammar, deltas, params.h, params.eta);
  const double slack = 1e-12 * std::max(1.0, std::abs(out.objective_before));
  while (out.objective_after < out.objective_before - slack &&
         out.escalations < params.max_escalations) {
    out.ctilde *= 2.0;
    ++out.escalations;
    out.result = apply_growth(g, acc, params.h, out.ctilde, params.min_prob);
    out.objective_after = objective(out.result.grammar, deltas, params.h, params.eta);
  }
  return out;
}

namespace {

int count_skipped(std::span<const SentenceDeltas> deltas) {
  return static_cast<int>(std::count_if(deltas.begin(), deltas.end(),
                                        [](const SentenceDeltas& d) { return d.skipped; }));
}

int count_degenerate(std::span<const SentenceDeltas> deltas) {
  return static_cast<int>(std::count_if(deltas.begin(), deltas.end(), [](const SentenceDeltas& d) {
    return !d.skipped && d.degenerate;
  }));
}

}  // namespace

TrainReport train(const Grammar& g0, const Corpus& corpus, const DeltaSpec& spec,
                  const HParams& params) {
  params.validate();
  spec.validate();
  if (corpus.empty()) throw EstimatorError("empty corpus");

  TrainReport report{{}, g0, false};
  auto deltas = select_deltas(g0, corpus, spec);
  if (count_skipped(deltas) == static_cast<int>(deltas.size()))
    throw EstimatorError("every sentence was skipped");

  IterationRecord rec;
  rec.log_objective = objective(g0, deltas, params.h, params.eta);
  rec.spectral_radius = check_consistency(g0).spectral_radius;
  rec.skipped = count_skipped(deltas);
  rec.degenerate = count_degenerate(deltas);
  report.records.push_back(rec);

  for (int it = 1; it <= params.max_iters; ++it) {
    const Grammar& g = report.grammar;
    const Accumulators acc = accumulate(g, deltas, params.eta);
    if (acc.sentences == 0)
      throw EstimatorError("iteration " + std::to_string(it) + ": every sentence was skipped");
    GuardedStep guarded = [&] {
      try {
        return guarded_growth_step(g, deltas, acc, params);
      } catch (const EstimatorError& e) {
        throw EstimatorError("iteration " + std::to_string(it) + ": " + e.what());
      }
    }();
    GrowthResult& step = guarded.result;

    deltas = select_deltas(step.grammar, corpus, spec);
    IterationRecord next;
    next.iter = it;
    next.ctilde = guarded.ctilde;
    next.escalations = guarded.escalations;
    next.max_delta_p = (step.grammar.probs() - g.probs()).cwiseAbs().maxCoeff();
    next.spectral_radius = check_consistency(step.grammar).spectral_radius;
    next.skipped = count_skipped(deltas);
    next.degenerate = count_degenerate(deltas);
    next.floored = step.floored;
    next.log_objective = objective(step.grammar, deltas, params.h, params.eta);

    const double prev = report.records.back().log_objective;
    report.grammar = std::move(step.grammar);
    report.records.push_back(next);
    if (std::abs(next.log_objective - prev) <= params.rel_tol * std::abs(prev)) {
      report.converged = true;
      break;
    }
  }
  return report;
}

std::string report_csv(const TrainReport& report) {
  std::string out = "iter,log_objective,ctilde,max_delta_p,spectral_radius,skipped\n";
  char buf[256];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%d\n", r.iter, r.log_objective,
                  r.ctilde, r.max_delta_p, r.spectral_radius, r.skipped);
    out += buf;
  }
  return out;
}

}  // namespace hgt
