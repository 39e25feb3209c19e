// Probabilistic context-free grammars in Chomsky Normal Form.

#ifndef HGT_GRAMMAR_HPP
#define HGT_GRAMMAR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace hgt {

using SymbolId = int;
using RuleId = int;

constexpr SymbolId kNoSymbol = -1;

/// Raised for malformed grammar text or invariant violations.  `line()` is
/// zero when the error is not tied to a line of input.
class GrammarError : public std::runtime_error {
public:
  GrammarError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A -> B C (binary) or A -> a (lexical).  Binary rules have `terminal ==
/// kNoSymbol`; lexical rules have `left == right == kNoSymbol`.
struct Rule {
  RuleId id = 0;
  SymbolId lhs = kNoSymbol;
  SymbolId left = kNoSymbol;
  SymbolId right = kNoSymbol;
  SymbolId terminal = kNoSymbol;

  bool binary() const noexcept { return terminal == kNoSymbol; }
};

/// Input to Grammar::build, symbols by name.
struct RuleSpec {
  std::string lhs;
  std::vector<std::string> rhs;
  double prob = 0.0;
  std::size_t line = 0;
};

/// Slack below which a per-nonterminal sum counts as exactly one and is left
/// untouched by renormalization.
double exact_sum_slack(std::size_t n_terms) noexcept;

/// Tolerance for the properness check at construction.
constexpr double kPropernessTol = 1e-9;

bool is_nonterminal_token(std::string_view tok) noexcept;

/// Immutable PCFG.  Rule ids are dense in file order; symbol ids are dense
/// in order of first appearance.
class Grammar {
public:
  /// Validates CNF form, probability range and properness (within
  /// kPropernessTol), then renormalizes each nonterminal's rules.
  static Grammar build(const std::vector<RuleSpec>& rules,
                       std::optional<std::string> start = std::nullopt);

  /// Same rule set, new probabilities.  The vector is validated and
  /// renormalized like file input.
  Grammar with_probabilities(const Eigen::VectorXd& probs) const;

  std::size_t num_nonterminals() const noexcept { return nonterminals_.size(); }
  std::size_t num_terminals() const noexcept { return terminals_.size(); }
  std::size_t num_rules() const noexcept { return rules_.size(); }

  SymbolId start() const noexcept { return start_; }
  const std::string& nonterminal_name(SymbolId a) const { return nonterminals_.at(a); }
  const std::string& terminal_name(SymbolId t) const { return terminals_.at(t); }
  std::optional<SymbolId> find_nonterminal(std::string_view name) const;
  std::optional<SymbolId> find_terminal(std::string_view name) const;

  const Rule& rule(RuleId r) const { return rules_.at(r); }
  const std::vector<Rule>& rules() const noexcept { return rules_; }
  double prob(RuleId r) const { return probs_(r); }
  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  const Eigen::VectorXd& log_probs() const noexcept { return log_probs_; }

  /// Rule ids with the given left-hand side, ascending.
  const std::vector<RuleId>& rules_of(SymbolId a) const { return by_lhs_.at(a); }
  const std::vector<RuleId>& binary_rules() const noexcept { return binary_; }
  /// Lexical rule ids producing terminal t, ascending.
  const std::vector<RuleId>& lexical_rules(SymbolId t) const { return by_terminal_.at(t); }

  std::string rule_string(RuleId r) const;

private:
  Grammar() = default;
  void index();
  static Eigen::VectorXd normalized(const std::vector<std::vector<RuleId>>& by_lhs,
                                    Eigen::VectorXd probs,
                                    const std::vector<std::size_t>& lines);

  std::vector<std::string> nonterminals_;
  std::vector<std::string> terminals_;
  std::unordered_map<std::string, SymbolId> nt_ids_;
  std::unordered_map<std::string, SymbolId> t_ids_;
  SymbolId start_ = kNoSymbol;
  std::vector<Rule> rules_;
  Eigen::VectorXd probs_;
  Eigen::VectorXd log_probs_;
  std::vector<std::vector<RuleId>> by_lhs_;
  std::vector<std::vector<RuleId>> by_terminal_;
  std::vector<RuleId> binary_;
};

/// Parses the line-oriented grammar format:
///
///     # comment
///     %start S
///     S -> S S 0.4
///     S -> a 0.6
///
/// Tokens matching [A-Z][A-Za-z0-9_]* are nonterminals, anything else is a
/// terminal.  Without %start the first rule's LHS is the start symbol.
Grammar parse_grammar(std::string_view text);

Grammar load_grammar(const std::string& path);

/// Inverse of parse_grammar; probabilities at round-trip precision.
std::string serialize(const Grammar& g);

// ---------------------------------------------------------------------------
// Consistency

enum class Verdict { consistent, borderline, inconsistent };

std::string_view to_string(Verdict v) noexcept;

struct ConsistencyReport {
  double spectral_radius = 0.0;
  Verdict verdict = Verdict::consistent;
  int iterations = 0;
  bool converged = true;
};

struct PowerIterationOptions {
  int max_iterations = 10000;
  double convergence_tol = 1e-12;
};

/// M(A,B) = sum over rules A -> alpha of p(A -> alpha) times the number of
/// occurrences of B in alpha.
Eigen::MatrixXd expectation_matrix(const Grammar& g);

/// Spectral radius of the expectation matrix by power iteration from the
/// all-ones vector.  rho within +-tol of one is borderline; so is a run that
/// hits the iteration cap (converged = false).
ConsistencyReport check_consistency(const Grammar& g, double tol = 1e-9,
                                    const PowerIterationOptions& opts = {});

}  // namespace hgt

#endif  // HGT_GRAMMAR_HPP
