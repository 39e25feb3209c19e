#include "hgt/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace hgt {

GrammarError::GrammarError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

double exact_sum_slack(std::size_t n_terms) noexcept {
  return 4.0 * static_cast<double>(std::max<std::size_t>(n_terms, 1)) *
         std::numeric_limits<double>::epsilon();
}

bool is_nonterminal_token(std::string_view tok) noexcept {
  if (tok.empty() || tok.front() < 'A' || tok.front() > 'Z') return false;
  return std::all_of(tok.begin() + 1, tok.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_';
  });
}

namespace {

SymbolId intern(std::vector<std::string>& names,
                std::unordered_map<std::string, SymbolId>& ids, const std::string& s) {
  auto [it, inserted] = ids.emplace(s, static_cast<SymbolId>(names.size()));
  if (inserted) names.push_back(s);
  return it->second;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Grammar Grammar::build(const std::vector<RuleSpec>& specs, std::optional<std::string> start) {
  if (specs.empty()) throw GrammarError(0, "grammar has no rules");

  Grammar g;
  // Nonterminal ids follow first appearance, scanning each rule's LHS then RHS.
  for (const auto& s : specs) {
    if (!is_nonterminal_token(s.lhs))
      throw GrammarError(s.line, "left-hand side '" + s.lhs + "' is not a nonterminal");
    intern(g.nonterminals_, g.nt_ids_, s.lhs);
    for (const auto& sym : s.rhs) {
      if (is_nonterminal_token(sym))
        intern(g.nonterminals_, g.nt_ids_, sym);
      else
        intern(g.terminals_, g.t_ids_, sym);
    }
  }

  std::vector<std::size_t> lines;
  std::set<std::tuple<SymbolId, SymbolId, SymbolId, SymbolId>> seen;
  Eigen::VectorXd probs(static_cast<Eigen::Index>(specs.size()));
  for (const auto& s : specs) {
    Rule r;
    r.id = static_cast<RuleId>(g.rules_.size());
    r.lhs = g.nt_ids_.at(s.lhs);
    if (s.rhs.size() == 2) {
      if (!is_nonterminal_token(s.rhs[0]) || !is_nonterminal_token(s.rhs[1]))
        throw GrammarError(s.line, "binary rule must rewrite to two nonterminals (not CNF)");
      r.left = g.nt_ids_.at(s.rhs[0]);
      r.right = g.nt_ids_.at(s.rhs[1]);
    } else if (s.rhs.size() == 1) {
      if (is_nonterminal_token(s.rhs[0]))
        throw GrammarError(s.line, "unit rule " + s.lhs + " -> " + s.rhs[0] + " is not CNF");
      r.terminal = g.t_ids_.at(s.rhs[0]);
    } else {
      throw GrammarError(s.line, "rule must have one or two right-hand symbols (not CNF)");
    }
    if (!seen.emplace(r.lhs, r.left, r.right, r.terminal).second)
      throw GrammarError(s.line, "duplicate rule");
    if (!(s.prob > 0.0 && s.prob <= 1.0))
      throw GrammarError(s.line, "probability must lie in ]0,1]");
    probs(r.id) = s.prob;
    lines.push_back(s.line);
    g.rules_.push_back(r);
  }

  if (start) {
    auto it = g.nt_ids_.find(*start);
    if (it == g.nt_ids_.end())
      throw GrammarError(0, "start symbol '" + *start + "' does not occur in any rule");
    g.start_ = it->second;
  } else {
    g.start_ = g.rules_.front().lhs;
  }

  g.index();
  g.probs_ = normalized(g.by_lhs_, std::move(probs), lines);
  g.log_probs_ = g.probs_.array().log();
  return g;
}

Grammar Grammar::with_probabilities(const Eigen::VectorXd& probs) const {
  if (probs.size() != static_cast<Eigen::Index>(rules_.size()))
    throw GrammarError(0, "probability vector size does not match rule count");
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (!(probs(i) > 0.0 && probs(i) <= 1.0))
      throw GrammarError(0, "probability of rule " + rule_string(static_cast<RuleId>(i)) +
                                " outside ]0,1]");
  Grammar g = *this;
  g.probs_ = normalized(by_lhs_, probs, std::vector<std::size_t>(rules_.size(), 0));
  g.log_probs_ = g.probs_.array().log();
  return g;
}

Eigen::VectorXd Grammar::normalized(const std::vector<std::vector<RuleId>>& by_lhs,
                                    Eigen::VectorXd probs,
                                    const std::vector<std::size_t>& lines) {
  for (const auto& ids : by_lhs) {
    if (ids.empty()) continue;
    double sum = 0.0;
    for (RuleId r : ids) sum += probs(r);
    if (std::abs(sum - 1.0) > kPropernessTol) {
      std::ostringstream os;
      os.precision(12);
      os << "probabilities of nonterminal rules sum to " << sum << ", not 1";
      throw GrammarError(lines.at(ids.front()), os.str());
    }
    if (std::abs(sum - 1.0) > exact_sum_slack(ids.size()))
      for (RuleId r : ids) probs(r) /= sum;
  }
  return probs;
}

void Grammar::index() {
  by_lhs_.assign(nonterminals_.size(), {});
  by_terminal_.assign(terminals_.size(), {});
  binary_.clear();
  for (const auto& r : rules_) {
    by_lhs_[r.lhs].push_back(r.id);
    if (r.binary())
      binary_.push_back(r.id);
    else
      by_terminal_[r.terminal].push_back(r.id);
  }
}

std::optional<SymbolId> Grammar::find_nonterminal(std::string_view name) const {
  auto it = nt_ids_.find(std::string(name));
  if (it == nt_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<SymbolId> Grammar::find_terminal(std::string_view name) const {
  auto it = t_ids_.find(std::string(name));
  if (it == t_ids_.end()) return std::nullopt;
  return it->second;
}

std::string Grammar::rule_string(RuleId id) const {
  const Rule& r = rules_.at(id);
  std::string s = nonterminals_[r.lhs] + " ->";
  if (r.binary())
    s += " " + nonterminals_[r.left] + " " + nonterminals_[r.right];
  else
    s += " " + terminals_[r.terminal];
  return s;
}

Grammar parse_grammar(std::string_view text) {
  std::vector<RuleSpec> specs;
  std::optional<std::string> start;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;

    if (toks[0] == "%start") {
      if (toks.size() != 2) throw GrammarError(lineno, "%start takes exactly one symbol");
      if (start) throw GrammarError(lineno, "repeated %start directive");
      if (!is_nonterminal_token(toks[1]))
        throw GrammarError(lineno, "start symbol '" + std::string(toks[1]) +
                                       "' is not a nonterminal");
      start = std::string(toks[1]);
      continue;
    }
    if (toks[0].front() == '%')
      throw GrammarError(lineno, "unknown directive '" + std::string(toks[0]) + "'");
    if (toks.size() < 4 || toks[1] != "->")
      throw GrammarError(lineno, "expected 'LHS -> RHS1 [RHS2] PROB'");

    RuleSpec s;
    s.line = lineno;
    s.lhs = std::string(toks[0]);
    for (std::size_t i = 2; i + 1 < toks.size(); ++i) s.rhs.emplace_back(toks[i]);
    std::string_view ptok = toks.back();
    auto [ptr, ec] = std::from_chars(ptok.data(), ptok.data() + ptok.size(), s.prob);
    if (ec != std::errc() || ptr != ptok.data() + ptok.size())
      throw GrammarError(lineno, "cannot read probability '" + std::string(ptok) + "'");
    if (!is_nonterminal_token(s.lhs))
      throw GrammarError(lineno, "left-hand side '" + s.lhs + "' is not a nonterminal");
    specs.push_back(std::move(s));
  }
  return Grammar::build(specs, start);
}

Grammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grammar file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grammar(ss.str());
}

std::string serialize(const Grammar& g) {
  std::string out;
  if (g.start() != g.rule(0).lhs) out += "%start " + g.nonterminal_name(g.start()) + "\n";
  char buf[64];
  for (const auto& r : g.rules()) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, g.prob(r.id));
    out += g.rule_string(r.id);
    out += ' ';
    out.append(buf, ptr);
    out += '\n';
  }
  return out;
}

}  // namespace hgt
