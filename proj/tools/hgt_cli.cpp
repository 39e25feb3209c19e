// hgt: command-line front end for PCFG parsing, consistency checking and
// discriminative growth-transformation training.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hgt/chart.hpp"
#include "hgt/corpus.hpp"
#include "hgt/estimator.hpp"
#include "hgt/grammar.hpp"
#include "hgt/kbest.hpp"
#include "hgt/oracle.hpp"

namespace {

using namespace hgt;

struct Inputs {
  std::string grammar;
  std::string corpus;
  std::string brackets;
};

/// Error category printed as the second field of the error line.
struct Failure : std::runtime_error {
  Failure(std::string kind, const std::string& what)
      : std::runtime_error(what), kind(std::move(kind)) {}
  std::string kind;
};

void add_inputs(CLI::App* cmd, Inputs& in, bool needs_corpus) {
  cmd->add_option("-g,--grammar", in.grammar, "Grammar file")->required();
  if (!needs_corpus) return;
  auto* c = cmd->add_option("-c,--corpus", in.corpus, "Corpus, one sentence per line");
  auto* b = cmd->add_option("-b,--brackets", in.brackets,
                            "Bracketed corpus; brackets constrain parsing");
  c->excludes(b);
  b->excludes(c);
}

Grammar read_grammar(const std::string& path) {
  try {
    return load_grammar(path);
  } catch (const std::exception& e) {
    throw Failure("grammar", path + ": " + e.what());
  }
}

Corpus read_sentences(const Inputs& in) {
  try {
    if (!in.brackets.empty()) return load_bracketed_corpus(in.brackets);
    if (!in.corpus.empty()) return load_corpus(in.corpus);
  } catch (const std::exception& e) {
    throw Failure("corpus", e.what());
  }
  throw Failure("usage", "one of --corpus or --brackets is required");
}

std::string num(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const Bracketing& constraint(const CorpusEntry& e) {
  static const Bracketing none;
  return e.brackets ? *e.brackets : none;
}

template <typename F>
void for_each_sentence(const Corpus& corpus, F&& f) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      f(i, corpus[i]);
    } catch (const SentenceError& e) {
      throw Failure("sentence", "sentence " + std::to_string(i) + ": " + e.what());
    }
  }
}

int cmd_validate(const Inputs& in) {
  const Grammar g = read_grammar(in.grammar);
  std::cout << "ok\tnonterminals=" << g.num_nonterminals() << "\tterminals=" << g.num_terminals()
            << "\trules=" << g.num_rules() << "\tstart=" << g.nonterminal_name(g.start()) << '\n';
  return 0;
}

int cmd_consistency(const Inputs& in, double tol, bool csv) {
  const Grammar g = read_grammar(in.grammar);
  const ConsistencyReport rep = check_consistency(g, tol);
  if (csv) {
    std::cout << "spectral_radius,verdict,iterations,converged\n"
              << num(rep.spectral_radius) << ',' << to_string(rep.verdict) << ','
              << rep.iterations << ',' << (rep.converged ? 1 : 0) << '\n';
  } else {
    std::cout << "spectral_radius=" << num(rep.spectral_radius)
              << " verdict=" << to_string(rep.verdict) << " iterations=" << rep.iterations;
    if (!rep.converged) std::cout << " warning=not-converged";
    std::cout << '\n';
  }
  return 0;
}

int cmd_inside(const Inputs& in) {
  const Grammar g = read_grammar(in.grammar);
  const Corpus corpus = read_sentences(in);
  for_each_sentence(corpus, [&](std::size_t i, const CorpusEntry& e) {
    const InsideChart chart = inside(g, e.sentence, constraint(e));
    std::cout << i << '\t' << num(chart.total()) << '\t' << num(std::exp(chart.total()));
    if (!chart.in_language()) std::cout << "\tnot-in-language";
    std::cout << '\n';
  });
  return 0;
}

int cmd_viterbi(const Inputs& in, bool tree) {
  const Grammar g = read_grammar(in.grammar);
  const Corpus corpus = read_sentences(in);
  for_each_sentence(corpus, [&](std::size_t i, const CorpusEntry& e) {
    const auto d = viterbi(g, e.sentence, constraint(e));
    if (!d) {
      std::cout << i << "\t-inf\t0\tnot-in-language\n";
      return;
    }
    std::cout << i << '\t' << num(d->log_prob) << '\t' << num(std::exp(d->log_prob));
    if (tree) std::cout << '\t' << format_tree(g, *d);
    std::cout << '\n';
  });
  return 0;
}

void print_ranked(const Grammar& g, std::size_t i, const std::vector<Derivation>& ds, bool tree) {
  for (std::size_t k = 0; k < ds.size(); ++k) {
    std::cout << i << '\t' << k + 1 << '\t' << num(ds[k].log_prob) << '\t'
              << num(std::exp(ds[k].log_prob));
    if (tree) std::cout << '\t' << format_tree(g, ds[k]);
    std::cout << '\n';
  }
}

int cmd_nbest(const Inputs& in, int n, bool tree) {
  const Grammar g = read_grammar(in.grammar);
  const Corpus corpus = read_sentences(in);
  for_each_sentence(corpus, [&](std::size_t i, const CorpusEntry& e) {
    const KBestList list = nbest(g, e.sentence, n, constraint(e));
    if (!list.in_language) std::cout << i << "\t0\t-inf\t0\tnot-in-language\n";
    print_ranked(g, i, list.derivations, tree);
  });
  return 0;
}

int cmd_oracle(const Inputs& in, int cap, bool tree) {
  const Grammar g = read_grammar(in.grammar);
  const Corpus corpus = read_sentences(in);
  for_each_sentence(corpus, [&](std::size_t i, const CorpusEntry& e) {
    oracle::Enumeration en;
    try {
      en = oracle::enumerate_derivations(g, e.sentence, cap);
    } catch (const std::logic_error& err) {
      throw Failure("oracle", "sentence " + std::to_string(i) + ": " + err.what());
    }
    if (e.brackets) en = oracle::filter_compatible(en, *e.brackets);
    print_ranked(g, i, en.derivations, tree);
    std::cout << i << "\ttotal\t" << num(en.total_log_prob) << '\t'
              << num(std::exp(en.total_log_prob)) << "\tcount=" << en.derivations.size()
              << '\n';
  });
  return 0;
}

struct TrainOptions {
  HParams params;
  DeltaSpec spec;
  std::string ref = "viterbi";
  std::string comp = "all";
  bool no_subset = false;
  bool no_guard = false;
  std::string out_grammar;
  std::string report;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Failure("io", "cannot write '" + path + "'");
  out << text;
  if (!out) throw Failure("io", "write to '" + path + "' failed");
}

int cmd_train(const Inputs& in, TrainOptions opt) {
  try {
    opt.spec.ref = parse_ref_mode(opt.ref);
    opt.spec.comp = parse_comp_mode(opt.comp);
    opt.spec.enforce_subset = !opt.no_subset;
    opt.params.monotone_guard = !opt.no_guard;
    opt.spec.validate();
    opt.params.validate();
  } catch (const std::invalid_argument& e) {
    throw Failure("usage", e.what());
  }
  if (opt.spec.needs_brackets() && in.brackets.empty())
    throw Failure("usage", "bracketed modes require --brackets");

  const Grammar g0 = read_grammar(in.grammar);
  const Corpus corpus = read_sentences(in);
  TrainReport report = [&] {
    try {
      return train(g0, corpus, opt.spec, opt.params);
    } catch (const SentenceError& e) {
      throw Failure("sentence", e.what());
    } catch (const std::exception& e) {
      throw Failure("estimator", e.what());
    }
  }();

  for (const IterationRecord& r : report.records) {
    std::cout << "iter=" << r.iter << "\tlog_objective=" << num(r.log_objective)
              << "\tctilde=" << num(r.ctilde) << "\tmax_delta_p=" << num(r.max_delta_p)
              << "\tspectral_radius=" << num(r.spectral_radius) << "\tskipped=" << r.skipped;
    if (r.escalations) std::cout << "\tescalations=" << r.escalations;
    if (r.floored) std::cout << "\tfloored=" << r.floored;
    std::cout << '\n';
  }
  const IterationRecord& last = report.records.back();
  if (last.degenerate)
    std::cerr << "warning: " << last.degenerate
              << " sentence(s) have identical reference and competing sets\n";
  if (last.skipped) std::cerr << "warning: " << last.skipped << " sentence(s) skipped\n";

  write_file(opt.out_grammar, serialize(report.grammar));
  if (!opt.report.empty()) write_file(opt.report, report_csv(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCFG parsing and discriminative growth-transformation training"};
  app.require_subcommand(1);

  Inputs in;
  double tol = 1e-9;
  bool csv = false;
  bool no_tree = false;
  int n = 1;
  int cap = oracle::kDefaultCap;
  TrainOptions topt;

  auto* validate = app.add_subcommand("validate", "Check a grammar file");
  add_inputs(validate, in, false);

  auto* consistency = app.add_subcommand("consistency", "Spectral-radius consistency check");
  add_inputs(consistency, in, false);
  consistency->add_option("--tol", tol, "Borderline band around rho = 1")->check(CLI::PositiveNumber);
  consistency->add_flag("--csv", csv, "CSV output");

  auto* ins = app.add_subcommand("inside", "Sentence log-probabilities");
  add_inputs(ins, in, true);

  auto* vit = app.add_subcommand("viterbi", "Best derivation per sentence");
  add_inputs(vit, in, true);
  vit->add_flag("--no-tree", no_tree, "Omit the derivation tree");

  auto* nb = app.add_subcommand("nbest", "n best derivations per sentence");
  add_inputs(nb, in, true);
  nb->add_option("-n", n, "Number of derivations")->check(CLI::PositiveNumber);
  nb->add_flag("--no-tree", no_tree, "Omit the derivation trees");

  auto* orc = app.add_subcommand("oracle-enum", "Enumerate every derivation (small inputs)");
  add_inputs(orc, in, true);
  orc->add_option("--cap", cap, "Maximum sentence length")->check(CLI::PositiveNumber);
  orc->add_flag("--no-tree", no_tree, "Omit the derivation trees");

  auto* tr = app.add_subcommand("train", "Growth-transformation training");
  tr->set_help_flag("--help", "Print this help message and exit");
  add_inputs(tr, in, true);
  tr->add_option("--h", topt.params.h, "Discrimination weight, 0 <= h < 1");
  tr->add_option("--eta", topt.params.eta, "Exponent on reference derivation probabilities");
  tr->add_option("--epsilon", topt.params.epsilon, "Offset added to the Ct estimate");
  tr->add_option("--iters", topt.params.max_iters, "Maximum iterations");
  tr->add_option("--rel-tol", topt.params.rel_tol, "Relative objective change to stop at");
  tr->add_option("--min-prob", topt.params.min_prob, "Probability floor");
  tr->add_option("--ref", topt.ref, "viterbi | nbest | bracketed-viterbi");
  tr->add_option("--n-ref", topt.spec.n_ref, "n for --ref nbest");
  tr->add_option("--comp", topt.comp, "all | nbest | bracketed-all");
  tr->add_option("--n-comp", topt.spec.n_comp, "n for --comp nbest");
  tr->add_flag("--no-enforce-subset", topt.no_subset, "Do not add references to the competing set");
  tr->add_flag("--no-monotone-guard", topt.no_guard, "Use the Ct estimate without escalation");
  tr->add_option("-o,--out-grammar", topt.out_grammar, "Trained grammar output")->required();
  tr->add_option("--report", topt.report, "Per-iteration CSV report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*validate) return cmd_validate(in);
    if (*consistency) return cmd_consistency(in, tol, csv);
    if (*ins) return cmd_inside(in);
    if (*vit) return cmd_viterbi(in, !no_tree);
    if (*nb) return cmd_nbest(in, n, !no_tree);
    if (*orc) return cmd_oracle(in, cap, !no_tree);
    if (*tr) return cmd_train(in, topt);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.kind << ": " << f.what() << '\n';
    return f.kind == "usage" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
