// Plain and bracketed corpus files.

#ifndef HGT_CORPUS_HPP
#define HGT_CORPUS_HPP

#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hgt/estimator.hpp"

namespace hgt {

class CorpusError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Sentence tokenize(std::string_view line);

/// One sentence per line, whitespace separated; blank lines are ignored.
Corpus read_corpus(std::istream& in);

/// `( ( a a ) ( a a ) )`: tokens plus one bracket per parenthesis pair.
/// Parentheses may touch neighbouring tokens.
CorpusEntry parse_bracketed(std::string_view line);

Corpus read_bracketed_corpus(std::istream& in);

Corpus load_corpus(const std::string& path);
Corpus load_bracketed_corpus(const std::string& path);

}  // namespace hgt

#endif  // HGT_CORPUS_HPP
