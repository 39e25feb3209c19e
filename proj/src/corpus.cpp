#include "hgt/corpus.hpp"

#include <cctype>
#include <fstream>

namespace hgt {

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    Sentence s = tokenize(line);
    if (!s.empty()) corpus.push_back({std::move(s), std::nullopt});
  }
  return corpus;
}

CorpusEntry parse_bracketed(std::string_view line) {
  CorpusEntry entry;
  std::vector<Span> spans;
  std::vector<int> open;
  std::string tok;
  auto flush = [&] {
    if (!tok.empty()) entry.sentence.push_back(std::move(tok));
    tok.clear();
  };
  for (char c : line) {
    if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
      const int pos = static_cast<int>(entry.sentence.size());
      if (c == '(') {
        open.push_back(pos);
      } else if (c == ')') {
        if (open.empty()) throw CorpusError("unbalanced ')'");
        if (open.back() == pos) throw CorpusError("empty bracket");
        spans.push_back({open.back(), pos});
        open.pop_back();
      }
    } else {
      tok += c;
    }
  }
  flush();
  if (!open.empty()) throw CorpusError("unbalanced '('");
  entry.brackets = Bracketing(std::move(spans), static_cast<int>(entry.sentence.size()));
  return entry;
}

Corpus read_bracketed_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (tokenize(line).empty()) continue;
    try {
      corpus.push_back(parse_bracketed(line));
      if (corpus.back().sentence.empty()) throw CorpusError("no tokens");
    } catch (const std::exception& e) {
      throw CorpusError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

namespace {

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file '" + path + "'");
  return in;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  auto in = open_file(path);
  return read_corpus(in);
}

Corpus load_bracketed_corpus(const std::string& path) {
  auto in = open_file(path);
  return read_bracketed_corpus(in);
}

}  // namespace hgt
