#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace usrl {

namespace {

constexpr std::size_t kFixedColumns = 14;

enum Column : std::size_t {
  kId = 0,
  kForm = 1,
  kLemma = 2,
  kPlemma = 3,
  kPos = 4,
  kPpos = 5,
  kHead = 8,
  kPhead = 9,
  kDeprel = 10,
  kPdeprel = 11,
  kFillpred = 12,
  kPred = 13,
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Trailing whitespace (including CR) is dropped from every line.
std::string rstrip(std::string line) {
  while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
  return line;
}

std::optional<int> parse_int(const std::string& text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

[[noreturn]] void fail(ErrorKind kind, const std::string& origin, std::size_t sentence, std::size_t line,
                       const std::string& message) {
  std::ostringstream out;
  out << origin << ": sentence " << sentence << ", line " << line << ": " << message;
  throw Error(kind, out.str());
}

AnnotatedSentence build_sentence(std::vector<std::vector<std::string>> rows, const std::vector<std::size_t>& lines,
                                 ColumnMode mode, const std::string& origin, std::size_t sentence_number) {
  AnnotatedSentence sentence;
  sentence.source = mode;
  const std::size_t width = rows.front().size();
  const std::size_t n_apreds = width - kFixedColumns;
  const int n = static_cast<int>(rows.size());
  const std::size_t pos_col = mode == ColumnMode::gold ? kPos : kPpos;
  const std::size_t head_col = mode == ColumnMode::gold ? kHead : kPhead;
  const std::size_t deprel_col = mode == ColumnMode::gold ? kDeprel : kPdeprel;
  const std::size_t lemma_col = mode == ColumnMode::gold ? kLemma : kPlemma;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      fail(ErrorKind::parse, origin, sentence_number, lines[r],
           "row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(width));
    }
    Token token;
    auto id = parse_int(row[kId]);
    if (!id || *id != static_cast<int>(r) + 1) {
      fail(ErrorKind::parse, origin, sentence_number, lines[r],
           "token id '" + row[kId] + "' is not " + std::to_string(r + 1));
    }
    token.index = *id;
    token.form = row[kForm];
    token.lemma = row[lemma_col];
    token.pos = row[pos_col];
    auto head = parse_int(row[head_col]);
    if (!head) fail(ErrorKind::parse, origin, sentence_number, lines[r], "non-integer head '" + row[head_col] + "'");
    if (*head < 0 || *head > n) {
      fail(ErrorKind::parse, origin, sentence_number, lines[r], "head " + row[head_col] + " out of range");
    }
    if (*head == token.index) {
      fail(ErrorKind::structure, origin, sentence_number, lines[r],
           "token " + std::to_string(token.index) + " is its own head");
    }
    token.head = *head;
    token.deprel = row[deprel_col];
    token.is_predicate = row[kFillpred] == "Y";
    if (row[kPred] != "_") token.pred_sense = row[kPred];
    token.apreds.reserve(n_apreds);
    for (std::size_t k = 0; k < n_apreds; ++k) {
      const auto& cell = row[kFixedColumns + k];
      token.apreds.push_back(cell == "_" ? std::nullopt : std::optional<std::string>(cell));
    }
    if (token.is_predicate) sentence.predicates.push_back(token.index);
    sentence.tokens.push_back(std::move(token));
  }
  if (sentence.predicates.size() != n_apreds) {
    fail(ErrorKind::parse, origin, sentence_number, lines.front(),
         std::to_string(sentence.predicates.size()) + " predicates marked but " + std::to_string(n_apreds) +
             " APRED columns");
  }
  sentence.rows = std::move(rows);
  try {
    DependencyTree tree(sentence);
  } catch (const Error& e) {
    fail(e.kind(), origin, sentence_number, lines.front(), e.what());
  }
  return sentence;
}

}  // namespace

std::string to_string(ColumnMode mode) { return mode == ColumnMode::gold ? "gold" : "auto"; }

ColumnMode parse_column_mode(const std::string& text) {
  if (text == "gold") return ColumnMode::gold;
  if (text == "auto") return ColumnMode::automatic;
  throw Error(ErrorKind::invalid_argument, "column mode must be gold or auto, got '" + text + "'");
}

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::silver:
      return "silver";
    case LabelKind::predicted:
      return "predicted";
    case LabelKind::gold:
      return "gold";
  }
  return "?";
}

bool AnnotatedSentence::is_verb(int index) const { return token(index).pos.rfind("VB", 0) == 0; }

DependencyTree::DependencyTree(const AnnotatedSentence& sentence) {
  parent_.assign(sentence.size() + 1, 0);
  for (const auto& t : sentence.tokens) parent_[static_cast<std::size_t>(t.index)] = t.head;
  build();
}

DependencyTree::DependencyTree(const std::vector<int>& heads) {
  parent_.assign(heads.size() + 1, 0);
  std::copy(heads.begin(), heads.end(), parent_.begin() + 1);
  build();
}

void DependencyTree::build() {
  const int n = static_cast<int>(parent_.size()) - 1;
  children_.assign(parent_.size(), {});
  depth_.assign(parent_.size(), -1);
  depth_[0] = 0;
  for (int i = 1; i <= n; ++i) {
    int h = parent_[static_cast<std::size_t>(i)];
    if (h < 0 || h > n || h == i) {
      throw Error(ErrorKind::structure, "token " + std::to_string(i) + " has invalid head " + std::to_string(h));
    }
    children_[static_cast<std::size_t>(h)].push_back(i);
  }
  // Walk up from every node; a walk longer than n steps means a cycle.
  for (int i = 1; i <= n; ++i) {
    std::vector<int> chain;
    int cur = i;
    while (depth_[static_cast<std::size_t>(cur)] < 0) {
      chain.push_back(cur);
      if (static_cast<int>(chain.size()) > n) {
        throw Error(ErrorKind::structure, "cycle in head links through token " + std::to_string(i));
      }
      cur = parent_[static_cast<std::size_t>(cur)];
    }
    int d = depth_[static_cast<std::size_t>(cur)];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth_[static_cast<std::size_t>(*it)] = ++d;
  }
}

bool DependencyTree::dominates(int ancestor, int node) const {
  while (depth(node) > depth(ancestor)) node = parent(node);
  return node == ancestor;
}

int DependencyTree::lca(int a, int b) const {
  while (depth(a) > depth(b)) a = parent(a);
  while (depth(b) > depth(a)) b = parent(b);
  while (a != b) {
    a = parent(a);
    b = parent(b);
  }
  return a;
}

std::vector<int> DependencyTree::path(int from, int to) const {
  int top = lca(from, to);
  std::vector<int> up;
  for (int cur = from; cur != top; cur = parent(cur)) up.push_back(cur);
  up.push_back(top);
  std::vector<int> down;
  for (int cur = to; cur != top; cur = parent(cur)) down.push_back(cur);
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

DependencyTree build_tree(const AnnotatedSentence& sentence) { return DependencyTree(sentence); }

Corpus parse_conll09(const std::string& text, ColumnMode mode, const std::string& origin) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
  auto flush = [&] {
    if (rows.empty()) return;
    if (rows.front().size() < kFixedColumns) {
      fail(ErrorKind::parse, origin, corpus.size() + 1, lines.front(),
           "row has " + std::to_string(rows.front().size()) + " columns, CoNLL-2009 needs at least 14");
    }
    corpus.push_back(build_sentence(std::move(rows), lines, mode, origin, corpus.size() + 1));
    rows.clear();
    lines.clear();
  };
  while (std::getline(in, line)) {
    ++line_number;
    line = rstrip(std::move(line));
    if (line.empty()) {
      flush();
      continue;
    }
    rows.push_back(split_tabs(line));
    lines.push_back(line_number);
  }
  flush();
  return corpus;
}

Corpus read_conll09(const std::filesystem::path& path, ColumnMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_conll09(buffer.str(), mode, path.string());
}

std::string format_conll09(const Corpus& corpus) {
  std::string out;
  for (const auto& sentence : corpus) {
    for (const auto& row : sentence.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += '\t';
        out += row[c];
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll09(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << format_conll09(corpus);
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::vector<int> selected_predicates(const AnnotatedSentence& sentence, bool verbs_only) {
  std::vector<int> out;
  for (int p : sentence.predicates) {
    if (!verbs_only || sentence.is_verb(p)) out.push_back(p);
  }
  return out;
}

Assignments gold_assignments(const Corpus& corpus, bool verbs_only) {
  Assignments out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& sentence = corpus[s];
    for (std::size_t k = 0; k < sentence.predicates.size(); ++k) {
      int p = sentence.predicates[k];
      if (verbs_only && !sentence.is_verb(p)) continue;
      ArgumentAssignment a;
      a.sentence_id = s;
      a.predicate_index = p;
      a.label_kind = LabelKind::gold;
      for (const auto& t : sentence.tokens) {
        // A predicate never counts as its own argument.
        if (t.index == p || !t.apreds[k]) continue;
        a.arguments.insert(t.index);
        a.roles[t.index] = *t.apreds[k];
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

Corpus with_argument_columns(const Corpus& corpus, const Assignments& assignments) {
  Corpus out = corpus;
  std::map<std::pair<std::size_t, int>, const ArgumentAssignment*> index;
  for (const auto& a : assignments) index[{a.sentence_id, a.predicate_index}] = &a;
  for (std::size_t s = 0; s < out.size(); ++s) {
    auto& sentence = out[s];
    for (std::size_t k = 0; k < sentence.predicates.size(); ++k) {
      auto it = index.find({s, sentence.predicates[k]});
      for (auto& t : sentence.tokens) {
        std::optional<std::string> cell;
        if (it != index.end() && it->second->arguments.count(t.index)) {
          auto role = it->second->roles.find(t.index);
          cell = role != it->second->roles.end() ? role->second : std::string("ARG");
        }
        t.apreds[k] = cell;
        sentence.rows[static_cast<std::size_t>(t.index - 1)][kFixedColumns + k] = cell.value_or("_");
      }
    }
  }
  return out;
}

}  // namespace usrl
