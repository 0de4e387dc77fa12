#include "usrl/usrl.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <iostream>
#include <new>
#include <string>

#include "config.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "pipeline.hpp"
#include "roleinduction.hpp"
#include "rules.hpp"

struct usrl_corpus {
  usrl::Corpus corpus;
};
struct usrl_rules {
  usrl::RuleSet rules;
};
struct usrl_assignments {
  usrl::Assignments assignments;
};
struct usrl_config {
  usrl::Config config;
};

namespace {

thread_local std::string last_error;

usrl_status status_of(usrl::ErrorKind kind) {
  switch (kind) {
    case usrl::ErrorKind::invalid_argument: return USRL_INVALID_ARGUMENT;
    case usrl::ErrorKind::io: return USRL_IO;
    case usrl::ErrorKind::parse: return USRL_PARSE;
    case usrl::ErrorKind::structure: return USRL_STRUCTURE;
    case usrl::ErrorKind::no_evidence: return USRL_NO_EVIDENCE;
    case usrl::ErrorKind::version: return USRL_VERSION;
    case usrl::ErrorKind::numeric: return USRL_NUMERIC;
    case usrl::ErrorKind::config: return USRL_CONFIG;
  }
  return USRL_INTERNAL;
}

usrl_status fail(usrl_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
usrl_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return USRL_OK;
  } catch (const usrl::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(USRL_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(USRL_INTERNAL, e.what());
  } catch (...) {
    return fail(USRL_INTERNAL, "unknown error");
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw usrl::Error(usrl::ErrorKind::invalid_argument, what);
}

void copy_out(const std::string& text, char* buffer, std::size_t capacity, std::size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buffer) {
    require(capacity == 0, "buffer is NULL but capacity is not 0");
    if (!needed) throw usrl::Error(usrl::ErrorKind::invalid_argument, "buffer and needed are both NULL");
    return;
  }
  if (capacity < text.size() + 1) {
    throw usrl::Error(usrl::ErrorKind::invalid_argument,
                      "buffer holds " + std::to_string(capacity) + " bytes, " + std::to_string(text.size() + 1) +
                          " needed");
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
}

const usrl::AnnotatedSentence& sentence_at(const usrl_corpus* corpus, std::size_t sentence) {
  require(corpus != nullptr, "corpus is NULL");
  if (sentence >= corpus->corpus.size()) {
    throw usrl::Error(usrl::ErrorKind::invalid_argument, "sentence " + std::to_string(sentence) + " out of range");
  }
  return corpus->corpus[sentence];
}

void check_token(const usrl::AnnotatedSentence& s, int token) {
  if (token < 1 || static_cast<std::size_t>(token) > s.size()) {
    throw usrl::Error(usrl::ErrorKind::invalid_argument, "token " + std::to_string(token) + " out of range");
  }
}

}  // namespace

extern "C" {

const char* usrl_version(void) { return usrl::kVersion; }

const char* usrl_status_string(usrl_status status) {
  switch (status) {
    case USRL_OK: return "ok";
    case USRL_INVALID_ARGUMENT: return "invalid argument";
    case USRL_IO: return "i/o error";
    case USRL_PARSE: return "parse error";
    case USRL_STRUCTURE: return "structure error";
    case USRL_NO_EVIDENCE: return "no evidence";
    case USRL_VERSION: return "version mismatch";
    case USRL_NUMERIC: return "numeric error";
    case USRL_CONFIG: return "configuration error";
    case USRL_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* usrl_last_error(void) { return last_error.c_str(); }

usrl_status usrl_corpus_read(const char* path, const char* column_mode, usrl_corpus** out) {
  return guarded([&] {
    require(path && column_mode && out, "NULL argument");
    auto c = std::make_unique<usrl_corpus>();
    c->corpus = usrl::read_conll09(path, usrl::parse_column_mode(column_mode));
    *out = c.release();
  });
}

usrl_status usrl_corpus_parse(const char* text, const char* column_mode, usrl_corpus** out) {
  return guarded([&] {
    require(text && column_mode && out, "NULL argument");
    auto c = std::make_unique<usrl_corpus>();
    c->corpus = usrl::parse_conll09(text, usrl::parse_column_mode(column_mode));
    *out = c.release();
  });
}

usrl_status usrl_corpus_write(const usrl_corpus* corpus, const char* path) {
  return guarded([&] {
    require(corpus && path, "NULL argument");
    usrl::write_conll09(path, corpus->corpus);
  });
}

void usrl_corpus_free(usrl_corpus* corpus) { delete corpus; }

size_t usrl_corpus_sentence_count(const usrl_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

usrl_status usrl_corpus_sentence_length(const usrl_corpus* corpus, size_t sentence, size_t* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = sentence_at(corpus, sentence).size();
  });
}

usrl_status usrl_corpus_predicates(const usrl_corpus* corpus, size_t sentence, int* out, size_t capacity,
                                   size_t* count) {
  return guarded([&] {
    const auto& s = sentence_at(corpus, sentence);
    require(count != nullptr, "count is NULL");
    *count = s.predicates.size();
    if (capacity == 0) return;
    require(out != nullptr, "out is NULL");
    require(capacity >= s.predicates.size(), "capacity too small");
    std::copy(s.predicates.begin(), s.predicates.end(), out);
  });
}

usrl_status usrl_corpus_token_depth(const usrl_corpus* corpus, size_t sentence, int token, int* out) {
  return guarded([&] {
    const auto& s = sentence_at(corpus, sentence);
    require(out != nullptr, "out is NULL");
    check_token(s, token);
    *out = usrl::DependencyTree(s).depth(token);
  });
}

usrl_status usrl_corpus_dep_label(const usrl_corpus* corpus, size_t sentence, int token, int predicate, char* buffer,
                                  size_t capacity, size_t* needed) {
  return guarded([&] {
    const auto& s = sentence_at(corpus, sentence);
    check_token(s, token);
    check_token(s, predicate);
    usrl::DependencyTree tree(s);
    copy_out(usrl::derive_dep_label(tree, s, token, predicate).str(), buffer, capacity, needed);
  });
}

usrl_status usrl_rules_read(const char* path, usrl_rules** out) {
  return guarded([&] {
    require(path && out, "NULL argument");
    auto r = std::make_unique<usrl_rules>();
    r->rules = usrl::read_rules(path);
    *out = r.release();
  });
}

usrl_status usrl_rules_write(const usrl_rules* rules, const char* path) {
  return guarded([&] {
    require(rules && path, "NULL argument");
    usrl::write_rules(path, rules->rules);
  });
}

usrl_status usrl_rules_mine(const usrl_corpus* corpus, const usrl_assignments* arguments, size_t pair_cap,
                            size_t tuple_cap, usrl_rules** out) {
  return guarded([&] {
    require(corpus && arguments && out, "NULL argument");
    auto r = std::make_unique<usrl_rules>();
    r->rules = usrl::mine_rules(corpus->corpus, arguments->assignments, pair_cap, tuple_cap);
    *out = r.release();
  });
}

void usrl_rules_free(usrl_rules* rules) { delete rules; }

size_t usrl_rules_pair_count(const usrl_rules* rules) { return rules ? rules->rules.pairs.size() : 0; }

size_t usrl_rules_tuple_count(const usrl_rules* rules) { return rules ? rules->rules.tuples.size() : 0; }

usrl_status usrl_silver_generate(const usrl_corpus* corpus, const usrl_rules* rules, int verbs_only,
                                 usrl_assignments** out) {
  return guarded([&] {
    require(corpus && rules && out, "NULL argument");
    auto a = std::make_unique<usrl_assignments>();
    a->assignments = usrl::generate_silver_corpus(corpus->corpus, rules->rules, verbs_only != 0);
    *out = a.release();
  });
}

usrl_status usrl_gold_assignments(const usrl_corpus* corpus, int verbs_only, usrl_assignments** out) {
  return guarded([&] {
    require(corpus && out, "NULL argument");
    auto a = std::make_unique<usrl_assignments>();
    a->assignments = usrl::gold_assignments(corpus->corpus, verbs_only != 0);
    *out = a.release();
  });
}

size_t usrl_assignments_count(const usrl_assignments* assignments) {
  return assignments ? assignments->assignments.size() : 0;
}

usrl_status usrl_assignments_get(const usrl_assignments* assignments, size_t index, size_t* sentence, int* predicate,
                                 int* arguments, size_t capacity, size_t* count) {
  return guarded([&] {
    require(assignments != nullptr, "assignments is NULL");
    require(index < assignments->assignments.size(), "index out of range");
    require(count != nullptr, "count is NULL");
    const auto& a = assignments->assignments[index];
    if (sentence) *sentence = a.sentence_id;
    if (predicate) *predicate = a.predicate_index;
    *count = a.arguments.size();
    if (capacity == 0) return;
    require(arguments != nullptr, "arguments is NULL");
    require(capacity >= a.arguments.size(), "capacity too small");
    std::copy(a.arguments.begin(), a.arguments.end(), arguments);
  });
}

usrl_status usrl_assignments_write_conll(const usrl_assignments* assignments, const usrl_corpus* corpus,
                                         const char* path) {
  return guarded([&] {
    require(assignments && corpus && path, "NULL argument");
    usrl::write_conll09(path, usrl::with_argument_columns(corpus->corpus, assignments->assignments));
  });
}

void usrl_assignments_free(usrl_assignments* assignments) { delete assignments; }

usrl_status usrl_score_identification(const usrl_assignments* predicted, const usrl_assignments* gold,
                                      usrl_identification_report* out) {
  return guarded([&] {
    require(predicted && gold && out, "NULL argument");
    auto r = usrl::score_identification(predicted->assignments, gold->assignments);
    *out = {r.tp, r.fp, r.fn, r.precision, r.recall, r.f1, r.precision_undefined ? 1 : 0, r.recall_undefined ? 1 : 0};
  });
}

usrl_status usrl_config_create(usrl_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new usrl_config();
  });
}

void usrl_config_free(usrl_config* config) { delete config; }

usrl_status usrl_config_load_file(usrl_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "NULL argument");
    config->config.load_file(path);
  });
}

usrl_status usrl_config_apply_env(usrl_config* config) {
  return guarded([&] {
    require(config != nullptr, "config is NULL");
    config->config.apply_env();
  });
}

usrl_status usrl_config_set(usrl_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "NULL argument");
    config->config.set(key, value);
  });
}

usrl_status usrl_config_get(const usrl_config* config, const char* key, char* buffer, size_t capacity,
                            size_t* needed) {
  return guarded([&] {
    require(config && key, "NULL argument");
    copy_out(config->config.get(key), buffer, capacity, needed);
  });
}

size_t usrl_config_key_count(void) { return usrl::Config::keys().size(); }

const char* usrl_config_key_name(size_t index) {
  const auto& keys = usrl::Config::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

const char* usrl_config_key_description(size_t index) {
  static thread_local std::string text;
  const auto& keys = usrl::Config::keys();
  if (index >= keys.size()) return nullptr;
  text = usrl::Config::description(keys[index]);
  return text.c_str();
}

usrl_status usrl_config_validate(const usrl_config* config, const char* subcommand) {
  return guarded([&] {
    require(config != nullptr, "config is NULL");
    config->config.validate(subcommand ? subcommand : "");
  });
}

size_t usrl_subcommand_count(void) { return usrl::subcommand_names().size(); }

const char* usrl_subcommand_name(size_t index) {
  const auto& names = usrl::subcommand_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

usrl_status usrl_run(const usrl_config* config, const char* subcommand, int quiet) {
  return guarded([&] {
    require(config && subcommand, "NULL argument");
    usrl::run_subcommand(config->config, subcommand, quiet ? nullptr : &std::cerr);
  });
}

}  // extern "C"
