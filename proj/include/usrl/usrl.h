/* C interface of the usrl library: opaque handles, status codes, thread-local error text. */
#ifndef USRL_USRL_H
#define USRL_USRL_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(USRL_BUILDING_LIBRARY)
#    define USRL_API __declspec(dllexport)
#  else
#    define USRL_API __declspec(dllimport)
#  endif
#else
#  define USRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum usrl_status {
  USRL_OK = 0,
  USRL_INVALID_ARGUMENT = 1,
  USRL_IO = 2,
  USRL_PARSE = 3,
  USRL_STRUCTURE = 4,
  USRL_NO_EVIDENCE = 5,
  USRL_VERSION = 6,
  USRL_NUMERIC = 7,
  USRL_CONFIG = 8,
  USRL_INTERNAL = 9
} usrl_status;

typedef struct usrl_corpus usrl_corpus;
typedef struct usrl_rules usrl_rules;
typedef struct usrl_assignments usrl_assignments;
typedef struct usrl_config usrl_config;

typedef struct usrl_identification_report {
  size_t tp;
  size_t fp;
  size_t fn;
  double precision;
  double recall;
  double f1;
  int precision_undefined;
  int recall_undefined;
} usrl_identification_report;

USRL_API const char* usrl_version(void);
USRL_API const char* usrl_status_string(usrl_status status);
/* Message of the last failed call on this thread; "" after a successful call. */
USRL_API const char* usrl_last_error(void);

/* String outputs: the text plus terminator is copied when it fits in `capacity`; `needed` (may be
   NULL) receives strlen + 1. A too-small buffer yields USRL_INVALID_ARGUMENT. */

/* Corpora. column_mode is "gold" or "auto". */
USRL_API usrl_status usrl_corpus_read(const char* path, const char* column_mode, usrl_corpus** out);
USRL_API usrl_status usrl_corpus_parse(const char* text, const char* column_mode, usrl_corpus** out);
USRL_API usrl_status usrl_corpus_write(const usrl_corpus* corpus, const char* path);
USRL_API void usrl_corpus_free(usrl_corpus* corpus);
USRL_API size_t usrl_corpus_sentence_count(const usrl_corpus* corpus);
USRL_API usrl_status usrl_corpus_sentence_length(const usrl_corpus* corpus, size_t sentence, size_t* out);
USRL_API usrl_status usrl_corpus_predicates(const usrl_corpus* corpus, size_t sentence, int* out, size_t capacity,
                                            size_t* count);
USRL_API usrl_status usrl_corpus_token_depth(const usrl_corpus* corpus, size_t sentence, int token, int* out);
/* First dependency edge from `token` toward `predicate`, e.g. "SBJ^-1". */
USRL_API usrl_status usrl_corpus_dep_label(const usrl_corpus* corpus, size_t sentence, int token, int predicate,
                                           char* buffer, size_t capacity, size_t* needed);

/* Rule sets. */
USRL_API usrl_status usrl_rules_read(const char* path, usrl_rules** out);
USRL_API usrl_status usrl_rules_write(const usrl_rules* rules, const char* path);
USRL_API usrl_status usrl_rules_mine(const usrl_corpus* corpus, const usrl_assignments* arguments, size_t pair_cap,
                                     size_t tuple_cap, usrl_rules** out);
USRL_API void usrl_rules_free(usrl_rules* rules);
USRL_API size_t usrl_rules_pair_count(const usrl_rules* rules);
USRL_API size_t usrl_rules_tuple_count(const usrl_rules* rules);

/* Argument assignments, one entry per (sentence, predicate). */
USRL_API usrl_status usrl_silver_generate(const usrl_corpus* corpus, const usrl_rules* rules, int verbs_only,
                                          usrl_assignments** out);
USRL_API usrl_status usrl_gold_assignments(const usrl_corpus* corpus, int verbs_only, usrl_assignments** out);
USRL_API size_t usrl_assignments_count(const usrl_assignments* assignments);
USRL_API usrl_status usrl_assignments_get(const usrl_assignments* assignments, size_t index, size_t* sentence,
                                          int* predicate, int* arguments, size_t capacity, size_t* count);
/* Writes `corpus` with its argument columns replaced by the assignments ("ARG" / "_"). */
USRL_API usrl_status usrl_assignments_write_conll(const usrl_assignments* assignments, const usrl_corpus* corpus,
                                                  const char* path);
USRL_API void usrl_assignments_free(usrl_assignments* assignments);

USRL_API usrl_status usrl_score_identification(const usrl_assignments* predicted, const usrl_assignments* gold,
                                               usrl_identification_report* out);

/* Pipeline configuration: defaults < file < environment (USRL_<KEY>) < usrl_config_set. */
USRL_API usrl_status usrl_config_create(usrl_config** out);
USRL_API void usrl_config_free(usrl_config* config);
USRL_API usrl_status usrl_config_load_file(usrl_config* config, const char* path);
USRL_API usrl_status usrl_config_apply_env(usrl_config* config);
USRL_API usrl_status usrl_config_set(usrl_config* config, const char* key, const char* value);
USRL_API usrl_status usrl_config_get(const usrl_config* config, const char* key, char* buffer, size_t capacity,
                                     size_t* needed);
USRL_API size_t usrl_config_key_count(void);
USRL_API const char* usrl_config_key_name(size_t index);
USRL_API const char* usrl_config_key_description(size_t index);
/* "" validates values only; a subcommand name also checks its input paths. Every problem is listed
   in usrl_last_error. */
USRL_API usrl_status usrl_config_validate(const usrl_config* config, const char* subcommand);

/* Subcommands: mine-rules, silver, train-identify, predict-identify, train-autoencoder, train-roles,
   cluster, baseline-synfunc, evaluate, pipeline. Progress goes to stderr unless quiet. */
USRL_API size_t usrl_subcommand_count(void);
USRL_API const char* usrl_subcommand_name(size_t index);
USRL_API usrl_status usrl_run(const usrl_config* config, const char* subcommand, int quiet);

#ifdef __cplusplus
}
#endif

#endif
