#include "identifier.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace usrl {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::string to_string(LossForm form) { return form == LossForm::log ? "log" : "literal"; }

LossForm parse_loss_form(const std::string& text) {
  if (text == "log") return LossForm::log;
  if (text == "literal") return LossForm::literal;
  throw Error(ErrorKind::invalid_argument, "loss form must be log or literal, got '" + text + "'");
}

void FeatureConfig::validate() const {
  for (int d : {dim_word, dim_lemma, dim_char, dim_pos, dim_flag, char_embed, char_hidden, word_hidden, mlp_hidden}) {
    if (d < 1) throw Error(ErrorKind::invalid_argument, "feature dimensions must be >= 1");
  }
  if (dim_char != 2 * char_hidden) {
    throw Error(ErrorKind::invalid_argument, "dim_char must equal 2 * char_hidden (character BiLSTM output)");
  }
}

double ZetaSchedule::at(int epoch) const {
  if (epochs <= 1) return start;
  double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return start * std::pow(end / start, t);
}

void ZetaSchedule::validate() const {
  if (!(start > 0.0) || !(end >= start)) {
    throw Error(ErrorKind::invalid_argument, "zeta schedule needs 0 < start <= end");
  }
  if (epochs < 1) throw Error(ErrorKind::invalid_argument, "zeta schedule needs at least one epoch");
}

std::vector<ZetaSchedule> default_schedules(int epochs) {
  return {{0.09, 0.095, epochs}, {0.095, 0.1, epochs}, {0.1, 0.105, epochs}, {0.105, 0.11, epochs}};
}

Vocabulary::Vocabulary() { add("<unk>"); }

int Vocabulary::add(const std::string& item) {
  auto [it, inserted] = ids_.emplace(item, static_cast<int>(items_.size()));
  if (inserted) items_.push_back(item);
  return it->second;
}

int Vocabulary::lookup(const std::string& item) const {
  auto it = ids_.find(item);
  return it == ids_.end() ? 0 : it->second;
}

Vocabulary Vocabulary::from_items(const std::vector<std::string>& items) {
  Vocabulary v;
  for (std::size_t i = 1; i < items.size(); ++i) v.add(items[i]);
  return v;
}

namespace {

std::string lowercase(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

std::vector<std::string> utf8_characters(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, text.size() - i);
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocabularies build_vocabularies(const Corpus& corpus) {
  Vocabularies v;
  for (const auto& sentence : corpus) {
    for (const auto& t : sentence.tokens) {
      v.words.add(lowercase(t.form));
      v.lemmas.add(t.lemma);
      v.pos.add(t.pos);
      for (const auto& ch : utf8_characters(t.form)) v.chars.add(ch);
    }
  }
  return v;
}

std::vector<IdentificationExample> make_examples(const Corpus& corpus, const Assignments& assignments) {
  std::vector<IdentificationExample> out;
  out.reserve(assignments.size());
  for (const auto& a : assignments) {
    if (a.sentence_id >= corpus.size()) throw Error(ErrorKind::invalid_argument, "assignment sentence out of range");
    IdentificationExample ex;
    ex.sentence = &corpus[a.sentence_id];
    ex.sentence_id = a.sentence_id;
    ex.predicate = a.predicate_index;
    ex.labels.assign(ex.sentence->size(), 0);
    for (int arg : a.arguments) {
      if (arg != a.predicate_index) ex.labels.at(static_cast<std::size_t>(arg - 1)) = 1;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

IdentifierModel IdentifierModel::create(const FeatureConfig& config, Vocabularies vocab, std::uint64_t seed) {
  config.validate();
  IdentifierModel m;
  m.config_ = config;
  m.vocab_ = std::move(vocab);
  m.store_.seed = seed;
  nn::Rng rng(seed);
  auto& s = m.store_;
  nn::Embedding::create(s, "emb.word", static_cast<nn::Index>(m.vocab_.words.size()), config.dim_word, rng);
  nn::Embedding::create(s, "emb.lemma", static_cast<nn::Index>(m.vocab_.lemmas.size()), config.dim_lemma, rng);
  nn::Embedding::create(s, "emb.char", static_cast<nn::Index>(m.vocab_.chars.size()), config.char_embed, rng);
  nn::Embedding::create(s, "emb.pos", static_cast<nn::Index>(m.vocab_.pos.size()), config.dim_pos, rng);
  nn::Embedding::create(s, "emb.flag", 2, config.dim_flag, rng);
  nn::BiLstm::create(s, "char_lstm", config.char_embed, config.char_hidden, rng);
  nn::BiLstm::create(s, "word_lstm", config.input_dim(), config.word_hidden, rng);
  nn::Linear::create(s, "mlp", 2 * config.word_hidden, config.mlp_hidden, rng);
  nn::Linear::create(s, "main", config.mlp_hidden, 2, rng);
  nn::Linear::create(s, "adversarial", config.mlp_hidden, 2, rng);
  m.bind();
  return m;
}

void IdentifierModel::bind() {
  word_ = nn::Embedding::bind(store_, "emb.word");
  lemma_ = nn::Embedding::bind(store_, "emb.lemma");
  char_ = nn::Embedding::bind(store_, "emb.char");
  pos_ = nn::Embedding::bind(store_, "emb.pos");
  flag_ = nn::Embedding::bind(store_, "emb.flag");
  char_lstm_ = nn::BiLstm::bind(store_, "char_lstm");
  word_lstm_ = nn::BiLstm::bind(store_, "word_lstm");
  mlp_ = nn::Linear::bind(store_, "mlp");
  main_ = nn::Linear::bind(store_, "main");
  adversarial_ = nn::Linear::bind(store_, "adversarial");
}

void IdentifierModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["kind"] = "identifier";
  meta["config"] = {{"dim_word", config_.dim_word},       {"dim_lemma", config_.dim_lemma},
                    {"dim_char", config_.dim_char},       {"dim_pos", config_.dim_pos},
                    {"dim_flag", config_.dim_flag},       {"char_embed", config_.char_embed},
                    {"char_hidden", config_.char_hidden}, {"word_hidden", config_.word_hidden},
                    {"mlp_hidden", config_.mlp_hidden}};
  meta["vocab"] = {{"words", vocab_.words.items()},
                   {"lemmas", vocab_.lemmas.items()},
                   {"pos", vocab_.pos.items()},
                   {"chars", vocab_.chars.items()}};
  nn::save_checkpoint(path, store_, meta.dump());
}

IdentifierModel IdentifierModel::load(const std::filesystem::path& path) {
  std::string text;
  IdentifierModel m;
  m.store_ = nn::load_checkpoint(path, &text);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": bad checkpoint metadata: " + e.what());
  }
  if (meta.value("kind", "") != "identifier") throw Error(ErrorKind::parse, path.string() + " is not an identifier checkpoint");
  const auto& c = meta["config"];
  m.config_.dim_word = c.at("dim_word");
  m.config_.dim_lemma = c.at("dim_lemma");
  m.config_.dim_char = c.at("dim_char");
  m.config_.dim_pos = c.at("dim_pos");
  m.config_.dim_flag = c.at("dim_flag");
  m.config_.char_embed = c.at("char_embed");
  m.config_.char_hidden = c.at("char_hidden");
  m.config_.word_hidden = c.at("word_hidden");
  m.config_.mlp_hidden = c.at("mlp_hidden");
  const auto& v = meta["vocab"];
  m.vocab_.words = Vocabulary::from_items(v.at("words").get<std::vector<std::string>>());
  m.vocab_.lemmas = Vocabulary::from_items(v.at("lemmas").get<std::vector<std::string>>());
  m.vocab_.pos = Vocabulary::from_items(v.at("pos").get<std::vector<std::string>>());
  m.vocab_.chars = Vocabulary::from_items(v.at("chars").get<std::vector<std::string>>());
  m.bind();
  return m;
}

std::vector<Var> IdentifierModel::encode_tokens(Graph& g, const AnnotatedSentence& sentence, int predicate) const {
  if (predicate < 1 || predicate > static_cast<int>(sentence.size())) {
    throw Error(ErrorKind::invalid_argument, "predicate index " + std::to_string(predicate) + " out of range");
  }
  std::vector<Var> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence.tokens) {
    std::vector<Var> chars;
    for (const auto& ch : utf8_characters(t.form)) chars.push_back(char_(g, vocab_.chars.lookup(ch)));
    if (chars.empty()) chars.push_back(char_(g, 0));
    Var parts[5] = {word_(g, vocab_.words.lookup(lowercase(t.form))), lemma_(g, vocab_.lemmas.lookup(t.lemma)),
                    char_lstm_.final_states(g, chars), pos_(g, vocab_.pos.lookup(t.pos)),
                    flag_(g, t.index == predicate ? 1 : 0)};
    out.push_back(g.concat(parts));
  }
  return out;
}

IdentifierModel::Outputs IdentifierModel::forward(Graph& g, std::span<const Var> features) const {
  auto states = word_lstm_(g, features);
  Var stacked = g.concat_cols(states);
  Var hidden = g.tanh(mlp_(g, stacked));
  return {main_(g, hidden), adversarial_(g, hidden)};
}

std::vector<double> IdentifierModel::positive_probabilities(const AnnotatedSentence& sentence, int predicate) const {
  Graph g;
  auto features = encode_tokens(g, sentence, predicate);
  auto outputs = forward(g, features);
  const Tensor& p = g.value(g.softmax(outputs.main_logits));
  std::vector<double> out(static_cast<std::size_t>(p.cols()));
  for (nn::Index t = 0; t < p.cols(); ++t) out[static_cast<std::size_t>(t)] = p(1, t);
  return out;
}

LossTerms identification_loss(Graph& g, const IdentifierModel& model, std::span<const IdentificationExample> examples,
                              double zeta, bool adversarial, LossForm form, double normalizer) {
  if (zeta < 0.0) throw Error(ErrorKind::invalid_argument, "zeta must be non-negative");
  if (examples.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
  if (!(normalizer > 0.0)) throw Error(ErrorKind::invalid_argument, "loss normaliser must be positive");
  std::vector<Var> main_terms, adv_terms;
  for (const auto& ex : examples) {
    auto features = model.encode_tokens(g, *ex.sentence, ex.predicate);
    auto out = model.forward(g, features);
    const auto n = static_cast<nn::Index>(ex.labels.size());
    Tensor target = Tensor::Zero(2, n);
    Tensor opposite = Tensor::Zero(2, n);
    for (nn::Index t = 0; t < n; ++t) {
      int y = ex.labels[static_cast<std::size_t>(t)];
      target(y, t) = 1.0;
      opposite(1 - y, t) = 1.0;
    }
    // Picking the labelled entries via a one-hot mask: sum_t q[y_t, t].
    auto score = [&](Var logits, const Tensor& mask) {
      Var q = form == LossForm::log ? g.log_softmax(logits) : g.softmax(logits);
      return g.dot(q, g.constant(mask));
    };
    main_terms.push_back(score(out.main_logits, target));
    if (adversarial) adv_terms.push_back(score(out.adv_logits, opposite));
  }
  LossTerms terms;
  terms.main_sum = g.scale(g.add_n(main_terms), -1.0);
  Var main_part = g.scale(terms.main_sum, 1.0 / normalizer);
  if (adversarial) {
    terms.adv_sum = g.scale(g.add_n(adv_terms), -1.0);
    Var parts[2] = {main_part, g.scale(terms.adv_sum, zeta / normalizer)};
    terms.total = g.add_n(parts);
  } else {
    terms.adv_sum = g.constant(Tensor::Zero(1, 1));
    terms.total = main_part;
  }
  return terms;
}

TrainedIdentifier train_identifier(const Corpus& corpus, const Assignments& silver, const FeatureConfig& config,
                                   const IdentifierTrainOptions& options, const DevScorer& dev) {
  options.schedule.validate();
  if (options.batch < 1) throw Error(ErrorKind::invalid_argument, "batch size must be >= 1");
  auto examples = make_examples(corpus, silver);
  if (examples.empty()) throw Error(ErrorKind::invalid_argument, "empty training set");

  TrainedIdentifier result{IdentifierModel::create(config, build_vocabularies(corpus), nn::derive_seed(options.seed, 0)),
                           {}};
  auto& model = result.model;
  nn::Rng rng(nn::derive_seed(options.seed, 1));
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const nn::AdagradOptions adagrad{options.learning_rate, options.l2, 1e-8};

  for (int epoch = 0; epoch < options.schedule.epochs; ++epoch) {
    const double zeta = options.schedule.at(epoch);
    rng.shuffle(order);
    double main_total = 0.0, adv_total = 0.0, tokens_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(options.batch));
      double tokens = 0.0;
      for (std::size_t i = begin; i < end; ++i) tokens += static_cast<double>(examples[order[i]].labels.size());
      model.store().zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        Graph g;
        auto terms = identification_loss(g, model, std::span(&examples[order[i]], 1), zeta, options.adversarial,
                                         options.loss_form, tokens);
        g.backward(terms.total);
        main_total += g.scalar(terms.main_sum);
        adv_total += g.scalar(terms.adv_sum);
      }
      tokens_total += tokens;
      nn::adagrad_step(model.store(), adagrad);
    }
    model.store().zero_grad();
    EpochTrace trace;
    trace.epoch = epoch + 1;
    trace.zeta = zeta;
    trace.main_loss = main_total / tokens_total;
    trace.adv_loss = adv_total / tokens_total;
    if (dev) trace.dev_f1 = dev(model);
    result.trace.push_back(trace);
  }
  return result;
}

ArgumentAssignment ensemble_predict(std::span<const IdentifierModel* const> models, const AnnotatedSentence& sentence,
                                    std::size_t sentence_id, int predicate, double threshold) {
  if (models.empty()) throw Error(ErrorKind::invalid_argument, "ensemble needs at least one model");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::invalid_argument, "threshold must lie in (0, 1)");
  std::vector<double> mean(sentence.size(), 0.0);
  for (const auto* m : models) {
    auto p = m->positive_probabilities(sentence, predicate);
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  ArgumentAssignment out;
  out.sentence_id = sentence_id;
  out.predicate_index = predicate;
  out.label_kind = LabelKind::predicted;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    int token = static_cast<int>(i) + 1;
    if (token == predicate) continue;
    if (mean[i] / static_cast<double>(models.size()) >= threshold) out.arguments.insert(token);
  }
  return out;
}

Assignments ensemble_predict_corpus(std::span<const IdentifierModel* const> models, const Corpus& corpus,
                                    bool verbs_only, double threshold) {
  Assignments out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (int p : selected_predicates(corpus[s], verbs_only)) {
      out.push_back(ensemble_predict(models, corpus[s], s, p, threshold));
    }
  }
  return out;
}

std::string format_trace_csv(const std::vector<EpochTrace>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,zeta,main_loss,adv_loss,dev_f1\n";
  for (const auto& t : trace) {
    out << t.epoch << ',' << t.zeta << ',' << t.main_loss << ',' << t.adv_loss << ',';
    if (t.dev_f1) out << *t.dev_f1;
    out << '\n';
  }
  return out.str();
}

}  // namespace usrl
