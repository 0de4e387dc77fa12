#include "roleinduction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace usrl {

using nn::Graph;
using nn::Index;
using nn::Tensor;
using nn::Var;

namespace {

std::string lowercase(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Dependency labels and instances

DepLabel DepLabel::parse(const std::string& text) {
  const std::string suffix = "^-1";
  if (text.size() > suffix.size() && text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return {text.substr(0, text.size() - suffix.size()), true};
  }
  return {text, false};
}

DepLabel derive_dep_label(const DependencyTree& tree, const AnnotatedSentence& sentence, int token, int predicate) {
  if (token == predicate) return DepLabel::self();
  auto path = tree.path(token, predicate);
  const int next = path.at(1);
  const bool upward = next == tree.parent(token);
  DepLabel label;
  label.relation = upward ? sentence.token(token).deprel : sentence.token(next).deprel;
  label.inverse = !tree.dominates(predicate, token);
  return label;
}

std::vector<ArgInstance> build_instances(const Corpus& corpus, const Assignments& assignments, int window) {
  if (window < 0) throw Error(ErrorKind::invalid_argument, "window must be >= 0");
  std::vector<ArgInstance> out;
  for (std::size_t occ = 0; occ < assignments.size(); ++occ) {
    const auto& a = assignments[occ];
    if (a.sentence_id >= corpus.size()) throw Error(ErrorKind::invalid_argument, "assignment sentence out of range");
    const auto& sentence = corpus[a.sentence_id];
    DependencyTree tree(sentence);
    const int n = static_cast<int>(sentence.size());
    for (int arg : a.arguments) {
      if (arg == a.predicate_index) continue;
      ArgInstance inst;
      inst.sentence_id = a.sentence_id;
      inst.predicate_occurrence_id = occ;
      inst.predicate_index = a.predicate_index;
      inst.predicate_lexeme = sentence.token(a.predicate_index).lemma;
      inst.arg_token = arg;
      inst.arg_form = lowercase(sentence.token(arg).form);
      inst.dep_label = derive_dep_label(tree, sentence, arg, a.predicate_index);
      for (int i = std::max(1, arg - window); i <= std::min(n, arg + window); ++i) {
        if (i == arg || i == a.predicate_index) continue;
        inst.context.push_back(i);
        inst.context_labels.push_back(derive_dep_label(tree, sentence, i, a.predicate_index));
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Embedding source

EmbeddingSource EmbeddingSource::random(int dim, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorKind::invalid_argument, "embedding dimension must be >= 1");
  EmbeddingSource s;
  s.mode_ = Mode::random;
  s.dim_ = dim;
  s.seed_ = seed;
  return s;
}

EmbeddingSource EmbeddingSource::parse(const std::string& text, const std::string& origin) {
  EmbeddingSource s;
  s.mode_ = Mode::file;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::parse, origin + ": line " + std::to_string(line_number) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (s.dim_ == 0) {
      std::string tag;
      int dim = 0;
      if (!(fields >> tag >> dim) || tag != "DIM" || dim < 1) throw fail("expected 'DIM d' header");
      s.dim_ = dim;
      continue;
    }
    std::size_t sid = 0;
    int token = 0;
    if (!(fields >> sid >> token)) throw fail("expected sentence_id and token_index");
    Vector v(s.dim_);
    for (int k = 0; k < s.dim_; ++k) {
      if (!(fields >> v(k))) throw fail("expected " + std::to_string(s.dim_) + " values");
    }
    std::string extra;
    if (fields >> extra) throw fail("more than " + std::to_string(s.dim_) + " values");
    if (!v.allFinite()) throw fail("non-finite value");
    s.vectors_[{sid, token}] = std::move(v);
  }
  if (s.dim_ == 0) throw Error(ErrorKind::parse, origin + ": missing DIM header");
  return s;
}

EmbeddingSource EmbeddingSource::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::optional<Vector> EmbeddingSource::lookup(std::size_t sentence_id, int token, const std::string& form) const {
  if (mode_ == Mode::file) {
    auto it = vectors_.find({sentence_id, token});
    if (it == vectors_.end()) return std::nullopt;
    return it->second;
  }
  nn::Rng rng(nn::derive_seed(seed_, fnv1a(lowercase(form))));
  Vector v(dim_);
  for (int k = 0; k < dim_; ++k) v(k) = rng.normal(0.0, 1.0);
  return v;
}

// ---------------------------------------------------------------------------------------------
// Autoencoder

Autoencoder Autoencoder::create(int input_dim, const AutoencoderConfig& config, std::uint64_t seed) {
  if (input_dim < 1 || config.bottleneck < 1) throw Error(ErrorKind::invalid_argument, "autoencoder sizes must be >= 1");
  Autoencoder ae;
  ae.sizes_.push_back(input_dim);
  for (int h : config.hidden) {
    if (h < 1) throw Error(ErrorKind::invalid_argument, "autoencoder sizes must be >= 1");
    ae.sizes_.push_back(h);
  }
  ae.sizes_.push_back(config.bottleneck);
  ae.store_.seed = seed;
  nn::Rng rng(seed);
  const std::size_t layers = ae.sizes_.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    nn::Linear::create(ae.store_, "enc" + std::to_string(i + 1), ae.sizes_[i], ae.sizes_[i + 1], rng);
  }
  for (std::size_t i = layers; i-- > 0;) {
    nn::Linear::create(ae.store_, "dec" + std::to_string(i + 1), ae.sizes_[i + 1], ae.sizes_[i], rng);
  }
  ae.bind();
  return ae;
}

void Autoencoder::bind() {
  encoder_.clear();
  decoder_.clear();
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) encoder_.push_back(nn::Linear::bind(store_, "enc" + std::to_string(i + 1)));
  for (std::size_t i = layers; i-- > 0;) decoder_.push_back(nn::Linear::bind(store_, "dec" + std::to_string(i + 1)));
}

void Autoencoder::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["kind"] = "autoencoder";
  meta["sizes"] = sizes_;
  nn::save_checkpoint(path, store_, meta.dump());
}

Autoencoder Autoencoder::load(const std::filesystem::path& path) {
  std::string text;
  Autoencoder ae;
  ae.store_ = nn::load_checkpoint(path, &text);
  auto meta = nlohmann::json::parse(text, nullptr, false);
  if (meta.is_discarded() || meta.value("kind", "") != "autoencoder") {
    throw Error(ErrorKind::parse, path.string() + " is not an autoencoder checkpoint");
  }
  ae.sizes_ = meta.at("sizes").get<std::vector<int>>();
  ae.bind();
  return ae;
}

Var Autoencoder::encode(Graph& g, Var x) const {
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    x = encoder_[i](g, x);
    if (i + 1 < encoder_.size()) x = g.relu(x);
  }
  return x;
}

Var Autoencoder::reconstruct(Graph& g, Var x) const {
  x = encode(g, x);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    x = decoder_[i](g, x);
    if (i + 1 < decoder_.size()) x = g.relu(x);
  }
  return x;
}

Vector Autoencoder::encode(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw Error(ErrorKind::invalid_argument, "autoencoder input has dimension " + std::to_string(x.size()) +
                                                 ", expected " + std::to_string(input_dim()));
  }
  Graph g;
  return g.value(encode(g, g.constant(x))).col(0);
}

Var Autoencoder::loss(Graph& g, const Tensor& batch) const {
  if (batch.rows() != input_dim()) throw Error(ErrorKind::invalid_argument, "autoencoder batch dimension mismatch");
  Var x = g.constant(batch);
  Var diff = g.sub(reconstruct(g, x), x);
  return g.scale(g.sum(g.cmul(diff, diff)), 1.0 / static_cast<double>(batch.cols()));
}

AutoencoderTraining train_autoencoder(const std::vector<Vector>& vectors, const AutoencoderConfig& config,
                                      std::uint64_t seed) {
  if (vectors.empty()) throw Error(ErrorKind::invalid_argument, "no vectors to train the autoencoder on");
  const auto dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(ErrorKind::invalid_argument, "autoencoder inputs have mixed dimensions");
  }
  if (config.epochs < 1 || config.batch < 1) throw Error(ErrorKind::invalid_argument, "epochs and batch must be >= 1");
  AutoencoderTraining result{Autoencoder::create(static_cast<int>(dim), config, nn::derive_seed(seed, 0)), {}};
  auto& ae = result.model;
  nn::Rng rng(nn::derive_seed(seed, 1));
  std::vector<std::size_t> order(vectors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const nn::AdagradOptions adagrad{config.learning_rate, config.l2, 1e-8};
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch));
      Tensor batch(dim, static_cast<Index>(end - begin));
      for (std::size_t i = begin; i < end; ++i) batch.col(static_cast<Index>(i - begin)) = vectors[order[i]];
      ae.store().zero_grad();
      Graph g;
      Var l = ae.loss(g, batch);
      g.backward(l);
      total += g.scalar(l) * static_cast<double>(end - begin);
      nn::adagrad_step(ae.store(), adagrad);
    }
    ae.store().zero_grad();
    result.epoch_loss.push_back(total / static_cast<double>(vectors.size()));
  }
  return result;
}

EncodedTokens encode_tokens_for(const Corpus& corpus, const std::vector<ArgInstance>& instances,
                                const EmbeddingSource& source, const Autoencoder* autoencoder) {
  if (autoencoder && autoencoder->input_dim() != source.dim()) {
    throw Error(ErrorKind::invalid_argument, "autoencoder expects dimension " + std::to_string(autoencoder->input_dim()) +
                                                 " but the embedding source has " + std::to_string(source.dim()));
  }
  EncodedTokens out;
  out.dim = autoencoder ? autoencoder->output_dim() : source.dim();
  out.unk = autoencoder ? autoencoder->encode(Vector::Zero(source.dim())) : Vector::Zero(source.dim());
  std::set<std::pair<std::size_t, int>> needed;
  for (const auto& inst : instances) {
    needed.insert({inst.sentence_id, inst.arg_token});
    needed.insert({inst.sentence_id, inst.predicate_index});
    for (int c : inst.context) needed.insert({inst.sentence_id, c});
  }
  for (const auto& [sid, token] : needed) {
    auto v = source.lookup(sid, token, corpus.at(sid).token(token).form);
    if (!v) continue;
    out.vectors[{sid, token}] = autoencoder ? autoencoder->encode(*v) : *v;
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Role model

std::string to_string(Scoring scoring) { return scoring == Scoring::composed ? "composed" : "plain"; }

Scoring parse_scoring(const std::string& text) {
  if (text == "composed") return Scoring::composed;
  if (text == "plain") return Scoring::plain;
  throw Error(ErrorKind::invalid_argument, "scoring must be composed or plain, got '" + text + "'");
}

RoleModel RoleModel::create(const std::vector<ArgInstance>& instances, const EncodedTokens& tokens, Scoring scoring,
                            std::uint64_t seed) {
  if (instances.empty()) throw Error(ErrorKind::invalid_argument, "no argument instances");
  RoleModel m;
  m.dim_ = tokens.dim;
  m.scoring_ = scoring;
  m.store_.seed = seed;
  const Index d = tokens.dim;
  auto initial = [&](std::size_t sid, int token) -> const Vector& {
    auto it = tokens.vectors.find({sid, token});
    return it == tokens.vectors.end() ? tokens.unk : it->second;
  };

  // Context rows: row 0 is the shared UNK row for uncovered tokens.
  std::map<std::pair<std::size_t, int>, Index> ctx_rows;
  std::vector<const Vector*> ctx_init = {&tokens.unk};
  auto ctx_row = [&](std::size_t sid, int token) -> Index {
    auto key = std::make_pair(sid, token);
    if (!tokens.vectors.count(key)) return 0;
    auto [it, inserted] = ctx_rows.emplace(key, static_cast<Index>(ctx_init.size()));
    if (inserted) ctx_init.push_back(&tokens.vectors.at(key));
    return it->second;
  };

  std::map<std::string, std::pair<Vector, long>> types;  // form -> (sum of vectors, count)
  std::set<std::string> target_labels, context_labels;
  Tensor args(static_cast<Index>(instances.size()), d);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const Vector& v = initial(inst.sentence_id, inst.arg_token);
    args.row(static_cast<Index>(i)) = v.transpose();
    auto& type = types[inst.arg_form];
    if (type.second == 0) type.first = Vector::Zero(d);
    type.first += v;
    ++type.second;
    m.instance_keys_.emplace_back(inst.sentence_id, inst.predicate_index, inst.arg_token);
    m.instance_labels_.push_back(inst.dep_label.str());
    target_labels.insert(inst.dep_label.str());
    m.predicate_rows_.push_back(ctx_row(inst.sentence_id, inst.predicate_index));
    std::vector<ContextRef> refs;
    for (std::size_t k = 0; k < inst.context.size(); ++k) {
      refs.push_back({ctx_row(inst.sentence_id, inst.context[k]), inst.context_labels[k].str()});
      if (inst.context_labels[k] != DepLabel::self()) context_labels.insert(inst.context_labels[k].str());
    }
    m.instance_contexts_.push_back(std::move(refs));
  }
  Tensor ctx(static_cast<Index>(ctx_init.size()), d);
  for (std::size_t r = 0; r < ctx_init.size(); ++r) ctx.row(static_cast<Index>(r)) = ctx_init[r]->transpose();
  Tensor neg(static_cast<Index>(types.size()), d);
  std::vector<long> counts;
  Index r = 0;
  for (const auto& [form, type] : types) {
    neg.row(r++) = (type.first / static_cast<double>(type.second)).transpose();
    counts.push_back(type.second);
  }

  m.store_.add("arg", std::move(args), true);
  m.store_.add("ctx", std::move(ctx), true);
  m.store_.add("neg", std::move(neg), true);
  // Label transforms start at the identity.
  for (const auto& label : target_labels) m.store_.add("D." + label, Tensor::Identity(d, d));
  for (const auto& label : context_labels) m.store_.add("E." + label, Tensor::Identity(d, d));
  double total = 0.0;
  for (long c : counts) {
    total += std::pow(static_cast<double>(c), 0.75);
    m.negative_cdf_.push_back(total);
  }
  for (auto& c : m.negative_cdf_) c /= total;
  m.bind();
  return m;
}

void RoleModel::bind() {
  args_ = nn::Embedding::bind(store_, "arg");
  ctx_ = nn::Embedding::bind(store_, "ctx");
  neg_ = nn::Embedding::bind(store_, "neg");
  target_.clear();
  context_.clear();
  for (auto& p : store_) {
    if (p->name.rfind("D.", 0) == 0) target_[p->name.substr(2)] = p.get();
    if (p->name.rfind("E.", 0) == 0) context_[p->name.substr(2)] = p.get();
  }
}

void RoleModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["kind"] = "roles";
  meta["dim"] = dim_;
  meta["scoring"] = to_string(scoring_);
  meta["instances"] = instance_keys_;
  meta["labels"] = instance_labels_;
  meta["predicate_rows"] = predicate_rows_;
  nlohmann::json contexts = nlohmann::json::array();
  for (const auto& refs : instance_contexts_) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& ref : refs) list.push_back({ref.row, ref.label});
    contexts.push_back(list);
  }
  meta["contexts"] = contexts;
  meta["negative_cdf"] = negative_cdf_;
  nn::save_checkpoint(path, store_, meta.dump());
}

RoleModel RoleModel::load(const std::filesystem::path& path) {
  std::string text;
  RoleModel m;
  m.store_ = nn::load_checkpoint(path, &text);
  auto meta = nlohmann::json::parse(text, nullptr, false);
  if (meta.is_discarded() || meta.value("kind", "") != "roles") {
    throw Error(ErrorKind::parse, path.string() + " is not a role-model checkpoint");
  }
  m.dim_ = meta.at("dim");
  m.scoring_ = parse_scoring(meta.at("scoring"));
  m.instance_keys_ = meta.at("instances").get<std::vector<std::tuple<std::size_t, int, int>>>();
  m.instance_labels_ = meta.at("labels").get<std::vector<std::string>>();
  m.predicate_rows_ = meta.at("predicate_rows").get<std::vector<Index>>();
  for (const auto& list : meta.at("contexts")) {
    std::vector<ContextRef> refs;
    for (const auto& ref : list) refs.push_back({ref.at(0).get<Index>(), ref.at(1).get<std::string>()});
    m.instance_contexts_.push_back(std::move(refs));
  }
  m.negative_cdf_ = meta.at("negative_cdf").get<std::vector<double>>();
  m.bind();
  return m;
}

std::vector<RoleModel::ContextRef> RoleModel::contexts(std::size_t instance, bool predicate_context) const {
  std::vector<ContextRef> out;
  if (predicate_context) out.push_back({predicate_rows_.at(instance), DepLabel::self().str()});
  const auto& window = instance_contexts_.at(instance);
  out.insert(out.end(), window.begin(), window.end());
  return out;
}

Var RoleModel::context_side(Graph& g, Var u, const std::string& label) const {
  auto it = context_.find(label);
  if (it == context_.end()) return g.tanh(u);  // predicate (E_p = I) or unseen label
  return g.tanh(g.matmul(g.param(*it->second), u));
}

Var RoleModel::pair_score(Graph& g, std::size_t instance, const ContextRef& context) const {
  Var v = args_(g, static_cast<Index>(instance));
  Var u = ctx_(g, context.row);
  if (scoring_ == Scoring::plain) return g.dot(u, v);
  auto it = target_.find(instance_labels_.at(instance));
  Var target = it == target_.end() ? g.tanh(v) : g.tanh(g.matmul(g.param(*it->second), v));
  return g.dot(target, context_side(g, u, context.label));
}

Var RoleModel::negative_score(Graph& g, std::size_t instance, Index negative_row) const {
  Var v = args_(g, static_cast<Index>(instance));
  Var e = neg_(g, negative_row);
  if (scoring_ == Scoring::plain) return g.dot(e, v);
  auto it = target_.find(instance_labels_.at(instance));
  Var target = it == target_.end() ? g.tanh(v) : g.tanh(g.matmul(g.param(*it->second), v));
  return g.dot(target, g.tanh(e));
}

Var RoleModel::objective(Graph& g, std::size_t instance, const std::vector<ContextRef>& contexts,
                         const std::vector<std::vector<Index>>& negatives) const {
  if (contexts.empty()) throw Error(ErrorKind::invalid_argument, "objective needs at least one context");
  if (negatives.size() != contexts.size()) throw Error(ErrorKind::invalid_argument, "one negative list per context");
  Var v = args_(g, static_cast<Index>(instance));
  Var target = v;
  if (scoring_ == Scoring::composed) {
    auto it = target_.find(instance_labels_.at(instance));
    target = it == target_.end() ? g.tanh(v) : g.tanh(g.matmul(g.param(*it->second), v));
  }
  std::vector<Var> terms;
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    Var u = ctx_(g, contexts[k].row);
    Var side = scoring_ == Scoring::composed ? context_side(g, u, contexts[k].label) : u;
    terms.push_back(g.log_sigmoid(g.dot(target, side)));
    for (Index row : negatives[k]) {
      Var e = neg_(g, row);
      Var neg_side = scoring_ == Scoring::composed ? g.tanh(e) : e;
      terms.push_back(g.log_sigmoid(g.scale(g.dot(target, neg_side), -1.0)));
    }
  }
  return g.scale(g.add_n(terms), -1.0);
}

Index RoleModel::sample_negative(nn::Rng& rng) const {
  double u = rng.uniform();
  auto it = std::upper_bound(negative_cdf_.begin(), negative_cdf_.end(), u);
  if (it == negative_cdf_.end()) --it;
  return static_cast<Index>(it - negative_cdf_.begin());
}

Vector RoleModel::argument_vector(std::size_t instance) const {
  return args_.table().value.row(static_cast<Index>(instance)).transpose();
}

Tensor RoleModel::context_transform(const std::string& label) const {
  auto it = context_.find(label);
  return it == context_.end() ? Tensor::Identity(dim_, dim_) : it->second->value;
}

Tensor RoleModel::target_transform(const std::string& label) const {
  auto it = target_.find(label);
  return it == target_.end() ? Tensor::Identity(dim_, dim_) : it->second->value;
}

RoleTraining train_role_embeddings(const std::vector<ArgInstance>& instances, const EncodedTokens& tokens,
                                   const RoleTrainOptions& options) {
  if (options.negatives < 0 || options.epochs < 1 || options.batch < 1) {
    throw Error(ErrorKind::invalid_argument, "role training needs negatives >= 0, epochs >= 1, batch >= 1");
  }
  RoleTraining result{RoleModel::create(instances, tokens, options.scoring, nn::derive_seed(options.seed, 0)), {}, 0};
  auto& model = result.model;
  nn::Rng rng(nn::derive_seed(options.seed, 1));
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<bool> skipped(instances.size(), false);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (model.contexts(i, options.predicate_context).empty()) {
      skipped[i] = true;
      ++result.skipped;
    }
  }
  const nn::AdagradOptions adagrad{options.learning_rate, options.l2, 1e-8};
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(options.batch));
      model.store().zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t inst = order[i];
        if (skipped[inst]) continue;
        auto ctx = model.contexts(inst, options.predicate_context);
        std::vector<std::vector<Index>> negatives(ctx.size());
        for (auto& list : negatives) {
          for (int k = 0; k < options.negatives; ++k) list.push_back(model.sample_negative(rng));
        }
        Graph g;
        Var j = model.objective(g, inst, ctx, negatives);
        g.backward(j);
        total += g.scalar(j);
        pairs += ctx.size();
      }
      nn::adagrad_step(model.store(), adagrad);
    }
    model.store().zero_grad();
    result.epoch_loss.push_back(pairs ? total / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

// ---------------------------------------------------------------------------------------------
// Clustering

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Vector centroid_of(const std::vector<std::size_t>& members, const std::vector<Vector>& vectors) {
  if (members.empty() || vectors.empty()) return Vector();
  Vector sum = Vector::Zero(vectors.at(members.front()).size());
  for (auto m : members) sum += vectors.at(m);
  return sum / static_cast<double>(members.size());
}

double violation_penalty(const Cluster& a, const Cluster& b, const std::vector<ArgInstance>& instances) {
  std::set<std::size_t> occ_a, occ_b;
  for (auto m : a.members) occ_a.insert(instances.at(m).predicate_occurrence_id);
  for (auto m : b.members) occ_b.insert(instances.at(m).predicate_occurrence_id);
  std::size_t violations = 0;
  for (auto m : a.members) violations += occ_b.count(instances[m].predicate_occurrence_id);
  for (auto m : b.members) violations += occ_a.count(instances[m].predicate_occurrence_id);
  return static_cast<double>(violations) / static_cast<double>(a.members.size() + b.members.size());
}

double cluster_similarity(const Cluster& a, const Cluster& b, const std::vector<ArgInstance>& instances, double alpha) {
  if (a.members.empty() || b.members.empty()) throw Error(ErrorKind::invalid_argument, "similarity of an empty cluster");
  return cosine(a.centroid, b.centroid) - alpha * violation_penalty(a, b, instances);
}

std::vector<Cluster> greedy_merge(std::vector<Cluster> clusters, const std::vector<ArgInstance>& instances,
                                  const std::vector<Vector>& vectors, double alpha, double tau) {
  auto order = [](const Cluster& a, const Cluster& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.label < b.label;
  };
  while (clusters.size() > 1) {
    std::stable_sort(clusters.begin(), clusters.end(), order);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double s = cluster_similarity(clusters[i], clusters[j], instances, alpha);
        if (s > best) {
          best = s;
          bi = i;
          bj = j;
        }
      }
    }
    if (best < tau) break;
    auto& keep = clusters[bi];
    keep.members.insert(keep.members.end(), clusters[bj].members.begin(), clusters[bj].members.end());
    std::sort(keep.members.begin(), keep.members.end());
    keep.centroid = centroid_of(keep.members, vectors);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  std::stable_sort(clusters.begin(), clusters.end(), order);
  return clusters;
}

std::vector<Cluster> seed_clusters(const std::vector<std::size_t>& members, const std::vector<ArgInstance>& instances,
                                   const std::vector<Vector>& vectors) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (auto m : members) by_label[instances.at(m).dep_label.str()].push_back(m);
  std::vector<Cluster> seeds;
  for (auto& [label, list] : by_label) {
    std::sort(list.begin(), list.end());
    Cluster c;
    c.label = label;
    c.centroid = centroid_of(list, vectors);
    c.members = std::move(list);
    seeds.push_back(std::move(c));
  }
  return seeds;
}

RoleClustering agglomerate(const std::vector<std::size_t>& members, const std::vector<ArgInstance>& instances,
                           const std::vector<Vector>& vectors, double alpha, double tau) {
  if (members.empty()) throw Error(ErrorKind::invalid_argument, "agglomerate needs at least one instance");
  RoleClustering out;
  out.lexeme = instances.at(members.front()).predicate_lexeme;
  out.clusters = greedy_merge(seed_clusters(members, instances, vectors), instances, vectors, alpha, tau);
  return out;
}

RoleClustering syntactic_function_baseline(const std::vector<std::size_t>& members,
                                           const std::vector<ArgInstance>& instances) {
  RoleClustering out;
  if (members.empty()) return out;
  out.lexeme = instances.at(members.front()).predicate_lexeme;
  out.clusters = seed_clusters(members, instances, {});
  return out;
}

std::map<std::string, std::vector<std::size_t>> group_by_lexeme(const std::vector<ArgInstance>& instances) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < instances.size(); ++i) out[instances[i].predicate_lexeme].push_back(i);
  return out;
}

std::vector<ClusteredInstance> assign_cluster_ids(const std::vector<RoleClustering>& clusterings,
                                                  const std::vector<ArgInstance>& instances,
                                                  const std::vector<Vector>& vectors, bool merge_across_lexemes,
                                                  double alpha, double tau) {
  std::vector<ClusteredInstance> rows;
  auto emit = [&](const Cluster& c, int id) {
    for (auto m : c.members) {
      const auto& inst = instances.at(m);
      rows.push_back({inst.sentence_id, inst.predicate_index, inst.arg_token, inst.predicate_lexeme, id});
    }
  };
  int next = 0;
  if (merge_across_lexemes) {
    std::vector<Cluster> seeds;
    for (const auto& rc : clusterings) {
      for (const auto& c : rc.clusters) {
        Cluster s = c;
        s.label = rc.lexeme + "/" + c.label;
        seeds.push_back(std::move(s));
      }
    }
    for (const auto& c : greedy_merge(std::move(seeds), instances, vectors, alpha, tau)) emit(c, next++);
  } else {
    for (const auto& rc : clusterings) {
      for (const auto& c : rc.clusters) emit(c, next++);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sentence_id, a.predicate_token, a.arg_token) < std::tie(b.sentence_id, b.predicate_token, b.arg_token);
  });
  return rows;
}

}  // namespace usrl
