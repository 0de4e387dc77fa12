#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"
#include "neuralkit.hpp"

using namespace usrl;
using namespace usrl::nn;

namespace {

constexpr double kTolerance = 1e-4;

// Weighted sum with fixed random weights so every output entry carries a distinct gradient.
Var project(Graph& g, Var x, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor& v = g.value(x);
  Tensor w = gaussian(v.rows(), v.cols(), 1.0, rng);
  return g.sum(g.cmul(x, g.constant(w)));
}

void check(ParameterStore& store, const std::function<Var(Graph&)>& loss) {
  auto r = check_gradients(store, loss);
  INFO(r.worst);
  CHECK(r.checked > 0);
  CHECK(r.max_relative_error <= kTolerance);
}

ParameterStore toy_store(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore s;
  s.add("A", gaussian(3, 4, 0.8, rng));
  s.add("B", gaussian(4, 2, 0.8, rng));
  s.add("C", gaussian(3, 2, 0.8, rng));
  s.add("v", gaussian(3, 1, 0.8, rng));
  s.add("T", gaussian(5, 3, 0.8, rng), true);
  return s;
}

}  // namespace

TEST_CASE("elementwise and linear-algebra operations pass finite differences") {
  ParameterStore s = toy_store(1);
  auto& A = s.at("A");
  auto& B = s.at("B");
  auto& C = s.at("C");
  auto& v = s.at("v");
  auto& T = s.at("T");
  SUBCASE("matmul add sub cmul scale") {
    check(s, [&](Graph& g) {
      Var m = g.matmul(g.param(A), g.param(B));
      Var x = g.add(m, g.scale(g.param(C), 0.7));
      Var y = g.sub(g.cmul(x, g.param(C)), m);
      return project(g, y, 10);
    });
  }
  SUBCASE("add_bias tanh sigmoid log_sigmoid") {
    check(s, [&](Graph& g) {
      Var m = g.add_bias(g.matmul(g.param(A), g.param(B)), g.param(v));
      Var y = g.add(g.tanh(m), g.add(g.sigmoid(m), g.log_sigmoid(g.scale(m, -1.3))));
      return project(g, y, 11);
    });
  }
  SUBCASE("relu away from the kink") {
    check(s, [&](Graph& g) {
      Var m = g.add(g.param(C), g.constant(Tensor::Constant(3, 2, 0.0)));
      return project(g, g.relu(m), 12);
    });
  }
  SUBCASE("softmax and log_softmax per column") {
    check(s, [&](Graph& g) {
      Var m = g.matmul(g.param(A), g.param(B));
      return g.add(project(g, g.softmax(m), 13), project(g, g.log_softmax(m), 14));
    });
  }
  SUBCASE("concat concat_cols slice pick dot add_n row") {
    check(s, [&](Graph& g) {
      Var r0 = g.row(T, 1);
      Var r1 = g.row(T, 4);
      Var stacked = g.concat(std::vector<Var>{r0, g.param(v), r1});
      Var cols = g.concat_cols(std::vector<Var>{r0, r1, g.param(v)});
      Var part = g.slice(stacked, 2, 4);
      std::vector<Var> terms = {project(g, part, 15), project(g, cols, 16), g.dot(r0, g.param(v)),
                                g.scale(g.pick(cols, 2, 1), 2.0)};
      return g.add_n(terms);
    });
  }
}

TEST_CASE("relu values and subgradient") {
  Graph g;
  Tensor x(3, 1);
  x << -1.0, 0.0, 2.0;
  Var y = g.relu(g.constant(x));
  CHECK(g.value(y)(0) == 0.0);
  CHECK(g.value(y)(2) == 2.0);
}

TEST_CASE("LSTM cell, BiLSTM and MLP with softmax pass finite differences") {
  Rng rng(2);
  ParameterStore s;
  auto cell = LstmCell::create(s, "cell", 3, 4, rng);
  auto bi = BiLstm::create(s, "bi", 3, 2, rng);
  auto hidden = Linear::create(s, "mlp", 4, 5, rng);
  auto out = Linear::create(s, "out", 5, 2, rng);
  // Non-zero biases exercise every bias path.
  for (auto& p : s) p->value += gaussian(p->value.rows(), p->value.cols(), 0.2, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(gaussian(3, 1, 1.0, rng));

  SUBCASE("LSTM cell unrolled") {
    check(s, [&](Graph& g) {
      auto st = cell.initial(g);
      for (const auto& x : xs) st = cell.step(g, g.constant(x), st);
      return g.add(project(g, st.h, 20), project(g, st.c, 21));
    });
  }
  SUBCASE("BiLSTM outputs and final states") {
    check(s, [&](Graph& g) {
      std::vector<Var> in;
      for (const auto& x : xs) in.push_back(g.constant(x));
      auto hs = bi(g, in);
      std::vector<Var> terms;
      for (std::size_t t = 0; t < hs.size(); ++t) terms.push_back(project(g, hs[t], 30 + t));
      terms.push_back(project(g, bi.final_states(g, in), 40));
      return g.add_n(terms);
    });
  }
  SUBCASE("tanh MLP with softmax cross-entropy") {
    const Tensor batch = gaussian(4, 3, 1.0, rng);
    check(s, [&](Graph& g) {
      Var h = g.tanh(hidden(g, g.constant(batch)));
      Var lp = g.log_softmax(out(g, h));
      return g.scale(g.add_n(std::vector<Var>{g.pick(lp, 0, 0), g.pick(lp, 1, 1), g.pick(lp, 1, 2)}), -1.0);
    });
  }
}

TEST_CASE("LSTM cell forward matches a hand evaluation") {
  Rng rng(4);
  ParameterStore s;
  auto cell = LstmCell::create(s, "c", 2, 3, rng);
  auto& W = s.at("c.W").value;
  auto& U = s.at("c.U").value;
  auto& b = s.at("c.b").value;
  b = gaussian(12, 1, 0.3, rng);
  Tensor x = gaussian(2, 1, 1.0, rng);
  Tensor h0 = gaussian(3, 1, 1.0, rng);
  Tensor c0 = gaussian(3, 1, 1.0, rng);
  Graph g;
  auto st = cell.step(g, g.constant(x), {g.constant(h0), g.constant(c0)});
  Tensor z = W * x + U * h0 + b;
  auto sig = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
  for (int k = 0; k < 3; ++k) {
    double i = sig(z(k)), f = sig(z(3 + k)), o = sig(z(6 + k)), gg = std::tanh(z(9 + k));
    double c = f * c0(k) + i * gg;
    CHECK(g.value(st.c)(k) == doctest::Approx(c).epsilon(1e-12));
    CHECK(g.value(st.h)(k) == doctest::Approx(o * std::tanh(c)).epsilon(1e-12));
  }
}

TEST_CASE("Adagrad step matches the closed form and touches only used rows") {
  ParameterStore s;
  Tensor w(2, 1);
  w << 1.0, -2.0;
  s.add("w", w);
  Tensor t = Tensor::Ones(3, 2);
  s.add("t", t, true);
  const AdagradOptions o{0.5, 0.1, 1e-8};
  Tensor accum = Tensor::Zero(2, 1);
  Tensor expected = w;
  for (int step = 0; step < 3; ++step) {
    s.zero_grad();
    Graph g;
    Var l = g.add(g.dot(g.param(s.at("w")), g.param(s.at("w"))), g.sum(g.row(s.at("t"), 1)));
    g.backward(l);
    adagrad_step(s, o);
    Tensor grad = 2.0 * expected + o.l2 * expected;
    accum += grad.cwiseProduct(grad);
    expected -= (o.learning_rate * grad.array() / (accum.array().sqrt() + o.epsilon)).matrix();
  }
  CHECK((s.at("w").value - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.at("t").value(0, 0) == 1.0);
  CHECK(s.at("t").value(2, 1) == 1.0);
  CHECK(s.at("t").value(1, 0) < 1.0);
}

TEST_CASE("checkpoints round-trip and reject foreign or newer files") {
  Rng rng(7);
  ParameterStore s;
  s.seed = 99;
  s.add("a", gaussian(3, 2, 1.0, rng));
  s.add("b", gaussian(4, 4, 1.0, rng), true);
  s.at("a").accum = gaussian(3, 2, 1.0, rng).cwiseAbs();
  std::stringstream buf;
  save_checkpoint(buf, s, "meta");
  std::string meta;
  ParameterStore r = load_checkpoint(buf, &meta);
  CHECK(meta == "meta");
  CHECK(r.seed == 99);
  CHECK(r.at("a").value == s.at("a").value);
  CHECK(r.at("a").accum == s.at("a").accum);
  CHECK(r.at("b").sparse_rows);

  std::string bytes;
  {
    std::stringstream again;
    save_checkpoint(again, s, "meta");
    bytes = again.str();
    CHECK(bytes == [&] {
      std::stringstream third;
      save_checkpoint(third, r, "meta");
      return third.str();
    }());
  }
  auto kind = [](std::string data) {
    std::stringstream in(data);
    std::string m;
    try {
      load_checkpoint(in, &m);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_argument;
  };
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(kind(bad) == ErrorKind::parse);
  std::string newer = bytes;
  newer[8] = 2;  // version field follows the 8-byte magic
  CHECK(kind(newer) == ErrorKind::version);
  CHECK(kind(bytes.substr(0, bytes.size() / 2)) == ErrorKind::parse);
}

TEST_CASE("non-finite values are caught at the producing operation") {
  Graph g;
  Tensor x(1, 1);
  x << 1e308;
  Var a = g.constant(x);
  CHECK_THROWS_AS(g.scale(a, 10.0), Error);
}

TEST_CASE("random streams are reproducible and derived seeds differ") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  Rng u(5);
  double mean = 0;
  for (int i = 0; i < 20000; ++i) mean += u.normal(0.0, 1.0);
  CHECK(std::abs(mean / 20000) < 0.05);
  std::vector<int> v = {1, 2, 3, 4, 5, 6};
  Rng sh(3);
  sh.shuffle(v);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("LSTM cell with zero parameters outputs zero") {
  Rng rng(9);
  ParameterStore s;
  auto cell = LstmCell::create(s, "z", 3, 4, rng);
  for (auto& p : s) p->value.setZero();
  Graph g;
  auto st = cell.step(g, g.constant(gaussian(3, 1, 2.0, rng)), {g.constant(gaussian(4, 1, 1.0, rng)), g.constant(Tensor::Zero(4, 1))});
  CHECK(g.value(st.h) == Tensor::Zero(4, 1));
}

TEST_CASE("BiLSTM shapes, length one and reversal symmetry") {
  Rng rng(10);
  ParameterStore s;
  auto bi = BiLstm::create(s, "bi", 3, 2, rng);
  for (auto& p : s) p->value += gaussian(p->value.rows(), p->value.cols(), 0.3, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(gaussian(3, 1, 1.0, rng));

  Graph g;
  std::vector<Var> in, rev;
  for (const auto& x : xs) in.push_back(g.constant(x));
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) rev.push_back(g.constant(*it));
  auto out = bi(g, in);
  REQUIRE(out.size() == 5);
  for (auto v : out) CHECK(g.value(v).rows() == 4);

  // A BiLSTM whose two cells are swapped, run on the reversed input, yields the reversed outputs
  // with their halves swapped.
  BiLstm swapped(bi.backward_cell(), bi.forward_cell());
  auto back = swapped(g, rev);
  for (std::size_t t = 0; t < 5; ++t) {
    const Tensor& a = g.value(out[t]);
    const Tensor& b = g.value(back[4 - t]);
    CHECK((a.topRows(2) - b.bottomRows(2)).norm() < 1e-14);
    CHECK((a.bottomRows(2) - b.topRows(2)).norm() < 1e-14);
  }

  std::vector<Var> one = {in[0]};
  auto single = bi(g, one);
  auto f = bi.forward_cell().step(g, in[0], bi.forward_cell().initial(g));
  auto b = bi.backward_cell().step(g, in[0], bi.backward_cell().initial(g));
  CHECK((g.value(single[0]).topRows(2) - g.value(f.h)).norm() == 0.0);
  CHECK((g.value(single[0]).bottomRows(2) - g.value(b.h)).norm() == 0.0);
  CHECK_THROWS_AS(bi(g, std::span<const Var>{}), Error);
}

TEST_CASE("Adagrad: zero gradient, two unit steps, and descent on a quadratic bowl") {
  ParameterStore s;
  Tensor w(1, 1);
  w << 3.0;
  s.add("w", w);
  s.zero_grad();
  adagrad_step(s, {0.5, 0.0, 1e-8});
  CHECK(s.at("w").value(0, 0) == 3.0);

  // g = 1 twice: accumulated state 2, second update lr / (sqrt 2 + eps).
  s.at("w").grad(0, 0) = 1.0;
  adagrad_step(s, {0.5, 0.0, 1e-8});
  const double after_one = s.at("w").value(0, 0);
  CHECK(after_one == doctest::Approx(3.0 - 0.5 / (1.0 + 1e-8)).epsilon(1e-14));
  s.at("w").grad(0, 0) = 1.0;
  adagrad_step(s, {0.5, 0.0, 1e-8});
  CHECK(s.at("w").accum(0, 0) == 2.0);
  CHECK(s.at("w").value(0, 0) == doctest::Approx(after_one - 0.5 / (std::sqrt(2.0) + 1e-8)).epsilon(1e-14));

  Rng rng(12);
  ParameterStore bowl;
  bowl.add("x", gaussian(4, 1, 3.0, rng));
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 100; ++step) {
    bowl.zero_grad();
    Graph g;
    Var x = g.param(bowl.at("x"));
    Var loss = g.dot(x, x);
    const double value = g.scalar(loss);
    CHECK(value <= previous);
    previous = value;
    g.backward(loss);
    adagrad_step(bowl, {0.1, 0.0, 1e-8});
  }
}
