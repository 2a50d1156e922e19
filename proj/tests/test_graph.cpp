#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arvrm/errors.hpp"
#include "arvrm/graph.hpp"
#include "arvrm/optim.hpp"
#include "arvrm/rng.hpp"

using namespace arvrm;

namespace {

// Central finite differences through an arbitrary scalar-producing rebuild.
// The closure must construct a fresh graph from current store values.
template <class LossFn>
double fd_gradient(ParamStore& store, ParamRef ref, std::size_t index, LossFn loss, double h = 1e-6) {
  double& cell = store.param(ref).value.data[index];
  const double keep = cell;
  cell = keep + h;
  const double up = loss();
  cell = keep - h;
  const double down = loss();
  cell = keep;
  return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("mse examples") {
  Graph g;
  SUBCASE("coincident tensors give zero") {
    Var a = g.input(Tensor::row_vector({1.0, -2.0, 3.5}));
    Var b = g.input(Tensor::row_vector({1.0, -2.0, 3.5}));
    CHECK(g.scalar(g.mse(a, b)) == 0.0);
  }
  SUBCASE("hand arithmetic") {
    Var a = g.input(Tensor::row_vector({1.0, 1.0}));
    Var b = g.input(Tensor::row_vector({0.0, 0.0}));
    CHECK(g.scalar(g.mse(a, b)) == doctest::Approx(1.0));
  }
  SUBCASE("random pair matches scalar-loop oracle") {
    Rng rng(3);
    Tensor p = Tensor::randn({4, 9}, rng);
    Tensor t = Tensor::randn({4, 9}, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += (p.data[i] - t.data[i]) * (p.data[i] - t.data[i]);
    }
    acc /= static_cast<double>(p.size());
    Var pv = g.input(p);
    Var tv = g.input(t);
    CHECK(rel_err(g.scalar(g.mse(pv, tv)), acc) < 1e-12);
  }
  SUBCASE("shape mismatch names both shapes") {
    Var a = g.input(Tensor::zeros({2, 3}));
    Var b = g.input(Tensor::zeros({3, 2}));
    CHECK_THROWS_WITH_AS(g.mse(a, b), doctest::Contains("[2x3]"), ShapeError);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("loss = mse(x, x) has zero gradient") {
    ParamStore store;
    store.add_group("w");
    Rng rng(5);
    ParamRef ref = store.add_param("w", "x", Tensor::randn({3, 3}, rng));
    Graph g(&store);
    Var x = g.param(ref);
    Var loss = g.mse(x, x);
    g.backward(loss);
    for (double v : store.param(ref).grad.data) CHECK(v == 0.0);
  }
  SUBCASE("loss = sum of parameters has gradient one") {
    ParamStore store;
    store.add_group("w");
    Rng rng(6);
    ParamRef ref = store.add_param("w", "x", Tensor::randn({2, 5}, rng));
    Graph g(&store);
    Var loss = g.sum_all(g.param(ref));
    g.backward(loss);
    for (double v : store.param(ref).grad.data) CHECK(v == 1.0);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Graph g;
    Var x = g.input(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(g.backward(x), Error);
  }
  SUBCASE("frozen parameters receive no gradient entry") {
    ParamStore store;
    store.add_group("frozen_w", /*frozen=*/true);
    store.add_group("live_w");
    Rng rng(7);
    ParamRef fref = store.add_param("frozen_w", "a", Tensor::randn({4}, rng));
    ParamRef lref = store.add_param("live_w", "b", Tensor::randn({4}, rng));
    Graph g(&store);
    // loss touches both; gradient must flow through the frozen factor to b
    Var prod = g.mul(g.param(fref), g.param(lref));
    g.backward(g.sum_all(prod));
    for (double v : store.param(fref).grad.data) CHECK(v == 0.0);
    bool live_nonzero = false;
    for (double v : store.param(lref).grad.data) live_nonzero |= (v != 0.0);
    CHECK(live_nonzero);
  }
}

TEST_CASE("gradients match central finite differences across op zoo") {
  ParamStore store;
  store.add_group("p");
  Rng rng(21);
  ParamRef w1 = store.add_param("p", "w1", Tensor::randn({6, 12}, rng, 0.4));
  ParamRef b1 = store.add_param("p", "b1", Tensor::randn({12}, rng, 0.2));
  ParamRef gam = store.add_param("p", "gamma", Tensor::full({12}, 1.1));
  ParamRef bet = store.add_param("p", "beta", Tensor::randn({12}, rng, 0.1));
  ParamRef qkvw = store.add_param("p", "qkv", Tensor::randn({12, 36}, rng, 0.3));
  ParamRef alpha = store.add_param("p", "alpha", Tensor::full({1}, 0.7));
  ParamRef nodew = store.add_param("p", "nodew", Tensor::randn({6, 12 * 2}, rng, 0.3));
  ParamRef nodeb = store.add_param("p", "nodeb", Tensor::randn({6, 2}, rng, 0.1));

  Tensor x = Tensor::randn({6, 6}, rng, 0.8);
  Tensor target = Tensor::randn({6, 2}, rng, 0.5);

  auto build_loss = [&](Graph& g) {
    Var xv = g.input(x);
    Var h = g.add_rowvec(g.matmul(xv, g.param(w1)), g.param(b1));  // [6,12]
    h = g.gelu(h);
    h = g.layer_norm(h, g.param(gam), g.param(bet));
    Var qkv = g.matmul(h, g.param(qkvw));        // [6,36]
    Var attn = g.causal_mha(qkv, 3);             // [6,12]
    Var blended = g.scale_by(attn, g.param(alpha));
    blended = g.add(blended, g.scale_by(g.tanh_(h), g.add_const(g.scale(g.param(alpha), -1.0), 1.0)));
    Var out = g.node_readout(blended, g.param(nodew), g.param(nodeb), 2);  // [6,2]
    return g.mse(out, g.input(target));
  };

  ParamStore* sp = &store;
  auto loss_value = [&]() {
    Graph g(sp);
    return g.scalar(build_loss(g));
  };

  store.zero_grads();
  {
    Graph g(&store);
    g.backward(build_loss(g));
  }

  Rng pick(99);
  for (const ParamRef ref : {w1, b1, gam, bet, qkvw, alpha, nodew, nodeb}) {
    auto& p = store.param(ref);
    for (int probe = 0; probe < 5; ++probe) {
      const std::size_t idx = pick.below(p.value.size());
      const double analytic = p.grad.data[idx];
      const double numeric = fd_gradient(store, ref, idx, loss_value);
      CHECK_MESSAGE(rel_err(analytic, numeric) < 1e-4,
                    p.name << "[" << idx << "]: " << analytic << " vs fd " << numeric);
    }
  }
}

TEST_CASE("softmax, mean, concat and gather grads survive finite differences") {
  ParamStore store;
  store.add_group("p");
  Rng rng(31);
  ParamRef table = store.add_param("p", "table", Tensor::randn({5, 8}, rng, 0.5));
  ParamRef wq = store.add_param("p", "wq", Tensor::randn({8, 8}, rng, 0.4));
  Tensor target = Tensor::randn({1, 8}, rng, 0.3);

  auto build = [&](Graph& g) {
    Var rows = g.gather_rows(g.param(table), {0, 2, 2, 4});
    Var mixed = g.softmax_rows(g.matmul(rows, g.param(wq)));
    Var pooled = g.mean_rows(g.concat_rows({mixed, g.scale(mixed, 0.5)}));
    return g.mse(pooled, g.input(target));
  };
  auto loss_value = [&]() {
    Graph g(&store);
    return g.scalar(build(g));
  };
  store.zero_grads();
  {
    Graph g(&store);
    g.backward(build(g));
  }
  Rng pick(5);
  for (const ParamRef ref : {table, wq}) {
    auto& p = store.param(ref);
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t idx = pick.below(p.value.size());
      CHECK(rel_err(p.grad.data[idx], fd_gradient(store, ref, idx, loss_value)) < 1e-4);
    }
  }
}

TEST_CASE("adamw") {
  SUBCASE("zero gradients and zero weight decay leave parameters bit-identical") {
    ParamStore store;
    store.add_group("g");
    Rng rng(41);
    ParamRef ref = store.add_param("g", "w", Tensor::randn({7}, rng));
    const Tensor before = store.param(ref).value;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(store, cfg);
    store.zero_grads();
    opt.step();
    opt.step();
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(store.param(ref).value.data[i] == before.data[i]);
    }
  }

  SUBCASE("constant positive gradient decreases a scalar parameter") {
    ParamStore store;
    store.add_group("g");
    ParamRef ref = store.add_param("g", "w", Tensor::full({1}, 1.0));
    AdamWConfig cfg;
    cfg.lr = 1e-4;
    cfg.weight_decay = 0.0;
    AdamW opt(store, cfg);
    store.param(ref).grad.data[0] = 1.0;
    opt.step();
    CHECK(store.param(ref).value.data[0] < 1.0);
  }

  SUBCASE("three-step trajectory matches a hand-stepped recurrence on a quadratic") {
    // minimize f(w) = 0.5*(w-3)^2, grad = w-3
    ParamStore store;
    store.add_group("g");
    ParamRef ref = store.add_param("g", "w", Tensor::full({1}, 0.0));
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.eps = 1e-8;
    cfg.weight_decay = 0.01;
    AdamW opt(store, cfg);

    double w = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      const double grad = w - 3.0;
      m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad;
      const double mh = m / (1 - std::pow(cfg.beta1, t));
      const double vh = v / (1 - std::pow(cfg.beta2, t));
      w -= cfg.lr * (mh / (std::sqrt(vh) + cfg.eps) + cfg.weight_decay * w);

      store.param(ref).grad.data[0] = store.param(ref).value.data[0] - 3.0;
      opt.step();
      CHECK(store.param(ref).value.data[0] == doctest::Approx(w).epsilon(1e-10));
      store.zero_grads();
    }
  }

  SUBCASE("frozen group is bit-identical after many steps") {
    ParamStore store;
    store.add_group("ice", /*frozen=*/true);
    store.add_group("fire");
    Rng rng(43);
    ParamRef iref = store.add_param("ice", "w", Tensor::randn({16}, rng));
    ParamRef fref = store.add_param("fire", "w", Tensor::randn({16}, rng));
    const std::uint64_t hash_before = store.group_hash("ice");
    AdamW opt(store, AdamWConfig{});
    for (int i = 0; i < 25; ++i) {
      for (auto& gv : store.param(iref).grad.data) gv = 1.0;
      for (auto& gv : store.param(fref).grad.data) gv = 1.0;
      opt.step();
    }
    CHECK(store.group_hash("ice") == hash_before);
    CHECK(store.group_hash("fire") != hash_before);
  }

  SUBCASE("non-finite gradient raises an error naming the tensor") {
    ParamStore store;
    store.add_group("g");
    ParamRef ref = store.add_param("g", "spiky", Tensor::full({2}, 1.0));
    AdamW opt(store, AdamWConfig{});
    store.param(ref).grad.data[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("spiky"), TrainError);
  }
}

TEST_CASE("grad buffers fold deterministically") {
  ParamStore store;
  store.add_group("g");
  Rng rng(51);
  ParamRef ref = store.add_param("g", "w", Tensor::randn({4, 4}, rng));
  Tensor x = Tensor::randn({4, 4}, rng);
  Tensor t = Tensor::randn({4, 4}, rng);

  auto run = [&](GradBuffer* buf) {
    Graph g(&store);
    Var loss = g.mse(g.matmul(g.input(x), g.param(ref)), g.input(t));
    if (buf) {
      g.backward(loss, *buf);
    } else {
      g.backward(loss);
    }
  };

  store.zero_grads();
  run(nullptr);
  const Tensor direct = store.param(ref).grad;

  store.zero_grads();
  GradBuffer buf(store);
  run(&buf);
  buf.add_into(store);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(store.param(ref).grad.data[i] == direct.data[i]);
  }
}
