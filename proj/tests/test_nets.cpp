#include <catch2/catch_amalgamated.hpp>

#include "bcl/nets.hpp"
#include "bcl/optim.hpp"

using namespace bcl;

namespace {

MlpSpec mlp_10_10() {
  MlpSpec s;
  s.widths = {1, 10, 10, 1};
  return s;
}

}  // namespace

TEST_CASE("zero weights give zero output") {
  MlpSpec spec;
  spec.widths = {3, 4, 2};
  std::vector<double> w(spec.param_count(), 0.0);
  Tensor out = mlp_apply(Tensor::row({1.0, -2.0, 0.5}), w, spec);
  for (double x : out.v) CHECK(x == 0.0);
}

TEST_CASE("identity linear layer passes inputs through") {
  MlpSpec spec;
  spec.widths = {3, 3};
  std::vector<double> w(spec.param_count(), 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  Tensor out = mlp_apply(Tensor::row({0.3, -1.1, 2.2}), w, spec);
  CHECK(out.v == std::vector<double>{0.3, -1.1, 2.2});
}

TEST_CASE("wrong parameter count is rejected") {
  MlpSpec spec;
  spec.widths = {2, 2};
  std::vector<double> w(spec.param_count() + 1, 0.0);
  CHECK_THROWS_AS(mlp_apply(Tensor::row({1.0, 1.0}), w, spec), ShapeError);
}

TEST_CASE("parameter flattening round-trips") {
  MlpSpec spec;
  spec.widths = {4, 7, 3};
  Rng rng(2);
  auto w = init_mlp_params(spec, rng);
  for (auto& x : w) x = rng.normal();  // make biases non-zero too
  auto layers = unflatten(w, spec);
  CHECK(flatten(layers) == w);
}

TEST_CASE("head slices partition the output") {
  MlpSpec spec;
  spec.widths = {4, 8, 6};
  spec.head = HeadMode::Multi;
  spec.num_tasks = 3;
  spec.classes_per_task = 2;
  for (int task = 0; task < 3; ++task) {
    auto [c0, c1] = spec.head_slice(task);
    CHECK(c0 == 2 * task);
    CHECK(c1 == 2 * task + 2);
  }
  spec.head = HeadMode::Growing;
  CHECK(spec.head_slice(0).second == 2);
  CHECK(spec.head_slice(2).second == 6);
  spec.head = HeadMode::Shared;
  CHECK(spec.head_slice(0).second == 6);
}

TEST_CASE("head parameter indices cover exactly the head's column block") {
  MlpSpec spec;
  spec.widths = {3, 5, 4};
  spec.head = HeadMode::Multi;
  spec.num_tasks = 2;
  spec.classes_per_task = 2;
  auto idx = spec.head_param_indices(1);
  CHECK(idx.size() == 5 * 2 + 2);
  std::vector<double> w(spec.param_count(), 0.0);
  for (int i : idx) w[i] = 1.0;
  auto layers = unflatten(w, spec);
  // marked entries are the second two columns of the last layer + its bias tail
  for (int r = 0; r < 5; ++r) {
    CHECK(layers[1].weight.at(r, 0) == 0.0);
    CHECK(layers[1].weight.at(r, 2) == 1.0);
  }
  CHECK(layers[1].bias == std::vector<double>{0, 0, 1, 1});
}

TEST_CASE("degenerate chunking equals the plain MLP") {
  HypernetSpec h;
  h.input_dim = 4;
  h.hidden = {6};
  h.chunk_dim = 0;
  h.chunk_count = 1;
  h.chunk_size = 9;
  h.target_count = 9;
  Rng rng(3);
  auto psi = init_hypernet_params(h, 1.0, rng);
  auto emb = init_embedding(4, 1.0, rng);
  auto out = hnet_apply(emb, psi, h);
  Tensor direct = mlp_apply(Tensor::row(emb), psi, h.chunk_mlp());
  CHECK(out == direct.v);
}

TEST_CASE("identical chunk embeddings produce identical chunks") {
  HypernetSpec h;
  h.input_dim = 3;
  h.hidden = {5};
  h.chunk_dim = 2;
  h.chunk_count = 2;
  h.chunk_size = 4;
  h.target_count = 8;
  Rng rng(4);
  auto psi = init_hypernet_params(h, 1.0, rng);
  // overwrite second chunk embedding with the first
  int base = h.mlp_param_count();
  for (int i = 0; i < h.chunk_dim; ++i) psi[base + h.chunk_dim + i] = psi[base + i];
  auto emb = init_embedding(3, 1.0, rng);
  auto out = hnet_apply(emb, psi, h);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == out[4 + i]);
}

TEST_CASE("truncation drops only trailing entries") {
  HypernetSpec h;
  h.input_dim = 2;
  h.hidden = {};
  h.chunk_dim = 2;
  h.chunk_count = 3;
  h.chunk_size = 4;
  h.target_count = 10;
  Rng rng(5);
  auto psi = init_hypernet_params(h, 0.5, rng);
  auto emb = init_embedding(2, 1.0, rng);
  auto out = hnet_apply(emb, psi, h);
  CHECK(out.size() == 10);
  HypernetSpec full = h;
  full.target_count = 12;
  auto all = hnet_apply(emb, psi, full);
  for (int i = 0; i < 10; ++i) CHECK(out[i] == all[i]);
}

TEST_CASE("chunk coverage is validated") {
  HypernetSpec h;
  h.input_dim = 2;
  h.chunk_dim = 2;
  h.chunk_count = 2;
  h.chunk_size = 3;
  h.target_count = 7;
  CHECK_THROWS_AS(h.validate(), ShapeError);
}

TEST_CASE("a compressive configuration has fewer meta parameters than the target") {
  // MLP-400,400 sized target with a chunked conditioning network
  MlpSpec main;
  main.widths = {784, 400, 400, 10};
  int n_w = main.param_count();
  CHECK(n_w == 478410);

  HypernetSpec tc;
  tc.input_dim = 32;
  tc.hidden = {25};
  tc.chunk_dim = 32;
  tc.chunk_size = 6500;
  tc.chunk_count = (2 * n_w + tc.chunk_size - 1) / tc.chunk_size;
  tc.target_count = 2 * n_w;
  tc.validate();
  int n_tasks = 5;
  long meta = tc.param_count() + static_cast<long>(n_tasks) * tc.input_dim;
  CHECK(meta < n_w);
}

TEST_CASE("embedding init matches the requested spread and is seed deterministic") {
  Rng a(42), b(42);
  auto e1 = init_embedding(10000, 1.0, a);
  auto e2 = init_embedding(10000, 1.0, b);
  CHECK(e1 == e2);
  double mean = 0;
  for (double x : e1) mean += x;
  mean /= e1.size();
  double var = 0;
  for (double x : e1) var += (x - mean) * (x - mean);
  var /= (e1.size() - 1);
  CHECK(std::fabs(var - 1.0) < 0.05);

  auto small = init_embedding(4, 0.1, a);
  CHECK(small.size() == 4);
  CHECK_THROWS_AS(init_embedding(4, 0.0, a), std::invalid_argument);
}

TEST_CASE("hypernet gradients flow to conditioning input and parameters") {
  HypernetSpec h;
  h.input_dim = 3;
  h.hidden = {4};
  h.chunk_dim = 2;
  h.chunk_count = 2;
  h.chunk_size = 3;
  h.target_count = 5;
  Rng rng(6);
  auto psi = init_hypernet_params(h, 1.0, rng);
  auto emb = init_embedding(3, 1.0, rng);
  Tape t;
  int e = t.leaf(emb);
  int p = t.leaf(psi);
  int out = hnet_forward(t, e, p, h);
  int loss = t.sum(t.square(out));
  CHECK(grad_check(t, loss, e, 1e-6) < 1e-6);
  CHECK(grad_check(t, loss, p, 1e-6) < 1e-6);
}

TEST_CASE("small MLP fits a noisy cubic to within the noise level") {
  // deterministic regression fit on 20 points of (x+3)^3 over [-4,-2]
  MlpSpec spec = mlp_10_10();
  Rng rng(1);
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    double x = rng.uniform(-4.0, -2.0);
    double y = (x + 3) * (x + 3) * (x + 3) + rng.normal(0.0, 0.05);
    xs.push_back(x);
    ys.push_back(y);
  }
  auto w = init_mlp_params(spec, rng);
  Adam opt(AdamConfig{.lr = 5e-2});
  Tensor X = Tensor::matrix(20, 1, xs);
  Tensor Y = Tensor::matrix(20, 1, ys);
  double mse = 1e9;
  for (int it = 0; it < 3000; ++it) {
    Tape t;
    int wn = t.leaf(w);
    int pred = mlp_forward(t, t.constant(X), wn, spec);
    int loss = t.mean(t.square(t.sub(pred, t.constant(Y))));
    t.backward(loss);
    opt.step(w, t.grad(wn));
    mse = t.scalar(loss);
  }
  CHECK(mse < 0.05 * 0.05);
}
