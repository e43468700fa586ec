#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcl/rng.hpp"
#include "bcl/tape.hpp"

namespace bcl {

enum class Activation { Relu, Sigmoid, Tanh };

inline int apply_activation(Tape& t, Activation act, int x) {
  switch (act) {
    case Activation::Relu: return t.relu(x);
    case Activation::Sigmoid: return t.sigmoid(x);
    case Activation::Tanh: return t.tanh_(x);
  }
  return x;
}

// Output-head layout of the main network:
//   Single  - one output block shared by all tasks
//   Multi   - per-task output slices; softmax runs over the active slice
//   Growing - one softmax whose active width grows by classes_per_task per task
//   Shared  - one softmax over all task outputs from the start
enum class HeadMode { Single, Multi, Growing, Shared };

// Fully connected network over a flat parameter vector.
// Flattening order is fixed: layer by layer, weight matrix (fan_in x fan_out,
// row-major) followed by the bias vector. Checkpoints and all posterior
// parameter layouts rely on this order.
struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation act = Activation::Relu;
  HeadMode head = HeadMode::Single;
  int num_tasks = 1;
  int classes_per_task = 0;  // width of one head slice (Multi/Growing/Shared)

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  int param_count() const {
    int n = 0;
    for (int l = 0; l < layers(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
    return n;
  }

  // column range of the output block visible to task t
  std::pair<int, int> head_slice(int task) const {
    switch (head) {
      case HeadMode::Single: return {0, output_dim()};
      case HeadMode::Multi: return {task * classes_per_task, (task + 1) * classes_per_task};
      case HeadMode::Growing: return {0, (task + 1) * classes_per_task};
      case HeadMode::Shared: return {0, output_dim()};
    }
    return {0, output_dim()};
  }

  // flat indices of parameters exclusive to task t's head (Multi only)
  std::vector<int> head_param_indices(int task) const {
    std::vector<int> idx;
    if (head != HeadMode::Multi) return idx;
    int off = 0;
    for (int l = 0; l < layers() - 1; ++l) off += widths[l] * widths[l + 1] + widths[l + 1];
    int fan_in = widths[layers() - 1];
    int out = output_dim();
    auto [c0, c1] = head_slice(task);
    for (int i = 0; i < fan_in; ++i)
      for (int c = c0; c < c1; ++c) idx.push_back(off + i * out + c);
    for (int c = c0; c < c1; ++c) idx.push_back(off + fan_in * out + c);
    return idx;
  }
};

struct MlpLayer {
  Tensor weight;  // fan_in x fan_out
  std::vector<double> bias;
};

inline std::vector<MlpLayer> unflatten(const std::vector<double>& w, const MlpSpec& spec) {
  if (static_cast<int>(w.size()) != spec.param_count())
    throw ShapeError("unflatten: expected " + std::to_string(spec.param_count()) + " parameters, got " +
                     std::to_string(w.size()));
  std::vector<MlpLayer> layers;
  size_t off = 0;
  for (int l = 0; l < spec.layers(); ++l) {
    int fi = spec.widths[l], fo = spec.widths[l + 1];
    MlpLayer layer;
    layer.weight = Tensor::matrix(fi, fo, std::vector<double>(w.begin() + off, w.begin() + off + fi * fo));
    off += static_cast<size_t>(fi) * fo;
    layer.bias.assign(w.begin() + off, w.begin() + off + fo);
    off += fo;
    layers.push_back(std::move(layer));
  }
  return layers;
}

inline std::vector<double> flatten(const std::vector<MlpLayer>& layers) {
  std::vector<double> w;
  for (const auto& l : layers) {
    w.insert(w.end(), l.weight.v.begin(), l.weight.v.end());
    w.insert(w.end(), l.bias.begin(), l.bias.end());
  }
  return w;
}

// Forward pass on the tape. x: batch (n x input_dim) node or constant,
// w: flat parameter node (any node, e.g. a hypernetwork output).
// Returns the full pre-softmax output (n x output_dim); head slicing is the
// caller's job.
inline int mlp_forward(Tape& t, int x, int w, const MlpSpec& spec) {
  if (t.val(w).count() != spec.param_count())
    throw ShapeError("mlp_forward: parameter vector has " + std::to_string(t.val(w).count()) +
                     " entries, spec needs " + std::to_string(spec.param_count()));
  int h = x;
  int off = 0;
  for (int l = 0; l < spec.layers(); ++l) {
    int fi = spec.widths[l], fo = spec.widths[l + 1];
    int weight = t.slice(w, off, {fi, fo});
    off += fi * fo;
    int bias = t.slice(w, off, {fo});
    off += fo;
    h = t.add_row(t.matmul(h, weight), bias);
    if (l + 1 < spec.layers()) h = apply_activation(t, spec.act, h);
  }
  return h;
}

// Plain evaluation without a tape (prediction paths). Same arithmetic as the
// tape version.
inline Tensor mlp_apply(const Tensor& x, const std::vector<double>& w, const MlpSpec& spec) {
  Tape t;
  int xin = t.constant(x);
  int win = t.constant(Tensor::row(w));
  int out = mlp_forward(t, xin, win, spec);
  return t.val(out);
}

// Hypernetwork producing a flat target vector from a conditioning input,
// optionally in chunks: the chunk MLP maps [input, chunk embedding] to one
// chunk of outputs; all chunks are evaluated as one batch, concatenated and
// truncated (trailing entries dropped) to the target count.
// Parameter layout: chunk-MLP parameters first, then the L chunk embeddings.
struct HypernetSpec {
  int input_dim = 0;             // conditioning input width (task embedding or latent)
  std::vector<int> hidden;       // chunk MLP hidden widths
  int chunk_dim = 0;             // chunk embedding size (0 = unchunked)
  int chunk_count = 1;           // L
  int chunk_size = 0;            // outputs per chunk
  int target_count = 0;          // truncation length
  Activation act = Activation::Relu;

  MlpSpec chunk_mlp() const {
    MlpSpec m;
    m.widths.push_back(input_dim + chunk_dim);
    for (int h : hidden) m.widths.push_back(h);
    m.widths.push_back(chunk_size);
    m.act = act;
    return m;
  }

  int mlp_param_count() const { return chunk_mlp().param_count(); }
  int param_count() const { return mlp_param_count() + chunk_count * chunk_dim; }

  void validate() const {
    if (chunk_count < 1 || chunk_size < 1 || target_count < 1)
      throw ShapeError("hypernet: chunk_count/chunk_size/target_count must be positive");
    if (static_cast<long>(chunk_count) * chunk_size < target_count)
      throw ShapeError("hypernet: " + std::to_string(chunk_count) + " chunks of " + std::to_string(chunk_size) +
                       " cannot cover " + std::to_string(target_count) + " outputs");
  }
};

// emb: 1 x input_dim node; params: flat node covering the whole HypernetSpec.
inline int hnet_forward(Tape& t, int emb, int params, const HypernetSpec& spec) {
  spec.validate();
  if (t.val(params).count() != spec.param_count())
    throw ShapeError("hnet_forward: parameter vector has " + std::to_string(t.val(params).count()) +
                     " entries, spec needs " + std::to_string(spec.param_count()));
  MlpSpec mlp = spec.chunk_mlp();
  int mlp_params = t.slice(params, 0, {spec.mlp_param_count()});
  int x;
  if (spec.chunk_dim == 0) {
    x = emb;  // single invocation, no chunk conditioning
  } else {
    int ones = t.constant(Tensor::matrix(spec.chunk_count, 1, std::vector<double>(spec.chunk_count, 1.0)));
    int tiled = t.matmul(ones, t.slice(emb, 0, {1, spec.input_dim}));
    int chunks = t.slice(params, spec.mlp_param_count(), {spec.chunk_count, spec.chunk_dim});
    x = t.concat(tiled, chunks);
  }
  int y = mlp_forward(t, x, mlp_params, mlp);  // chunk_count x chunk_size
  return t.slice(y, 0, {spec.target_count});
}

inline std::vector<double> hnet_apply(const std::vector<double>& emb, const std::vector<double>& params,
                                      const HypernetSpec& spec) {
  Tape t;
  int e = t.constant(Tensor::row(emb));
  int p = t.constant(Tensor::row(params));
  int out = hnet_forward(t, e, p, spec);
  return t.val(out).v;
}

// fan-in scaled Gaussian weights, zero biases
inline std::vector<double> init_mlp_params(const MlpSpec& spec, Rng& rng) {
  std::vector<double> w;
  w.reserve(spec.param_count());
  for (int l = 0; l < spec.layers(); ++l) {
    int fi = spec.widths[l], fo = spec.widths[l + 1];
    double sd = 1.0 / std::sqrt(static_cast<double>(fi));
    for (int i = 0; i < fi * fo; ++i) w.push_back(rng.normal(0.0, sd));
    for (int i = 0; i < fo; ++i) w.push_back(0.0);
  }
  return w;
}

inline std::vector<double> init_embedding(int dim, double sd, Rng& rng) {
  if (sd <= 0) throw std::invalid_argument("init_embedding: sd must be positive");
  return rng.normal_vec(dim, 0.0, sd);
}

inline std::vector<double> init_hypernet_params(const HypernetSpec& spec, double chunk_emb_sd, Rng& rng) {
  std::vector<double> w = init_mlp_params(spec.chunk_mlp(), rng);
  for (int i = 0; i < spec.chunk_count * spec.chunk_dim; ++i) w.push_back(rng.normal(0.0, chunk_emb_sd));
  return w;
}

// Task embedding plus the frozen conditioning outputs used by the continual
// learning regularizer.
struct TaskState {
  int task_id = 0;
  std::vector<double> embedding;
  std::vector<double> theta_star;  // frozen conditioning output (empty until checkpointed)
};

}  // namespace bcl
