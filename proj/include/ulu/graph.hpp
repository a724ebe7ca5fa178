#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ulu/activations.hpp"
#include "ulu/tensor.hpp"

namespace ulu {

using NodeId = int32_t;

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Named learnable tensors plus the adaptive activation sites. Iteration
// order is insertion order, which also fixes the serialization layout.
class ParamStore {
 public:
  size_t add(const std::string& name, Tensor value);
  size_t index_of(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  size_t size() const { return values_.size(); }

  const std::string& name(size_t i) const { return names_[i]; }
  Tensor& value(size_t i) { return values_[i]; }
  const Tensor& value(size_t i) const { return values_[i]; }
  Tensor& value(const std::string& name) { return values_[index_of(name)]; }
  const Tensor& value(const std::string& name) const { return values_[index_of(name)]; }
  Tensor& grad(size_t i) { return grads_[i]; }
  const Tensor& grad(size_t i) const { return grads_[i]; }
  Tensor& grad(const std::string& name) { return grads_[index_of(name)]; }

  // One (beta1, beta2) pair per adaptive activation site (a single shared
  // entry when the model collapses sites).
  std::vector<AdaptiveParams> adaptive;

  // Total element count over the named tensors (adaptive pairs excluded).
  int64_t param_count() const;
  void zero_grads();
  bool values_finite() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, size_t> index_;
};

enum class OpKind {
  Input,
  Param,
  MatMul,
  Conv2d,
  Add,
  BiasAdd,
  Activation,
  MeanPool,
  Flatten,
  SoftmaxCrossEntropy,
  Scale,
  AttentionScores,
  AttentionApply,
};

std::string op_name(OpKind op);

struct Node {
  OpKind op;
  std::vector<NodeId> parents;

  // Static attributes (set at build time).
  std::string param_name;              // Param
  std::optional<ActivationSpec> act;   // Activation with fixed spec
  int adaptive_site = -1;              // Activation routed to store.adaptive
  std::vector<int> pool_axes;          // MeanPool: {2,3} for NCHW, {1} for NPD
  double scale = 1.0;                  // Scale
  bool bias_per_channel = false;       // BiasAdd: dim 1 instead of last dim

  // Per-forward caches.
  Tensor value;
  Tensor grad;
  Tensor saved;  // softmax probabilities / attention weights
};

// Reverse-mode computation record. Parents always have smaller ids, so a
// forward pass is a single in-order sweep and backward the reverse sweep.
// One graph instance is single-threaded; independent instances may run
// concurrently.
class Graph {
 public:
  NodeId input();
  NodeId param(std::string name);
  NodeId matmul(NodeId a, NodeId w);
  // 2-D convolution, stride 1, zero padding (k-1)/2 so spatial size is
  // preserved; weight is [out_ch, in_ch, kh, kw] with odd kh, kw.
  NodeId conv2d(NodeId x, NodeId w);
  NodeId add(NodeId a, NodeId b);
  NodeId bias_add(NodeId x, NodeId bias, bool per_channel = false);
  NodeId activation(NodeId x, ActivationSpec spec);
  NodeId activation_adaptive(NodeId x, int site);
  NodeId mean_pool(NodeId x, std::vector<int> axes);
  NodeId flatten(NodeId x);
  NodeId softmax_cross_entropy(NodeId logits);
  NodeId scale(NodeId x, double factor);
  NodeId attention_scores(NodeId q, NodeId k);
  NodeId attention_apply(NodeId attn, NodeId v);

  // Runs the whole graph on one batch. The single Input node receives
  // `input`; `labels` feed the SoftmaxCrossEntropy node (one label per
  // batch row) and may be empty for graphs without one. Returns the value
  // of the loss node (or of the final node when it is scalar).
  double forward(ParamStore& store, const Tensor& input, const std::vector<int>& labels = {});

  // Fills node grads, store grads and adaptive beta grads. Requires a
  // prior forward.
  void backward(ParamStore& store);

  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  NodeId add_node(Node n);
  NodeId check_id(NodeId id) const;
  [[noreturn]] void fail(NodeId id, const std::string& msg) const;
  void forward_node(NodeId id, ParamStore& store);
  void backward_node(NodeId id, ParamStore& store);

  std::vector<Node> nodes_;
  std::vector<int> labels_;
  NodeId input_node_ = -1;
  NodeId loss_node_ = -1;
  bool forward_done_ = false;
};

}  // namespace ulu
