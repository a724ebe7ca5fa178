#include "ulu/graph.hpp"

#include <algorithm>
#include <cmath>

namespace ulu {

size_t ParamStore::add(const std::string& name, Tensor value) {
  if (has(name)) throw GraphError("duplicate parameter name '" + name + "'");
  size_t idx = values_.size();
  names_.push_back(name);
  grads_.emplace_back(Tensor::zeros(value.shape()));
  values_.push_back(std::move(value));
  index_[name] = idx;
  return idx;
}

size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw GraphError("unknown parameter '" + name + "'");
  return it->second;
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const Tensor& t : values_) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (Tensor& g : grads_) g.fill(0.0);
  for (AdaptiveParams& p : adaptive) p.zero_grad();
}

bool ParamStore::values_finite() const {
  for (const Tensor& t : values_) {
    if (!t.all_finite()) return false;
  }
  for (const AdaptiveParams& p : adaptive) {
    if (!std::isfinite(p.beta1) || !std::isfinite(p.beta2)) return false;
  }
  return true;
}

std::string op_name(OpKind op) {
  switch (op) {
    case OpKind::Input: return "Input";
    case OpKind::Param: return "Param";
    case OpKind::MatMul: return "MatMul";
    case OpKind::Conv2d: return "Conv2d";
    case OpKind::Add: return "Add";
    case OpKind::BiasAdd: return "BiasAdd";
    case OpKind::Activation: return "Activation";
    case OpKind::MeanPool: return "MeanPool";
    case OpKind::Flatten: return "Flatten";
    case OpKind::SoftmaxCrossEntropy: return "SoftmaxCrossEntropy";
    case OpKind::Scale: return "Scale";
    case OpKind::AttentionScores: return "AttentionScores";
    case OpKind::AttentionApply: return "AttentionApply";
  }
  return "?";
}

NodeId Graph::add_node(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::check_id(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
    throw GraphError("parent id " + std::to_string(id) + " out of range");
  }
  return id;
}

void Graph::fail(NodeId id, const std::string& msg) const {
  throw GraphError("node " + std::to_string(id) + " (" +
                   op_name(nodes_[static_cast<size_t>(id)].op) + "): " + msg);
}

NodeId Graph::input() {
  if (input_node_ >= 0) throw GraphError("graph already has an Input node");
  Node n;
  n.op = OpKind::Input;
  input_node_ = add_node(std::move(n));
  return input_node_;
}

NodeId Graph::param(std::string name) {
  Node n;
  n.op = OpKind::Param;
  n.param_name = std::move(name);
  return add_node(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId w) {
  Node n;
  n.op = OpKind::MatMul;
  n.parents = {check_id(a), check_id(w)};
  return add_node(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w) {
  Node n;
  n.op = OpKind::Conv2d;
  n.parents = {check_id(x), check_id(w)};
  return add_node(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Add;
  n.parents = {check_id(a), check_id(b)};
  return add_node(std::move(n));
}

NodeId Graph::bias_add(NodeId x, NodeId bias, bool per_channel) {
  Node n;
  n.op = OpKind::BiasAdd;
  n.parents = {check_id(x), check_id(bias)};
  n.bias_per_channel = per_channel;
  return add_node(std::move(n));
}

NodeId Graph::activation(NodeId x, ActivationSpec spec) {
  Node n;
  n.op = OpKind::Activation;
  n.parents = {check_id(x)};
  n.act = std::move(spec);
  return add_node(std::move(n));
}

NodeId Graph::activation_adaptive(NodeId x, int site) {
  if (site < 0) throw GraphError("adaptive activation site must be >= 0");
  Node n;
  n.op = OpKind::Activation;
  n.parents = {check_id(x)};
  n.adaptive_site = site;
  return add_node(std::move(n));
}

NodeId Graph::mean_pool(NodeId x, std::vector<int> axes) {
  Node n;
  n.op = OpKind::MeanPool;
  n.parents = {check_id(x)};
  n.pool_axes = std::move(axes);
  return add_node(std::move(n));
}

NodeId Graph::flatten(NodeId x) {
  Node n;
  n.op = OpKind::Flatten;
  n.parents = {check_id(x)};
  return add_node(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits) {
  if (loss_node_ >= 0) throw GraphError("graph already has a SoftmaxCrossEntropy node");
  Node n;
  n.op = OpKind::SoftmaxCrossEntropy;
  n.parents = {check_id(logits)};
  loss_node_ = add_node(std::move(n));
  return loss_node_;
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.op = OpKind::Scale;
  n.parents = {check_id(x)};
  n.scale = factor;
  return add_node(std::move(n));
}

NodeId Graph::attention_scores(NodeId q, NodeId k) {
  Node n;
  n.op = OpKind::AttentionScores;
  n.parents = {check_id(q), check_id(k)};
  return add_node(std::move(n));
}

NodeId Graph::attention_apply(NodeId attn, NodeId v) {
  Node n;
  n.op = OpKind::AttentionApply;
  n.parents = {check_id(attn), check_id(v)};
  return add_node(std::move(n));
}

void Graph::forward_node(NodeId id, ParamStore& store) {
  Node& n = nodes_[static_cast<size_t>(id)];
  auto parent_value = [&](int i) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.parents[static_cast<size_t>(i)])].value;
  };

  switch (n.op) {
    case OpKind::Input:
      break;  // bound by forward()

    case OpKind::Param:
      n.value = store.value(n.param_name);
      break;

    case OpKind::MatMul: {
      const Tensor& a = parent_value(0);
      const Tensor& w = parent_value(1);
      if (a.rank() < 2 || w.rank() != 2) fail(id, "expects lhs rank >= 2 and rhs rank 2");
      int64_t k = a.shape().back();
      if (k != w.dim(0)) {
        fail(id, "lhs last dim " + std::to_string(k) + " != rhs rows " + std::to_string(w.dim(0)));
      }
      int64_t rows = k > 0 ? a.numel() / k : 0;
      int64_t cols = w.dim(1);
      std::vector<int64_t> out_shape(a.shape().begin(), a.shape().end() - 1);
      out_shape.push_back(cols);
      Tensor y(out_shape);
      const double* ad = a.data();
      const double* wd = w.data();
      double* yd = y.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* arow = ad + r * k;
        double* yrow = yd + r * cols;
        for (int64_t kk = 0; kk < k; ++kk) {
          double av = arow[kk];
          const double* wrow = wd + kk * cols;
          for (int64_t j = 0; j < cols; ++j) yrow[j] += av * wrow[j];
        }
      }
      n.value = std::move(y);
      break;
    }

    case OpKind::Conv2d: {
      const Tensor& x = parent_value(0);
      const Tensor& w = parent_value(1);
      if (x.rank() != 4 || w.rank() != 4) fail(id, "expects input [N,C,H,W] and weight [F,C,kh,kw]");
      if (x.dim(1) != w.dim(1)) {
        fail(id, "input channels " + std::to_string(x.dim(1)) + " != weight channels " +
                     std::to_string(w.dim(1)));
      }
      if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0) fail(id, "kernel dims must be odd");
      int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
      int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
      int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
      Tensor y({N, F, H, W});
      for (int64_t b = 0; b < N; ++b) {
        for (int64_t f = 0; f < F; ++f) {
          double* yplane = y.data() + ((b * F + f) * H) * W;
          for (int64_t c = 0; c < C; ++c) {
            const double* xplane = x.data() + ((b * C + c) * H) * W;
            for (int64_t u = 0; u < kh; ++u) {
              for (int64_t v = 0; v < kw; ++v) {
                double wv = w.at4(f, c, u, v);
                int64_t i_lo = std::max<int64_t>(0, ph - u);
                int64_t i_hi = std::min<int64_t>(H, H + ph - u);
                int64_t j_lo = std::max<int64_t>(0, pw - v);
                int64_t j_hi = std::min<int64_t>(W, W + pw - v);
                for (int64_t i = i_lo; i < i_hi; ++i) {
                  const double* xrow = xplane + (i + u - ph) * W + (v - pw);
                  double* yrow = yplane + i * W;
                  for (int64_t j = j_lo; j < j_hi; ++j) yrow[j] += wv * xrow[j];
                }
              }
            }
          }
        }
      }
      n.value = std::move(y);
      break;
    }

    case OpKind::Add: {
      const Tensor& a = parent_value(0);
      const Tensor& b = parent_value(1);
      if (!a.same_shape(b)) fail(id, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      Tensor y(a.shape());
      for (int64_t i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
      n.value = std::move(y);
      break;
    }

    case OpKind::BiasAdd: {
      const Tensor& x = parent_value(0);
      const Tensor& bias = parent_value(1);
      if (bias.rank() != 1) fail(id, "bias must be rank 1");
      if (x.rank() < 2) fail(id, "input must be rank >= 2");
      int64_t ch = n.bias_per_channel ? x.dim(1) : x.shape().back();
      if (bias.dim(0) != ch) {
        fail(id, "bias length " + std::to_string(bias.dim(0)) + " != broadcast dim " + std::to_string(ch));
      }
      Tensor y(x.shape());
      if (n.bias_per_channel) {
        int64_t lead = x.dim(0);
        int64_t inner = x.numel() / (lead * ch);
        for (int64_t l = 0; l < lead; ++l)
          for (int64_t c = 0; c < ch; ++c) {
            double bv = bias[c];
            const double* xr = x.data() + (l * ch + c) * inner;
            double* yr = y.data() + (l * ch + c) * inner;
            for (int64_t s = 0; s < inner; ++s) yr[s] = xr[s] + bv;
          }
      } else {
        int64_t rows = x.numel() / ch;
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = x.data() + r * ch;
          double* yr = y.data() + r * ch;
          for (int64_t c = 0; c < ch; ++c) yr[c] = xr[c] + bias[c];
        }
      }
      n.value = std::move(y);
      break;
    }

    case OpKind::Activation: {
      const Tensor& x = parent_value(0);
      Tensor y(x.shape());
      if (n.adaptive_site >= 0) {
        if (static_cast<size_t>(n.adaptive_site) >= store.adaptive.size()) {
          fail(id, "adaptive site " + std::to_string(n.adaptive_site) + " out of range");
        }
        const AdaptiveParams& p = store.adaptive[static_cast<size_t>(n.adaptive_site)];
        for (int64_t i = 0; i < x.numel(); ++i) y[i] = aulu_eval(x[i], p);
      } else {
        for (int64_t i = 0; i < x.numel(); ++i) y[i] = reference_eval(*n.act, x[i]);
      }
      n.value = std::move(y);
      break;
    }

    case OpKind::MeanPool: {
      const Tensor& x = parent_value(0);
      if (x.rank() == 4 && n.pool_axes == std::vector<int>{2, 3}) {
        int64_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
        Tensor y({N, C});
        for (int64_t b = 0; b < N; ++b)
          for (int64_t c = 0; c < C; ++c) {
            const double* xp = x.data() + (b * C + c) * S;
            double acc = 0.0;
            for (int64_t s = 0; s < S; ++s) acc += xp[s];
            y.at2(b, c) = acc / static_cast<double>(S);
          }
        n.value = std::move(y);
      } else if (x.rank() == 3 && n.pool_axes == std::vector<int>{1}) {
        int64_t N = x.dim(0), P = x.dim(1), D = x.dim(2);
        Tensor y({N, D});
        for (int64_t b = 0; b < N; ++b) {
          for (int64_t p = 0; p < P; ++p) {
            const double* xp = x.data() + (b * P + p) * D;
            double* yp = y.data() + b * D;
            for (int64_t d = 0; d < D; ++d) yp[d] += xp[d];
          }
          double* yp = y.data() + b * D;
          for (int64_t d = 0; d < D; ++d) yp[d] /= static_cast<double>(P);
        }
        n.value = std::move(y);
      } else {
        fail(id, "unsupported pooling: rank " + std::to_string(x.rank()));
      }
      break;
    }

    case OpKind::Flatten: {
      const Tensor& x = parent_value(0);
      if (x.rank() < 1) fail(id, "input must be rank >= 1");
      int64_t lead = x.dim(0);
      int64_t rest = lead > 0 ? x.numel() / lead : 0;
      n.value = x.reshaped({lead, rest});
      break;
    }

    case OpKind::SoftmaxCrossEntropy: {
      const Tensor& logits = parent_value(0);
      if (logits.rank() != 2) fail(id, "logits must be [N, classes]");
      int64_t N = logits.dim(0), C = logits.dim(1);
      if (static_cast<int64_t>(labels_.size()) != N) {
        fail(id, "got " + std::to_string(labels_.size()) + " labels for batch " + std::to_string(N));
      }
      Tensor probs({N, C});
      double loss = 0.0;
      for (int64_t b = 0; b < N; ++b) {
        const double* row = logits.data() + b * C;
        double mx = row[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
        double logsum = mx + std::log(sum);
        for (int64_t c = 0; c < C; ++c) probs.at2(b, c) = std::exp(row[c] - logsum);
        int label = labels_[static_cast<size_t>(b)];
        if (label < 0 || label >= C) fail(id, "label " + std::to_string(label) + " out of range");
        loss += logsum - row[label];
      }
      n.saved = std::move(probs);
      n.value = Tensor::scalar(loss / static_cast<double>(N));
      break;
    }

    case OpKind::Scale: {
      const Tensor& x = parent_value(0);
      Tensor y(x.shape());
      for (int64_t i = 0; i < x.numel(); ++i) y[i] = n.scale * x[i];
      n.value = std::move(y);
      break;
    }

    case OpKind::AttentionScores: {
      const Tensor& q = parent_value(0);
      const Tensor& k = parent_value(1);
      if (q.rank() != 3 || !q.same_shape(k)) fail(id, "expects Q, K of equal shape [N,P,D]");
      int64_t N = q.dim(0), P = q.dim(1), D = q.dim(2);
      double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
      Tensor attn({N, P, P});
      std::vector<double> srow(static_cast<size_t>(P));
      for (int64_t b = 0; b < N; ++b) {
        for (int64_t i = 0; i < P; ++i) {
          const double* qi = q.data() + (b * P + i) * D;
          for (int64_t j = 0; j < P; ++j) {
            const double* kj = k.data() + (b * P + j) * D;
            double dot = 0.0;
            for (int64_t d = 0; d < D; ++d) dot += qi[d] * kj[d];
            srow[static_cast<size_t>(j)] = dot * inv_sqrt_d;
          }
          double mx = srow[0];
          for (int64_t j = 1; j < P; ++j) mx = std::max(mx, srow[static_cast<size_t>(j)]);
          double sum = 0.0;
          for (int64_t j = 0; j < P; ++j) {
            double e = std::exp(srow[static_cast<size_t>(j)] - mx);
            attn.at3(b, i, j) = e;
            sum += e;
          }
          for (int64_t j = 0; j < P; ++j) attn.at3(b, i, j) /= sum;
        }
      }
      n.value = std::move(attn);
      break;
    }

    case OpKind::AttentionApply: {
      const Tensor& attn = parent_value(0);
      const Tensor& v = parent_value(1);
      if (attn.rank() != 3 || v.rank() != 3 || attn.dim(0) != v.dim(0) ||
          attn.dim(1) != attn.dim(2) || attn.dim(2) != v.dim(1)) {
        fail(id, "expects weights [N,P,P] and values [N,P,D]");
      }
      int64_t N = v.dim(0), P = v.dim(1), D = v.dim(2);
      Tensor y({N, P, D});
      for (int64_t b = 0; b < N; ++b)
        for (int64_t i = 0; i < P; ++i) {
          double* yrow = y.data() + (b * P + i) * D;
          for (int64_t j = 0; j < P; ++j) {
            double a = attn.at3(b, i, j);
            const double* vrow = v.data() + (b * P + j) * D;
            for (int64_t d = 0; d < D; ++d) yrow[d] += a * vrow[d];
          }
        }
      n.value = std::move(y);
      break;
    }
  }
}

double Graph::forward(ParamStore& store, const Tensor& input, const std::vector<int>& labels) {
  if (input_node_ < 0) throw GraphError("graph has no Input node");
  labels_ = labels;
  nodes_[static_cast<size_t>(input_node_)].value = input;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) forward_node(id, store);
  forward_done_ = true;
  NodeId out = loss_node_ >= 0 ? loss_node_ : static_cast<NodeId>(nodes_.size() - 1);
  const Tensor& v = nodes_[static_cast<size_t>(out)].value;
  return v.numel() == 1 ? v[0] : 0.0;
}

void Graph::backward_node(NodeId id, ParamStore& store) {
  Node& n = nodes_[static_cast<size_t>(id)];
  auto parent = [&](int i) -> Node& {
    return nodes_[static_cast<size_t>(n.parents[static_cast<size_t>(i)])];
  };

  switch (n.op) {
    case OpKind::Input:
      break;

    case OpKind::Param: {
      Tensor& g = store.grad(n.param_name);
      for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i];
      break;
    }

    case OpKind::MatMul: {
      Node& a = parent(0);
      Node& w = parent(1);
      int64_t k = a.value.shape().back();
      int64_t rows = a.value.numel() / k;
      int64_t cols = w.value.dim(1);
      const double* ad = a.value.data();
      const double* wd = w.value.data();
      const double* gd = n.grad.data();
      double* gad = a.grad.data();
      double* gwd = w.grad.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* grow = gd + r * cols;
        const double* arow = ad + r * k;
        double* garow = gad + r * k;
        for (int64_t kk = 0; kk < k; ++kk) {
          const double* wrow = wd + kk * cols;
          double* gwrow = gwd + kk * cols;
          double acc = 0.0;
          double av = arow[kk];
          for (int64_t j = 0; j < cols; ++j) {
            acc += grow[j] * wrow[j];
            gwrow[j] += av * grow[j];
          }
          garow[kk] += acc;
        }
      }
      break;
    }

    case OpKind::Conv2d: {
      Node& xn = parent(0);
      Node& wn = parent(1);
      const Tensor& x = xn.value;
      const Tensor& w = wn.value;
      int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
      int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
      int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
      for (int64_t b = 0; b < N; ++b) {
        for (int64_t f = 0; f < F; ++f) {
          const double* gplane = n.grad.data() + ((b * F + f) * H) * W;
          for (int64_t c = 0; c < C; ++c) {
            const double* xplane = x.data() + ((b * C + c) * H) * W;
            double* gxplane = xn.grad.data() + ((b * C + c) * H) * W;
            for (int64_t u = 0; u < kh; ++u) {
              for (int64_t v = 0; v < kw; ++v) {
                double wv = w.at4(f, c, u, v);
                double gw_acc = 0.0;
                int64_t i_lo = std::max<int64_t>(0, ph - u);
                int64_t i_hi = std::min<int64_t>(H, H + ph - u);
                int64_t j_lo = std::max<int64_t>(0, pw - v);
                int64_t j_hi = std::min<int64_t>(W, W + pw - v);
                for (int64_t i = i_lo; i < i_hi; ++i) {
                  const double* grow = gplane + i * W;
                  const double* xrow = xplane + (i + u - ph) * W + (v - pw);
                  double* gxrow = gxplane + (i + u - ph) * W + (v - pw);
                  for (int64_t j = j_lo; j < j_hi; ++j) {
                    gw_acc += grow[j] * xrow[j];
                    gxrow[j] += grow[j] * wv;
                  }
                }
                wn.grad.at4(f, c, u, v) += gw_acc;
              }
            }
          }
        }
      }
      break;
    }

    case OpKind::Add: {
      Node& a = parent(0);
      Node& b = parent(1);
      for (int64_t i = 0; i < n.grad.numel(); ++i) {
        a.grad[i] += n.grad[i];
        b.grad[i] += n.grad[i];
      }
      break;
    }

    case OpKind::BiasAdd: {
      Node& xn = parent(0);
      Node& bn = parent(1);
      int64_t ch = bn.value.dim(0);
      if (n.bias_per_channel) {
        int64_t lead = xn.value.dim(0);
        int64_t inner = xn.value.numel() / (lead * ch);
        for (int64_t l = 0; l < lead; ++l)
          for (int64_t c = 0; c < ch; ++c) {
            const double* gr = n.grad.data() + (l * ch + c) * inner;
            double* gxr = xn.grad.data() + (l * ch + c) * inner;
            double acc = 0.0;
            for (int64_t s = 0; s < inner; ++s) {
              gxr[s] += gr[s];
              acc += gr[s];
            }
            bn.grad[c] += acc;
          }
      } else {
        int64_t rows = xn.value.numel() / ch;
        for (int64_t r = 0; r < rows; ++r) {
          const double* gr = n.grad.data() + r * ch;
          double* gxr = xn.grad.data() + r * ch;
          for (int64_t c = 0; c < ch; ++c) {
            gxr[c] += gr[c];
            bn.grad[c] += gr[c];
          }
        }
      }
      break;
    }

    case OpKind::Activation: {
      Node& xn = parent(0);
      const Tensor& x = xn.value;
      if (n.adaptive_site >= 0) {
        AdaptiveParams& p = store.adaptive[static_cast<size_t>(n.adaptive_site)];
        double gb1 = 0.0, gb2 = 0.0;
        for (int64_t i = 0; i < x.numel(); ++i) {
          double g = n.grad[i];
          xn.grad[i] += g * aulu_dx(x[i], p);
          BetaGrad bg = aulu_grad_beta(x[i], p);
          gb1 += g * bg.d_beta1;
          gb2 += g * bg.d_beta2;
        }
        p.grad_beta1 += gb1;
        p.grad_beta2 += gb2;
      } else {
        for (int64_t i = 0; i < x.numel(); ++i) {
          xn.grad[i] += n.grad[i] * reference_dx(*n.act, x[i]);
        }
      }
      break;
    }

    case OpKind::MeanPool: {
      Node& xn = parent(0);
      const Tensor& x = xn.value;
      if (x.rank() == 4) {
        int64_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
        double inv = 1.0 / static_cast<double>(S);
        for (int64_t b = 0; b < N; ++b)
          for (int64_t c = 0; c < C; ++c) {
            double g = n.grad.at2(b, c) * inv;
            double* gx = xn.grad.data() + (b * C + c) * S;
            for (int64_t s = 0; s < S; ++s) gx[s] += g;
          }
      } else {
        int64_t N = x.dim(0), P = x.dim(1), D = x.dim(2);
        double inv = 1.0 / static_cast<double>(P);
        for (int64_t b = 0; b < N; ++b)
          for (int64_t p = 0; p < P; ++p) {
            const double* gr = n.grad.data() + b * D;
            double* gx = xn.grad.data() + (b * P + p) * D;
            for (int64_t d = 0; d < D; ++d) gx[d] += gr[d] * inv;
          }
      }
      break;
    }

    case OpKind::Flatten: {
      Node& xn = parent(0);
      for (int64_t i = 0; i < n.grad.numel(); ++i) xn.grad[i] += n.grad[i];
      break;
    }

    case OpKind::SoftmaxCrossEntropy: {
      Node& ln = parent(0);
      int64_t N = ln.value.dim(0), C = ln.value.dim(1);
      double g = n.grad[0] / static_cast<double>(N);
      for (int64_t b = 0; b < N; ++b) {
        int label = labels_[static_cast<size_t>(b)];
        for (int64_t c = 0; c < C; ++c) {
          double delta = (c == label) ? 1.0 : 0.0;
          ln.grad.at2(b, c) += g * (n.saved.at2(b, c) - delta);
        }
      }
      break;
    }

    case OpKind::Scale: {
      Node& xn = parent(0);
      for (int64_t i = 0; i < n.grad.numel(); ++i) xn.grad[i] += n.scale * n.grad[i];
      break;
    }

    case OpKind::AttentionScores: {
      Node& qn = parent(0);
      Node& kn = parent(1);
      const Tensor& q = qn.value;
      const Tensor& k = kn.value;
      int64_t N = q.dim(0), P = q.dim(1), D = q.dim(2);
      double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
      std::vector<double> ds(static_cast<size_t>(P));
      for (int64_t b = 0; b < N; ++b) {
        for (int64_t i = 0; i < P; ++i) {
          // softmax backward on row i
          double dot = 0.0;
          for (int64_t j = 0; j < P; ++j) dot += n.grad.at3(b, i, j) * n.value.at3(b, i, j);
          for (int64_t j = 0; j < P; ++j) {
            ds[static_cast<size_t>(j)] =
                n.value.at3(b, i, j) * (n.grad.at3(b, i, j) - dot) * inv_sqrt_d;
          }
          const double* qi = q.data() + (b * P + i) * D;
          double* gqi = qn.grad.data() + (b * P + i) * D;
          for (int64_t j = 0; j < P; ++j) {
            double dsj = ds[static_cast<size_t>(j)];
            const double* kj = k.data() + (b * P + j) * D;
            double* gkj = kn.grad.data() + (b * P + j) * D;
            for (int64_t d = 0; d < D; ++d) {
              gqi[d] += dsj * kj[d];
              gkj[d] += dsj * qi[d];
            }
          }
        }
      }
      break;
    }

    case OpKind::AttentionApply: {
      Node& an = parent(0);
      Node& vn = parent(1);
      const Tensor& attn = an.value;
      const Tensor& v = vn.value;
      int64_t N = v.dim(0), P = v.dim(1), D = v.dim(2);
      for (int64_t b = 0; b < N; ++b)
        for (int64_t i = 0; i < P; ++i) {
          const double* grow = n.grad.data() + (b * P + i) * D;
          for (int64_t j = 0; j < P; ++j) {
            const double* vrow = v.data() + (b * P + j) * D;
            double* gvrow = vn.grad.data() + (b * P + j) * D;
            double a = attn.at3(b, i, j);
            double acc = 0.0;
            for (int64_t d = 0; d < D; ++d) {
              acc += grow[d] * vrow[d];
              gvrow[d] += a * grow[d];
            }
            an.grad.at3(b, i, j) += acc;
          }
        }
      break;
    }
  }
}

void Graph::backward(ParamStore& store) {
  if (!forward_done_) throw GraphError("backward called before forward");
  NodeId out = loss_node_ >= 0 ? loss_node_ : static_cast<NodeId>(nodes_.size() - 1);
  if (nodes_[static_cast<size_t>(out)].value.numel() != 1) {
    fail(out, "backward requires a scalar output node");
  }
  for (Node& n : nodes_) {
    n.grad = Tensor::zeros(n.value.shape());
  }
  store.zero_grads();
  nodes_[static_cast<size_t>(out)].grad[0] = 1.0;
  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    backward_node(id, store);
  }
}

}  // namespace ulu
