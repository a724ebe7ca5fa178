#include "ulu/models.hpp"

#include <cmath>
#include <stdexcept>

#include "ulu/rng.hpp"

namespace ulu {

Arch parse_arch(const std::string& name) {
  if (name == "mlp") return Arch::Mlp;
  if (name == "cnn") return Arch::SmallCnn;
  if (name == "attn") return Arch::MiniAttention;
  throw std::invalid_argument("unknown model '" + name + "' (want mlp|cnn|attn)");
}

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::Mlp: return "mlp";
    case Arch::SmallCnn: return "cnn";
    case Arch::MiniAttention: return "attn";
  }
  return "?";
}

namespace {

Tensor kaiming_uniform(const std::vector<int64_t>& shape, int64_t fan_in, Rng& rng) {
  Tensor t(shape);
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

struct Builder {
  const ModelConfig& cfg;
  Model& m;
  Rng rng;
  int sites = 0;

  Builder(const ModelConfig& c, Model& model, uint64_t seed) : cfg(c), m(model), rng(seed) {}

  NodeId linear(NodeId x, int64_t in, int64_t out, const std::string& name) {
    m.params.add(name + ".w", kaiming_uniform({in, out}, in, rng));
    m.params.add(name + ".b", Tensor::zeros({out}));
    NodeId y = m.graph.matmul(x, m.graph.param(name + ".w"));
    return m.graph.bias_add(y, m.graph.param(name + ".b"));
  }

  NodeId conv(NodeId x, int64_t in_ch, int64_t out_ch, const std::string& name) {
    m.params.add(name + ".w", kaiming_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng));
    m.params.add(name + ".b", Tensor::zeros({out_ch}));
    NodeId y = m.graph.conv2d(x, m.graph.param(name + ".w"));
    return m.graph.bias_add(y, m.graph.param(name + ".b"), /*per_channel=*/true);
  }

  NodeId act(NodeId x) {
    if (cfg.activation.adaptive()) {
      int site = cfg.share_betas ? 0 : sites;
      ++sites;
      return m.graph.activation_adaptive(x, site);
    }
    ++sites;
    return m.graph.activation(x, cfg.activation);
  }
};

void validate(const ModelConfig& cfg) {
  if (cfg.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (cfg.input_shape.size() != 2 || cfg.input_shape[0] < 1 || cfg.input_shape[1] < 1) {
    throw std::invalid_argument("input_shape must be [H, W] with H, W >= 1");
  }
  switch (cfg.arch) {
    case Arch::Mlp:
      if (cfg.hidden_sizes.empty()) throw std::invalid_argument("mlp needs >= 1 hidden layer");
      for (int64_t h : cfg.hidden_sizes)
        if (h < 1) throw std::invalid_argument("hidden sizes must be >= 1");
      break;
    case Arch::SmallCnn:
      if (cfg.channel_widths.empty()) throw std::invalid_argument("cnn needs >= 1 conv layer");
      for (int64_t c : cfg.channel_widths)
        if (c < 1) throw std::invalid_argument("channel widths must be >= 1");
      break;
    case Arch::MiniAttention:
      if (cfg.embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
      if (cfg.patch_size < 1 || cfg.input_shape[0] % cfg.patch_size != 0 ||
          cfg.input_shape[1] % cfg.patch_size != 0) {
        throw std::invalid_argument("input " + std::to_string(cfg.input_shape[0]) + "x" +
                                    std::to_string(cfg.input_shape[1]) +
                                    " is not divisible into " + std::to_string(cfg.patch_size) +
                                    "x" + std::to_string(cfg.patch_size) + " patches");
      }
      break;
  }
}

}  // namespace

Tensor patchify(const Tensor& images, int64_t patch) {
  int64_t n = images.dim(0), h = images.dim(1), w = images.dim(2);
  if (h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument("image size not divisible by patch size");
  }
  int64_t gh = h / patch, gw = w / patch;
  int64_t num_patches = gh * gw;
  int64_t patch_dim = patch * patch;
  Tensor out({n, num_patches, patch_dim});
  for (int64_t b = 0; b < n; ++b) {
    const double* img = images.data() + b * h * w;
    for (int64_t pi = 0; pi < gh; ++pi)
      for (int64_t pj = 0; pj < gw; ++pj) {
        double* dst = out.data() + (b * num_patches + pi * gw + pj) * patch_dim;
        for (int64_t u = 0; u < patch; ++u)
          for (int64_t v = 0; v < patch; ++v) {
            dst[u * patch + v] = img[(pi * patch + u) * w + pj * patch + v];
          }
      }
  }
  return out;
}

Tensor Model::prepare_input(const Tensor& images) const {
  switch (prep) {
    case InputPrep::Flat:
      return images;
    case InputPrep::AddChannel: {
      std::vector<int64_t> s = images.shape();
      return images.reshaped({s[0], 1, s[1], s[2]});
    }
    case InputPrep::Patchify:
      return patchify(images, patch_size);
  }
  return images;
}

Model build(const ModelConfig& cfg, uint64_t seed) {
  validate(cfg);
  Model m;
  Builder b(cfg, m, seed);
  int64_t h = cfg.input_shape[0], w = cfg.input_shape[1];
  NodeId x = m.graph.input();
  m.input_id = x;

  switch (cfg.arch) {
    case Arch::Mlp: {
      m.prep = InputPrep::Flat;
      x = m.graph.flatten(x);
      int64_t in = h * w;
      for (size_t i = 0; i < cfg.hidden_sizes.size(); ++i) {
        x = b.linear(x, in, cfg.hidden_sizes[i], "fc" + std::to_string(i + 1));
        x = b.act(x);
        in = cfg.hidden_sizes[i];
      }
      m.logits_id = b.linear(x, in, cfg.num_classes, "head");
      break;
    }

    case Arch::SmallCnn: {
      m.prep = InputPrep::AddChannel;
      int64_t ch = 1;
      for (size_t i = 0; i < cfg.channel_widths.size(); ++i) {
        x = b.conv(x, ch, cfg.channel_widths[i], "conv" + std::to_string(i + 1));
        x = b.act(x);
        ch = cfg.channel_widths[i];
      }
      x = m.graph.mean_pool(x, {2, 3});
      m.logits_id = b.linear(x, ch, cfg.num_classes, "head");
      break;
    }

    case Arch::MiniAttention: {
      m.prep = InputPrep::Patchify;
      m.patch_size = cfg.patch_size;
      int64_t patch_dim = cfg.patch_size * cfg.patch_size;
      int64_t d = cfg.embed_dim;
      NodeId e = b.linear(x, patch_dim, d, "embed");
      NodeId q = m.graph.matmul(e, m.graph.param("attn.wq"));
      NodeId k = m.graph.matmul(e, m.graph.param("attn.wk"));
      NodeId v = m.graph.matmul(e, m.graph.param("attn.wv"));
      m.params.add("attn.wq", kaiming_uniform({d, d}, d, b.rng));
      m.params.add("attn.wk", kaiming_uniform({d, d}, d, b.rng));
      m.params.add("attn.wv", kaiming_uniform({d, d}, d, b.rng));
      NodeId attn = m.graph.attention_scores(q, k);
      NodeId ctx = m.graph.attention_apply(attn, v);
      NodeId ff = b.linear(ctx, d, d, "ff");
      ff = b.act(ff);
      NodeId pooled = m.graph.mean_pool(ff, {1});
      m.logits_id = b.linear(pooled, d, cfg.num_classes, "head");
      break;
    }
  }

  m.loss_id = m.graph.softmax_cross_entropy(m.logits_id);
  m.activation_sites = b.sites;

  if (cfg.activation.adaptive()) {
    int pairs = cfg.share_betas ? 1 : b.sites;
    m.params.adaptive.assign(static_cast<size_t>(pairs),
                             AdaptiveParams{cfg.beta_init, cfg.beta_init});
  }
  return m;
}

}  // namespace ulu
