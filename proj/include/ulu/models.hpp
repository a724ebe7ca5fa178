#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ulu/graph.hpp"

namespace ulu {

enum class Arch { Mlp, SmallCnn, MiniAttention };

Arch parse_arch(const std::string& name);  // "mlp" | "cnn" | "attn"
std::string arch_name(Arch arch);

// Shared architecture description. activation.kind() == AULU makes every
// nonlinearity an adaptive site (one AdaptiveParams pair per site, or a
// single pair when share_betas is set).
struct ModelConfig {
  Arch arch = Arch::Mlp;
  ActivationSpec activation = ActivationSpec::parse("relu");
  std::vector<int64_t> hidden_sizes = {32};      // Mlp
  std::vector<int64_t> channel_widths = {8, 16}; // SmallCnn: one 3x3 conv per entry
  int64_t embed_dim = 16;                        // MiniAttention
  int64_t patch_size = 4;                        // MiniAttention
  int64_t num_classes = 10;
  std::vector<int64_t> input_shape = {28, 28};   // H, W
  bool share_betas = false;
  double beta_init = AdaptiveParams::kDefaultBeta;
};

// How the raw [N,H,W] image batch is massaged before hitting the Input
// node. Pure data movement; not part of the autodiff graph.
enum class InputPrep { Flat, AddChannel, Patchify };

struct Model {
  Graph graph;
  ParamStore params;
  NodeId input_id = -1;
  NodeId logits_id = -1;
  NodeId loss_id = -1;
  InputPrep prep = InputPrep::Flat;
  int64_t patch_size = 0;
  int activation_sites = 0;

  Tensor prepare_input(const Tensor& images) const;
};

// Deterministic given (config, seed): Kaiming-uniform (fan-in) weights,
// zero biases, beta pairs at config.beta_init. Swapping the activation
// changes neither shapes nor the sampled weights.
Model build(const ModelConfig& config, uint64_t seed);

// [N,H,W] -> [N, P, patch*patch] row-major patch grid; H and W must be
// divisible by patch.
Tensor patchify(const Tensor& images, int64_t patch);

}  // namespace ulu
