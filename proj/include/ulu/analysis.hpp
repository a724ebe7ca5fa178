#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ulu/harness.hpp"

namespace ulu {

// Grid of ULU(alpha1, alpha2) training runs; the grid is
// alpha_values x alpha_values and every cell shares the base config and
// seed, so cells differ only in the alphas.
struct SweepSpec {
  std::vector<double> alpha_values;
  TrainConfig base;
  int parallelism = 1;
};

struct SweepCell {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double final_test_acc = 0.0;
  bool diverged = false;
};

// One run per cell, executed by `parallelism` workers. Results are sorted
// by (alpha1, alpha2) before return, so output is byte-identical to a
// serial run for any worker count. Divergence is recorded in-row.
std::vector<SweepCell> run_sweep(const SweepSpec& spec, const Dataset& ds_train,
                                 const Dataset& ds_test);

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

// A fixed random deep scalar-output network evaluated over a 2-D grid.
// With no activation the network is purely linear (affine landscape):
// used to validate the smoothness score. Weights depend only on
// (layers, width, seed), never on the activation.
struct LandscapeSpec {
  int layers = 6;
  int width = 32;
  std::optional<ActivationSpec> activation;
  double grid_lo = -5.0;
  double grid_hi = 5.0;
  int resolution = 256;
  uint64_t seed = 0;
};

struct LandscapeNet {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

LandscapeNet make_landscape_net(int layers, int width, uint64_t seed);

// matrix[i][j] = net(x_j, y_i) with x, y running over `resolution`
// equispaced points of [grid_lo, grid_hi].
Tensor render_landscape(const LandscapeNet& net, const LandscapeSpec& spec);
Tensor landscape(const LandscapeSpec& spec);

// Mean squared 5-point discrete Laplacian over interior cells: zero for
// affine fields, scale-covariant (score(c*M) = c^2 * score(M)). Requires
// at least 3x3.
double smoothness_score(const Tensor& matrix);

void write_matrix_csv(const Tensor& matrix, const std::string& path);
// 8-bit binary PGM, min-max normalized (constant fields map to 0).
void write_matrix_pgm(const Tensor& matrix, const std::string& path);

struct CompareRow {
  ActivationSpec activation = ActivationSpec::parse("relu");
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population std; 0 for a single run
  int runs = 0;
  int diverged_runs = 0;
};

// Trains each activation `repeats` times with seeds base.seed + 0..r-1;
// rows sorted by mean accuracy descending. Diverged runs count as
// accuracy 0 and are flagged in diverged_runs.
std::vector<CompareRow> compare_table(const std::vector<ActivationSpec>& activations,
                                      const TrainConfig& base, int repeats,
                                      const Dataset& ds_train, const Dataset& ds_test,
                                      int parallelism = 1);

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);

}  // namespace ulu
