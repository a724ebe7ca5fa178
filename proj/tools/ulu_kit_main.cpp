// ulu-kit: activation-family experiments as reproducible subcommands.
// Exit codes: 0 success, 1 validation failure, 2 usage error.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "ulu/analysis.hpp"
#include "ulu/data.hpp"
#include "ulu/harness.hpp"
#include "ulu/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Dataset construction is pinned to fixed seeds so every subcommand sees
// identical data regardless of --seed; --seed controls init and shuffling.
constexpr uint64_t kBlobSeed = 1234;
constexpr uint64_t kSplitSeed = 7;

struct SharedOpts {
  uint64_t seed = 0;
  std::string out_dir = "out";
  std::string data_dir;
  bool synthetic = false;
  int64_t train_n = 2000;
  int64_t test_n = 1000;
};

void add_shared(CLI::App* cmd, SharedOpts& o, bool with_data) {
  cmd->add_option("--seed", o.seed, "base RNG seed");
  cmd->add_option("--out-dir", o.out_dir, "output directory (created if absent)");
  if (with_data) {
    cmd->add_option("--data-dir", o.data_dir, "directory with MNIST IDX files");
    cmd->add_flag("--synthetic", o.synthetic, "use the synthetic blob dataset");
    cmd->add_option("--train-n", o.train_n, "training subset size");
    cmd->add_option("--test-n", o.test_n, "test subset size");
  }
}

std::pair<ulu::Dataset, ulu::Dataset> resolve_data(const SharedOpts& o) {
  if (o.synthetic) {
    int64_t per_class = (o.train_n + o.test_n + 9) / 10;
    ulu::Dataset all = ulu::synthetic_blobs(10, per_class, 28, kBlobSeed);
    return ulu::subset_split(all, o.train_n, o.test_n, kSplitSeed);
  }
  std::string dir = o.data_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("ULU_DATA_DIR")) dir = env;
  }
  if (dir.empty()) dir = "data";
  fs::path images = fs::path(dir) / "train-images-idx3-ubyte";
  fs::path labels = fs::path(dir) / "train-labels-idx1-ubyte";
  if (!fs::exists(images) || !fs::exists(labels)) {
    throw std::runtime_error("MNIST files not found under '" + dir +
                             "' (expected train-images-idx3-ubyte / train-labels-idx1-ubyte); "
                             "pass --data-dir, set ULU_DATA_DIR, or use --synthetic");
  }
  ulu::Dataset all = ulu::load_idx(images.string(), labels.string());
  return ulu::subset_split(all, o.train_n, o.test_n, kSplitSeed);
}

void ensure_out_dir(const SharedOpts& o) { fs::create_directories(o.out_dir); }

void write_config_echo(const SharedOpts& o, const std::string& subcommand, json extra) {
  extra["subcommand"] = subcommand;
  extra["seed"] = o.seed;
  extra["out_dir"] = o.out_dir;
  std::ofstream os(fs::path(o.out_dir) / "config.json");
  os << extra.dump(2) << "\n";
}

json data_echo(const SharedOpts& o) {
  json j;
  j["synthetic"] = o.synthetic;
  j["data_dir"] = o.data_dir;
  j["train_n"] = o.train_n;
  j["test_n"] = o.test_n;
  return j;
}

ulu::TrainConfig make_train_config(const SharedOpts& shared, const std::string& model,
                                   const std::string& activation, int64_t epochs,
                                   int64_t batch_size, double lr, double momentum, double wd,
                                   bool share_betas, bool freeze_betas) {
  ulu::TrainConfig cfg;
  cfg.model.arch = ulu::parse_arch(model);
  cfg.model.activation = ulu::ActivationSpec::parse(activation);
  cfg.model.share_betas = share_betas;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.base_lr = lr;
  cfg.momentum = momentum;
  cfg.weight_decay = wd;
  cfg.seed = shared.seed;
  cfg.freeze_betas = freeze_betas;
  return cfg;
}

// --- check-gradients -------------------------------------------------------

bool fd_straddles_split(ulu::ActivationKind kind) {
  using K = ulu::ActivationKind;
  return kind == K::ULU || kind == K::AULU || kind == K::ReLU || kind == K::LeakyReLU ||
         kind == K::ELU || kind == K::SELU;
}

struct GradCheckRow {
  std::string name;
  double worst_abs = 0.0;
  double worst_excess = 0.0;  // err / allowance; > 1 fails
  bool pass = true;
};

GradCheckRow check_activation_dx(const ulu::ActivationSpec& spec, int grid_points, double tol) {
  GradCheckRow row;
  row.name = spec.to_string();
  bool skip_near_zero = fd_straddles_split(spec.kind());
  for (int i = 0; i < grid_points; ++i) {
    double x = -10.0 + 20.0 * i / static_cast<double>(grid_points - 1);
    // Central differences are invalid across a piecewise split; the x = 0
    // behavior of those kinds is covered by exact one-sided checks.
    if (skip_near_zero && std::fabs(x) < 1e-4) continue;
    double analytic = ulu::reference_dx(spec, x);
    double fd = ulu::fd_derivative([&](double t) { return ulu::reference_eval(spec, t); }, x);
    double err = std::fabs(fd - analytic);
    double allow = std::max(tol * std::fabs(analytic), 1e-9);
    row.worst_abs = std::max(row.worst_abs, err);
    row.worst_excess = std::max(row.worst_excess, err / allow);
  }
  row.pass = row.worst_excess <= 1.0;
  return row;
}

GradCheckRow check_beta_gradients(int grid_points, double tol) {
  GradCheckRow row;
  row.name = "aulu d/dbeta";
  ulu::AdaptiveParams base;
  for (int i = 0; i < grid_points; ++i) {
    double x = -10.0 + 20.0 * i / static_cast<double>(grid_points - 1);
    ulu::BetaGrad g = ulu::aulu_grad_beta(x, base);
    double fd1 = ulu::fd_derivative(
        [&](double b) {
          ulu::AdaptiveParams p = base;
          p.beta1 = b;
          return ulu::aulu_eval(x, p);
        },
        base.beta1);
    double fd2 = ulu::fd_derivative(
        [&](double b) {
          ulu::AdaptiveParams p = base;
          p.beta2 = b;
          return ulu::aulu_eval(x, p);
        },
        base.beta2);
    for (auto [fd, an] : {std::pair{fd1, g.d_beta1}, std::pair{fd2, g.d_beta2}}) {
      double err = std::fabs(fd - an);
      double allow = std::max(tol * std::fabs(an), 1e-9);
      row.worst_abs = std::max(row.worst_abs, err);
      row.worst_excess = std::max(row.worst_excess, err / allow);
    }
  }
  row.pass = row.worst_excess <= 1.0;
  return row;
}

int cmd_check_gradients(int grid_points, double tol) {
  std::vector<ulu::ActivationSpec> specs = {
      ulu::ActivationSpec::parse("ulu(0.3,0.8)"), ulu::ActivationSpec::parse("ulu(0.5,0.5)"),
      ulu::ActivationSpec::parse("ulu(1.5,2.0)"), ulu::ActivationSpec::parse("aulu"),
      ulu::ActivationSpec::parse("relu"),         ulu::ActivationSpec::parse("leaky_relu(0.01)"),
      ulu::ActivationSpec::parse("silu"),         ulu::ActivationSpec::parse("swish(1.0)"),
      ulu::ActivationSpec::parse("gelu"),         ulu::ActivationSpec::parse("mish"),
      ulu::ActivationSpec::parse("elu"),          ulu::ActivationSpec::parse("selu"),
      ulu::ActivationSpec::parse("tanh"),         ulu::ActivationSpec::parse("sigmoid"),
  };
  bool all_pass = true;
  std::printf("%-18s %14s %12s  %s\n", "activation", "max_abs_err", "err/allow", "status");
  for (const auto& spec : specs) {
    GradCheckRow row = check_activation_dx(spec, grid_points, tol);
    all_pass = all_pass && row.pass;
    std::printf("%-18s %14.3e %12.3e  %s\n", row.name.c_str(), row.worst_abs, row.worst_excess,
                row.pass ? "PASS" : "FAIL");
  }
  GradCheckRow beta = check_beta_gradients(grid_points, tol);
  all_pass = all_pass && beta.pass;
  std::printf("%-18s %14.3e %12.3e  %s\n", beta.name.c_str(), beta.worst_abs, beta.worst_excess,
              beta.pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 1;
}

// --- landscape helpers ------------------------------------------------------

std::string file_tag(const std::string& activation) {
  std::string tag;
  for (char c : activation) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') {
      tag.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!tag.empty() && tag.back() != '_') {
      tag.push_back('_');
    }
  }
  while (!tag.empty() && tag.back() == '_') tag.pop_back();
  return tag;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ULU activation family toolkit"};
  app.require_subcommand(1);

  // check-gradients
  auto* check = app.add_subcommand("check-gradients", "finite-difference audit of all derivatives");
  int grid_points = 2001;
  double tol = 1e-6;
  check->add_option("--grid-points", grid_points, "grid size on [-10,10]")->check(CLI::Range(3, 1000000));
  check->add_option("--tol", tol, "relative tolerance");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model and write run artifacts");
  SharedOpts train_opts;
  std::string model = "mlp", activation = "ulu(0.3,0.8)";
  int64_t epochs = 10, batch_size = 64;
  double lr = 0.05, momentum = 0.9, wd = 5e-5;
  bool share_betas = false, freeze_betas = false;
  add_shared(train_cmd, train_opts, true);
  train_cmd->add_option("--model", model, "mlp|cnn|attn");
  train_cmd->add_option("--activation", activation, "activation spec, e.g. ulu(0.3,0.8)");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch-size", batch_size);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--momentum", momentum);
  train_cmd->add_option("--wd", wd);
  train_cmd->add_flag("--share-betas", share_betas, "one beta pair for the whole model");
  train_cmd->add_flag("--freeze-betas", freeze_betas, "keep beta pairs at their init");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "ULU (alpha1, alpha2) accuracy grid");
  SharedOpts sweep_opts;
  std::string alphas = "0.1,0.3,0.55,0.8,1.0,1.5,2.0";
  std::string sweep_model = "cnn";
  int64_t sweep_epochs = 2, sweep_batch = 64;
  double sweep_lr = 0.05;
  int jobs = 1;
  add_shared(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--alphas", alphas, "comma-separated positive alpha values");
  sweep_cmd->add_option("--model", sweep_model, "mlp|cnn|attn");
  sweep_cmd->add_option("--epochs", sweep_epochs);
  sweep_cmd->add_option("--batch-size", sweep_batch);
  sweep_cmd->add_option("--lr", sweep_lr);
  sweep_cmd->add_option("--jobs", jobs, "parallel workers")->check(CLI::Range(1, 256));

  // landscape
  auto* land_cmd = app.add_subcommand("landscape", "output landscape of a fixed random network");
  SharedOpts land_opts;
  std::vector<std::string> land_acts;
  int layers = 6, width = 32, resolution = 256;
  double lo = -5.0, hi = 5.0;
  add_shared(land_cmd, land_opts, false);
  land_cmd->add_option("--activation", land_acts, "activation(s); repeat the flag to compare")
      ->expected(-1);
  land_cmd->add_option("--layers", layers);
  land_cmd->add_option("--width", width);
  land_cmd->add_option("--resolution", resolution)->check(CLI::Range(2, 4096));
  land_cmd->add_option("--lo", lo);
  land_cmd->add_option("--hi", hi);

  // compare
  auto* comp_cmd = app.add_subcommand("compare", "repeated-run activation comparison table");
  SharedOpts comp_opts;
  std::vector<std::string> comp_acts;
  std::string comp_model = "cnn";
  int64_t comp_epochs = 3, comp_batch = 64;
  double comp_lr = 0.05;
  int repeats = 3, comp_jobs = 1;
  add_shared(comp_cmd, comp_opts, true);
  comp_cmd->add_option("--activation", comp_acts, "activation(s); repeat the flag")->expected(-1);
  comp_cmd->add_option("--model", comp_model, "mlp|cnn|attn");
  comp_cmd->add_option("--epochs", comp_epochs);
  comp_cmd->add_option("--batch-size", comp_batch);
  comp_cmd->add_option("--lr", comp_lr);
  comp_cmd->add_option("--repeats", repeats)->check(CLI::Range(1, 1000));
  comp_cmd->add_option("--jobs", comp_jobs)->check(CLI::Range(1, 256));

  // lib-report
  auto* lib_cmd = app.add_subcommand("lib-report", "train AULU CNN vs attention and report LIB");
  SharedOpts lib_opts;
  std::string lib_activation = "aulu";
  int64_t lib_epochs = 10, lib_batch = 64;
  double lib_lr = 0.05;
  bool lib_share = false;
  add_shared(lib_cmd, lib_opts, true);
  lib_cmd->add_option("--activation", lib_activation, "must be an adaptive activation");
  lib_cmd->add_option("--epochs", lib_epochs);
  lib_cmd->add_option("--batch-size", lib_batch);
  lib_cmd->add_option("--lr", lib_lr);
  lib_cmd->add_flag("--share-betas", lib_share);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) {
      return cmd_check_gradients(grid_points, tol);
    }

    if (train_cmd->parsed()) {
      auto [ds_train, ds_test] = resolve_data(train_opts);
      ulu::TrainConfig cfg = make_train_config(train_opts, model, activation, epochs, batch_size,
                                               lr, momentum, wd, share_betas, freeze_betas);
      ensure_out_dir(train_opts);
      json echo = data_echo(train_opts);
      echo["train"] = ulu::train_config_json(cfg);
      write_config_echo(train_opts, "train", echo);
      ulu::RunRecord rec = ulu::train(cfg, ds_train, ds_test);
      fs::path dir(train_opts.out_dir);
      ulu::write_run_json(rec, (dir / "run.json").string());
      ulu::write_curves_csv(rec, (dir / "curves.csv").string());
      if (!rec.betas.empty()) ulu::write_betas_csv(rec, (dir / "betas.csv").string());
      std::cerr << "final test acc " << rec.final_test_acc << (rec.diverged ? " (diverged)" : "")
                << "\n";
      return 0;
    }

    if (sweep_cmd->parsed()) {
      auto [ds_train, ds_test] = resolve_data(sweep_opts);
      ulu::SweepSpec spec;
      spec.base = make_train_config(sweep_opts, sweep_model, "ulu(0.3,0.8)", sweep_epochs,
                                    sweep_batch, sweep_lr, momentum, wd, false, false);
      spec.parallelism = jobs;
      size_t pos = 0;
      while (pos <= alphas.size()) {
        size_t comma = alphas.find(',', pos);
        std::string tok = alphas.substr(pos, comma == std::string::npos ? std::string::npos
                                                                        : comma - pos);
        if (!tok.empty()) spec.alpha_values.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (spec.alpha_values.empty()) throw std::runtime_error("--alphas list is empty");
      ensure_out_dir(sweep_opts);
      json echo = data_echo(sweep_opts);
      echo["alphas"] = spec.alpha_values;
      echo["jobs"] = jobs;
      echo["train"] = ulu::train_config_json(spec.base);
      write_config_echo(sweep_opts, "sweep", echo);
      auto cells = ulu::run_sweep(spec, ds_train, ds_test);
      ulu::write_sweep_csv(cells, (fs::path(sweep_opts.out_dir) / "sweep.csv").string());
      return 0;
    }

    if (land_cmd->parsed()) {
      if (land_acts.empty()) land_acts = {"relu", "ulu(0.3,0.8)"};
      ulu::LandscapeSpec spec;
      spec.layers = layers;
      spec.width = width;
      spec.resolution = resolution;
      spec.grid_lo = lo;
      spec.grid_hi = hi;
      spec.seed = land_opts.seed;
      ensure_out_dir(land_opts);
      json echo;
      echo["activations"] = land_acts;
      echo["layers"] = layers;
      echo["width"] = width;
      echo["resolution"] = resolution;
      echo["grid"] = {lo, hi};
      write_config_echo(land_opts, "landscape", echo);
      ulu::LandscapeNet net = ulu::make_landscape_net(layers, width, land_opts.seed);
      std::printf("%-18s %16s\n", "activation", "smoothness");
      for (const std::string& a : land_acts) {
        spec.activation = ulu::ActivationSpec::parse(a);
        ulu::Tensor m = ulu::render_landscape(net, spec);
        std::string tag = file_tag(a);
        fs::path dir(land_opts.out_dir);
        ulu::write_matrix_csv(m, (dir / ("landscape_" + tag + ".csv")).string());
        ulu::write_matrix_pgm(m, (dir / ("landscape_" + tag + ".pgm")).string());
        std::printf("%-18s %16.8g\n", a.c_str(), ulu::smoothness_score(m));
      }
      return 0;
    }

    if (comp_cmd->parsed()) {
      if (comp_acts.empty()) comp_acts = {"ulu(0.3,0.8)", "relu", "mish"};
      auto [ds_train, ds_test] = resolve_data(comp_opts);
      std::vector<ulu::ActivationSpec> specs;
      for (const std::string& a : comp_acts) specs.push_back(ulu::ActivationSpec::parse(a));
      ulu::TrainConfig base = make_train_config(comp_opts, comp_model, comp_acts.front(),
                                                comp_epochs, comp_batch, comp_lr, momentum, wd,
                                                false, false);
      ensure_out_dir(comp_opts);
      json echo = data_echo(comp_opts);
      echo["activations"] = comp_acts;
      echo["repeats"] = repeats;
      echo["train"] = ulu::train_config_json(base);
      write_config_echo(comp_opts, "compare", echo);
      auto rows = ulu::compare_table(specs, base, repeats, ds_train, ds_test, comp_jobs);
      ulu::write_compare_csv(rows, (fs::path(comp_opts.out_dir) / "compare.csv").string());
      for (const auto& r : rows) {
        if (r.diverged_runs > 0) {
          std::cerr << r.activation.to_string() << ": " << r.diverged_runs
                    << " diverged run(s) counted as accuracy 0\n";
        }
      }
      return 0;
    }

    if (lib_cmd->parsed()) {
      ulu::ActivationSpec act = ulu::ActivationSpec::parse(lib_activation);
      if (!act.adaptive()) {
        std::cerr << "lib-report requires an adaptive activation, got '" << lib_activation
                  << "'\n";
        return 1;
      }
      auto [ds_train, ds_test] = resolve_data(lib_opts);
      ensure_out_dir(lib_opts);

      json models = json::array();
      json scatter = json::array();
      double cnn_aggregate = 0.0, attn_aggregate = 0.0;
      json echo = data_echo(lib_opts);
      for (ulu::Arch arch : {ulu::Arch::SmallCnn, ulu::Arch::MiniAttention}) {
        ulu::TrainConfig cfg = make_train_config(lib_opts, ulu::arch_name(arch), lib_activation,
                                                 lib_epochs, lib_batch, lib_lr, momentum, wd,
                                                 lib_share, false);
        if (arch == ulu::Arch::SmallCnn) echo["train"] = ulu::train_config_json(cfg);
        ulu::RunRecord rec = ulu::train(cfg, ds_train, ds_test);

        // Final betas come from the recorded last epoch of the run.
        json sites = json::array();
        double aggregate = 0.0;
        int64_t last_epoch = rec.epochs.back().epoch;
        int site_count = 0;
        for (const ulu::BetaRow& row : rec.betas) {
          if (row.epoch != last_epoch) continue;
          sites.push_back({{"site", row.site},
                           {"beta1_sq", row.beta1_sq},
                           {"beta2_sq", row.beta2_sq},
                           {"lib", row.lib}});
          scatter.push_back({{"model", ulu::arch_name(arch)},
                             {"site", row.site},
                             {"beta1_sq", row.beta1_sq},
                             {"beta2_sq", row.beta2_sq}});
          aggregate += row.lib;
          ++site_count;
        }
        aggregate /= std::max(1, site_count);
        (arch == ulu::Arch::SmallCnn ? cnn_aggregate : attn_aggregate) = aggregate;
        models.push_back({{"model", ulu::arch_name(arch)},
                          {"final_test_acc", rec.final_test_acc},
                          {"diverged", rec.diverged},
                          {"sites", sites},
                          {"aggregate_lib", aggregate}});
      }
      std::string observation =
          "aggregate LIB: cnn " + std::to_string(cnn_aggregate) + " vs attn " +
          std::to_string(attn_aggregate) +
          (cnn_aggregate > attn_aggregate ? " (cnn larger, as the CNN-vs-transformer contrast suggests)"
                                          : " (attn larger for this fixture)");
      json report;
      report["models"] = models;
      report["scatter"] = scatter;
      report["observation"] = observation;
      write_config_echo(lib_opts, "lib-report", echo);
      std::ofstream os(fs::path(lib_opts.out_dir) / "lib_report.json");
      os << report.dump(2) << "\n";
      std::cout << observation << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
