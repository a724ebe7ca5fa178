#include "ulu/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ulu/optim.hpp"
#include "ulu/rng.hpp"

namespace ulu {

namespace {

using nlohmann::json;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Quantize to 9 significant digits so JSON artifacts match the CSV float
// policy and reruns emit identical bytes.
double q9(double v) { return std::strtod(fmt9(v).c_str(), nullptr); }

Tensor gather_images(const Dataset& ds, const std::vector<int64_t>& idx, int64_t lo, int64_t hi) {
  int64_t h = ds.images.dim(1), w = ds.images.dim(2);
  int64_t plane = h * w;
  Tensor out({hi - lo, h, w});
  for (int64_t i = lo; i < hi; ++i) {
    const double* src = ds.images.data() + idx[static_cast<size_t>(i)] * plane;
    std::copy(src, src + plane, out.data() + (i - lo) * plane);
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int64_t>& idx, int64_t lo,
                               int64_t hi) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(hi - lo));
  for (int64_t i = lo; i < hi; ++i) out.push_back(ds.labels[static_cast<size_t>(idx[i])]);
  return out;
}

int argmax_lowest(const double* row, int64_t n) {
  int best = 0;
  for (int64_t c = 1; c < n; ++c) {
    if (row[c] > row[best]) best = static_cast<int>(c);
  }
  return best;
}

void record_betas(RunRecord& rec, const ParamStore& store, int64_t epoch) {
  for (size_t s = 0; s < store.adaptive.size(); ++s) {
    const AdaptiveParams& p = store.adaptive[s];
    BetaRow row;
    row.epoch = epoch;
    row.site = static_cast<int>(s);
    row.beta1_sq = p.coeff1();
    row.beta2_sq = p.coeff2();
    row.lib = std::fabs(row.beta1_sq - row.beta2_sq);
    rec.betas.push_back(row);
  }
}

void validate_config(const TrainConfig& cfg) {
  // epochs = 0 is allowed and records only the initial evaluation row.
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.base_lr > 0.0)) throw std::invalid_argument("base_lr must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
}

}  // namespace

std::pair<double, double> evaluate(Model& model, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  constexpr int64_t kChunk = 512;
  std::vector<int64_t> idx(static_cast<size_t>(ds.size()));
  for (int64_t i = 0; i < ds.size(); ++i) idx[static_cast<size_t>(i)] = i;

  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t lo = 0; lo < ds.size(); lo += kChunk) {
    int64_t hi = std::min(ds.size(), lo + kChunk);
    Tensor batch = model.prepare_input(gather_images(ds, idx, lo, hi));
    std::vector<int> labels = gather_labels(ds, idx, lo, hi);
    double loss = model.graph.forward(model.params, batch, labels);
    loss_sum += loss * static_cast<double>(hi - lo);
    const Tensor& logits = model.graph.value(model.logits_id);
    int64_t classes = logits.dim(1);
    for (int64_t b = 0; b < hi - lo; ++b) {
      int pred = argmax_lowest(logits.data() + b * classes, classes);
      if (pred == labels[static_cast<size_t>(b)]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(ds.size()),
          static_cast<double>(correct) / static_cast<double>(ds.size())};
}

RunRecord train(const TrainConfig& cfg, const Dataset& ds_train, const Dataset& ds_test) {
  validate_config(cfg);
  auto t0 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = cfg;

  Model model = build(cfg.model, cfg.seed);
  SgdOptimizer opt(cfg.freeze_betas);
  Rng shuffle_rng(cfg.seed ^ 0x5deece66dULL);

  auto eval_row = [&](int64_t epoch, double train_loss, double train_acc) {
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.train_acc = train_acc;
    auto [tl, ta] = evaluate(model, ds_test);
    (void)tl;
    row.test_acc = ta;
    rec.epochs.push_back(row);
    rec.final_test_acc = ta;
    if (!model.params.adaptive.empty()) record_betas(rec, model.params, epoch);
  };

  {
    auto [l0, a0] = evaluate(model, ds_train);
    eval_row(0, l0, a0);
  }

  int64_t n = ds_train.size();
  int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  int64_t total_steps = std::max<int64_t>(1, cfg.epochs * steps_per_epoch);
  int64_t step = 0;

  for (int64_t epoch = 1; epoch <= cfg.epochs && !rec.diverged; ++epoch) {
    std::vector<int64_t> order = shuffle_rng.permutation(n);
    double loss_sum = 0.0;
    int64_t correct = 0;
    for (int64_t lo = 0; lo < n; lo += cfg.batch_size) {
      int64_t hi = std::min(n, lo + cfg.batch_size);
      Tensor batch = model.prepare_input(gather_images(ds_train, order, lo, hi));
      std::vector<int> labels = gather_labels(ds_train, order, lo, hi);
      double loss;
      try {
        loss = model.graph.forward(model.params, batch, labels);
        if (!std::isfinite(loss)) throw GraphError("non-finite loss");
        model.graph.backward(model.params);
        opt.step(model.params, lr_schedule(step, total_steps, cfg.base_lr), cfg.momentum,
                 cfg.weight_decay);
      } catch (const GraphError&) {
        rec.diverged = true;
        break;
      }
      ++step;
      loss_sum += loss * static_cast<double>(hi - lo);
      const Tensor& logits = model.graph.value(model.logits_id);
      int64_t classes = logits.dim(1);
      for (int64_t b = 0; b < hi - lo; ++b) {
        int pred = argmax_lowest(logits.data() + b * classes, classes);
        if (pred == labels[static_cast<size_t>(b)]) ++correct;
      }
    }
    if (rec.diverged) break;
    eval_row(epoch, loss_sum / static_cast<double>(n),
             static_cast<double>(correct) / static_cast<double>(n));
  }

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

LibReport lib_of(const ParamStore& params) {
  if (params.adaptive.empty()) {
    throw std::invalid_argument("lib_of: model has no adaptive activation sites");
  }
  LibReport report;
  double sum = 0.0;
  for (size_t s = 0; s < params.adaptive.size(); ++s) {
    const AdaptiveParams& p = params.adaptive[s];
    BetaRow row;
    row.epoch = -1;
    row.site = static_cast<int>(s);
    row.beta1_sq = p.coeff1();
    row.beta2_sq = p.coeff2();
    row.lib = std::fabs(row.beta1_sq - row.beta2_sq);
    report.sites.push_back(row);
    sum += row.lib;
  }
  report.aggregate = sum / static_cast<double>(report.sites.size());
  return report;
}

void write_curves_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "epoch,train_loss,train_acc,test_acc\n";
  for (const EpochRow& r : rec.epochs) {
    os << r.epoch << "," << fmt9(r.train_loss) << "," << fmt9(r.train_acc) << ","
       << fmt9(r.test_acc) << "\n";
  }
}

void write_betas_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "epoch,site,beta1_sq,beta2_sq,lib\n";
  for (const BetaRow& r : rec.betas) {
    os << r.epoch << "," << r.site << "," << fmt9(r.beta1_sq) << "," << fmt9(r.beta2_sq) << ","
       << fmt9(r.lib) << "\n";
  }
}

json train_config_json(const TrainConfig& cfg) {
  json j;
  j["model"] = arch_name(cfg.model.arch);
  j["activation"] = cfg.model.activation.to_string();
  j["hidden_sizes"] = cfg.model.hidden_sizes;
  j["channel_widths"] = cfg.model.channel_widths;
  j["embed_dim"] = cfg.model.embed_dim;
  j["patch_size"] = cfg.model.patch_size;
  j["num_classes"] = cfg.model.num_classes;
  j["input_shape"] = cfg.model.input_shape;
  j["share_betas"] = cfg.model.share_betas;
  j["beta_init"] = cfg.model.beta_init;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["base_lr"] = cfg.base_lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["seed"] = cfg.seed;
  j["freeze_betas"] = cfg.freeze_betas;
  return j;
}

void write_run_json(const RunRecord& rec, const std::string& path) {
  json j;
  j["config"] = train_config_json(rec.config);
  j["diverged"] = rec.diverged;
  j["final_test_acc"] = q9(rec.final_test_acc);
  j["wall_seconds"] = q9(rec.wall_seconds);
  json rows = json::array();
  for (const EpochRow& r : rec.epochs) {
    rows.push_back({{"epoch", r.epoch},
                    {"train_loss", q9(r.train_loss)},
                    {"train_acc", q9(r.train_acc)},
                    {"test_acc", q9(r.test_acc)}});
  }
  j["epochs"] = rows;
  json betas = json::array();
  for (const BetaRow& r : rec.betas) {
    betas.push_back({{"epoch", r.epoch},
                     {"site", r.site},
                     {"beta1_sq", q9(r.beta1_sq)},
                     {"beta2_sq", q9(r.beta2_sq)},
                     {"lib", q9(r.lib)}});
  }
  j["betas"] = betas;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << j.dump(2) << "\n";
}

}  // namespace ulu
