#include "ulu/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "ulu/rng.hpp"

namespace ulu {

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Runs jobs 0..n-1 over `workers` threads pulling from a shared counter.
// Each job owns its state, so scheduling cannot affect results.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& job) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  int count = static_cast<int>(std::min<int64_t>(workers, n));
  pool.reserve(static_cast<size_t>(count));
  for (int t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<SweepCell> run_sweep(const SweepSpec& spec, const Dataset& ds_train,
                                 const Dataset& ds_test) {
  for (double a : spec.alpha_values) {
    if (!(a > 0.0)) throw std::invalid_argument("sweep alphas must be positive");
  }
  std::vector<std::pair<double, double>> grid;
  for (double a1 : spec.alpha_values)
    for (double a2 : spec.alpha_values) grid.emplace_back(a1, a2);

  std::vector<SweepCell> cells(grid.size());
  parallel_for(static_cast<int64_t>(grid.size()), spec.parallelism, [&](int64_t i) {
    auto [a1, a2] = grid[static_cast<size_t>(i)];
    TrainConfig cfg = spec.base;
    cfg.model.activation = ActivationSpec::make(ActivationKind::ULU, {a1, a2});
    RunRecord rec = train(cfg, ds_train, ds_test);
    SweepCell& cell = cells[static_cast<size_t>(i)];
    cell.alpha1 = a1;
    cell.alpha2 = a2;
    cell.final_test_acc = rec.diverged ? 0.0 : rec.final_test_acc;
    cell.diverged = rec.diverged;
  });
  std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return a.alpha1 != b.alpha1 ? a.alpha1 < b.alpha1 : a.alpha2 < b.alpha2;
  });
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "alpha1,alpha2,final_test_acc,diverged\n";
  for (const SweepCell& c : cells) {
    os << fmt9(c.alpha1) << "," << fmt9(c.alpha2) << "," << fmt9(c.final_test_acc) << ","
       << (c.diverged ? 1 : 0) << "\n";
  }
}

LandscapeNet make_landscape_net(int layers, int width, uint64_t seed) {
  if (layers < 1 || width < 1) throw std::invalid_argument("landscape net needs layers, width >= 1");
  Rng rng(seed);
  LandscapeNet net;
  auto kaiming = [&](int64_t rows, int64_t cols) {
    Tensor t({rows, cols});
    double bound = std::sqrt(6.0 / static_cast<double>(rows));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
  };
  int64_t in = 2;
  for (int l = 0; l < layers; ++l) {
    net.weights.push_back(kaiming(in, width));
    net.biases.push_back(Tensor::zeros({width}));
    in = width;
  }
  net.weights.push_back(kaiming(in, 1));
  net.biases.push_back(Tensor::zeros({1}));
  return net;
}

Tensor render_landscape(const LandscapeNet& net, const LandscapeSpec& spec) {
  if (spec.resolution < 2) throw std::invalid_argument("landscape resolution must be >= 2");
  if (!(spec.grid_lo < spec.grid_hi)) throw std::invalid_argument("landscape needs grid_lo < grid_hi");
  int res = spec.resolution;
  Tensor out({res, res});
  std::vector<double> cur, nxt;
  for (int yi = 0; yi < res; ++yi) {
    double y = spec.grid_lo + (spec.grid_hi - spec.grid_lo) * yi / static_cast<double>(res - 1);
    for (int xi = 0; xi < res; ++xi) {
      double x = spec.grid_lo + (spec.grid_hi - spec.grid_lo) * xi / static_cast<double>(res - 1);
      cur = {x, y};
      for (size_t l = 0; l < net.weights.size(); ++l) {
        const Tensor& w = net.weights[l];
        const Tensor& b = net.biases[l];
        int64_t rows = w.dim(0), cols = w.dim(1);
        nxt.assign(static_cast<size_t>(cols), 0.0);
        for (int64_t r = 0; r < rows; ++r) {
          double v = cur[static_cast<size_t>(r)];
          const double* wrow = w.data() + r * cols;
          for (int64_t c = 0; c < cols; ++c) nxt[static_cast<size_t>(c)] += v * wrow[c];
        }
        for (int64_t c = 0; c < cols; ++c) nxt[static_cast<size_t>(c)] += b[c];
        bool last = l + 1 == net.weights.size();
        if (!last && spec.activation) {
          for (double& v : nxt) v = reference_eval(*spec.activation, v);
        }
        cur.swap(nxt);
      }
      out.at2(yi, xi) = cur[0];
    }
  }
  return out;
}

Tensor landscape(const LandscapeSpec& spec) {
  return render_landscape(make_landscape_net(spec.layers, spec.width, spec.seed), spec);
}

double smoothness_score(const Tensor& matrix) {
  if (matrix.rank() != 2 || matrix.dim(0) < 3 || matrix.dim(1) < 3) {
    throw std::invalid_argument("smoothness_score needs a matrix of at least 3x3");
  }
  int64_t rows = matrix.dim(0), cols = matrix.dim(1);
  double sum = 0.0;
  for (int64_t i = 1; i + 1 < rows; ++i) {
    for (int64_t j = 1; j + 1 < cols; ++j) {
      double lap = matrix.at2(i - 1, j) + matrix.at2(i + 1, j) + matrix.at2(i, j - 1) +
                   matrix.at2(i, j + 1) - 4.0 * matrix.at2(i, j);
      sum += lap * lap;
    }
  }
  return sum / static_cast<double>((rows - 2) * (cols - 2));
}

void write_matrix_csv(const Tensor& matrix, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  for (int64_t i = 0; i < matrix.dim(0); ++i) {
    for (int64_t j = 0; j < matrix.dim(1); ++j) {
      if (j) os << ",";
      os << fmt9(matrix.at2(i, j));
    }
    os << "\n";
  }
}

void write_matrix_pgm(const Tensor& matrix, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  double lo = matrix[0], hi = matrix[0];
  for (int64_t i = 0; i < matrix.numel(); ++i) {
    lo = std::min(lo, matrix[i]);
    hi = std::max(hi, matrix[i]);
  }
  double span = hi - lo;
  os << "P5\n" << matrix.dim(1) << " " << matrix.dim(0) << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(matrix.dim(1)));
  for (int64_t i = 0; i < matrix.dim(0); ++i) {
    for (int64_t j = 0; j < matrix.dim(1); ++j) {
      double v = span > 0.0 ? (matrix.at2(i, j) - lo) / span : 0.0;
      row[static_cast<size_t>(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

std::vector<CompareRow> compare_table(const std::vector<ActivationSpec>& activations,
                                      const TrainConfig& base, int repeats,
                                      const Dataset& ds_train, const Dataset& ds_test,
                                      int parallelism) {
  if (repeats < 1) throw std::invalid_argument("compare_table requires repeats >= 1");
  struct Job {
    size_t act;
    int rep;
  };
  std::vector<Job> jobs;
  for (size_t a = 0; a < activations.size(); ++a)
    for (int r = 0; r < repeats; ++r) jobs.push_back({a, r});

  std::vector<double> accs(jobs.size(), 0.0);
  std::vector<char> divs(jobs.size(), 0);
  parallel_for(static_cast<int64_t>(jobs.size()), parallelism, [&](int64_t i) {
    const Job& job = jobs[static_cast<size_t>(i)];
    TrainConfig cfg = base;
    cfg.model.activation = activations[job.act];
    cfg.seed = base.seed + static_cast<uint64_t>(job.rep);
    RunRecord rec = train(cfg, ds_train, ds_test);
    accs[static_cast<size_t>(i)] = rec.diverged ? 0.0 : rec.final_test_acc;
    divs[static_cast<size_t>(i)] = rec.diverged ? 1 : 0;
  });

  std::vector<CompareRow> rows;
  for (size_t a = 0; a < activations.size(); ++a) {
    CompareRow row;
    row.activation = activations[a];
    row.runs = repeats;
    double sum = 0.0;
    for (int r = 0; r < repeats; ++r) {
      size_t i = a * static_cast<size_t>(repeats) + static_cast<size_t>(r);
      sum += accs[i];
      row.diverged_runs += divs[i];
    }
    row.mean_acc = sum / repeats;
    double var = 0.0;
    for (int r = 0; r < repeats; ++r) {
      size_t i = a * static_cast<size_t>(repeats) + static_cast<size_t>(r);
      double d = accs[i] - row.mean_acc;
      var += d * d;
    }
    row.std_acc = std::sqrt(var / repeats);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.mean_acc > b.mean_acc; });
  return rows;
}

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "activation,mean_acc,std_acc,runs\n";
  for (const CompareRow& r : rows) {
    os << r.activation.to_string() << "," << fmt9(r.mean_acc) << "," << fmt9(r.std_acc) << ","
       << r.runs << "\n";
  }
}

}  // namespace ulu
