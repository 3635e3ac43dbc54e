// Command-line front end: gen / train / eval / verify / plot.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lsno/config.hpp"
#include "lsno/data.hpp"
#include "lsno/model.hpp"
#include "lsno/serialize.hpp"
#include "lsno/verify.hpp"

namespace {

using namespace lsno;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int default_threads() {
  if (const char* env = std::getenv("LSNO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

KvMap overrides_to_kv(const std::vector<std::string>& sets) {
  KvMap kv;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParameterError("--set expects key=value, got: " + s);
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string kind;
  int count = 10;
  std::uint64_t seed = 0;
  std::string out;
  int nt = 0;  // 0 = generator default
  int s = 64;
  double nu = 0.1;
};

int cmd_gen(const GenArgs& a) {
  Dataset ds;
  if (a.kind == "spirals") {
    IEKernelSpec spec;
    if (a.nt > 0) spec.nt = a.nt;
    ds = gen_spirals(a.count, spec, a.seed);
  } else if (a.kind == "burgers") {
    BurgersSpec spec;
    spec.s = a.s;
    if (a.nt > 0) spec.nt = a.nt;
    spec.nu = a.nu;
    // Keep the default band limit valid at small resolutions.
    spec.cutoff_mode = std::min(spec.cutoff_mode, std::max(1, a.s / 3));
    ds = gen_burgers(a.count, spec, a.seed);
  } else {
    throw ParameterError("unknown --kind (expected spirals or burgers): " + a.kind);
  }
  save_dataset(ds, a.out);
  std::printf("wrote %s: %d samples, grid %dx%dx%d (dim %d), seed %llu\n", a.out.c_str(),
              ds.count(), ds.grid.nx, ds.grid.nt, ds.grid.channels, ds.grid.dim,
              static_cast<unsigned long long>(ds.meta.seed));
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out = "model.lsck";
  std::string history;
  std::string config_file;
  std::vector<std::string> sets;
  int epochs = -1;
  long long seed = -1;
  int threads = 0;  // 0 = not given; precedence: --deterministic, --threads,
                    // config key, LSNO_THREADS, 1
  bool deterministic = false;
  std::string command_line;
};

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epoch,train_mse,val_mse,wall_seconds\n";
  char buf[128];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.3f\n", e.epoch, e.train_mse, e.val_mse,
                  e.wall_seconds);
    out << buf;
  }
}

int cmd_train(const TrainArgs& a) {
  Dataset ds = load_dataset(a.data);

  KvMap kv;
  if (!a.config_file.empty()) kv = parse_kv_file(a.config_file);
  for (const auto& [k, v] : overrides_to_kv(a.sets)) kv[k] = v;
  if (a.epochs >= 0) kv["epochs"] = std::to_string(a.epochs);
  if (a.seed >= 0) kv["seed"] = std::to_string(a.seed);

  ModelConfig cfg = config_from_kv(kv, ds.grid);
  if (kv.find("threads") == kv.end()) cfg.training.threads = default_threads();
  if (a.threads > 0) cfg.training.threads = a.threads;
  if (a.deterministic) cfg.training.threads = 1;
  cfg.training.threads = std::max(1, cfg.training.threads);

  const std::string started = iso_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(cfg, ds);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(state_to_checkpoint(result.state), a.out);
  if (!a.history.empty()) write_history_csv(a.history, result.history);

  {
    std::ofstream mf(a.out + ".manifest");
    if (!mf) throw IoError("cannot open for writing: " + a.out + ".manifest");
    mf << "command = " << a.command_line << "\n";
    mf << "config_digest = " << text_digest(config_to_text(result.state.config)) << "\n";
    mf << "dataset = " << a.data << "\n";
    mf << "dataset_digest = " << file_digest(a.data) << "\n";
    mf << "checkpoint = " << a.out << "\n";
    mf << "checkpoint_digest = " << file_digest(a.out) << "\n";
    mf << "seed = " << result.state.config.training.seed << "\n";
    mf << "started = " << started << "\n";
    mf << "finished = " << iso_timestamp() << "\n";
    mf << "wall_seconds = " << wall << "\n";
  }

  if (!result.history.empty())
    std::printf("trained %d epochs: train_mse %.6g (epoch 1: %.6g)\n",
                static_cast<int>(result.history.size()), result.history.back().train_mse,
                result.history.front().train_mse);
  else
    std::printf("trained 0 epochs: checkpoint equals the initialization\n");
  std::printf("checkpoint: %s\n", a.out.c_str());
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string per_sample;
  std::string export_pred;
  int upsample = 1;
  int threads = default_threads();
};

Sample restrict_sample(const Sample& fine, const GridDesc& coarse, int factor) {
  GridFunction target = GridFunction::zeros(coarse);
  for (int ix = 0; ix < coarse.nx; ++ix)
    for (int j = 0; j < coarse.nt; ++j)
      for (int c = 0; c < coarse.channels; ++c)
        target.at(ix, j, c) = fine.target.at(ix * (coarse.dim == 2 ? factor : 1), j * factor, c);
  return make_sample(std::move(target));
}

int cmd_eval(const EvalArgs& a) {
  ModelState state = state_from_checkpoint(load_checkpoint(a.checkpoint));
  Dataset ds = load_dataset(a.data);
  const GridDesc& dom = state.config.domain;

  EvalResult result;
  std::vector<GridFunction> predictions;
  const bool want_preds = !a.export_pred.empty();

  if (a.upsample == 1) {
    if (!(ds.grid == dom))
      throw DimensionError("eval: dataset grid does not match the checkpoint domain");
    result = evaluate(state, ds, a.threads);
    if (want_preds)
      for (const Sample& s : ds.samples) predictions.push_back(forward(state, s));
  } else {
    // Data must be the F-times-finer ground truth; inputs are restricted to
    // the training resolution and predictions evaluated on the fine grid.
    const GridDesc fine = refine_grid(dom, a.upsample);
    if (!(ds.grid == fine))
      throw DimensionError("eval: dataset grid is not the upsampled domain grid");
    result.per_sample_mse.reserve(ds.count());
    for (const Sample& s : ds.samples) {
      Sample coarse = restrict_sample(s, dom, a.upsample);
      GridFunction psi = predict_upsampled(state, coarse, fine);
      result.per_sample_mse.push_back((psi.values - s.target.values).square().mean());
      if (want_preds) predictions.push_back(std::move(psi));
    }
    double mean = 0.0;
    for (double v : result.per_sample_mse) mean += v;
    mean /= result.per_sample_mse.size();
    double var = 0.0;
    for (double v : result.per_sample_mse) var += (v - mean) * (v - mean);
    result.mean = mean;
    result.stddev = std::sqrt(var / result.per_sample_mse.size());
  }

  std::printf("mse: %.4f±%.4f  (n=%d)\n", result.mean, result.stddev,
              static_cast<int>(result.per_sample_mse.size()));

  if (!a.per_sample.empty()) {
    std::ofstream out(a.per_sample);
    if (!out) throw IoError("cannot open for writing: " + a.per_sample);
    out << "sample,mse\n";
    char buf[64];
    for (std::size_t i = 0; i < result.per_sample_mse.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.per_sample_mse[i]);
      out << buf;
    }
  }

  if (want_preds) {
    Dataset preds;
    preds.grid = predictions.front().grid;
    preds.meta.generator = "predictions";
    preds.meta.seed = state.config.training.seed;
    preds.meta.params = {preds.grid.x0, preds.grid.x1, preds.grid.t0, preds.grid.t1};
    for (GridFunction& p : predictions) preds.samples.push_back(make_sample(std::move(p)));
    save_dataset(preds, a.export_pred);
    std::printf("predictions: %s\n", a.export_pred.c_str());
  }
  return 0;
}

// ---- verify -----------------------------------------------------------------

int cmd_verify(std::uint64_t seed, double eps) {
  if (eps <= 0.0 && eps != -1.0) throw ParameterError("eps must be positive");
  std::vector<PropertyResult> results = run_property_suite(seed, eps > 0.0 ? eps : 0.0);
  bool all = true;
  for (const PropertyResult& r : results) {
    std::printf("%-34s %s  margin=%.3g  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.margin, r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("%s\n", all ? "all properties passed" : "PROPERTY FAILURES");
  return all ? 0 : 1;
}

// ---- plot -------------------------------------------------------------------

struct PlotArgs {
  std::string data;
  std::string pred;
  int sample = 0;
  std::string out_prefix = "plot";
  bool ppm = false;
};

void write_matrix_csv(const std::string& path, const GridFunction& f, int channel) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[48];
  for (int ix = 0; ix < f.grid.nx; ++ix) {
    for (int j = 0; j < f.grid.nt; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", f.at(ix, j, channel));
      out << buf << (j + 1 < f.grid.nt ? "," : "");
    }
    out << "\n";
  }
}

// P5 grayscale, rows = space, columns = time (the figure orientation).
void write_heatmap_ppm(const std::string& path, const GridFunction& f, int channel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int ix = 0; ix < f.grid.nx; ++ix)
    for (int j = 0; j < f.grid.nt; ++j) {
      lo = std::min(lo, f.at(ix, j, channel));
      hi = std::max(hi, f.at(ix, j, channel));
    }
  out << "P5\n" << f.grid.nt << " " << f.grid.nx << "\n255\n";
  for (int ix = 0; ix < f.grid.nx; ++ix)
    for (int j = 0; j < f.grid.nt; ++j) {
      int v = 128;
      if (hi > lo)
        v = static_cast<int>(std::lround(255.0 * (f.at(ix, j, channel) - lo) / (hi - lo)));
      out.put(static_cast<char>(std::min(255, std::max(0, v))));
    }
}

int cmd_plot(const PlotArgs& a) {
  Dataset ds = load_dataset(a.data);
  if (a.sample < 0 || a.sample >= ds.count())
    throw ParameterError("plot: sample index out of range");

  auto emit = [&](const GridFunction& f, const std::string& tag) {
    for (int c = 0; c < f.grid.channels; ++c) {
      const std::string base =
          a.out_prefix + "_" + tag + "_s" + std::to_string(a.sample) + "_c" + std::to_string(c);
      write_matrix_csv(base + ".csv", f, c);
      if (a.ppm) write_heatmap_ppm(base + ".ppm", f, c);
      std::printf("wrote %s.csv%s\n", base.c_str(), a.ppm ? " (+.ppm)" : "");
    }
  };
  emit(ds.samples[a.sample].target, "truth");

  if (!a.pred.empty()) {
    Dataset pd = load_dataset(a.pred);
    if (a.sample >= pd.count()) throw ParameterError("plot: sample missing from predictions");
    emit(pd.samples[a.sample].target, "pred");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leray-Schauder neural operator toolkit"};
  app.require_subcommand(1);

  std::ostringstream cmdline;
  for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];

  GenArgs gen;
  CLI::App* cgen = app.add_subcommand("gen", "generate a dataset (LSNO file)");
  cgen->add_option("--kind", gen.kind, "spirals | burgers")->required();
  cgen->add_option("--count", gen.count, "number of samples");
  cgen->add_option("--seed", gen.seed, "generator seed");
  cgen->add_option("--out", gen.out, "output file")->required();
  cgen->add_option("--nt", gen.nt, "time nodes");
  cgen->add_option("--s", gen.s, "burgers spatial resolution (power of two)");
  cgen->add_option("--nu", gen.nu, "burgers viscosity");

  TrainArgs tr;
  tr.command_line = cmdline.str();
  CLI::App* ctrain = app.add_subcommand("train", "train a model");
  ctrain->add_option("--data", tr.data, "training dataset (LSNO)")->required();
  ctrain->add_option("--out", tr.out, "checkpoint file to write (LSCK)");
  ctrain->add_option("--history", tr.history, "per-epoch CSV");
  ctrain->add_option("--config", tr.config_file, "key=value config file");
  ctrain->add_option("--set", tr.sets, "config override key=value (repeatable)");
  ctrain->add_option("--epochs", tr.epochs, "override epoch count");
  ctrain->add_option("--seed", tr.seed, "override seed");
  ctrain->add_option("--threads", tr.threads, "worker threads (default LSNO_THREADS or 1)");
  ctrain->add_flag("--deterministic", tr.deterministic, "force single-thread reductions");

  EvalArgs ev;
  CLI::App* ceval = app.add_subcommand("eval", "evaluate a checkpoint");
  ceval->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  ceval->add_option("--data", ev.data, "test dataset")->required();
  ceval->add_option("--per-sample", ev.per_sample, "write per-sample MSE CSV");
  ceval->add_option("--export-pred", ev.export_pred, "write predictions as an LSNO file");
  ceval->add_option("--upsample", ev.upsample, "factor F: data must be the F-times finer truth");
  ceval->add_option("--threads", ev.threads, "worker threads");

  std::uint64_t verify_seed = 0;
  double verify_eps = -1.0;
  CLI::App* cverify = app.add_subcommand("verify", "run the property suite");
  cverify->add_option("--seed", verify_seed, "suite seed");
  cverify->add_option("--eps", verify_eps, "must be positive when given");

  PlotArgs pl;
  CLI::App* cplot = app.add_subcommand("plot", "export CSV matrices / PPM heatmaps");
  cplot->add_option("--data", pl.data, "dataset (ground truth)")->required();
  cplot->add_option("--pred", pl.pred, "predictions (LSNO, from eval --export-pred)");
  cplot->add_option("--sample", pl.sample, "sample index");
  cplot->add_option("--out-prefix", pl.out_prefix, "output file prefix");
  cplot->add_flag("--ppm", pl.ppm, "also write grayscale heatmaps");

  try {
    app.parse(argc, argv);
    if (cgen->parsed()) return cmd_gen(gen);
    if (ctrain->parsed()) return cmd_train(tr);
    if (ceval->parsed()) return cmd_eval(ev);
    if (cverify->parsed()) return cmd_verify(verify_seed, verify_eps);
    if (cplot->parsed()) return cmd_plot(pl);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error:usage:" << e.what() << "\n";
    return e.get_exit_code();
  } catch (const lsno::Error& e) {
    std::cerr << "error:" << e.category() << ":" << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error:internal:" << e.what() << "\n";
    return 1;
  }
  return 0;
}
