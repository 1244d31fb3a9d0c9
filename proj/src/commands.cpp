#include "pouf/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pouf/config.hpp"
#include "pouf/embedding_io.hpp"
#include "pouf/errors.hpp"
#include "pouf/gradcheck.hpp"
#include "pouf/synthetic.hpp"

namespace pouf {
namespace fs = std::filesystem;

namespace {

constexpr const char* kPrototypesFile = "prototypes.pouf";
constexpr const char* kFeaturesFile = "features.pouf";
constexpr const char* kLabelsFile = "labels.txt";
constexpr const char* kClassesFile = "classes.txt";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kAdapterFile = "adapter.pouf";
constexpr const char* kOffsetsFile = "proto_offsets.pouf";
constexpr const char* kTemperatureFile = "log_temperature.pouf";

using Clock = std::chrono::steady_clock;

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(Clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["artifacts"] = Json::array();
  }
  Json& operator[](const char* key) { return doc_[key]; }
  void artifact(const fs::path& p) { doc_["artifacts"].push_back(p.filename().string()); }
  void write(const fs::path& dir) {
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    io::write_file(dir / kManifestFile, doc_.dump(2) + "\n");
  }

 private:
  Json doc_;
  Clock::time_point start_;
};

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw ValidationError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json record_json(const StepRecord& r) {
  return Json{{"iter", r.iter},
              {"lr", r.lr},
              {"loss_total", r.loss_total},
              {"loss_transport", r.loss_transport},
              {"loss_mi", r.loss_mi},
              {"loss_entropy", r.loss_entropy},
              {"loss_ce", r.loss_ce},
              {"accuracy", json_number(r.accuracy)}};
}

// Runs `body`, mapping library errors onto the exit-code contract.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ShapeError& e) {
    err << "error: shape mismatch: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

TrainConfig load_train_config(const CommandOptions& opts) {
  TrainConfig cfg = opts.config ? train_config_from_json(parse_json_file(opts.config->string()))
                                : TrainConfig{};
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? std::nan("") : s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << x;
  return os.str();
}

}  // namespace

DataDir DataDir::load(const fs::path& dir) {
  DataDir d;
  d.raw_prototypes = io::read_embeddings_as_double(dir / kPrototypesFile);
  d.raw_features = io::read_embeddings_as_double(dir / kFeaturesFile);
  if (d.raw_prototypes.cols() != d.raw_features.cols()) {
    throw ShapeError("prototype dim " + std::to_string(d.raw_prototypes.cols()) +
                     " != feature dim " + std::to_string(d.raw_features.cols()));
  }
  if (fs::exists(dir / kLabelsFile)) {
    d.labels = io::read_labels(dir / kLabelsFile);
    if (d.labels->size() != static_cast<std::size_t>(d.raw_features.rows())) {
      throw ShapeError(std::to_string(d.labels->size()) + " labels for " +
                       std::to_string(d.raw_features.rows()) + " features");
    }
    for (int y : *d.labels) {
      if (y >= d.raw_prototypes.rows()) {
        throw ValidationError("label " + std::to_string(y) + " outside the " +
                              std::to_string(d.raw_prototypes.rows()) + " classes");
      }
    }
  }
  const auto classes = static_cast<std::size_t>(d.raw_prototypes.rows());
  if (fs::exists(dir / kClassesFile)) {
    d.class_names = io::read_class_names(dir / kClassesFile, classes);
  } else {
    for (std::size_t k = 0; k < classes; ++k) d.class_names.push_back("class_" + std::to_string(k));
  }
  return d;
}

LabeledSubset labeled_subset(const std::vector<int>& labels) {
  LabeledSubset s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      s.rows.push_back(i);
      s.labels.push_back(labels[i]);
    }
  }
  return s;
}

EvalResult evaluate_params(const ModelParams& params, const DataDir& data) {
  if (!data.labels) throw ValidationError("no labels available");
  const LabeledSubset sub = labeled_subset(*data.labels);
  if (sub.rows.empty()) throw ValidationError("every label is -1");
  RowMatrixXd raw(static_cast<Eigen::Index>(sub.rows.size()), data.raw_features.cols());
  for (std::size_t i = 0; i < sub.rows.size(); ++i) {
    raw.row(static_cast<Eigen::Index>(i)) = data.raw_features.row(static_cast<Eigen::Index>(sub.rows[i]));
  }
  const FeatureBatch features = encode(raw, params);
  const Prototypes protos = effective_prototypes(data.raw_prototypes, params);
  EvalResult r = evaluate_predictions(predict(features, protos, params.temperature()), sub.labels);
  r.mean_correct_cosine = mean_correct_cosine(features.matrix, protos.matrix, sub.labels);
  return r;
}

void write_params(const fs::path& dir, const ModelParams& params) {
  io::write_embeddings(dir / kAdapterFile, params.adapter);
  io::write_embeddings(dir / kOffsetsFile, params.proto_offsets);
  RowMatrixXd t(1, 1);
  t(0, 0) = params.log_temperature;
  io::write_embeddings(dir / kTemperatureFile, t);
}

ModelParams read_params(const fs::path& dir) {
  ModelParams p;
  p.adapter = io::read_embeddings_as_double(dir / kAdapterFile);
  p.proto_offsets = io::read_embeddings_as_double(dir / kOffsetsFile);
  const RowMatrixXd t = io::read_embeddings_as_double(dir / kTemperatureFile);
  if (t.size() != 1) throw ShapeError("log_temperature file must hold one value");
  p.log_temperature = t(0, 0);
  if (p.adapter.rows() != p.adapter.cols()) throw ShapeError("adapter must be square");
  if (p.proto_offsets.cols() != p.adapter.cols()) {
    throw ShapeError("offsets dim " + std::to_string(p.proto_offsets.cols()) +
                     " != adapter dim " + std::to_string(p.adapter.cols()));
  }
  return p;
}

std::size_t thread_budget() {
  const char* env = std::getenv("POUF_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

int cmd_generate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SyntheticSpec spec = opts.config
                             ? synthetic_spec_from_json(parse_json_file(opts.config->string()))
                             : SyntheticSpec{};
    if (opts.seed) spec.seed = *opts.seed;
    spec.validate();
    ensure_dir(opts.out_dir);
    const SyntheticDataset data = generate_synthetic(spec);

    Manifest manifest("generate");
    manifest["seed"] = spec.seed;
    manifest["synthetic_spec"] = to_json(spec);
    io::write_embeddings(opts.out_dir / kPrototypesFile, data.raw_prototypes);
    manifest.artifact(kPrototypesFile);
    io::write_embeddings(opts.out_dir / kFeaturesFile, data.raw_features);
    manifest.artifact(kFeaturesFile);
    io::write_labels(opts.out_dir / kLabelsFile, data.labels);
    manifest.artifact(kLabelsFile);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < spec.classes; ++k) names.push_back("class_" + std::to_string(k));
    io::write_class_names(opts.out_dir / kClassesFile, names);
    manifest.artifact(kClassesFile);
    manifest.write(opts.out_dir);
    out << "generated " << spec.samples << " samples, " << spec.classes << " classes, dim "
        << spec.dim << " in " << opts.out_dir.string() << '\n';
    return kExitOk;
  });
}

int cmd_adapt(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrainConfig cfg = load_train_config(opts);
    const DataDir data = DataDir::load(opts.data_dir);
    ensure_dir(opts.out_dir);

    Manifest manifest("adapt");
    manifest["seed"] = cfg.seed;
    manifest["config"] = to_json(cfg);
    manifest["data_dir"] = fs::absolute(opts.data_dir).string();

    const bool labeled = data.labels && !labeled_subset(*data.labels).rows.empty();
    if (!labeled) err << "warning: no labels found; accuracy will not be reported\n";
    Monitor monitor;
    if (labeled) {
      monitor = [&data](const ModelParams& p) { return evaluate_params(p, data).accuracy; };
    }

    const ModelParams initial = ModelParams::identity(
        static_cast<std::size_t>(data.raw_features.cols()),
        static_cast<std::size_t>(data.raw_prototypes.rows()), cfg.initial_temperature);
    TrainResult result;
    try {
      result = run_training(data.raw_features, data.raw_prototypes, cfg, monitor);
    } catch (const DivergenceError& e) {
      const fs::path diag = opts.out_dir / "diagnostics.json";
      io::write_file(diag, Json{{"error", e.what()}, {"config", to_json(cfg)}}.dump(2) + "\n");
      manifest.artifact(diag);
      manifest.write(opts.out_dir);
      err << "error: training diverged: " << e.what() << "\ndiagnostics: " << diag.string()
          << '\n';
      return static_cast<int>(kExitDiverged);
    }

    write_params(opts.out_dir, result.params);
    manifest.artifact(kAdapterFile);
    manifest.artifact(kOffsetsFile);
    manifest.artifact(kTemperatureFile);

    std::string lines;
    for (const StepRecord& r : result.report.records) lines += record_json(r).dump() + "\n";
    io::write_file(opts.out_dir / "report.jsonl", lines);
    manifest.artifact("report.jsonl");

    Json summary{{"iterations", result.report.records.size()},
                 {"final_prior", result.report.final_prior},
                 {"log_temperature", result.params.log_temperature},
                 {"upl_short_classes", result.report.upl_short_classes}};
    if (labeled) {
      const EvalResult before = evaluate_params(initial, data);
      const EvalResult after = evaluate_params(result.params, data);
      summary["accuracy_before"] = before.accuracy;
      summary["accuracy_after"] = after.accuracy;
      summary["mean_correct_cosine_before"] = before.mean_correct_cosine;
      summary["mean_correct_cosine_after"] = after.mean_correct_cosine;
      out << "accuracy_before=" << fixed(before.accuracy, 4)
          << " accuracy_after=" << fixed(after.accuracy, 4)
          << " mean_correct_cosine_before=" << fixed(before.mean_correct_cosine, 4)
          << " mean_correct_cosine_after=" << fixed(after.mean_correct_cosine, 4) << '\n';
    } else {
      const double last = result.report.records.empty() ? 0.0 : result.report.records.back().loss_total;
      out << "final_loss=" << last << '\n';
    }
    io::write_file(opts.out_dir / "summary.json", summary.dump(2) + "\n");
    manifest.artifact("summary.json");
    manifest.write(opts.out_dir);
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const DataDir data = DataDir::load(opts.data_dir);
    const ModelParams params = read_params(opts.params_dir);
    if (params.dim() != static_cast<std::size_t>(data.raw_features.cols()) ||
        params.classes() != static_cast<std::size_t>(data.raw_prototypes.rows())) {
      throw ShapeError("params are for dim " + std::to_string(params.dim()) + " and " +
                       std::to_string(params.classes()) + " classes; data has dim " +
                       std::to_string(data.raw_features.cols()) + " and " +
                       std::to_string(data.raw_prototypes.rows()) + " classes");
    }
    ensure_dir(opts.out_dir);
    Manifest manifest("eval");
    manifest["params_dir"] = fs::absolute(opts.params_dir).string();
    manifest["data_dir"] = fs::absolute(opts.data_dir).string();

    const FeatureBatch features = encode(data.raw_features, params);
    const Prototypes protos = effective_prototypes(data.raw_prototypes, params);
    const RowMatrixXd probs = predict(features, protos, params.temperature());

    const bool labeled = data.labels && !labeled_subset(*data.labels).rows.empty();
    // Histogram reference class: the true label where known, otherwise the prediction.
    std::vector<int> reference = argmax_rows(probs);
    if (labeled) {
      const EvalResult r = evaluate_params(params, data);
      io::write_file(opts.out_dir / "metrics.json", metrics_json(r));
      manifest.artifact("metrics.json");
      for (std::size_t i = 0; i < reference.size(); ++i) {
        if ((*data.labels)[i] >= 0) reference[i] = (*data.labels)[i];
      }
      out << "accuracy=" << fixed(r.accuracy, 4)
          << " mean_correct_cosine=" << fixed(r.mean_correct_cosine, 4) << '\n';
    } else {
      err << "warning: no labels found; metrics.json omitted, histogram uses predicted classes\n";
    }

    io::write_file(opts.out_dir / "histogram.csv",
                   histogram_csv(cosine_histogram(features.matrix, protos.matrix, reference, 20)));
    manifest.artifact("histogram.csv");
    const std::size_t k = std::min<std::size_t>(10, features.size());
    io::write_file(opts.out_dir / "knn.csv",
                   knn_csv(knn_of_prototypes(features.matrix, protos.matrix, k), features.matrix,
                           protos.matrix, features.ids));
    manifest.artifact("knn.csv");
    std::vector<int> pca_labels = data.labels ? *data.labels : std::vector<int>{};
    io::write_file(opts.out_dir / "pca.csv",
                   pca_csv(pca_2d(features.matrix), features.ids, pca_labels));
    manifest.artifact("pca.csv");
    manifest.write(opts.out_dir);
    return static_cast<int>(kExitOk);
  });
}

int cmd_ablate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    AblationConfig grid = opts.config
                              ? ablation_config_from_json(parse_json_file(opts.config->string()))
                              : AblationConfig{};
    if (opts.seed) grid.seeds = {*opts.seed};
    const DataDir data = DataDir::load(opts.data_dir);
    if (!data.labels || labeled_subset(*data.labels).rows.empty()) {
      throw ValidationError("ablation needs labels to score variants");
    }
    ensure_dir(opts.out_dir);

    struct Cell {
      std::string variant;
      std::uint64_t seed;
      double accuracy = std::nan("");
      std::string error;
    };
    std::vector<Cell> cells;
    for (const auto& v : grid.variants) {
      for (std::uint64_t s : grid.seeds) cells.push_back({v, s, std::nan(""), {}});
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        Cell& c = cells[i];
        try {
          TrainConfig cfg = apply_variant(grid.base, c.variant);
          cfg.seed = c.seed;
          const TrainResult r = run_training(data.raw_features, data.raw_prototypes, cfg);
          c.accuracy = evaluate_params(r.params, data).accuracy;
        } catch (const std::exception& e) {
          c.error = e.what();
        }
      }
    };
    const std::size_t threads = std::min(thread_budget(), cells.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream table;
    std::ostringstream summary;
    table << "variant,seed,accuracy,mean,std\n";
    summary << "variant,mean,std,mean(std)\n";
    bool any_failed = false;
    for (const auto& v : grid.variants) {
      std::vector<double> accs;
      for (const Cell& c : cells) {
        if (c.variant == v && c.error.empty()) accs.push_back(c.accuracy);
      }
      const double m = mean(accs);
      const double sd = sample_std(accs);
      for (const Cell& c : cells) {
        if (c.variant != v) continue;
        table << c.variant << ',' << c.seed << ','
              << (c.error.empty() ? fixed(100.0 * c.accuracy, 2) : "NaN") << ','
              << fixed(100.0 * m, 2) << ',' << fixed(100.0 * sd, 2) << '\n';
        if (!c.error.empty()) {
          any_failed = true;
          err << "warning: variant " << c.variant << " seed " << c.seed
              << " failed: " << c.error << '\n';
        }
      }
      summary << v << ',' << fixed(100.0 * m, 2) << ',' << fixed(100.0 * sd, 2) << ','
              << fixed(100.0 * m, 1) << '(' << fixed(100.0 * sd, 1) << ")\n";
      out << v << ": " << fixed(100.0 * m, 1) << " (" << fixed(100.0 * sd, 1) << ")\n";
    }
    io::write_file(opts.out_dir / "ablation.csv", table.str());
    io::write_file(opts.out_dir / "ablation_summary.csv", summary.str());

    Manifest manifest("ablate");
    manifest["config"] = to_json(grid);
    manifest["data_dir"] = fs::absolute(opts.data_dir).string();
    manifest.artifact("ablation.csv");
    manifest.artifact("ablation_summary.csv");
    manifest.write(opts.out_dir);
    return static_cast<int>(any_failed ? kExitDiverged : kExitOk);
  });
}

int cmd_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    GradcheckOptions g;
    g.seed = opts.seed.value_or(0);
    const GradcheckReport report = run_gradcheck(g);
    for (const auto& c : report.chains) {
      out << (c.passed ? "ok    " : "FAIL  ") << c.name << "  instances=" << c.instances
          << "  worst_rel_err=" << c.worst << '\n';
    }
    out << "worst_rel_err=" << report.worst << " (tolerance " << g.rtol << ")\n";
    if (!report.passed) {
      err << "gradient check failed for:";
      for (const auto& c : report.chains) {
        if (!c.passed) err << ' ' << c.name << ';';
      }
      err << '\n';
    }
    if (!opts.out_dir.empty()) {
      ensure_dir(opts.out_dir);
      Manifest manifest("gradcheck");
      manifest["seed"] = g.seed;
      manifest["worst_rel_err"] = report.worst;
      manifest["passed"] = report.passed;
      manifest.write(opts.out_dir);
    }
    return static_cast<int>(report.passed ? kExitOk : kExitCheckFailed);
  });
}

}  // namespace pouf
