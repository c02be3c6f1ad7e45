#include "bondrisk/stages.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "bondrisk/bond_io.hpp"
#include "bondrisk/checkpoint.hpp"
#include "bondrisk/eval.hpp"
#include "bondrisk/hashing.hpp"

namespace bondrisk {
namespace fs = std::filesystem;

namespace {

template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("seed", c.seed);
  f("jobs", c.jobs);
  f("n_bonds", c.n_bonds);
  f("default_fraction", c.default_fraction);
  f("min_life", c.min_life);
  f("max_life", c.max_life);
  f("stress_onset_days", c.stress_onset_days);
  f("missing_fraction", c.missing_fraction);
  f("n_industries", c.n_industries);
  f("n_regions", c.n_regions);
  f("gmm_components", c.gmm_components);
  f("gmm_max_iter", c.gmm_max_iter);
  f("gmm_tol", c.gmm_tol);
  f("loss_rate", c.loss_rate);
  f("spread_floor", c.spread_floor);
  f("ma_window", c.ma_window);
  f("acceleration_days", c.acceleration_days);
  f("weight_gmm", c.weight_gmm);
  f("weight_cs", c.weight_cs);
  f("weight_backward", c.weight_backward);
  f("prior_init", c.prior_init);
  f("windows", c.windows);
  f("smote_ratio", c.smote_ratio);
  f("smote_k", c.smote_k);
  f("variants", c.variants);
  f("train_seeds", c.train_seeds);
  f("epochs", c.epochs);
  f("batch_size", c.batch_size);
  f("patience", c.patience);
  f("hidden", c.hidden);
  f("depth", c.depth);
  f("conv_channels", c.conv_channels);
  f("conv_kernel", c.conv_kernel);
  f("learning_rate", c.learning_rate);
  f("boosting_rounds", c.boosting_rounds);
  f("boosting_depth", c.boosting_depth);
  f("boosting_shrinkage", c.boosting_shrinkage);
  f("rolling", c.rolling);
}

template <typename F>
void collect(std::vector<std::string>& errors, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    errors.emplace_back(e.what());
  }
}

void require(const fs::path& p, const std::string& what, const std::string& hint) {
  if (!fs::exists(p)) throw MissingInputError("missing " + what + ": expected " + p.string() + " (" + hint + ")");
}

fs::path manifest_for_file(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

nlohmann::json gmm_summary(const GmmModel& m) {
  return {{"components", m.K},
          {"dim", m.dim},
          {"grade_of", m.grade_of},
          {"weights", m.weights},
          {"iterations", m.iterations},
          {"converged", m.converged},
          {"elbo_trace", m.elbo_trace}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

// RunConfig -----------------------------------------------------------------

void RunConfig::validate() const {
  std::vector<std::string> errors;
  if (jobs < 1) errors.emplace_back("jobs must be >= 1");
  collect(errors, [&] { market().validate(); });
  collect(errors, [&] {
    const auto o = label_options();
    o.spread.validate();
    o.backward.validate();
    o.weights.validate();
  });
  if (gmm_components < 1) errors.emplace_back("gmm_components must be >= 1");
  if (gmm_max_iter < 1) errors.emplace_back("gmm_max_iter must be >= 1");
  if (!(gmm_tol > 0.0)) errors.emplace_back("gmm_tol must be positive");
  if (windows.empty()) errors.emplace_back("windows must not be empty");
  for (int w : windows)
    if (w < 1) errors.emplace_back("every window must be >= 1");
  if (!(smote_ratio > 0.0)) errors.emplace_back("smote_ratio must be positive");
  if (smote_k < 1) errors.emplace_back("smote_k must be >= 1");
  if (variants.empty()) errors.emplace_back("variants must not be empty");
  bool variants_ok = true;
  for (const auto& v : variants) collect(errors, [&] {
      try {
        (void)variant_from_string(v);
      } catch (...) {
        variants_ok = false;
        throw;
      }
    });
  if (epochs < 1) errors.emplace_back("epochs must be >= 1");
  if (batch_size < 1) errors.emplace_back("batch_size must be >= 1");
  if (patience < 0) errors.emplace_back("patience must be >= 0");
  if (!(learning_rate > 0.0)) errors.emplace_back("learning_rate must be positive");
  if (boosting_rounds < 0) errors.emplace_back("boosting_rounds must be >= 0");
  if (boosting_depth < 1) errors.emplace_back("boosting_depth must be >= 1");
  if (!(boosting_shrinkage > 0.0 && boosting_shrinkage <= 1.0))
    errors.emplace_back("boosting_shrinkage must be in (0, 1]");
  if (hidden < 1) errors.emplace_back("hidden must be >= 1");
  if (depth < 1) errors.emplace_back("depth must be >= 1");
  if (conv_channels < 1) errors.emplace_back("conv_channels must be >= 1");
  if (conv_kernel < 1) errors.emplace_back("conv_kernel must be >= 1");
  if (hidden >= 1 && depth >= 1 && conv_channels >= 1 && conv_kernel >= 1 && variants_ok && !windows.empty() &&
      windows.front() >= 1)
    for (const auto& v : variants) collect(errors, [&] { architecture(variant_from_string(v), windows.front(), seed); });
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& e : errors) os << "\n  - " << e;
    throw ConfigError(os.str());
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  visit_fields(*this, [&](const char* name, const auto& v) { j[name] = v; });
  return j;
}

void RunConfig::merge(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  std::set<std::string> known;
  std::vector<std::string> errors;
  visit_fields(*this, [&](const char* name, auto& field) {
    known.insert(name);
    auto it = j.find(name);
    if (it == j.end()) return;
    try {
      field = it->template get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      errors.push_back(std::string(name) + ": wrong type (" + it->dump() + ")");
    }
  });
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) errors.push_back("unknown key '" + k + "'");
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& e : errors) os << "\n  - " << e;
    throw ConfigError(os.str());
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.merge(j);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("missing config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

MarketConfig RunConfig::market() const {
  MarketConfig m;
  m.n_bonds = n_bonds;
  m.default_fraction = default_fraction;
  m.min_life = min_life;
  m.max_life = max_life;
  m.seed = seed;
  m.stress_onset_days = stress_onset_days;
  m.missing_fraction = missing_fraction;
  m.n_industries = n_industries;
  m.n_regions = n_regions;
  return m;
}

LabelOptions RunConfig::label_options() const {
  LabelOptions o;
  o.gmm.components = gmm_components;
  o.gmm.max_iter = gmm_max_iter;
  o.gmm.tol = gmm_tol;
  o.gmm.seed = seed;
  o.spread.loss_rate = loss_rate;
  o.spread.floor = spread_floor;
  o.spread.ma_window = ma_window;
  o.backward.acceleration_days = acceleration_days;
  o.weights.gmm = weight_gmm;
  o.weights.cs = weight_cs;
  o.weights.backward = weight_backward;
  o.weights.prior_init = prior_init;
  o.jobs = jobs;
  return o;
}

PreprocessOptions RunConfig::preprocess_options(int window) const {
  PreprocessOptions p;
  p.window = window;
  p.seed = seed;
  p.smote.target_ratio = smote_ratio;
  p.smote.k_neighbors = smote_k;
  p.smote.seed = seed;
  p.prior_init = prior_init;
  return p;
}

ArchitectureConfig RunConfig::architecture(Variant v, int window, std::uint64_t s) const {
  ArchitectureConfig a;
  a.variant = v;
  a.window = window;
  a.hidden = static_cast<std::size_t>(hidden);
  a.depth = static_cast<std::size_t>(depth);
  a.conv_channels = static_cast<std::size_t>(conv_channels);
  a.conv_kernel = static_cast<std::size_t>(conv_kernel);
  if (a.dropout.size() != a.depth) {
    // Same shape as the default schedule: first 30% at 0.5, last layer 0.125, the rest 0.25.
    a.dropout.assign(a.depth, 0.25);
    for (std::size_t k = 0; k < a.depth; ++k)
      if (10 * k < 3 * a.depth) a.dropout[k] = 0.5;
    if (a.depth > 1) a.dropout.back() = 0.125;
  }
  a.epochs = epochs;
  a.batch_size = batch_size;
  a.patience = patience;
  a.seed = s;
  a.optimizer.learning_rate = learning_rate;
  a.boosting.rounds = boosting_rounds;
  a.boosting.max_depth = boosting_depth;
  a.boosting.shrinkage = boosting_shrinkage;
  a.validate();
  return a;
}

std::vector<std::uint64_t> RunConfig::seeds() const {
  return train_seeds.empty() ? std::vector<std::uint64_t>{seed} : train_seeds;
}

// Manifests -----------------------------------------------------------------

void write_manifest(const fs::path& path, const std::string& stage, const RunConfig& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  auto hashes = [](const std::vector<fs::path>& files) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : files) j[f.filename().string()] = sha256_file(f);
    return j;
  };
  nlohmann::json m;
  m["stage"] = stage;
  m["version"] = kVersionString;
  m["seed"] = config.seed;
  m["config"] = config.to_json();
  m["inputs"] = hashes(inputs);
  m["outputs"] = hashes(outputs);
  write_text(path, m.dump(2) + "\n");
}

std::string checkpoint_name(Variant v, int window, std::uint64_t seed) {
  return std::string(to_string(v)) + "_w" + std::to_string(window) + "_s" + std::to_string(seed) + ".ckpt";
}

std::string dataset_name(int window) { return "windows_w" + std::to_string(window) + ".brwd"; }

// Stages --------------------------------------------------------------------

void stage_generate(const RunConfig& config, const fs::path& out_dir, const Logger& log) {
  config.validate();
  auto bonds = generate_market(config.market());
  const auto market = out_dir / "market.jsonl";
  write_bonds_jsonl(market, bonds);
  write_manifest(out_dir / "manifest.json", "generate", config, {}, {market});
  say(log, "generate: " + std::to_string(bonds.size()) + " bonds -> " + market.string());
}

void stage_label(const RunConfig& config, const fs::path& market, const fs::path& out_dir, const Logger& log) {
  config.validate();
  require(market, "market file", "run `bondrisk generate` first");
  const auto bonds = read_bonds_jsonl(market);
  const auto result = label_bonds(bonds, config.label_options());
  const auto labels = out_dir / "labels.csv";
  const auto gmm = out_dir / "gmm.json";
  write_labels_csv(labels, result.labels);
  write_text(gmm, gmm_summary(result.gmm).dump(2) + "\n");
  write_manifest(out_dir / "manifest.json", "label", config, {market}, {labels, gmm});
  say(log, "label: " + std::to_string(result.labels.size()) + " bonds, GMM " + std::to_string(result.gmm.iterations) +
               " iterations -> " + labels.string());
}

void stage_preprocess(const RunConfig& config, const fs::path& market, const fs::path& labels, const fs::path& out_dir,
                      const Logger& log) {
  config.validate();
  require(market, "market file", "run `bondrisk generate` first");
  require(labels, "labels file", "run `bondrisk label` first");
  const auto bonds = read_bonds_jsonl(market);
  const auto series = read_labels_csv(labels);
  std::vector<fs::path> outputs;
  for (int w : config.windows) {
    const auto ds = preprocess(bonds, series, config.preprocess_options(w));
    const auto path = out_dir / dataset_name(w);
    write_dataset(path, ds);
    outputs.push_back(path);
    say(log, "preprocess: w=" + std::to_string(w) + " " + std::to_string(ds.size()) + " windows (" +
                 std::to_string(ds.count(Split::Train, true)) + " synthetic) -> " + path.string());
  }
  write_manifest(out_dir / "manifest.json", "preprocess", config, {market, labels}, outputs);
}

void stage_train(const RunConfig& config, const fs::path& dataset, Variant variant, std::uint64_t seed,
                 const fs::path& checkpoint, const Logger& log) {
  config.validate();
  require(dataset, "preprocessed dataset", "run `bondrisk preprocess` first");
  const auto ds = read_dataset(dataset);
  auto arch = config.architecture(variant, ds.window, seed);
  arch.n_features = ds.n_features;
  Model model(arch);
  CheckpointInfo info;
  info.registry_hash = ds.registry_hash;
  info.dataset_hash = sha256_file(dataset);
  info.trace = train(model, ds);
  save_checkpoint(checkpoint, model, info);
  write_manifest(manifest_for_file(checkpoint), "train", config, {dataset}, {checkpoint});
  std::ostringstream os;
  os << "train: " << to_string(variant) << " w=" << ds.window << " seed=" << seed << " best epoch "
     << info.trace.best_epoch + 1 << "/" << info.trace.val_loss.size() << " val loss " << info.trace.best_val << " -> "
     << checkpoint.string();
  say(log, os.str());
}

void stage_predict(const RunConfig& config, const fs::path& checkpoint, const fs::path& dataset,
                   const fs::path& out_csv, const Logger& log) {
  config.validate();
  require(checkpoint, "checkpoint", "run `bondrisk train` first");
  require(dataset, "preprocessed dataset", "run `bondrisk preprocess` first");
  Model model = load_checkpoint(checkpoint);
  const auto ds = read_dataset(dataset);
  const auto idx = real_test_indices(ds);
  const auto pred = config.rolling ? predict_rolling(model, ds, idx) : predict(model, ds, idx);
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv.string());
  out << "bond_id,end_day,forecast_day,predicted_p,label,last_label\n";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& m = ds.meta[idx[k]];
    out << m.bond_id << ',' << m.end_day << ',' << m.end_day + 1 << ',' << format_double(pred[k]) << ','
        << format_double(ds.labels[idx[k]]) << ',' << format_double(ds.last_labels[idx[k]]) << '\n';
  }
  out.close();
  write_manifest(manifest_for_file(out_csv), "predict", config, {checkpoint, dataset}, {out_csv});
  say(log, "predict: " + std::to_string(idx.size()) + " test windows -> " + out_csv.string());
}

void stage_evaluate(const RunConfig& config, const std::vector<fs::path>& checkpoints,
                    const std::vector<fs::path>& datasets, const std::optional<fs::path>& market,
                    const fs::path& out_csv, const Logger& log) {
  config.validate();
  if (checkpoints.empty()) throw ConfigError("evaluate: no checkpoints given");
  if (datasets.size() != 1 && datasets.size() != checkpoints.size())
    throw ConfigError("evaluate: give one dataset, or one per checkpoint");
  for (const auto& c : checkpoints) require(c, "checkpoint", "run `bondrisk train` first");
  for (const auto& d : datasets) require(d, "preprocessed dataset", "run `bondrisk preprocess` first");
  if (market) require(*market, "market file", "run `bondrisk generate` first");

  std::vector<BondRecord> bonds;
  if (market) bonds = read_bonds_jsonl(*market);
  std::vector<EvalResult> results;
  std::vector<fs::path> inputs(checkpoints.begin(), checkpoints.end());
  inputs.insert(inputs.end(), datasets.begin(), datasets.end());
  if (market) inputs.push_back(*market);
  std::vector<fs::path> outputs{out_csv};
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    const auto& dpath = datasets.size() == 1 ? datasets[0] : datasets[k];
    Model model = load_checkpoint(checkpoints[k]);
    const auto ds = read_dataset(dpath);
    std::vector<double> pred;
    auto r = evaluate_model(model, ds, market ? &bonds : nullptr, config.rolling, &pred);
    r.dataset_hash = sha256_file(dpath);
    if (market) {
      const auto tracks_path =
          out_csv.parent_path() / ("tracks_" + checkpoints[k].stem().string() + ".csv");
      write_tracks_csv(tracks_path, build_tracks(ds, real_test_indices(ds), pred, bonds));
      outputs.push_back(tracks_path);
    }
    std::ostringstream os;
    os << "evaluate: " << checkpoints[k].filename().string() << " rmse " << r.model.rmse << " mae " << r.model.mae
       << " (persistence rmse " << r.persistence.rmse << ")";
    say(log, os.str());
    results.push_back(std::move(r));
  }
  write_eval_csv(out_csv, results);
  write_manifest(out_csv.parent_path() / "manifest.json", "evaluate", config, inputs, outputs);
}

void stage_report(const RunConfig& config, const fs::path& grid_dir, const fs::path& out_csv, const Logger& log) {
  config.validate();
  require(grid_dir, "evaluation directory", "run `bondrisk evaluate` first");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(grid_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<EvalResult> results;
  std::vector<fs::path> used;
  for (const auto& f : files) {
    try {
      auto r = read_eval_csv(f);
      results.insert(results.end(), r.begin(), r.end());
      used.push_back(f);
    } catch (const std::runtime_error&) {
      // not an evaluation report
    }
  }
  if (results.empty()) throw MissingInputError("no evaluation reports found in " + grid_dir.string());
  const auto grid = grid_from_results(results);
  write_grid_csv(out_csv, grid);
  write_manifest(out_csv.parent_path() / "manifest.json", "report", config, used, {out_csv});
  say(log, "report: " + std::to_string(grid.cells.size()) + " cells -> " + out_csv.string());
}

void run_pipeline(const RunConfig& config, const fs::path& root, const Logger& log) {
  config.validate();
  const auto gen = root / "generate";
  const auto lab = root / "label";
  const auto pre = root / "preprocess";
  const auto trn = root / "train";
  const auto prd = root / "predict";
  const auto evl = root / "evaluate";
  const auto rep = root / "report";
  stage_generate(config, gen, log);
  stage_label(config, gen / "market.jsonl", lab, log);
  stage_preprocess(config, gen / "market.jsonl", lab / "labels.csv", pre, log);

  std::vector<fs::path> checkpoints, datasets;
  for (int w : config.windows)
    for (const auto& name : config.variants)
      for (auto s : config.seeds()) {
        const Variant v = variant_from_string(name);
        const auto ckpt = trn / checkpoint_name(v, w, s);
        stage_train(config, pre / dataset_name(w), v, s, ckpt, log);
        stage_predict(config, ckpt, pre / dataset_name(w), prd / (ckpt.stem().string() + ".csv"), log);
        checkpoints.push_back(ckpt);
        datasets.push_back(pre / dataset_name(w));
      }
  stage_evaluate(config, checkpoints, datasets, gen / "market.jsonl", evl / "eval.csv", log);
  stage_report(config, evl, rep / "table.csv", log);
}

}  // namespace bondrisk
