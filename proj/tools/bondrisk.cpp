// bondrisk: generate -> label -> preprocess -> train -> predict -> evaluate -> report.
//
// Settings resolve as: built-in defaults, then --config <file.json>, then
// --set key=value, then the dedicated flags. Outputs default to the layout
// under $BONDRISK_OUT_ROOT (or ./bondrisk-out when unset).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bondrisk/stages.hpp"

namespace fs = std::filesystem;
using bondrisk::RunConfig;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kNumerical = 4 };

fs::path default_root() {
  const char* env = std::getenv("BONDRISK_OUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("bondrisk-out");
}

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> epochs;
  std::optional<int> n_bonds;
  std::vector<int> windows;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> train_seeds;
  bool rolling = false;

  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) c = bondrisk::load_run_config(config_file);
    nlohmann::json overlay = nlohmann::json::object();
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw bondrisk::ConfigError("--set expects key=value, got '" + kv + "'");
      const auto key = kv.substr(0, eq);
      const auto raw = kv.substr(eq + 1);
      try {
        overlay[key] = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::parse_error&) {
        overlay[key] = raw;
      }
    }
    if (seed) overlay["seed"] = *seed;
    if (jobs) overlay["jobs"] = *jobs;
    if (epochs) overlay["epochs"] = *epochs;
    if (n_bonds) overlay["n_bonds"] = *n_bonds;
    if (!windows.empty()) overlay["windows"] = windows;
    if (!variants.empty()) overlay["variants"] = variants;
    if (!train_seeds.empty()) overlay["train_seeds"] = train_seeds;
    if (rolling) overlay["rolling"] = true;
    c.merge(overlay);
    c.validate();
    return c;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "Flat JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "Override one config key (key=value, value parsed as JSON)");
  app->add_option("--seed", c.seed, "Global seed");
  app->add_option("--jobs", c.jobs, "Worker threads for labeling");
  app->add_option("--epochs", c.epochs, "Training epoch budget");
  app->add_option("--n-bonds", c.n_bonds, "Bonds in the synthetic market");
  app->add_option("--windows", c.windows, "Lag windows")->delimiter(',');
  app->add_option("--variants", c.variants, "Model variants")->delimiter(',');
  app->add_option("--train-seeds", c.train_seeds, "Training seeds")->delimiter(',');
  app->add_flag("--rolling", c.rolling, "Back-fill the prior column with the model's own predictions");
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bond default-probability labeling and forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bondrisk::kVersionString);
  const fs::path root = default_root();
  Common common;

  std::string out;
  std::string market, labels, dataset, ckpt, grid, variant = "ours";
  std::vector<std::string> ckpts, datasets;
  std::optional<int> window;
  bool all = false;

  auto* gen = app.add_subcommand("generate", "Write a seeded synthetic bond market");
  add_common(gen, common);
  gen->add_option("--out", out, "Output directory");

  auto* lab = app.add_subcommand("label", "Annotate daily default probabilities");
  add_common(lab, common);
  lab->add_option("--market", market, "Market JSONL");
  lab->add_option("--out", out, "Output directory");

  auto* pre = app.add_subcommand("preprocess", "Fill, standardize, window, split and oversample");
  add_common(pre, common);
  pre->add_option("--market", market, "Market JSONL");
  pre->add_option("--labels", labels, "Labels CSV");
  pre->add_option("--out", out, "Output directory");

  auto* trn = app.add_subcommand("train", "Train one model variant");
  add_common(trn, common);
  trn->add_option("--dataset", dataset, "Preprocessed dataset")->required();
  trn->add_option("--variant", variant, "ours, rnn, lstm, pconvlstm or boosting");
  trn->add_option("--window", window, "Expected window of the dataset");
  trn->add_option("--out", out, "Checkpoint path");

  auto* prd = app.add_subcommand("predict", "Predict the test split of a dataset");
  add_common(prd, common);
  prd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  prd->add_option("--dataset", dataset, "Preprocessed dataset")->required();
  prd->add_option("--out", out, "Output CSV");

  auto* evl = app.add_subcommand("evaluate", "Test-split metrics for checkpoints");
  add_common(evl, common);
  evl->add_option("--ckpt", ckpts, "Checkpoint(s)")->required();
  evl->add_option("--dataset", datasets, "Dataset, or one per checkpoint")->required();
  evl->add_option("--market", market, "Market JSONL for the rating comparison");
  evl->add_option("--out", out, "Report CSV");

  auto* rep = app.add_subcommand("report", "Aggregate evaluation reports into a comparison table");
  add_common(rep, common);
  rep->add_option("--grid", grid, "Directory of evaluation CSVs");
  rep->add_option("--out", out, "Table CSV");

  auto* pip = app.add_subcommand("pipeline", "Run every stage");
  add_common(pip, common);
  pip->add_flag("--all", all, "Run generate through report");
  pip->add_option("--out", out, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig config = common.resolve();
    const auto dir = [&](const char* stage) { return out.empty() ? root / stage : fs::path(out); };
    if (*gen) {
      bondrisk::stage_generate(config, dir("generate"), log_line);
    } else if (*lab) {
      bondrisk::stage_label(config, market.empty() ? root / "generate" / "market.jsonl" : fs::path(market),
                            dir("label"), log_line);
    } else if (*pre) {
      bondrisk::stage_preprocess(config, market.empty() ? root / "generate" / "market.jsonl" : fs::path(market),
                                 labels.empty() ? root / "label" / "labels.csv" : fs::path(labels),
                                 dir("preprocess"), log_line);
    } else if (*trn) {
      const auto v = bondrisk::variant_from_string(variant);
      if (window && fs::exists(dataset)) {
        const auto ds = bondrisk::read_dataset(dataset);
        if (ds.window != *window)
          throw bondrisk::ConfigError("--window " + std::to_string(*window) + " does not match dataset window " +
                                      std::to_string(ds.window));
      }
      const auto s = config.seed;
      const fs::path target =
          out.empty() ? root / "train" / bondrisk::checkpoint_name(v, window.value_or(0), s) : fs::path(out);
      bondrisk::stage_train(config, dataset, v, s, target, log_line);
    } else if (*prd) {
      const fs::path target = out.empty() ? root / "predict" / (fs::path(ckpt).stem().string() + ".csv") : fs::path(out);
      bondrisk::stage_predict(config, ckpt, dataset, target, log_line);
    } else if (*evl) {
      std::vector<fs::path> c(ckpts.begin(), ckpts.end()), d(datasets.begin(), datasets.end());
      std::optional<fs::path> m;
      if (!market.empty()) m = market;
      bondrisk::stage_evaluate(config, c, d, m, out.empty() ? root / "evaluate" / "eval.csv" : fs::path(out),
                               log_line);
    } else if (*rep) {
      bondrisk::stage_report(config, grid.empty() ? root / "evaluate" : fs::path(grid),
                             out.empty() ? root / "report" / "table.csv" : fs::path(out), log_line);
    } else if (*pip) {
      if (!all) throw bondrisk::ConfigError("pipeline: pass --all to run every stage");
      bondrisk::run_pipeline(config, out.empty() ? root : fs::path(out), log_line);
    }
  } catch (const bondrisk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const bondrisk::MissingInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const bondrisk::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
