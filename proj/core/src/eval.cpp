#include "bondrisk/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bondrisk/bond_io.hpp"

namespace bondrisk {
namespace fs = std::filesystem;

ErrorMetrics rmse_mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("rmse_mae: length mismatch");
  if (pred.empty()) throw std::invalid_argument("rmse_mae: empty input");
  double sq = 0, ab = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    sq += e * e;
    ab += std::abs(e);
  }
  const double n = static_cast<double>(pred.size());
  return {std::sqrt(sq / n), ab / n, pred.size()};
}

Regression ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("ols: need equal, non-empty series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Regression r;
  r.n = x.size();
  if (sxx == 0.0) {
    r.intercept = my;
    return r;
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy > 0.0) r.r2 = sxy * sxy / (sxx * syy);
  return r;
}

std::optional<std::size_t> first_crossing(std::span<const double> series, double threshold) {
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series[t] >= threshold) return t;
  return std::nullopt;
}

std::optional<double> lead_time(std::span<const double> predicted, std::span<const double> reference,
                                double threshold) {
  if (predicted.size() != reference.size()) throw std::invalid_argument("lead_time: length mismatch");
  const auto ref = first_crossing(reference, threshold);
  if (!ref) return std::nullopt;
  const auto pred = first_crossing(predicted, threshold);
  const double p = pred ? static_cast<double>(*pred) : static_cast<double>(predicted.size());
  return static_cast<double>(*ref) - p;
}

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

RatingComparison rating_comparison(const std::vector<BondTrack>& tracks, double threshold) {
  std::vector<double> x, y;
  RatingComparison out;
  std::vector<double> leads;
  for (const auto& t : tracks) {
    if (t.predicted.size() != t.reference.size())
      throw std::invalid_argument("rating comparison: bond " + t.bond_id + " has misaligned series");
    x.insert(x.end(), t.reference.begin(), t.reference.end());
    y.insert(y.end(), t.predicted.begin(), t.predicted.end());
    if (!t.defaulted) continue;
    if (auto lead = lead_time(t.predicted, t.reference, threshold)) {
      out.leads.push_back({t.bond_id, *lead});
      leads.push_back(*lead);
    }
  }
  if (x.empty()) throw std::invalid_argument("rating comparison: no observations");
  out.regression = ols(x, y);
  out.median_lead = median(leads);
  return out;
}

std::vector<BondTrack> build_tracks(const WindowedDataset& ds, std::span<const std::size_t> indices,
                                    std::span<const double> predictions, const std::vector<BondRecord>& bonds) {
  if (indices.size() != predictions.size()) throw std::invalid_argument("build_tracks: length mismatch");
  std::map<std::string, const BondRecord*> by_id;
  for (const auto& b : bonds) by_id[b.bond_id] = &b;
  std::map<std::string, std::vector<std::pair<int, double>>> points;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& m = ds.meta[indices[k]];
    points[m.bond_id].emplace_back(m.end_day + 1, predictions[k]);
  }
  std::vector<BondTrack> tracks;
  for (auto& [id, pts] : points) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("build_tracks: bond " + id + " missing from the market");
    const BondRecord& b = *it->second;
    if (b.latent_grade.size() != b.features.rows())
      throw std::invalid_argument("build_tracks: bond " + id + " has no latent grade path");
    std::sort(pts.begin(), pts.end());
    BondTrack t;
    t.bond_id = id;
    t.defaulted = b.outcome == Outcome::Defaulted;
    for (const auto& [day, p] : pts) {
      const auto row = static_cast<std::size_t>(day - b.issue_date);
      if (row >= b.latent_grade.size()) throw std::invalid_argument("build_tracks: day outside bond " + id);
      t.days.push_back(day);
      t.predicted.push_back(p);
      t.reference.push_back(grade_to_probability(b.latent_grade[row]));
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

std::vector<std::size_t> real_test_indices(const WindowedDataset& ds) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.meta[i].split == Split::Test && !ds.meta[i].synthetic) out.push_back(i);
  return out;
}

EvalResult evaluate_model(Model& model, const WindowedDataset& ds, const std::vector<BondRecord>* bonds,
                          bool rolling, std::vector<double>* predictions) {
  const auto idx = real_test_indices(ds);
  if (idx.empty()) throw std::invalid_argument("evaluate: dataset has no test samples");
  EvalResult r;
  r.variant = model.config().variant;
  r.window = ds.window;
  r.seed = model.config().seed;
  const auto pred = rolling ? predict_rolling(model, ds, idx) : predict(model, ds, idx);
  std::vector<double> truth, last;
  for (std::size_t i : idx) {
    truth.push_back(ds.labels[i]);
    last.push_back(ds.last_labels[i]);
  }
  r.model = rmse_mae(pred, truth);
  r.persistence = rmse_mae(last, truth);
  if (bonds) r.rating = rating_comparison(build_tracks(ds, idx, pred, *bonds));
  if (predictions) *predictions = pred;
  return r;
}

// Grid ----------------------------------------------------------------------

const GridCell* GridReport::find(Variant v, int window) const {
  for (const auto& c : cells)
    if (c.variant == v && c.window == window) return &c;
  return nullptr;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {m, 0.0};
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / (n - 1.0))};
}

std::size_t variant_rank(Variant v) {
  const auto& all = all_variants();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), v) - all.begin());
}

}  // namespace

void summarize(GridReport& report) {
  std::map<int, std::vector<GridCell*>> by_window;
  for (auto& c : report.cells) {
    std::tie(c.rmse_mean, c.rmse_std) = mean_std(c.rmse);
    std::tie(c.mae_mean, c.mae_std) = mean_std(c.mae);
    c.rmse_top2 = c.mae_top2 = false;
    by_window[c.window].push_back(&c);
  }
  for (auto& [w, cells] : by_window) {
    auto mark = [&](auto key, auto flag) {
      auto sorted = cells;
      std::stable_sort(sorted.begin(), sorted.end(), [&](const GridCell* a, const GridCell* b) {
        if (key(a) != key(b)) return key(a) < key(b);
        return variant_rank(a->variant) < variant_rank(b->variant);
      });
      for (std::size_t k = 0; k < std::min<std::size_t>(2, sorted.size()); ++k) flag(sorted[k]);
    };
    mark([](const GridCell* c) { return c->rmse_mean; }, [](GridCell* c) { c->rmse_top2 = true; });
    mark([](const GridCell* c) { return c->mae_mean; }, [](GridCell* c) { c->mae_top2 = true; });
  }
}

GridReport grid_from_results(const std::vector<EvalResult>& results) {
  GridReport report;
  std::map<std::pair<std::size_t, int>, std::size_t> slot;
  std::vector<const EvalResult*> sorted;
  for (const auto& r : results) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const EvalResult* a, const EvalResult* b) {
    return std::tuple(a->window, variant_rank(a->variant), a->seed) <
           std::tuple(b->window, variant_rank(b->variant), b->seed);
  });
  for (const auto* r : sorted) {
    const auto key = std::make_pair(variant_rank(r->variant), r->window);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, report.cells.size()).first;
      GridCell c;
      c.variant = r->variant;
      c.window = r->window;
      c.dataset_hash = r->dataset_hash;
      report.cells.push_back(std::move(c));
    }
    auto& c = report.cells[it->second];
    c.seeds.push_back(r->seed);
    c.rmse.push_back(r->model.rmse);
    c.mae.push_back(r->model.mae);
    c.persistence_rmse.push_back(r->persistence.rmse);
  }
  summarize(report);
  return report;
}

GridReport comparison_grid(const std::map<int, const WindowedDataset*>& datasets,
                           const std::map<int, std::string>& dataset_hashes, const GridRequest& request,
                           const std::function<void(const std::string&)>& log) {
  struct Job {
    int window;
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& [w, ds] : datasets)
    for (Variant v : request.variants)
      for (auto s : request.seeds) jobs.push_back({w, v, s});
  std::vector<EvalResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const Job& j = jobs[k];
        const WindowedDataset& ds = *datasets.at(j.window);
        ArchitectureConfig cfg = request.base;
        cfg.variant = j.variant;
        cfg.window = j.window;
        cfg.seed = j.seed;
        cfg.n_features = ds.n_features;
        Model model(cfg);
        train(model, ds);
        results[k] = evaluate_model(model, ds, nullptr, false);
        auto h = dataset_hashes.find(j.window);
        if (h != dataset_hashes.end()) results[k].dataset_hash = h->second;
        if (log) {
          std::lock_guard lock(log_mutex);
          std::ostringstream os;
          os << to_string(j.variant) << " w=" << j.window << " seed=" << j.seed << " rmse=" << results[k].model.rmse
             << " mae=" << results[k].model.mae;
          log(os.str());
        }
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, request.jobs));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(n_threads, jobs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return grid_from_results(results);
}

// CSV -----------------------------------------------------------------------

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

constexpr const char* kEvalHeader =
    "variant,window,seed,dataset_hash,n_test,rmse,mae,persistence_rmse,persistence_mae,slope,intercept,r2,"
    "median_lead,n_leads";

}  // namespace

void write_grid_csv(const fs::path& path, const GridReport& report) {
  auto out = open_out(path);
  out << "variant,window,n_seeds,rmse_mean,rmse_std,mae_mean,mae_std,rmse_top2,mae_top2,persistence_rmse_mean,"
         "dataset_hash\n";
  for (const auto& c : report.cells) {
    const auto [pm, ps] = mean_std(c.persistence_rmse);
    (void)ps;
    out << to_string(c.variant) << ',' << c.window << ',' << c.seeds.size() << ',' << format_double(c.rmse_mean)
        << ',' << format_double(c.rmse_std) << ',' << format_double(c.mae_mean) << ',' << format_double(c.mae_std)
        << ',' << (c.rmse_top2 ? 1 : 0) << ',' << (c.mae_top2 ? 1 : 0) << ',' << format_double(pm) << ','
        << c.dataset_hash << '\n';
  }
}

void write_eval_csv(const fs::path& path, const std::vector<EvalResult>& results) {
  auto out = open_out(path);
  out << kEvalHeader << '\n';
  for (const auto& r : results) {
    out << to_string(r.variant) << ',' << r.window << ',' << r.seed << ',' << r.dataset_hash << ',' << r.model.n << ','
        << format_double(r.model.rmse) << ',' << format_double(r.model.mae) << ','
        << format_double(r.persistence.rmse) << ',' << format_double(r.persistence.mae) << ',';
    if (r.rating)
      out << format_double(r.rating->regression.slope) << ',' << format_double(r.rating->regression.intercept) << ','
          << opt(r.rating->regression.r2) << ',' << opt(r.rating->median_lead) << ',' << r.rating->leads.size();
    else
      out << ",,,,";
    out << '\n';
  }
}

std::vector<EvalResult> read_eval_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kEvalHeader)
    throw std::runtime_error(path.string() + ": not an evaluation report");
  std::vector<EvalResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_line(line);
    if (c.size() != 14) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    EvalResult r;
    r.variant = variant_from_string(c[0]);
    r.window = std::stoi(c[1]);
    r.seed = std::stoull(c[2]);
    r.dataset_hash = c[3];
    r.model.n = r.persistence.n = std::stoull(c[4]);
    r.model.rmse = parse_double(c[5]);
    r.model.mae = parse_double(c[6]);
    r.persistence.rmse = parse_double(c[7]);
    r.persistence.mae = parse_double(c[8]);
    if (!c[9].empty()) {
      RatingComparison rc;
      rc.regression.slope = parse_double(c[9]);
      rc.regression.intercept = parse_double(c[10]);
      if (!c[11].empty()) rc.regression.r2 = parse_double(c[11]);
      if (!c[12].empty()) rc.median_lead = parse_double(c[12]);
      r.rating = rc;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_tracks_csv(const fs::path& path, const std::vector<BondTrack>& tracks) {
  auto out = open_out(path);
  out << "bond_id,day,predicted_p,reference_p\n";
  for (const auto& t : tracks)
    for (std::size_t k = 0; k < t.days.size(); ++k)
      out << t.bond_id << ',' << t.days[k] << ',' << format_double(t.predicted[k]) << ','
          << format_double(t.reference[k]) << '\n';
}

}  // namespace bondrisk
