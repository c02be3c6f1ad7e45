#include "bondrisk/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bondrisk/labeler.hpp"
#include "binary_io.hpp"

namespace bondrisk {
namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

std::vector<double> fill_series(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::size_t prev = values.size();  // index of last observed value
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (is_absent(values[t])) continue;
    if (prev == values.size()) {
      for (std::size_t k = 0; k < t; ++k) out[k] = values[t];
    } else {
      const double a = values[prev];
      const double b = values[t];
      const double span = static_cast<double>(t - prev);
      for (std::size_t k = prev + 1; k < t; ++k) out[k] = a + (b - a) * static_cast<double>(k - prev) / span;
    }
    prev = t;
  }
  if (prev == values.size()) throw std::invalid_argument("fill_series: no observed value");
  for (std::size_t k = prev + 1; k < values.size(); ++k) out[k] = values[prev];
  return out;
}

BondRecord fill_missing(const BondRecord& bond) {
  BondRecord out = bond;
  const auto& reg = default_registry();
  for (std::size_t c = 0; c < bond.features.cols(); ++c) {
    auto col = bond.features.column(c);
    const bool all_absent = std::all_of(col.begin(), col.end(), [](double v) { return is_absent(v); });
    const auto& entry = reg.by_id(static_cast<int>(c) + 1);
    if (all_absent) {
      if (entry.derived) continue;
      throw std::invalid_argument("bond " + bond.bond_id + ": column " + std::to_string(entry.id) + " (" + entry.name +
                                  ") has no observed value");
    }
    out.features.set_column(c, fill_series(col));
  }
  return out;
}

Standardized standardize(const BondRecord& bond) {
  Standardized s{bond, std::vector<double>(bond.features.cols(), 0.0), std::vector<double>(bond.features.cols(), 1.0)};
  const auto& reg = default_registry();
  const std::size_t T = bond.features.rows();
  for (std::size_t c = 0; c < bond.features.cols(); ++c) {
    if (reg.by_id(static_cast<int>(c) + 1).derived) continue;
    double mean = 0;
    for (std::size_t t = 0; t < T; ++t) mean += bond.features(t, c);
    mean /= static_cast<double>(T);
    double var = 0;
    for (std::size_t t = 0; t < T; ++t) var += (bond.features(t, c) - mean) * (bond.features(t, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(T));
    s.mean[c] = mean;
    if (sd > 0.0) {
      s.scale[c] = sd;
      for (std::size_t t = 0; t < T; ++t) s.bond.features(t, c) = (bond.features(t, c) - mean) / sd;
    } else {
      for (std::size_t t = 0; t < T; ++t) s.bond.features(t, c) = 0.0;
    }
  }
  return s;
}

std::vector<std::size_t> WindowedDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < meta.size(); ++i)
    if (meta[i].split == s) out.push_back(i);
  return out;
}

std::size_t WindowedDataset::count(Split s, bool synthetic) const {
  return static_cast<std::size_t>(std::count_if(meta.begin(), meta.end(), [&](const SampleMeta& m) {
    return m.split == s && m.synthetic == synthetic;
  }));
}

void WindowedDataset::push_back(std::span<const float> x, float label, float last_label, SampleMeta m) {
  if (x.size() != sample_size()) throw std::invalid_argument("dataset: sample has wrong size");
  inputs.insert(inputs.end(), x.begin(), x.end());
  labels.push_back(label);
  last_labels.push_back(last_label);
  meta.push_back(std::move(m));
}

bool WindowedDataset::identical(const WindowedDataset& o) const {
  auto same_bits = [](const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  };
  return window == o.window && n_features == o.n_features && same_bits(inputs, o.inputs) &&
         same_bits(labels, o.labels) && same_bits(last_labels, o.last_labels) && meta == o.meta &&
         bond_split == o.bond_split && seed == o.seed && registry_hash == o.registry_hash &&
         skipped_bonds == o.skipped_bonds;
}

WindowedDataset make_windows(const std::vector<BondRecord>& bonds, const std::vector<LabelSeries>& labels, int w) {
  if (w < 1) throw std::invalid_argument("make_windows: window must be >= 1");
  if (bonds.size() != labels.size()) throw std::invalid_argument("make_windows: bonds and labels differ in count");
  WindowedDataset ds;
  ds.window = w;
  ds.registry_hash = default_registry().hash();
  const auto W = static_cast<std::size_t>(w);
  std::vector<float> x(W * kNumFeatures);
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    const auto& b = bonds[i];
    const auto& l = labels[i];
    if (l.bond_id != b.bond_id || l.size() != b.features.rows())
      throw std::invalid_argument("make_windows: labels misaligned for bond " + b.bond_id);
    const std::size_t T = b.features.rows();
    if (T <= W) {
      ++ds.skipped_bonds;
      continue;
    }
    for (std::size_t end = W - 1; end + 1 < T; ++end) {
      for (std::size_t k = 0; k < W; ++k) {
        auto row = b.features.row(end + 1 - W + k);
        for (std::size_t c = 0; c < kNumFeatures; ++c) x[k * kNumFeatures + c] = static_cast<float>(row[c]);
      }
      ds.push_back(x, static_cast<float>(l.p_integrated[end + 1]), static_cast<float>(l.p_integrated[end]),
                   SampleMeta{b.bond_id, b.issue_date + static_cast<int>(end), b.risk_class(), Split::Train, false});
    }
  }
  return ds;
}

std::map<std::string, Split> split_bonds(const std::vector<BondRecord>& bonds, std::uint64_t seed) {
  std::map<std::string, Split> out;
  std::mt19937_64 rng(seed);
  for (RiskClass cls : {RiskClass::Low, RiskClass::High}) {
    std::vector<std::string> ids;
    for (const auto& b : bonds)
      if (b.risk_class() == cls) ids.push_back(b.bond_id);
    if (ids.size() < 3)
      throw std::invalid_argument("split_bonds: " + std::string(to_string(cls)) + "-risk class has " +
                                  std::to_string(ids.size()) + " bonds, need at least 3");
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n_holdout = std::max<std::size_t>(1, ids.size() / 10);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Split s = Split::Train;
      if (i < n_holdout)
        s = Split::Val;
      else if (i < 2 * n_holdout)
        s = Split::Test;
      out[ids[i]] = s;
    }
  }
  return out;
}

void apply_split(WindowedDataset& ds, const std::map<std::string, Split>& assignment) {
  for (auto& m : ds.meta) {
    auto it = assignment.find(m.bond_id);
    if (it == assignment.end()) throw std::invalid_argument("apply_split: bond " + m.bond_id + " has no split");
    m.split = it->second;
  }
  ds.bond_split = assignment;
}

std::vector<SmoteDraw> smote_plan(std::span<const float> rows, std::size_t dim, std::size_t count, int k,
                                  std::uint64_t seed) {
  if (dim == 0 || rows.size() % dim != 0) throw std::invalid_argument("smote: bad row layout");
  const std::size_t m = rows.size() / dim;
  if (k < 1 || m < static_cast<std::size_t>(k) + 1)
    throw std::invalid_argument("smote: need at least k_neighbors + 1 minority samples, have " + std::to_string(m));
  std::vector<SmoteDraw> draws;
  if (count == 0) return draws;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto K = static_cast<std::size_t>(k);
  std::vector<std::vector<std::size_t>> neighbors(m);
  auto nearest = [&](std::size_t s) -> const std::vector<std::size_t>& {
    auto& nn = neighbors[s];
    if (!nn.empty()) return nn;
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(m - 1);
    const float* a = rows.data() + s * dim;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == s) continue;
      const float* b = rows.data() + j * dim;
      double acc = 0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
        acc += diff * diff;
      }
      d.emplace_back(acc, j);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(K), d.end());
    for (std::size_t j = 0; j < K; ++j) nn.push_back(d[j].second);
    return nn;
  };

  std::uniform_int_distribution<std::size_t> pick(0, K - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  draws.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = order[i % m];
    const auto& nn = nearest(s);
    SmoteDraw d;
    d.source = s;
    d.neighbor = nn[pick(rng)];
    d.u = u01(rng);
    draws.push_back(d);
  }
  return draws;
}

WindowedDataset smote_balance(const WindowedDataset& ds, const SmoteParams& params) {
  std::vector<std::size_t> minority;
  std::size_t majority = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.meta[i].split != Split::Train) continue;
    if (ds.meta[i].risk_class == RiskClass::High)
      minority.push_back(i);
    else
      ++majority;
  }
  const auto target = static_cast<std::size_t>(std::ceil(params.target_ratio * static_cast<double>(majority)));
  const std::size_t needed = target > minority.size() ? target - minority.size() : 0;

  WindowedDataset out = ds;
  if (needed == 0) return out;
  const std::size_t dim = ds.sample_size();
  std::vector<float> rows;
  rows.reserve(minority.size() * dim);
  for (std::size_t i : minority) {
    auto s = ds.sample(i);
    rows.insert(rows.end(), s.begin(), s.end());
  }
  const auto draws = smote_plan(rows, dim, needed, params.k_neighbors, params.seed);
  std::vector<float> x(dim);
  for (const auto& d : draws) {
    const std::size_t a = minority[d.source];
    const std::size_t b = minority[d.neighbor];
    auto sa = ds.sample(a);
    auto sb = ds.sample(b);
    const auto u = static_cast<float>(d.u);
    for (std::size_t c = 0; c < dim; ++c) x[c] = sa[c] + u * (sb[c] - sa[c]);
    const float label = ds.labels[a] + u * (ds.labels[b] - ds.labels[a]);
    const float last = ds.last_labels[a] + u * (ds.last_labels[b] - ds.last_labels[a]);
    SampleMeta m = ds.meta[a];
    m.synthetic = true;
    out.push_back(x, label, last, std::move(m));
  }
  return out;
}

WindowedDataset preprocess(const std::vector<BondRecord>& bonds, const std::vector<LabelSeries>& labels,
                           const PreprocessOptions& options) {
  if (bonds.size() != labels.size()) throw std::invalid_argument("preprocess: bonds and labels differ in count");
  std::vector<BondRecord> ready;
  ready.reserve(bonds.size());
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    auto filled = with_prior_column(fill_missing(bonds[i]), labels[i], options.prior_init);
    ready.push_back(standardize(filled).bond);
  }
  auto ds = make_windows(ready, labels, options.window);
  apply_split(ds, split_bonds(bonds, options.seed));
  ds.seed = options.seed;
  SmoteParams smote = options.smote;
  smote.seed = options.seed;
  return smote_balance(ds, smote);
}

namespace {

using detail::get_floats;
using detail::get_le;
using detail::put_floats;
using detail::put_le;

constexpr char kMagic[4] = {'B', 'R', 'W', 'D'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_dataset(const fs::path& path, const WindowedDataset& ds) {
  nlohmann::json h;
  h["format"] = "bondrisk-windows";
  h["version"] = kVersion;
  h["window"] = ds.window;
  h["n_features"] = ds.n_features;
  h["n_samples"] = ds.size();
  h["shapes"] = {{"inputs", {ds.size(), ds.window, ds.n_features}}, {"labels", {ds.size()}}, {"last_labels", {ds.size()}}};
  h["seed"] = ds.seed;
  h["registry_hash"] = ds.registry_hash;
  h["skipped_bonds"] = ds.skipped_bonds;
  nlohmann::json counts;
  for (Split s : {Split::Train, Split::Val, Split::Test})
    counts[std::string(to_string(s))] = {{"real", ds.count(s, false)}, {"synthetic", ds.count(s, true)}};
  h["split_counts"] = counts;
  nlohmann::json splits;
  for (const auto& [id, s] : ds.bond_split) splits[id] = to_string(s);
  h["bond_split"] = splits;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& m : ds.meta)
    samples.push_back({m.bond_id, m.end_day, to_string(m.risk_class), to_string(m.split), m.synthetic});
  h["samples"] = std::move(samples);
  const std::string header = h.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 4);
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_floats(out, ds.inputs);
  put_floats(out, ds.labels);
  put_floats(out, ds.last_labels);
}

WindowedDataset read_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path.string() + ": not a window dataset");
  if (get_le<std::uint32_t>(in) != kVersion) throw std::runtime_error(path.string() + ": unsupported version");
  const auto len = get_le<std::uint64_t>(in);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  const auto h = nlohmann::json::parse(header);

  WindowedDataset ds;
  ds.window = h.at("window").get<int>();
  ds.n_features = h.at("n_features").get<std::size_t>();
  ds.seed = h.at("seed").get<std::uint64_t>();
  ds.registry_hash = h.at("registry_hash").get<std::string>();
  ds.skipped_bonds = h.at("skipped_bonds").get<int>();
  for (const auto& [id, s] : h.at("bond_split").items()) ds.bond_split[id] = split_from_string(s.get<std::string>());
  for (const auto& s : h.at("samples")) {
    SampleMeta m;
    m.bond_id = s.at(0).get<std::string>();
    m.end_day = s.at(1).get<int>();
    m.risk_class = s.at(2).get<std::string>() == "high" ? RiskClass::High : RiskClass::Low;
    m.split = split_from_string(s.at(3).get<std::string>());
    m.synthetic = s.at(4).get<bool>();
    ds.meta.push_back(std::move(m));
  }
  const auto n = h.at("n_samples").get<std::size_t>();
  if (ds.meta.size() != n) throw std::runtime_error(path.string() + ": sample metadata count mismatch");
  ds.inputs = get_floats(in, n * ds.sample_size());
  ds.labels = get_floats(in, n);
  ds.last_labels = get_floats(in, n);
  return ds;
}

}  // namespace bondrisk
