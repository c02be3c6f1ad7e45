#include "bondrisk/bond_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bondrisk {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed integer '" + std::string(s) + "'");
  return v;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string format_double(double v) {
  if (is_absent(v)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  if (s.empty()) return kAbsent;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed number '" + std::string(s) + "'");
  return v;
}

std::string bond_to_json_line(const BondRecord& b) {
  json j;
  j["bond_id"] = b.bond_id;
  j["issue_date"] = b.issue_date;
  j["end_date"] = b.end_date;
  j["outcome"] = to_string(b.outcome);
  j["issue_grade"] = b.issue_grade.value();
  j["final_grade"] = b.final_grade.value();
  j["default_date"] = b.default_date ? json(*b.default_date) : json(nullptr);
  j["industry_id"] = b.industry_id;
  j["region_id"] = b.region_id;
  j["rows"] = b.features.rows();
  json feats = json::array();
  for (double v : b.features.data()) feats.push_back(is_absent(v) ? json(nullptr) : json(v));
  j["features"] = std::move(feats);
  j["latent_grade"] = b.latent_grade;
  return j.dump();
}

BondRecord bond_from_json_line(std::string_view line) {
  auto j = json::parse(line);
  BondRecord b;
  b.bond_id = j.at("bond_id").get<std::string>();
  b.issue_date = j.at("issue_date").get<int>();
  b.end_date = j.at("end_date").get<int>();
  b.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  b.issue_grade = RatingGrade(j.at("issue_grade").get<int>());
  b.final_grade = RatingGrade(j.at("final_grade").get<int>());
  if (!j.at("default_date").is_null()) b.default_date = j.at("default_date").get<int>();
  b.industry_id = j.at("industry_id").get<int>();
  b.region_id = j.at("region_id").get<int>();
  const auto rows = j.at("rows").get<std::size_t>();
  const auto& feats = j.at("features");
  if (feats.size() != rows * kNumFeatures) throw std::runtime_error("bond " + b.bond_id + ": feature array size");
  b.features = FeatureMatrix(rows, kNumFeatures);
  for (std::size_t i = 0; i < feats.size(); ++i)
    b.features.data()[i] = feats[i].is_null() ? kAbsent : feats[i].get<double>();
  b.latent_grade = j.at("latent_grade").get<std::vector<double>>();
  b.validate();
  return b;
}

void write_bonds_jsonl(const fs::path& path, const std::vector<BondRecord>& bonds) {
  auto out = open_out(path);
  for (const auto& b : bonds) out << bond_to_json_line(b) << '\n';
}

std::vector<BondRecord> read_bonds_jsonl(const fs::path& path) {
  auto in = open_in(path);
  std::vector<BondRecord> bonds;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (!line.empty()) bonds.push_back(bond_from_json_line(line));
  }
  return bonds;
}

void write_bonds_csv_dir(const fs::path& dir, const std::vector<BondRecord>& bonds) {
  fs::create_directories(dir);
  auto index = open_out(dir / "bonds.csv");
  index << "bond_id,issue_date,end_date,outcome,issue_grade,final_grade,default_date,industry_id,region_id\n";
  const auto& reg = default_registry();
  for (const auto& b : bonds) {
    index << b.bond_id << ',' << b.issue_date << ',' << b.end_date << ',' << to_string(b.outcome) << ','
          << b.issue_grade.value() << ',' << b.final_grade.value() << ','
          << (b.default_date ? std::to_string(*b.default_date) : std::string()) << ',' << b.industry_id << ','
          << b.region_id << '\n';
    auto out = open_out(dir / (b.bond_id + ".csv"));
    out << "day";
    for (const auto& f : reg.entries()) out << ",\"" << f.name << '"';
    out << ",latent_grade\n";
    for (std::size_t r = 0; r < b.features.rows(); ++r) {
      out << b.issue_date + static_cast<int>(r);
      for (double v : b.features.row(r)) out << ',' << format_double(v);
      out << ',' << (b.latent_grade.empty() ? std::string() : format_double(b.latent_grade[r])) << '\n';
    }
  }
}

std::vector<BondRecord> read_bonds_csv_dir(const fs::path& dir) {
  auto index = open_in(dir / "bonds.csv");
  std::string line;
  std::getline(index, line);
  std::vector<BondRecord> bonds;
  while (std::getline(index, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 9) throw std::runtime_error("bonds.csv: expected 9 columns");
    BondRecord b;
    b.bond_id = std::string(cells[0]);
    b.issue_date = parse_int(cells[1]);
    b.end_date = parse_int(cells[2]);
    b.outcome = outcome_from_string(cells[3]);
    b.issue_grade = RatingGrade(parse_int(cells[4]));
    b.final_grade = RatingGrade(parse_int(cells[5]));
    if (!cells[6].empty()) b.default_date = parse_int(cells[6]);
    b.industry_id = parse_int(cells[7]);
    b.region_id = parse_int(cells[8]);

    auto in = open_in(dir / (b.bond_id + ".csv"));
    std::string row;
    std::getline(in, row);
    const auto rows = static_cast<std::size_t>(b.trading_days());
    b.features = FeatureMatrix(rows, kNumFeatures);
    bool has_latent = false;
    std::vector<double> latent(rows, kAbsent);
    std::size_t r = 0;
    // Feature names contain no commas, but quoted headers are skipped above anyway.
    while (std::getline(in, row)) {
      strip_cr(row);
      if (row.empty()) continue;
      if (r >= rows) throw std::runtime_error(b.bond_id + ".csv: too many rows");
      auto c = split_csv(row);
      if (c.size() != kNumFeatures + 2) throw std::runtime_error(b.bond_id + ".csv: wrong column count");
      if (parse_int(c[0]) != b.issue_date + static_cast<int>(r))
        throw std::runtime_error(b.bond_id + ".csv: non-contiguous trading days");
      for (std::size_t k = 0; k < kNumFeatures; ++k) b.features(r, k) = parse_double(c[k + 1]);
      if (!c.back().empty()) {
        has_latent = true;
        latent[r] = parse_double(c.back());
      }
      ++r;
    }
    if (r != rows) throw std::runtime_error(b.bond_id + ".csv: missing rows");
    if (has_latent) b.latent_grade = std::move(latent);
    b.validate();
    bonds.push_back(std::move(b));
  }
  return bonds;
}

void write_labels_csv(const fs::path& path, const std::vector<LabelSeries>& labels) {
  auto out = open_out(path);
  out << "bond_id,day,p_gmm,p_cs,p_bwd,p_integrated\n";
  for (const auto& s : labels)
    for (std::size_t t = 0; t < s.size(); ++t)
      out << s.bond_id << ',' << s.issue_date + static_cast<int>(t) << ',' << format_double(s.p_gmm[t]) << ','
          << format_double(s.p_cs[t]) << ',' << format_double(s.p_bwd[t]) << ','
          << format_double(s.p_integrated[t]) << '\n';
}

std::vector<LabelSeries> read_labels_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<LabelSeries> out;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    auto c = split_csv(line);
    if (c.size() != 6) throw std::runtime_error(path.string() + ": expected 6 columns");
    const int day = parse_int(c[1]);
    if (out.empty() || out.back().bond_id != c[0]) {
      LabelSeries s;
      s.bond_id = std::string(c[0]);
      s.issue_date = day;
      out.push_back(std::move(s));
    }
    auto& s = out.back();
    if (day != s.issue_date + static_cast<int>(s.size()))
      throw std::runtime_error(path.string() + ": non-contiguous days for " + s.bond_id);
    s.p_gmm.push_back(parse_double(c[2]));
    s.p_cs.push_back(parse_double(c[3]));
    s.p_bwd.push_back(parse_double(c[4]));
    s.p_integrated.push_back(parse_double(c[5]));
  }
  return out;
}

}  // namespace bondrisk
