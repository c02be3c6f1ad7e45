#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bondrisk/schema.hpp"

namespace bondrisk {

// JSON-lines: one bond per line, features row-major with explicit nulls for absent cells.
std::string bond_to_json_line(const BondRecord& bond);
BondRecord bond_from_json_line(std::string_view line);
void write_bonds_jsonl(const std::filesystem::path& path, const std::vector<BondRecord>& bonds);
std::vector<BondRecord> read_bonds_jsonl(const std::filesystem::path& path);

// Directory layout: bonds.csv holds static attributes, <bond_id>.csv holds the
// trading-day index, the 53 named feature columns and the latent grade.
void write_bonds_csv_dir(const std::filesystem::path& dir, const std::vector<BondRecord>& bonds);
std::vector<BondRecord> read_bonds_csv_dir(const std::filesystem::path& dir);

// CSV columns: bond_id, day, p_gmm, p_cs, p_bwd, p_integrated.
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelSeries>& labels);
std::vector<LabelSeries> read_labels_csv(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double; empty for absent.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace bondrisk
