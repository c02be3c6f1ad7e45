#include "bondrisk/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace bondrisk {
namespace fs = std::filesystem;

namespace {
constexpr char kMagic[4] = {'B', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

nlohmann::json trace_to_json(const TrainResult& r) {
  return {{"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"best_epoch", r.best_epoch},
          {"best_val", r.best_val},
          {"early_stopped", r.early_stopped}};
}

TrainResult trace_from_json(const nlohmann::json& j) {
  TrainResult r;
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.val_loss = j.at("val_loss").get<std::vector<double>>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.best_val = j.at("best_val").get<double>();
  r.early_stopped = j.at("early_stopped").get<bool>();
  return r;
}

void save_checkpoint(const fs::path& path, Model& model, const CheckpointInfo& info) {
  nlohmann::json h;
  h["format"] = "bondrisk-checkpoint";
  h["version"] = kVersion;
  h["architecture"] = model.config().to_json();
  h["registry_hash"] = info.registry_hash;
  h["dataset_hash"] = info.dataset_hash;
  h["trace"] = trace_to_json(info.trace);
  std::vector<float> blob;
  if (model.neural()) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto* p : model.network().parameters()) {
      shapes.push_back({{"name", p->name}, {"shape", p->value.shape()}});
      for (std::size_t i = 0; i < p->value.size(); ++i) blob.push_back(static_cast<float>(p->value[i]));
    }
    h["parameters"] = std::move(shapes);
  } else {
    h["booster"] = model.booster().to_json();
  }
  h["blob_floats"] = blob.size();
  const std::string header = h.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 4);
  detail::put_le(out, kVersion);
  detail::put_le(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_floats(out, blob);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Model load_checkpoint(const fs::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path.string() + ": not a checkpoint");
  if (detail::get_le<std::uint32_t>(in) != kVersion) throw std::runtime_error(path.string() + ": unsupported version");
  const auto len = detail::get_le<std::uint64_t>(in);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  const auto h = nlohmann::json::parse(header);

  Model model(ArchitectureConfig::from_json(h.at("architecture")));
  const auto blob = detail::get_floats(in, h.at("blob_floats").get<std::size_t>());
  if (model.neural()) {
    const auto params = model.network().parameters();
    const auto& shapes = h.at("parameters");
    if (shapes.size() != params.size()) throw std::runtime_error(path.string() + ": parameter list mismatch");
    std::size_t off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& v = params[k]->value;
      if (shapes[k].at("shape").get<std::vector<std::size_t>>() != v.shape())
        throw std::runtime_error(path.string() + ": parameter " + params[k]->name + " has shape " +
                                 shapes[k].at("shape").dump() + ", expected " + nn::shape_string(v.shape()));
      if (off + v.size() > blob.size()) throw std::runtime_error(path.string() + ": truncated parameter blob");
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(blob[off + i]);
      off += v.size();
    }
    if (off != blob.size()) throw std::runtime_error(path.string() + ": trailing parameter data");
  } else {
    model.booster() = GradientBoosting::from_json(h.at("booster"));
  }
  if (info) {
    info->registry_hash = h.at("registry_hash").get<std::string>();
    info->dataset_hash = h.at("dataset_hash").get<std::string>();
    info->trace = trace_from_json(h.at("trace"));
  }
  return model;
}

}  // namespace bondrisk
