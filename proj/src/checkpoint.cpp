#include "airfi/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace airfi {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'I', 'R', 'F', 'I', 'C', 'K', '1'};

struct TensorEntry {
  std::string name;
  const MatXf* mat;
};

// The full tensor list of a trained model, in a fixed order. The const_cast
// is read-only plumbing: collect() hands out mutable pointers because the
// optimizer shares the same registry.
std::vector<TensorEntry> tensor_list(const TrainedModel<float>& tm,
                                     const MatXf& norm_mean,
                                     const MatXf& norm_std) {
  auto& model = const_cast<TrainedModel<float>&>(tm).model;
  std::vector<TensorEntry> out;
  for (const auto& p : model.all_params()) out.push_back({p.name, p.value});
  out.push_back({"covariance.diag", &model.covariance.diag});
  out.push_back({"norm.mean", &norm_mean});
  out.push_back({"norm.stddev", &norm_std});
  out.push_back({"reservoir", &tm.reservoir});
  return out;
}

void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& f, const std::string& what) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw Error(ErrorCode::kCorruptCheckpoint, "truncated " + what);
  return v;
}

}  // namespace

void save_checkpoint(const TrainedModel<float>& tm,
                     const std::filesystem::path& path) {
  const MatXf norm_mean = tm.norm_stats.mean;
  const MatXf norm_std = tm.norm_stats.stddev;
  const auto tensors = tensor_list(tm, norm_mean, norm_std);

  json index;
  index["format"] = 1;
  json meta;
  meta["latent_dim"] = tm.model.cfg.encoder.latent_dim;
  json stages = json::array();
  for (const ConvStage& st : tm.model.cfg.encoder.stages) {
    stages.push_back({st.channels, st.kernel, st.stride});
  }
  meta["stages"] = stages;
  meta["leaky_slope"] = tm.model.cfg.encoder.leaky_slope;
  meta["input_channels"] = tm.model.cfg.encoder.input_channels;
  meta["input_time"] = tm.model.cfg.encoder.input_time;
  meta["prior_family"] = static_cast<int>(tm.model.cfg.prior.family);
  meta["prior_scale"] = tm.model.cfg.prior.scale;
  meta["disc_hidden"] = tm.model.cfg.disc.hidden;
  meta["clf_hidden"] = tm.model.cfg.clf.hidden;
  meta["num_classes"] = tm.model.num_classes;
  meta["gamma"] = tm.gamma;
  meta["source_env_ids"] = tm.source_env_ids;
  meta["fingerprint"] = tm.fingerprint;
  index["meta"] = meta;

  json jt = json::array();
  std::uint64_t offset = 0;  // in floats
  for (const auto& t : tensors) {
    jt.push_back({{"name", t.name},
                  {"rows", t.mat->rows()},
                  {"cols", t.mat->cols()},
                  {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.mat->size());
  }
  index["tensors"] = jt;
  const std::string index_str = index.dump();

  std::vector<float> blob(offset);
  std::uint64_t at = 0;
  for (const auto& t : tensors) {
    std::memcpy(blob.data() + at, t.mat->data(), sizeof(float) * t.mat->size());
    at += static_cast<std::uint64_t>(t.mat->size());
  }
  const std::uint64_t checksum =
      fnv1a64(blob.data(), sizeof(float) * blob.size());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  f.write(kMagic, sizeof(kMagic));
  write_u64(f, index_str.size());
  f.write(index_str.data(), static_cast<std::streamsize>(index_str.size()));
  write_u64(f, sizeof(float) * blob.size());
  f.write(reinterpret_cast<const char*>(blob.data()),
          static_cast<std::streamsize>(sizeof(float) * blob.size()));
  write_u64(f, checksum);
  if (!f) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

TrainedModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kVersionMismatch,
                path.string() + " is not a recognized checkpoint");
  }
  const std::uint64_t index_len = read_u64(f, "index length");
  std::string index_str(index_len, '\0');
  f.read(index_str.data(), static_cast<std::streamsize>(index_len));
  if (!f) throw Error(ErrorCode::kCorruptCheckpoint, "truncated index");

  json index;
  try {
    index = json::parse(index_str);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptCheckpoint,
                std::string("index is not valid JSON: ") + e.what());
  }
  if (!index.contains("format") || index["format"].get<int>() != 1) {
    throw Error(ErrorCode::kVersionMismatch, "unsupported checkpoint format");
  }

  const std::uint64_t blob_bytes = read_u64(f, "blob length");
  if (blob_bytes % sizeof(float) != 0) {
    throw Error(ErrorCode::kCorruptCheckpoint, "blob length not float-aligned");
  }
  std::vector<float> blob(blob_bytes / sizeof(float));
  f.read(reinterpret_cast<char*>(blob.data()),
         static_cast<std::streamsize>(blob_bytes));
  if (!f) throw Error(ErrorCode::kCorruptCheckpoint, "truncated blob");
  const std::uint64_t stored_checksum = read_u64(f, "checksum");
  if (fnv1a64(blob.data(), blob_bytes) != stored_checksum) {
    throw Error(ErrorCode::kCorruptCheckpoint,
                path.string() + ": checksum mismatch");
  }

  const json& meta = index.at("meta");
  ModelConfig cfg;
  cfg.encoder.latent_dim = meta.at("latent_dim").get<int>();
  cfg.encoder.stages.clear();
  for (const auto& st : meta.at("stages")) {
    cfg.encoder.stages.push_back(
        {st.at(0).get<int>(), st.at(1).get<int>(), st.at(2).get<int>()});
  }
  cfg.encoder.leaky_slope = meta.at("leaky_slope").get<float>();
  cfg.encoder.input_channels = meta.at("input_channels").get<int>();
  cfg.encoder.input_time = meta.at("input_time").get<int>();
  cfg.prior.family = static_cast<PriorFamily>(meta.at("prior_family").get<int>());
  cfg.prior.scale = meta.at("prior_scale").get<double>();
  cfg.disc.hidden = meta.at("disc_hidden").get<std::vector<int>>();
  cfg.clf.hidden = meta.at("clf_hidden").get<std::vector<int>>();

  TrainedModel<float> tm;
  tm.model.init(cfg, meta.at("num_classes").get<int>(), /*seed=*/0);
  tm.gamma = meta.at("gamma").get<float>();
  tm.source_env_ids = meta.at("source_env_ids").get<std::vector<int>>();
  tm.fingerprint = meta.at("fingerprint").get<std::string>();

  std::map<std::string, std::pair<std::pair<std::int64_t, std::int64_t>,
                                  std::uint64_t>>
      by_name;
  for (const auto& t : index.at("tensors")) {
    by_name[t.at("name").get<std::string>()] = {
        {t.at("rows").get<std::int64_t>(), t.at("cols").get<std::int64_t>()},
        t.at("offset").get<std::uint64_t>()};
  }
  auto fill = [&](const std::string& name, MatXf& dst, bool fixed_shape) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw Error(ErrorCode::kCorruptCheckpoint, "missing tensor " + name);
    }
    const auto [shape, off] = it->second;
    if (fixed_shape &&
        (shape.first != dst.rows() || shape.second != dst.cols())) {
      throw Error(ErrorCode::kCorruptCheckpoint,
                  "tensor " + name + " has unexpected shape");
    }
    if (!fixed_shape) dst.resize(shape.first, shape.second);
    const std::uint64_t n = static_cast<std::uint64_t>(dst.size());
    if (off + n > blob.size()) {
      throw Error(ErrorCode::kCorruptCheckpoint,
                  "tensor " + name + " overruns the blob");
    }
    std::memcpy(dst.data(), blob.data() + off, sizeof(float) * n);
  };

  for (const auto& p : tm.model.all_params()) fill(p.name, *p.value, true);
  fill("covariance.diag", tm.model.covariance.diag, true);
  MatXf mean(kSubcarriers, 1), stddev(kSubcarriers, 1);
  fill("norm.mean", mean, true);
  fill("norm.stddev", stddev, true);
  tm.norm_stats.mean = mean.col(0);
  tm.norm_stats.stddev = stddev.col(0);
  fill("reservoir", tm.reservoir, false);
  return tm;
}

}  // namespace airfi
