#include "airfi/csi.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace airfi {

static_assert(std::endian::native == std::endian::little,
              "sample files are little-endian float32; big-endian hosts are "
              "not supported");

using nlohmann::json;

void SplitPlan::validate() const {
  if (source_envs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "split plan has no source envs");
  }
  std::set<int> seen;
  for (int e : source_envs) {
    if (e == target_env) {
      throw Error(ErrorCode::kInvalidArgument,
                  "target env " + std::to_string(e) + " listed as a source");
    }
    if (!seen.insert(e).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate source env " + std::to_string(e));
    }
  }
}

AmpMatrix downsample_packets(const AmpMatrix& raw) {
  if (raw.cols() % 4 != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "time length " + std::to_string(raw.cols()) +
                    " not divisible by 4");
  }
  const Eigen::Index out_t = raw.cols() / 4;
  AmpMatrix out(raw.rows(), out_t);
  for (Eigen::Index t = 0; t < out_t; ++t) out.col(t) = raw.col(4 * t);
  return out;
}

namespace {

std::string sample_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%06zu.f32", index);
  return buf;
}

void check_sample_finite(const AmpMatrix& amp, const std::string& what) {
  if (!amp.allFinite()) {
    throw Error(ErrorCode::kNonFiniteValue, what + " contains NaN or Inf");
  }
}

void write_raw_f32(const std::filesystem::path& path, const AmpMatrix& amp) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  }
  f.write(reinterpret_cast<const char*>(amp.data()),
          static_cast<std::streamsize>(sizeof(float) * amp.size()));
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
  }
}

AmpMatrix read_raw_f32(const std::filesystem::path& path, int raw_len) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  const auto expected =
      static_cast<std::uintmax_t>(kChannels) * raw_len * sizeof(float);
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoFailure, "cannot stat " + path.string());
  }
  if (actual != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                path.string() + ": " + std::to_string(actual) +
                    " bytes, expected " + std::to_string(expected));
  }
  AmpMatrix amp(kChannels, raw_len);
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  }
  f.read(reinterpret_cast<char*>(amp.data()),
         static_cast<std::streamsize>(expected));
  if (f.gcount() != static_cast<std::streamsize>(expected)) {
    throw Error(ErrorCode::kIoFailure, "short read from " + path.string());
  }
  return amp;
}

}  // namespace

std::filesystem::path save_dataset(const Dataset& ds,
                                   const std::filesystem::path& dir) {
  if (ds.num_classes < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dataset has num_classes < 1");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string());
  }

  json manifest;
  manifest["version"] = 1;
  manifest["num_classes"] = ds.num_classes;
  if (!ds.manifest_meta.empty()) manifest["meta"] = ds.manifest_meta;
  manifest["samples"] = json::array();

  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const CsiSample& s = ds.samples[i];
    if (s.amplitude.rows() != kChannels || s.amplitude.cols() != kPackets) {
      throw Error(ErrorCode::kShapeMismatch,
                  "sample " + std::to_string(i) + " is " +
                      std::to_string(s.amplitude.rows()) + "x" +
                      std::to_string(s.amplitude.cols()) + ", expected " +
                      std::to_string(kChannels) + "x" +
                      std::to_string(kPackets));
    }
    if (s.label < 0 || s.label >= ds.num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sample " + std::to_string(i) + " label out of range");
    }
    if (s.env_id < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sample " + std::to_string(i) + " has negative env_id");
    }
    check_sample_finite(s.amplitude, "sample " + std::to_string(i));

    const std::string name = sample_file_name(i);
    write_raw_f32(dir / name, s.amplitude);
    manifest["samples"].push_back({{"file", name},
                                   {"label", s.label},
                                   {"env_id", s.env_id},
                                   {"raw_len", kPackets}});
  }

  const auto manifest_path = dir / "manifest.json";
  std::ofstream f(manifest_path);
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + manifest_path.string());
  }
  f << manifest.dump(2) << '\n';
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "short write to " + manifest_path.string());
  }
  return manifest_path;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::error_code ec;
  if (!std::filesystem::exists(manifest_path, ec)) {
    throw Error(ErrorCode::kMissingFile, manifest_path.string());
  }
  std::ifstream f(manifest_path);
  if (!f) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + manifest_path.string());
  }
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest,
                manifest_path.string() + ": " + e.what());
  }

  auto malformed = [&](const std::string& why) -> Error {
    return Error(ErrorCode::kMalformedManifest,
                 manifest_path.string() + ": " + why);
  };

  if (!manifest.is_object()) throw malformed("top level is not an object");
  if (!manifest.contains("version") || !manifest["version"].is_number_integer() ||
      manifest["version"].get<int>() != 1) {
    throw malformed("missing or unsupported version (expected 1)");
  }
  if (!manifest.contains("num_classes") ||
      !manifest["num_classes"].is_number_integer()) {
    throw malformed("missing num_classes");
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw malformed("missing samples array");
  }

  Dataset ds;
  ds.num_classes = manifest["num_classes"].get<int>();
  if (ds.num_classes < 1) throw malformed("num_classes < 1");
  if (manifest.contains("meta")) {
    if (!manifest["meta"].is_object()) throw malformed("meta is not an object");
    for (auto& [k, v] : manifest["meta"].items()) {
      ds.manifest_meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }

  const auto base = manifest_path.parent_path();
  for (std::size_t i = 0; i < manifest["samples"].size(); ++i) {
    const json& e = manifest["samples"][i];
    const std::string at = "samples[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("file") || !e["file"].is_string() ||
        !e.contains("label") || !e["label"].is_number_integer() ||
        !e.contains("env_id") || !e["env_id"].is_number_integer() ||
        !e.contains("raw_len") || !e["raw_len"].is_number_integer()) {
      throw malformed(at + " is missing file/label/env_id/raw_len");
    }
    const int raw_len = e["raw_len"].get<int>();
    if (raw_len != kPackets && raw_len != kRawPackets) {
      throw malformed(at + " raw_len must be " + std::to_string(kPackets) +
                      " or " + std::to_string(kRawPackets));
    }
    CsiSample s;
    s.label = e["label"].get<int>();
    s.env_id = e["env_id"].get<int>();
    if (s.label < 0 || s.label >= ds.num_classes) {
      throw malformed(at + " label out of range");
    }
    if (s.env_id < 0) throw malformed(at + " env_id is negative");

    AmpMatrix raw = read_raw_f32(base / e["file"].get<std::string>(), raw_len);
    check_sample_finite(raw, at);
    s.amplitude = raw_len == kRawPackets ? downsample_packets(raw) : std::move(raw);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

NormStats compute_norm_stats(const std::vector<const Dataset*>& datasets) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kSubcarriers);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(kSubcarriers);
  std::uint64_t count = 0;
  for (const Dataset* ds : datasets) {
    if (ds == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "null dataset pointer");
    }
    for (const CsiSample& s : ds->samples) {
      if (s.amplitude.rows() != kChannels) {
        throw Error(ErrorCode::kShapeMismatch, "sample channel count != 342");
      }
      for (int r = 0; r < kChannels; ++r) {
        const int sc = r / kAntennas;
        const auto row = s.amplitude.row(r).cast<double>();
        sum[sc] += row.sum();
        sumsq[sc] += row.array().square().sum();
      }
      count += static_cast<std::uint64_t>(kAntennas) * s.amplitude.cols();
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no samples to normalize over");
  }
  NormStats stats;
  stats.mean.resize(kSubcarriers);
  stats.stddev.resize(kSubcarriers);
  const double n = static_cast<double>(count);
  for (int sc = 0; sc < kSubcarriers; ++sc) {
    const double mean = sum[sc] / n;
    const double var = std::max(0.0, sumsq[sc] / n - mean * mean);
    stats.mean[sc] = static_cast<float>(mean);
    stats.stddev[sc] = static_cast<float>(std::max(std::sqrt(var), 1e-8));
  }
  return stats;
}

CsiSample normalize_sample(const CsiSample& s, const NormStats& stats) {
  if (stats.mean.size() != kSubcarriers || stats.stddev.size() != kSubcarriers) {
    throw Error(ErrorCode::kShapeMismatch, "norm stats must have 114 entries");
  }
  CsiSample out;
  out.label = s.label;
  out.env_id = s.env_id;
  out.amplitude.resize(s.amplitude.rows(), s.amplitude.cols());
  for (int r = 0; r < s.amplitude.rows(); ++r) {
    const int sc = r / kAntennas;
    out.amplitude.row(r) =
        (s.amplitude.row(r).array() - stats.mean[sc]) / stats.stddev[sc];
  }
  return out;
}

void normalize_in_place(Dataset& ds, const NormStats& stats) {
  for (CsiSample& s : ds.samples) {
    for (int r = 0; r < s.amplitude.rows(); ++r) {
      const int sc = r / kAntennas;
      s.amplitude.row(r) =
          (s.amplitude.row(r).array() - stats.mean[sc]) / stats.stddev[sc];
    }
  }
}

std::pair<std::vector<Dataset>, Dataset> split_leave_one_env(
    const Dataset& full, const SplitPlan& plan) {
  plan.validate();
  std::unordered_map<int, std::size_t> source_index;
  for (std::size_t i = 0; i < plan.source_envs.size(); ++i) {
    source_index[plan.source_envs[i]] = i;
  }

  std::vector<Dataset> sources(plan.source_envs.size());
  Dataset target;
  for (auto* ds : {&target}) {
    ds->num_classes = full.num_classes;
    ds->manifest_meta = full.manifest_meta;
  }
  for (Dataset& ds : sources) {
    ds.num_classes = full.num_classes;
    ds.manifest_meta = full.manifest_meta;
  }

  for (const CsiSample& s : full.samples) {
    if (s.env_id == plan.target_env) {
      target.samples.push_back(s);
    } else if (auto it = source_index.find(s.env_id); it != source_index.end()) {
      sources[it->second].samples.push_back(s);
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "env " + std::to_string(s.env_id) + " not covered by plan");
    }
  }
  return {std::move(sources), std::move(target)};
}

std::uint64_t sample_checksum(const CsiSample& s) {
  std::uint64_t h = fnv1a64(s.amplitude.data(),
                            sizeof(float) * static_cast<std::size_t>(s.amplitude.size()));
  h = fnv1a64(&s.label, sizeof(s.label), h);
  h = fnv1a64(&s.env_id, sizeof(s.env_id), h);
  return h;
}

}  // namespace airfi
