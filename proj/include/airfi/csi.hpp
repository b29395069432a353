#ifndef AIRFI_CSI_HPP
#define AIRFI_CSI_HPP

#include "airfi/common.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace airfi {

// One gesture recording: amplitude [kChannels x kPackets] plus labels.
struct CsiSample {
  AmpMatrix amplitude;  // row (subcarrier * kAntennas + antenna)
  int label = 0;
  int env_id = 0;
};

struct Dataset {
  std::vector<CsiSample> samples;
  int num_classes = 0;
  std::map<std::string, std::string> manifest_meta;

  // Distinct env_id values present; derived so it can never go stale.
  std::set<int> env_ids() const {
    std::set<int> ids;
    for (const auto& s : samples) ids.insert(s.env_id);
    return ids;
  }
};

// Leave-one-environment-out split request.
struct SplitPlan {
  std::vector<int> source_envs;
  int target_env = 0;

  // Throws kInvalidArgument if the target appears among the sources or the
  // source list has duplicates / is empty.
  void validate() const;
};

// Per-subcarrier z-score statistics (length kSubcarriers), computed over
// samples x antennas x packets. stddev is clamped from below at 1e-8.
struct NormStats {
  VecXf mean;
  VecXf stddev;
};

// Collapse 2000-packet raw captures to 500 by stride-4 decimation:
// out[., t] = raw[., 4 * t]. Input time length must be divisible by 4.
AmpMatrix downsample_packets(const AmpMatrix& raw);

// Manifest + raw-sample-file I/O. save_dataset writes <dir>/manifest.json and
// one little-endian float32 file per sample; load_dataset reads a manifest
// produced by this writer or by hand. Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& ds,
                                   const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest_path);

NormStats compute_norm_stats(const std::vector<const Dataset*>& datasets);
CsiSample normalize_sample(const CsiSample& s, const NormStats& stats);
void normalize_in_place(Dataset& ds, const NormStats& stats);

// Partitions by environment. Source datasets come back in plan order; every
// sample of `full` lands in exactly one output. Envs absent from the plan are
// dropped only if absent from the plan *and* from the data -- a plan that
// does not cover an env present in the data is an error.
std::pair<std::vector<Dataset>, Dataset> split_leave_one_env(
    const Dataset& full, const SplitPlan& plan);

// FNV-1a over amplitude bytes then label and env_id; used by round-trip and
// containment tests.
std::uint64_t sample_checksum(const CsiSample& s);

}  // namespace airfi

#endif  // AIRFI_CSI_HPP
