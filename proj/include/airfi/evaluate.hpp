#ifndef AIRFI_EVALUATE_HPP
#define AIRFI_EVALUATE_HPP

#include "airfi/model.hpp"
#include "airfi/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace airfi {

// Per-class accuracy table for one leave-one-environment-out evaluation.
// Keys are the classes actually present in the test set, so `overall` is
// always the n_per_class-weighted mean of per_class.
struct AccuracyTable {
  std::map<int, double> per_class;
  std::map<int, int> n_per_class;
  double overall = 0.0;
  std::string env_index_label;  // e.g. "ABC-D" for sources {0,1,2}, target 3
};

// One letter per env ('A' + env_id), sources then a dash then test envs,
// each group sorted ascending.
std::string env_label(const std::vector<int>& source_envs,
                      const std::vector<int>& test_envs);

// Applies the model's normalization stats, encodes, classifies by argmax,
// and counts. Throws kInvalidArgument on an empty test set or a class-count
// mismatch between model and dataset. Side-effect-free on the model.
AccuracyTable evaluate(const TrainedModel<float>& tm, const Dataset& test);

std::string accuracy_table_to_json(const AccuracyTable& table);

// ---------------------------------------------------------------------------
// Ablation arms. Each arm is a pure configuration delta of the same pipeline;
// there is no per-arm code path anywhere below this line.

enum class AblationArm { kFull, kNoDataAug, kNoFeatAug, kCeOnly };

inline constexpr AblationArm kAllArms[] = {
    AblationArm::kFull, AblationArm::kNoDataAug, AblationArm::kNoFeatAug,
    AblationArm::kCeOnly};

const char* arm_name(AblationArm arm);

// kFull: base untouched. kNoDataAug: zero augmentation copies. kNoFeatAug:
// latent augmentation disabled. kCeOnly: both of those plus
// w_mmd = w_ad = w_re = 0, i.e. a plain supervised encoder+classifier.
PipelineConfig apply_arm(PipelineConfig base, AblationArm arm);

struct AblationCell {
  AblationArm arm = AblationArm::kFull;
  int target_env = 0;
  std::uint64_t seed = 0;
  AccuracyTable table;
};

struct AblationReport {
  std::vector<AblationCell> cells;

  // Mean overall accuracy of an arm across seeds, on one split or on all.
  double mean_overall(AblationArm arm, int target_env) const;
  double mean_overall(AblationArm arm) const;
};

// Trains all four arms on every leave-one-environment-out split of `full`,
// once per seed (seeds replace cfg.train.seed; empty means just
// cfg.train.seed). Targets are visited in ascending env order.
AblationReport run_ablation_suite(const Dataset& full,
                                  const PipelineConfig& base,
                                  const std::vector<std::uint64_t>& seeds = {});

std::string ablation_report_to_json(const AblationReport& report);

// ---------------------------------------------------------------------------
// Feature export + loss curves.

// CSV of latent codes with header code_0..code_{d-1},label,env_id,split.
// Samples are normalized with the model's stats and encoded in dataset order;
// split is "source" or "target" by membership in tm.source_env_ids. An empty
// input yields a header-only file.
void export_features(const TrainedModel<float>& tm,
                     const std::vector<const Dataset*>& datasets,
                     const std::filesystem::path& path);

// CSV with columns step,L_ce,L_re,L_ad,L_MMD,total -- one row per report.
void write_loss_curve_csv(const std::vector<LossReport>& curve,
                          const std::filesystem::path& path);

}  // namespace airfi

#endif  // AIRFI_EVALUATE_HPP
