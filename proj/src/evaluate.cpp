#include "airfi/evaluate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace airfi {

using nlohmann::json;

std::string env_label(const std::vector<int>& source_envs,
                      const std::vector<int>& test_envs) {
  auto letters = [](std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    std::string s;
    for (int id : ids) s.push_back(static_cast<char>('A' + (id % 26)));
    return s;
  };
  return letters(source_envs) + "-" + letters(test_envs);
}

namespace {

// Normalized codes for a span of samples, encoded in chunks so evaluation of
// a large dataset never materializes one giant batch.
MatXf encode_samples(const TrainedModel<float>& tm,
                     const std::vector<const CsiSample*>& samples) {
  const int d = tm.model.cfg.encoder.latent_dim;
  MatXf codes(static_cast<Eigen::Index>(samples.size()), d);
  constexpr std::size_t kChunk = 64;
  std::vector<CsiSample> normed;
  std::vector<const CsiSample*> ptrs;
  for (std::size_t at = 0; at < samples.size(); at += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - at);
    normed.clear();
    ptrs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      normed.push_back(normalize_sample(*samples[at + i], tm.norm_stats));
    }
    for (const CsiSample& s : normed) ptrs.push_back(&s);
    ConvBatch<float> batch = make_batch<float>(ptrs);
    codes.middleRows(static_cast<Eigen::Index>(at), n) =
        tm.model.encoder.forward(batch, nullptr);
  }
  return codes;
}

}  // namespace

AccuracyTable evaluate(const TrainedModel<float>& tm, const Dataset& test) {
  if (test.samples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty test set");
  }
  if (test.num_classes != tm.model.num_classes) {
    throw Error(ErrorCode::kInvalidArgument,
                "model expects " + std::to_string(tm.model.num_classes) +
                    " classes, dataset declares " +
                    std::to_string(test.num_classes));
  }

  std::vector<const CsiSample*> ptrs;
  ptrs.reserve(test.samples.size());
  for (const CsiSample& s : test.samples) ptrs.push_back(&s);
  const MatXf codes = encode_samples(tm, ptrs);
  const MatXf logits = tm.model.clf.forward(codes, nullptr);

  AccuracyTable table;
  std::map<int, int> correct;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index pred = 0;
    logits.row(i).maxCoeff(&pred);
    const int label = test.samples[static_cast<std::size_t>(i)].label;
    table.n_per_class[label] += 1;
    if (static_cast<int>(pred) == label) correct[label] += 1;
  }
  int total_correct = 0;
  for (const auto& [cls, n] : table.n_per_class) {
    table.per_class[cls] = static_cast<double>(correct[cls]) / n;
    total_correct += correct[cls];
  }
  table.overall =
      static_cast<double>(total_correct) / static_cast<double>(logits.rows());

  std::vector<int> test_envs;
  for (int e : test.env_ids()) test_envs.push_back(e);
  table.env_index_label = env_label(tm.source_env_ids, test_envs);
  return table;
}

namespace {

json table_json(const AccuracyTable& t) {
  json j;
  j["overall"] = t.overall;
  j["env_index_label"] = t.env_index_label;
  json pc = json::object(), nc = json::object();
  for (const auto& [cls, acc] : t.per_class) pc[std::to_string(cls)] = acc;
  for (const auto& [cls, n] : t.n_per_class) nc[std::to_string(cls)] = n;
  j["per_class"] = pc;
  j["n_per_class"] = nc;
  return j;
}

}  // namespace

std::string accuracy_table_to_json(const AccuracyTable& table) {
  return table_json(table).dump(2);
}

const char* arm_name(AblationArm arm) {
  switch (arm) {
    case AblationArm::kFull: return "full";
    case AblationArm::kNoDataAug: return "no_data_aug";
    case AblationArm::kNoFeatAug: return "no_feat_aug";
    case AblationArm::kCeOnly: return "ce_only";
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown ablation arm");
}

PipelineConfig apply_arm(PipelineConfig base, AblationArm arm) {
  switch (arm) {
    case AblationArm::kFull:
      break;
    case AblationArm::kNoDataAug:
      base.data_aug.copies_per_sample = 0;
      break;
    case AblationArm::kNoFeatAug:
      base.feat_aug.enabled = false;
      break;
    case AblationArm::kCeOnly:
      base.data_aug.copies_per_sample = 0;
      base.feat_aug.enabled = false;
      base.train.w_mmd = 0.0f;
      base.train.w_ad = 0.0f;
      base.train.w_re = 0.0f;
      break;
  }
  return base;
}

double AblationReport::mean_overall(AblationArm arm, int target_env) const {
  double sum = 0.0;
  int n = 0;
  for (const AblationCell& c : cells) {
    if (c.arm == arm && c.target_env == target_env) {
      sum += c.table.overall;
      ++n;
    }
  }
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no cells for requested arm/env");
  }
  return sum / n;
}

double AblationReport::mean_overall(AblationArm arm) const {
  double sum = 0.0;
  int n = 0;
  for (const AblationCell& c : cells) {
    if (c.arm == arm) {
      sum += c.table.overall;
      ++n;
    }
  }
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no cells for requested arm");
  }
  return sum / n;
}

AblationReport run_ablation_suite(const Dataset& full,
                                  const PipelineConfig& base,
                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<std::uint64_t> run_seeds = seeds;
  if (run_seeds.empty()) run_seeds = {base.train.seed};
  const std::set<int> envs = full.env_ids();
  if (envs.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "ablation needs >= 3 environments (>= 2 sources + 1 target)");
  }

  AblationReport report;
  for (int target : envs) {
    SplitPlan plan;
    plan.target_env = target;
    for (int e : envs) {
      if (e != target) plan.source_envs.push_back(e);
    }
    auto [sources, test] = split_leave_one_env(full, plan);
    for (std::uint64_t seed : run_seeds) {
      for (AblationArm arm : kAllArms) {
        PipelineConfig cfg = apply_arm(base, arm);
        cfg.train.seed = seed;
        TrainResult<float> result = train<float>(sources, cfg);
        AblationCell cell;
        cell.arm = arm;
        cell.target_env = target;
        cell.seed = seed;
        cell.table = evaluate(result.model, test);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::string ablation_report_to_json(const AblationReport& report) {
  json j;
  json cells = json::array();
  std::set<int> targets;
  for (const AblationCell& c : report.cells) {
    targets.insert(c.target_env);
    json jc;
    jc["arm"] = arm_name(c.arm);
    jc["target_env"] = c.target_env;
    jc["seed"] = c.seed;
    jc["table"] = table_json(c.table);
    cells.push_back(std::move(jc));
  }
  j["cells"] = cells;
  json means = json::object();
  for (AblationArm arm : kAllArms) {
    json per_env = json::object();
    for (int t : targets) {
      per_env[std::to_string(t)] = report.mean_overall(arm, t);
    }
    if (!report.cells.empty()) {
      per_env["all"] = report.mean_overall(arm);
    }
    means[arm_name(arm)] = per_env;
  }
  j["mean_overall"] = means;
  return j.dump(2);
}

void export_features(const TrainedModel<float>& tm,
                     const std::vector<const Dataset*>& datasets,
                     const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());

  const int d = tm.model.cfg.encoder.latent_dim;
  for (int i = 0; i < d; ++i) f << "code_" << i << ",";
  f << "label,env_id,split\n";

  const std::set<int> sources(tm.source_env_ids.begin(),
                              tm.source_env_ids.end());
  char buf[32];
  for (const Dataset* ds : datasets) {
    if (ds->samples.empty()) continue;
    std::vector<const CsiSample*> ptrs;
    ptrs.reserve(ds->samples.size());
    for (const CsiSample& s : ds->samples) ptrs.push_back(&s);
    const MatXf codes = encode_samples(tm, ptrs);
    for (Eigen::Index r = 0; r < codes.rows(); ++r) {
      for (int c = 0; c < d; ++c) {
        std::snprintf(buf, sizeof(buf), "%.9g", codes(r, c));
        f << buf << ",";
      }
      const CsiSample& s = ds->samples[static_cast<std::size_t>(r)];
      f << s.label << "," << s.env_id << ","
        << (sources.count(s.env_id) != 0 ? "source" : "target") << "\n";
    }
  }
  if (!f) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

void write_loss_curve_csv(const std::vector<LossReport>& curve,
                          const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  f << "step,L_ce,L_re,L_ad,L_MMD,total\n";
  char buf[160];
  for (const LossReport& r : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.l_ce, r.l_re, r.l_ad, r.l_mmd, r.total);
    f << buf;
  }
  if (!f) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace airfi
