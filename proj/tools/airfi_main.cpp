// airfi: synthetic data generation, training, evaluation, few-shot
// adaptation, and feature export for cross-environment CSI gesture
// recognition.

#include "airfi/checkpoint.hpp"
#include "airfi/evaluate.hpp"
#include "airfi/synth.hpp"
#include "airfi/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// --data accepts either the dataset directory or the manifest file itself.
fs::path manifest_of(const fs::path& data) {
  if (fs::is_directory(data)) return data / "manifest.json";
  return data;
}

int cmd_generate(int envs, int classes, int per_class, std::uint64_t seed,
                 const std::string& out) {
  airfi::GenConfig gc;
  gc.num_envs = envs;
  gc.num_classes = classes;
  gc.samples_per_class_per_env = per_class;
  gc.seed = seed;
  const airfi::Dataset ds = airfi::generate_dataset(gc);
  fs::create_directories(out);
  const fs::path manifest = airfi::save_dataset(ds, out);
  std::printf("wrote %zu samples (%d envs x %d classes x %d) to %s\n",
              ds.samples.size(), envs, classes, per_class,
              manifest.string().c_str());
  return 0;
}

int cmd_train(const std::string& data, int holdout_env,
              const std::string& config, const std::string& out,
              std::string curve) {
  airfi::PipelineConfig cfg;
  if (!config.empty()) cfg = airfi::load_config(config);

  const airfi::Dataset full = airfi::load_dataset(manifest_of(data));
  airfi::SplitPlan plan;
  plan.target_env = holdout_env;
  for (int e : full.env_ids()) {
    if (e != holdout_env) plan.source_envs.push_back(e);
  }
  auto [sources, test] = airfi::split_leave_one_env(full, plan);
  (void)test;  // training never touches the held-out env

  airfi::TrainResult<float> result =
      airfi::train<float>(std::move(sources), cfg);
  airfi::save_checkpoint(result.model, out);
  if (curve.empty()) curve = out + ".curve.csv";
  airfi::write_loss_curve_csv(result.curve, curve);
  std::printf("trained %d steps on envs %s; checkpoint %s, curve %s\n",
              cfg.train.steps,
              airfi::env_label(result.model.source_env_ids, {holdout_env})
                  .c_str(),
              out.c_str(), curve.c_str());
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& data, int env,
                 const std::string& out) {
  const airfi::TrainedModel<float> tm = airfi::load_checkpoint(ckpt);
  const airfi::Dataset full = airfi::load_dataset(manifest_of(data));
  airfi::Dataset test;
  test.num_classes = full.num_classes;
  for (const airfi::CsiSample& s : full.samples) {
    if (s.env_id == env) test.samples.push_back(s);
  }
  const airfi::AccuracyTable table = airfi::evaluate(tm, test);
  std::ofstream f(out);
  if (!f) {
    throw airfi::Error(airfi::ErrorCode::kIoFailure, "cannot open " + out);
  }
  f << airfi::accuracy_table_to_json(table) << "\n";
  std::printf("%s overall accuracy %.4f (%d samples) -> %s\n",
              table.env_index_label.c_str(), table.overall,
              static_cast<int>(test.samples.size()), out.c_str());
  return 0;
}

int cmd_fewshot(const std::string& ckpt, const std::string& targets, int k,
                int adapt_steps, double lr, std::uint64_t seed,
                const std::string& out) {
  const airfi::TrainedModel<float> tm = airfi::load_checkpoint(ckpt);
  const airfi::Dataset pool = airfi::load_dataset(manifest_of(targets));
  airfi::FewShotConfig fs_cfg;
  fs_cfg.k = k;
  fs_cfg.adapt_steps = adapt_steps;
  fs_cfg.lr = static_cast<float>(lr);
  fs_cfg.seed = seed;
  airfi::FewShotResult<float> result =
      airfi::fewshot_adapt(tm, pool.samples, fs_cfg);
  airfi::save_checkpoint(result.model, out);
  const double final_lf = result.curve.empty() ? 0.0 : result.curve.back().total;
  std::printf("adapted with k=%d for %d steps (final L_f %.6f) -> %s\n", k,
              adapt_steps, final_lf, out.c_str());
  return 0;
}

int cmd_export(const std::string& ckpt, const std::string& data,
               const std::string& out) {
  const airfi::TrainedModel<float> tm = airfi::load_checkpoint(ckpt);
  const airfi::Dataset ds = airfi::load_dataset(manifest_of(data));
  airfi::export_features(tm, {&ds}, out);
  std::printf("exported %zu feature rows to %s\n", ds.samples.size(),
              out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-environment CSI gesture recognition toolkit"};
  app.require_subcommand(1);

  // generate
  int g_envs = 4, g_classes = 8, g_per_class = 50;
  std::uint64_t g_seed = 42;
  std::string g_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--envs", g_envs, "number of environments")
      ->capture_default_str();
  gen->add_option("--classes", g_classes, "number of gesture classes")
      ->capture_default_str();
  gen->add_option("--per-class", g_per_class, "samples per class per env")
      ->capture_default_str();
  gen->add_option("--seed", g_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", g_out, "output directory")->required();

  // train
  std::string t_data, t_config, t_out, t_curve;
  int t_holdout = 3;
  auto* tr = app.add_subcommand("train", "train on all envs but one");
  tr->add_option("--data", t_data, "dataset directory or manifest")->required();
  tr->add_option("--holdout-env", t_holdout, "environment excluded from training")
      ->capture_default_str();
  tr->add_option("--config", t_config, "flat JSON config file");
  tr->add_option("--out", t_out, "checkpoint path")->required();
  tr->add_option("--curve", t_curve,
                 "loss curve CSV path (default: <out>.curve.csv)");

  // evaluate
  std::string e_ckpt, e_data, e_out;
  int e_env = 3;
  auto* ev = app.add_subcommand("evaluate", "accuracy table on one env");
  ev->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
  ev->add_option("--data", e_data, "dataset directory or manifest")->required();
  ev->add_option("--env", e_env, "environment to evaluate")
      ->capture_default_str();
  ev->add_option("--out", e_out, "output JSON path")->required();

  // fewshot
  std::string f_ckpt, f_targets, f_out;
  int f_k = 10, f_steps = 50;
  double f_lr = 3e-4;
  std::uint64_t f_seed = 0;
  auto* fsh = app.add_subcommand("fewshot", "adapt with a few target samples");
  fsh->add_option("--ckpt", f_ckpt, "checkpoint path")->required();
  fsh->add_option("--target-samples", f_targets,
                  "target-env dataset directory or manifest")
      ->required();
  fsh->add_option("--k", f_k, "total target samples, round-robin over classes")
      ->capture_default_str();
  fsh->add_option("--adapt-steps", f_steps, "adaptation steps")
      ->capture_default_str();
  fsh->add_option("--lr", f_lr, "adaptation learning rate")
      ->capture_default_str();
  fsh->add_option("--seed", f_seed, "selection seed")->capture_default_str();
  fsh->add_option("--out", f_out, "adapted checkpoint path")->required();

  // export-features
  std::string x_ckpt, x_data, x_out;
  auto* ex = app.add_subcommand("export-features", "dump latent codes to CSV");
  ex->add_option("--ckpt", x_ckpt, "checkpoint path")->required();
  ex->add_option("--data", x_data, "dataset directory or manifest")->required();
  ex->add_option("--out", x_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(g_envs, g_classes, g_per_class, g_seed, g_out);
    }
    if (tr->parsed()) {
      return cmd_train(t_data, t_holdout, t_config, t_out, t_curve);
    }
    if (ev->parsed()) return cmd_evaluate(e_ckpt, e_data, e_env, e_out);
    if (fsh->parsed()) {
      return cmd_fewshot(f_ckpt, f_targets, f_k, f_steps, f_lr, f_seed, f_out);
    }
    if (ex->parsed()) return cmd_export(x_ckpt, x_data, x_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
