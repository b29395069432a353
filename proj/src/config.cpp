#include "airfi/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace airfi {

using nlohmann::json;

namespace {

Error bad(const std::string& why) {
  return Error(ErrorCode::kInvalidConfig, why);
}

double want_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw bad(key + " must be a number");
  return v.get<double>();
}

int want_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw bad(key + " must be an integer");
  return v.get<int>();
}

std::uint64_t want_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw bad(key + " must be a non-negative integer");
  }
  const auto x = v.get<std::int64_t>();
  if (x < 0) throw bad(key + " must be non-negative");
  return static_cast<std::uint64_t>(x);
}

bool want_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw bad(key + " must be a boolean");
  return v.get<bool>();
}

std::vector<int> want_int_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw bad(key + " must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) out.push_back(want_int(e, key));
  return out;
}

std::vector<ConvStage> want_stages(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) {
    throw bad(key + " must be a non-empty array of [channels, kernel, stride]");
  }
  std::vector<ConvStage> out;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 3) {
      throw bad(key + " entries must be [channels, kernel, stride]");
    }
    out.push_back({want_int(e[0], key), want_int(e[1], key), want_int(e[2], key)});
  }
  return out;
}

PriorFamily parse_family(const json& v, const std::string& key) {
  if (!v.is_string()) throw bad(key + " must be a string");
  const std::string s = v.get<std::string>();
  if (s == "laplace") return PriorFamily::kLaplace;
  if (s == "gaussian") return PriorFamily::kGaussian;
  if (s == "uniform") return PriorFamily::kUniform;
  throw bad(key + ": unknown prior family '" + s + "'");
}

const char* family_name(PriorFamily f) {
  switch (f) {
    case PriorFamily::kLaplace: return "laplace";
    case PriorFamily::kGaussian: return "gaussian";
    case PriorFamily::kUniform: return "uniform";
  }
  return "laplace";
}

}  // namespace

PipelineConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw bad("config must be a flat JSON object");

  PipelineConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "model.latent_dim") {
      c.model.encoder.latent_dim = want_int(v, key);
    } else if (key == "model.encoder_stages") {
      c.model.encoder.stages = want_stages(v, key);
    } else if (key == "model.leaky_slope") {
      c.model.encoder.leaky_slope = static_cast<float>(want_number(v, key));
    } else if (key == "model.prior_family") {
      c.model.prior.family = parse_family(v, key);
    } else if (key == "model.prior_scale") {
      c.model.prior.scale = want_number(v, key);
    } else if (key == "model.disc_hidden") {
      c.model.disc.hidden = want_int_list(v, key);
    } else if (key == "model.clf_hidden") {
      c.model.clf.hidden = want_int_list(v, key);
    } else if (key == "train.w_ad") {
      c.train.w_ad = static_cast<float>(want_number(v, key));
    } else if (key == "train.w_re") {
      c.train.w_re = static_cast<float>(want_number(v, key));
    } else if (key == "train.w_mmd") {
      c.train.w_mmd = static_cast<float>(want_number(v, key));
    } else if (key == "train.w_ce") {
      c.train.w_ce = static_cast<float>(want_number(v, key));
    } else if (key == "train.steps") {
      c.train.steps = want_int(v, key);
    } else if (key == "train.batch_per_env") {
      c.train.batch_per_env = want_int(v, key);
    } else if (key == "train.lr") {
      c.train.lr = static_cast<float>(want_number(v, key));
    } else if (key == "train.seed") {
      c.train.seed = want_u64(v, key);
    } else if (key == "train.d_steps") {
      c.train.d_steps = want_int(v, key);
    } else if (key == "train.g_steps") {
      c.train.g_steps = want_int(v, key);
    } else if (key == "data_aug.noise_std") {
      if (v.is_null()) {
        c.data_aug.noise_std.reset();
      } else {
        c.data_aug.noise_std = static_cast<float>(want_number(v, key));
      }
    } else if (key == "data_aug.copies") {
      c.data_aug.copies_per_sample = want_int(v, key);
    } else if (key == "feat_aug.sigma") {
      c.feat_aug.sigma = static_cast<float>(want_number(v, key));
    } else if (key == "feat_aug.lambda") {
      c.feat_aug.lambda = static_cast<float>(want_number(v, key));
    } else if (key == "feat_aug.enabled") {
      c.feat_aug.enabled = want_bool(v, key);
    } else if (key == "dg.gamma") {
      if (v.is_null()) {
        c.dg.gamma.reset();
      } else {
        c.dg.gamma = static_cast<float>(want_number(v, key));
      }
    } else if (key == "dg.recompute_gamma_every") {
      c.dg.recompute_gamma_every = want_int(v, key);
    } else if (key == "fewshot.k") {
      c.fewshot.k = want_int(v, key);
    } else if (key == "fewshot.adapt_steps") {
      c.fewshot.adapt_steps = want_int(v, key);
    } else if (key == "fewshot.lr") {
      c.fewshot.lr = static_cast<float>(want_number(v, key));
    } else if (key == "fewshot.reservoir") {
      c.fewshot.reservoir = want_int(v, key);
    } else if (key == "fewshot.seed") {
      c.fewshot.seed = want_u64(v, key);
    } else {
      throw bad("unknown config key '" + key + "'");
    }
  }

  // Cheap structural validation; deeper checks happen where values are used.
  if (c.model.encoder.latent_dim < 1) throw bad("model.latent_dim must be >= 1");
  if (c.train.steps < 0) throw bad("train.steps must be >= 0");
  if (c.train.batch_per_env < 2) {
    throw bad("train.batch_per_env must be >= 2 (covariance updates need m >= 2)");
  }
  if (c.train.d_steps < 0 || c.train.g_steps < 0) {
    throw bad("train.d_steps/g_steps must be >= 0");
  }
  if (!(c.train.lr > 0)) throw bad("train.lr must be > 0");
  if (c.data_aug.copies_per_sample < 0) throw bad("data_aug.copies must be >= 0");
  if (c.dg.recompute_gamma_every < 1) {
    throw bad("dg.recompute_gamma_every must be >= 1");
  }
  if (c.dg.gamma.has_value() && !(*c.dg.gamma > 0)) {
    throw bad("dg.gamma must be > 0");
  }
  if (c.fewshot.k < 1) throw bad("fewshot.k must be >= 1");
  if (c.fewshot.adapt_steps < 0) throw bad("fewshot.adapt_steps must be >= 0");
  if (!(c.fewshot.lr > 0)) throw bad("fewshot.lr must be > 0");
  if (c.fewshot.reservoir < 1) throw bad("fewshot.reservoir must be >= 1");
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_json(ss.str());
}

std::string dump_config_json(const PipelineConfig& c) {
  json j;
  j["model.latent_dim"] = c.model.encoder.latent_dim;
  json stages = json::array();
  for (const ConvStage& st : c.model.encoder.stages) {
    stages.push_back({st.channels, st.kernel, st.stride});
  }
  j["model.encoder_stages"] = stages;
  j["model.leaky_slope"] = c.model.encoder.leaky_slope;
  j["model.prior_family"] = family_name(c.model.prior.family);
  j["model.prior_scale"] = c.model.prior.scale;
  j["model.disc_hidden"] = c.model.disc.hidden;
  j["model.clf_hidden"] = c.model.clf.hidden;
  j["train.w_ad"] = c.train.w_ad;
  j["train.w_re"] = c.train.w_re;
  j["train.w_mmd"] = c.train.w_mmd;
  j["train.w_ce"] = c.train.w_ce;
  j["train.steps"] = c.train.steps;
  j["train.batch_per_env"] = c.train.batch_per_env;
  j["train.lr"] = c.train.lr;
  j["train.seed"] = c.train.seed;
  j["train.d_steps"] = c.train.d_steps;
  j["train.g_steps"] = c.train.g_steps;
  j["data_aug.noise_std"] =
      c.data_aug.noise_std.has_value() ? json(*c.data_aug.noise_std) : json();
  j["data_aug.copies"] = c.data_aug.copies_per_sample;
  j["feat_aug.sigma"] = c.feat_aug.sigma;
  j["feat_aug.lambda"] = c.feat_aug.lambda;
  j["feat_aug.enabled"] = c.feat_aug.enabled;
  j["dg.gamma"] = c.dg.gamma.has_value() ? json(*c.dg.gamma) : json();
  j["dg.recompute_gamma_every"] = c.dg.recompute_gamma_every;
  j["fewshot.k"] = c.fewshot.k;
  j["fewshot.adapt_steps"] = c.fewshot.adapt_steps;
  j["fewshot.lr"] = c.fewshot.lr;
  j["fewshot.reservoir"] = c.fewshot.reservoir;
  j["fewshot.seed"] = c.fewshot.seed;
  return j.dump(2);  // nlohmann keeps keys sorted
}

std::string config_fingerprint(const PipelineConfig& cfg) {
  const std::string dump = dump_config_json(cfg);
  const std::uint64_t h = fnv1a64(dump);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace airfi
