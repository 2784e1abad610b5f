#include "cueplan/config.hpp"

#include <cstdlib>
#include <set>

#include "cueplan/errors.hpp"
#include "json_util.hpp"

namespace cueplan {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key))
      throw ValidationError("config: unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json train_to_json(const TrainConfig& t) {
  return json{{"h", t.h},
              {"batch_sequences", t.batch_sequences},
              {"subseq_len", t.subseq_len},
              {"lr", t.lr},
              {"momentum", t.momentum},
              {"epochs", t.epochs}};
}

TrainConfig train_from_json(const json& j, const TrainConfig& base) {
  reject_unknown(j, {"h", "batch_sequences", "subseq_len", "lr", "momentum",
                     "epochs"},
                 "train");
  TrainConfig t = base;
  get_if_present(j, "h", t.h);
  get_if_present(j, "batch_sequences", t.batch_sequences);
  get_if_present(j, "subseq_len", t.subseq_len);
  get_if_present(j, "lr", t.lr);
  get_if_present(j, "momentum", t.momentum);
  get_if_present(j, "epochs", t.epochs);
  return t;
}

json cma_to_json(const CmaConfig& c) {
  return json{{"lambda", c.lambda},
              {"sigma0", c.sigma0},
              {"max_evals", c.max_evals},
              {"force_mag_range", c.force_mag_range},
              {"parameterization",
               c.parameterization == CmaConfig::Param::polar ? "polar" : "cartesian"}};
}

CmaConfig cma_from_json(const json& j, const CmaConfig& base) {
  reject_unknown(j, {"lambda", "sigma0", "max_evals", "force_mag_range",
                     "parameterization"},
                 "cma");
  CmaConfig c = base;
  get_if_present(j, "lambda", c.lambda);
  get_if_present(j, "sigma0", c.sigma0);
  get_if_present(j, "max_evals", c.max_evals);
  get_if_present(j, "force_mag_range", c.force_mag_range);
  if (j.contains("parameterization")) {
    const std::string p = j.at("parameterization").get<std::string>();
    if (p == "polar")
      c.parameterization = CmaConfig::Param::polar;
    else if (p == "cartesian")
      c.parameterization = CmaConfig::Param::cartesian;
    else
      throw ValidationError("config: parameterization must be polar or cartesian");
  }
  return c;
}

json physics_to_json(const PhysicsParams& p) {
  return json{{"restitution", p.restitution},
              {"damping", p.damping},
              {"impulse_scale", p.impulse_scale},
              {"max_events_per_step", p.max_events_per_step}};
}

PhysicsParams physics_from_json(const json& j, const PhysicsParams& base) {
  reject_unknown(j, {"restitution", "damping", "impulse_scale",
                     "max_events_per_step"},
                 "physics");
  PhysicsParams p = base;
  get_if_present(j, "restitution", p.restitution);
  get_if_present(j, "damping", p.damping);
  get_if_present(j, "impulse_scale", p.impulse_scale);
  get_if_present(j, "max_events_per_step", p.max_events_per_step);
  return p;
}

json oc_to_json(const OcArch& a) {
  return json{{"input_res", a.input_res},   {"glimpse_size", a.glimpse_size},
              {"h", a.h},                   {"hidden", a.hidden},
              {"encoder", a.encoder},       {"conv_channels", a.conv_channels},
              {"force_scale", a.force_scale}};
}

OcArch oc_from_json(const json& j, const OcArch& base) {
  reject_unknown(j, {"input_res", "glimpse_size", "h", "hidden", "encoder",
                     "conv_channels", "force_scale"},
                 "oc_arch");
  OcArch a = base;
  get_if_present(j, "input_res", a.input_res);
  get_if_present(j, "glimpse_size", a.glimpse_size);
  get_if_present(j, "h", a.h);
  get_if_present(j, "hidden", a.hidden);
  get_if_present(j, "encoder", a.encoder);
  get_if_present(j, "conv_channels", a.conv_channels);
  get_if_present(j, "force_scale", a.force_scale);
  return a;
}

json fc_to_json(const FcArch& a) {
  return json{{"input_res", a.input_res}, {"h", a.h},
              {"hidden", a.hidden},       {"encoder", a.encoder},
              {"l_max", a.l_max},         {"conv_channels", a.conv_channels},
              {"force_scale", a.force_scale}};
}

FcArch fc_from_json(const json& j, const FcArch& base) {
  reject_unknown(j, {"input_res", "h", "hidden", "encoder", "l_max",
                     "conv_channels", "force_scale"},
                 "fc_arch");
  FcArch a = base;
  get_if_present(j, "input_res", a.input_res);
  get_if_present(j, "h", a.h);
  get_if_present(j, "hidden", a.hidden);
  get_if_present(j, "encoder", a.encoder);
  get_if_present(j, "l_max", a.l_max);
  get_if_present(j, "conv_channels", a.conv_channels);
  get_if_present(j, "force_scale", a.force_scale);
  return a;
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  reject_unknown(j,
                 {"seed", "threads", "world", "train", "cma", "physics",
                  "oc_arch", "fc_arch", "eval_h", "imagine_T", "rollout_T",
                  "plan_trials", "render_resolution"},
                 "config");
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  get_if_present(j, "threads", cfg.threads);
  if (j.contains("world")) cfg.world = spec_from_json(j.at("world"));
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"), cfg.train);
  if (j.contains("cma")) cfg.cma = cma_from_json(j.at("cma"), cfg.cma);
  if (j.contains("physics"))
    cfg.physics = physics_from_json(j.at("physics"), cfg.physics);
  if (j.contains("oc_arch")) cfg.oc = oc_from_json(j.at("oc_arch"), cfg.oc);
  if (j.contains("fc_arch")) cfg.fc = fc_from_json(j.at("fc_arch"), cfg.fc);
  get_if_present(j, "eval_h", cfg.eval_h);
  get_if_present(j, "imagine_T", cfg.imagine_T);
  get_if_present(j, "rollout_T", cfg.rollout_T);
  get_if_present(j, "plan_trials", cfg.plan_trials);
  get_if_present(j, "render_resolution", cfg.render_resolution);
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j{{"threads", cfg.threads},
         {"world", spec_to_json(cfg.world)},
         {"train", train_to_json(cfg.train)},
         {"cma", cma_to_json(cfg.cma)},
         {"physics", physics_to_json(cfg.physics)},
         {"oc_arch", oc_to_json(cfg.oc)},
         {"fc_arch", fc_to_json(cfg.fc)},
         {"eval_h", cfg.eval_h},
         {"imagine_T", cfg.imagine_T},
         {"rollout_T", cfg.rollout_T},
         {"plan_trials", cfg.plan_trials},
         {"render_resolution", cfg.render_resolution}};
  if (cfg.seed) j["seed"] = *cfg.seed;
  return canonical_dump(j);
}

uint64_t resolve_seed(const RunConfig& cfg, std::optional<uint64_t> flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("CUEPLAN_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ValidationError("CUEPLAN_SEED is not an unsigned integer");
    return uint64_t(v);
  }
  if (cfg.seed) return *cfg.seed;
  throw ValidationError(
      "no seed given: pass --seed, set CUEPLAN_SEED, or put \"seed\" in the config");
}

}  // namespace cueplan
