// cueplan: dataset generation, training, evaluation, imagination and force
// planning for the billiards world, from one deterministic config.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cueplan/config.hpp"
#include "cueplan/errors.hpp"
#include "cueplan/eval.hpp"
#include "cueplan/imagination.hpp"
#include "cueplan/planner.hpp"
#include "cueplan/rng.hpp"
#include "cueplan/training.hpp"

namespace cp = cueplan;

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config");
    cmd->add_option("--seed", seed, "master seed (overrides CUEPLAN_SEED and config)");
    cmd->add_option("--threads", threads, "worker threads for generation/eval");
  }

  cp::RunConfig resolve(uint64_t& seed_out) const {
    cp::RunConfig cfg = config_path.empty() ? cp::default_run_config()
                                            : cp::load_run_config(config_path);
    if (threads) cfg.threads = *threads;
    seed_out = cp::resolve_seed(cfg, seed);
    cfg.seed = seed_out;
    return cfg;
  }
};

void log_header(const char* cmd, const cp::RunConfig& cfg) {
  std::cerr << "cueplan " << cmd << "\nresolved config:\n"
            << cp::run_config_to_json(cfg);
}

cp::WorldSpec pick_spec(const cp::RunConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.world;
  const std::vector<cp::WorldSpec> variants = cp::test_spec_variants();
  std::string known;
  for (const cp::WorldSpec& v : variants) {
    if (v.name == name) return v;
    known += (known.empty() ? "" : ", ") + v.name;
  }
  throw cp::ValidationError("unknown spec variant \"" + name + "\" (known: " +
                            known + ")");
}

/// Owns loaded networks so predictor factories can hand out copies.
struct ModelBundle {
  std::optional<cp::OcModel> oc;
  std::optional<cp::FcModel> fc;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty())
    throw cp::ValidationError(std::string("--ckpt is required for ") + what);
  if (!std::filesystem::exists(path))
    throw cp::CheckpointMissing("checkpoint not found: " + path);
}

cp::PredictorFactory make_factory(const std::string& model, const std::string& ckpt,
                                  int h, const cp::PhysicsParams& physics,
                                  ModelBundle& bundle) {
  if (model == "cv") return [h] { return std::make_unique<cp::CvPredictor>(h); };
  if (model == "oracle")
    return [h, physics] { return std::make_unique<cp::OraclePredictor>(h, physics); };
  if (model == "oc") {
    require_file(ckpt, "model oc");
    bundle.oc = cp::OcModel::load(ckpt);
    return [&bundle] { return std::make_unique<cp::OcPredictor>(*bundle.oc); };
  }
  if (model == "fc") {
    require_file(ckpt, "model fc");
    bundle.fc = cp::FcModel::load(ckpt);
    return [&bundle] { return std::make_unique<cp::FcPredictor>(*bundle.fc); };
  }
  throw cp::ValidationError("unknown model \"" + model +
                            "\" (expected cv, oracle, oc or fc)");
}

// --- gen ---------------------------------------------------------------------

int cmd_gen(const Common& common, const std::string& out, int n,
            const std::string& spec_name, std::optional<int> balls) {
  uint64_t seed = 0;
  cp::RunConfig cfg = common.resolve(seed);
  log_header("gen", cfg);
  cp::WorldSpec spec = pick_spec(cfg, spec_name);
  if (balls) spec.n_balls = *balls;
  cp::Dataset ds = cp::generate_dataset(spec, n, seed, cfg.physics, cfg.threads);
  cp::save_dataset(ds, out);
  std::cout << "wrote " << n << " sequences to " << out << "\n";
  return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const Common& common, const std::string& model,
              const std::vector<std::string>& data, const std::string& out,
              const std::string& init, std::optional<int> epochs,
              std::optional<double> lr, const std::string& log_path) {
  uint64_t seed = 0;
  cp::RunConfig cfg = common.resolve(seed);
  log_header("train", cfg);
  if (data.empty()) throw cp::ValidationError("train: at least one --data required");
  if (out.empty()) throw cp::ValidationError("train: --out checkpoint path required");

  cp::TrainConfig tc = cfg.train;
  tc.seed = seed;
  if (epochs) tc.epochs = *epochs;
  if (lr) tc.lr = *lr;

  std::ofstream log_file;
  std::ostream* log = &std::cerr;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::binary);
    if (!log_file) throw cp::IoFailure("cannot open log file " + log_path);
    log = &log_file;
  }

  std::vector<cp::Dataset> stages;
  stages.reserve(data.size());
  for (const std::string& dir : data) stages.push_back(cp::load_dataset(dir));

  auto stage_path = [&](size_t i) {
    return out + ".stage" + std::to_string(i + 1);
  };

  if (model == "oc") {
    cp::OcModel net = init.empty() ? cp::OcModel::create(cfg.oc, cp::split_seed(seed, 0x0c))
                                   : (require_file(init, "init"), cp::OcModel::load(init));
    for (size_t i = 0; i < stages.size(); ++i) {
      if (stages.size() > 1 && log) *log << "# stage " << (i + 1) << "\n";
      cp::TrainConfig stage_cfg = tc;
      stage_cfg.seed = cp::split_seed(seed, i);
      cp::train_oc(net, stages[i], stage_cfg, log);
      if (stages.size() > 1) net.save(stage_path(i));
    }
    net.save(out);
  } else if (model == "fc") {
    cp::FcModel net = init.empty() ? cp::FcModel::create(cfg.fc, cp::split_seed(seed, 0xfc))
                                   : (require_file(init, "init"), cp::FcModel::load(init));
    for (size_t i = 0; i < stages.size(); ++i) {
      if (stages.size() > 1 && log) *log << "# stage " << (i + 1) << "\n";
      cp::TrainConfig stage_cfg = tc;
      stage_cfg.seed = cp::split_seed(seed, i);
      cp::train_fc(net, stages[i], stage_cfg, log);
      if (stages.size() > 1) net.save(stage_path(i));
    }
    net.save(out);
  } else {
    throw cp::ValidationError("train: model must be oc or fc");
  }
  std::cout << "wrote checkpoint " << out << "\n";
  return 0;
}

// --- eval --------------------------------------------------------------------

int cmd_eval(const Common& common, const std::string& model, const std::string& ckpt,
             const std::string& data, std::optional<int> h_opt,
             const std::string& out) {
  uint64_t seed = 0;
  cp::RunConfig cfg = common.resolve(seed);
  log_header("eval", cfg);
  if (data.empty()) throw cp::ValidationError("eval: --data required");
  const int h = h_opt.value_or(cfg.eval_h);

  cp::Dataset ds = cp::load_dataset(data);
  ModelBundle bundle;
  cp::PredictorFactory factory = make_factory(model, ckpt, h, cfg.physics, bundle);
  cp::ErrorTable table = cp::evaluate(factory, ds, h, cfg.threads);
  if (!out.empty()) cp::write_error_csv(table, out);
  std::cout << cp::format_error_report({table});
  return 0;
}

// --- imagine -----------------------------------------------------------------

int cmd_imagine(const Common& common, const std::string& model,
                const std::string& ckpt, const std::string& data, int index,
                std::optional<int> T_opt, const std::string& out,
                std::optional<int> res_opt) {
  uint64_t seed = 0;
  cp::RunConfig cfg = common.resolve(seed);
  log_header("imagine", cfg);
  if (data.empty()) throw cp::ValidationError("imagine: --data required");
  if (out.empty()) throw cp::ValidationError("imagine: --out directory required");

  cp::Dataset ds = cp::load_dataset(data);
  if (index < 0 || size_t(index) >= ds.sequences.size())
    throw cp::OutOfRange("imagine: sequence index " + std::to_string(index) +
                         " out of range (dataset has " +
                         std::to_string(ds.sequences.size()) + ")");
  const cp::Sequence& seq = ds.sequences[index];

  // Reconstruct the pre-force state: generated worlds start at rest and the
  // stored frame 0 is already post-force, so zero the velocities and let
  // imagine() apply the recorded forces.
  cp::WorldState initial = seq.trajectory.state_at(0);
  for (cp::Ball& b : initial.balls) b.velocity = {0.0, 0.0};

  const int T = T_opt.value_or(cfg.imagine_T);
  // Imagination consumes only the k=1 prediction, so cv/oracle run at h=1.
  // Learned models keep the horizon baked into their checkpoint.
  ModelBundle bundle;
  cp::PredictorFactory factory = make_factory(model, ckpt, 1, cfg.physics, bundle);
  auto predictor = factory();

  cp::ImagineConfig icfg;
  icfg.render_resolution = res_opt.value_or(cfg.render_resolution);
  cp::Imagined rollout =
      cp::imagine(initial, seq.forces_at_t0, *predictor, T, cfg.physics, icfg);

  std::filesystem::create_directories(out);
  cp::save_blrd(rollout.trajectory, std::filesystem::path(out) / "imagined.blrd");
  const int n_frames = cp::dump_frames(rollout, out);
  std::cout << "wrote imagined.blrd and " << n_frames << " frames to " << out
            << "\n";
  return 0;
}

// --- plan --------------------------------------------------------------------

int cmd_plan(const Common& common, const std::string& model, const std::string& ckpt,
             std::optional<int> trials_opt, std::optional<int> T_opt,
             const std::string& out) {
  uint64_t seed = 0;
  cp::RunConfig cfg = common.resolve(seed);
  log_header("plan", cfg);

  cp::TrialConfig tc;
  tc.trials = trials_opt.value_or(cfg.plan_trials);
  tc.spec = cfg.world;
  tc.seed = seed;
  tc.rollout_T = T_opt.value_or(cfg.rollout_T);
  tc.cma = cfg.cma;
  tc.cma.force_mag_range = cfg.world.force_mag_range;
  tc.physics = cfg.physics;

  ModelBundle bundle;
  std::unique_ptr<cp::Predictor> predictor;
  if (model != "random") {
    // Planning consumes only the next-step prediction, so cv/oracle run at
    // h = 1; learned models keep the horizon baked into their checkpoint.
    predictor = make_factory(model, ckpt, 1, cfg.physics, bundle)();
  }

  std::vector<cp::TrialRecord> records = cp::run_push_trials(tc, predictor.get());

  if (!out.empty()) {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw cp::IoFailure("cannot open " + out + " for writing");
    os << "trial,world_seed,target_x,target_y,force_x,force_y,imagined_cost,"
          "executed_min_distance\n";
    for (const cp::TrialRecord& r : records) {
      os << r.index << ',' << r.world_seed << ',' << fmt(r.target.x) << ','
         << fmt(r.target.y) << ',' << fmt(r.result.force.x) << ','
         << fmt(r.result.force.y) << ',' << fmt(r.result.imagined_cost) << ','
         << fmt(r.result.executed_min_distance) << '\n';
    }
    if (!os) throw cp::IoFailure("failed writing " + out);
  }

  std::vector<cp::PlanResult> results;
  results.reserve(records.size());
  for (const cp::TrialRecord& r : records) results.push_back(r.result);
  const std::map<int, double> acc = cp::hit_accuracy(results, tc.thresholds);
  std::cout << "model " << model << ", " << records.size() << " trials\n";
  for (const auto& [p, frac] : acc) {
    char line[64];
    std::snprintf(line, sizeof(line), "hit@%-3d %.3f\n", p, frac);
    std::cout << line;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"billiards visual imagination toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset of simulated sequences");
  Common gen_common;
  gen_common.attach(gen);
  std::string gen_out, gen_spec;
  int gen_n = 100;
  std::optional<int> gen_balls;
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--n", gen_n, "number of sequences");
  gen->add_option("--spec", gen_spec,
                  "named spec variant (default: config world spec)");
  gen->add_option("--balls", gen_balls, "override ball count");

  // train
  auto* train = app.add_subcommand("train", "train a predictor network");
  Common train_common;
  train_common.attach(train);
  std::string train_model, train_out, train_init, train_log;
  std::vector<std::string> train_data;
  std::optional<int> train_epochs;
  std::optional<double> train_lr;
  train->add_option("--model", train_model, "oc | fc")->required();
  train->add_option("--data", train_data,
                    "dataset directory (repeat for curriculum stages)")
      ->required();
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--init", train_init, "checkpoint to continue from");
  train->add_option("--epochs", train_epochs, "override epochs per stage");
  train->add_option("--lr", train_lr, "override learning rate");
  train->add_option("--log", train_log,
                    "training curve CSV (timings vary run to run; default stderr)");

  // eval
  auto* eval = app.add_subcommand("eval", "prediction error tables on a dataset");
  Common eval_common;
  eval_common.attach(eval);
  std::string eval_model, eval_ckpt, eval_data, eval_out;
  std::optional<int> eval_h;
  eval->add_option("--model", eval_model, "cv | oracle | oc | fc")->required();
  eval->add_option("--ckpt", eval_ckpt, "checkpoint (oc/fc)");
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--horizon", eval_h, "evaluation horizon");
  eval->add_option("--out", eval_out, "error table CSV path");

  // imagine
  auto* imagine = app.add_subcommand("imagine", "roll a predictor forward and dump frames");
  Common im_common;
  im_common.attach(imagine);
  std::string im_model, im_ckpt, im_data, im_out;
  int im_index = 0;
  std::optional<int> im_T, im_res;
  imagine->add_option("--model", im_model, "cv | oracle | oc | fc")->required();
  imagine->add_option("--ckpt", im_ckpt, "checkpoint (oc/fc)");
  imagine->add_option("--data", im_data, "dataset holding the start state")->required();
  imagine->add_option("--index", im_index, "sequence index in the dataset");
  imagine->add_option("--T", im_T, "rollout length");
  imagine->add_option("--out", im_out, "output directory")->required();
  imagine->add_option("--resolution", im_res, "frame render resolution (0: no frames)");

  // plan
  auto* plan = app.add_subcommand("plan", "CMA-ES force planning benchmark");
  Common plan_common;
  plan_common.attach(plan);
  std::string plan_model, plan_ckpt, plan_out;
  std::optional<int> plan_trials, plan_T;
  plan->add_option("--model", plan_model, "cv | oracle | oc | fc | random")->required();
  plan->add_option("--ckpt", plan_ckpt, "checkpoint (oc/fc)");
  plan->add_option("--trials", plan_trials, "number of benchmark trials");
  plan->add_option("--T", plan_T, "rollout/execution length");
  plan->add_option("--out", plan_out, "per-trial results CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // --help -> 0, flag misuse -> nonzero
  }

  if (gen->parsed()) return cmd_gen(gen_common, gen_out, gen_n, gen_spec, gen_balls);
  if (train->parsed())
    return cmd_train(train_common, train_model, train_data, train_out, train_init,
                     train_epochs, train_lr, train_log);
  if (eval->parsed())
    return cmd_eval(eval_common, eval_model, eval_ckpt, eval_data, eval_h, eval_out);
  if (imagine->parsed())
    return cmd_imagine(im_common, im_model, im_ckpt, im_data, im_index, im_T,
                       im_out, im_res);
  if (plan->parsed())
    return cmd_plan(plan_common, plan_model, plan_ckpt, plan_trials, plan_T, plan_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cp::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cp::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
