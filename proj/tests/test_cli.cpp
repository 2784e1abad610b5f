#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

fs::path work_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("cueplan_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Runs the cueplan binary with CUEPLAN_SEED scrubbed from (or set in) the
/// environment, capturing stdout+stderr and the exit code.
CliResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  fs::path log = work_root() / ("log_" + std::to_string(counter++) + ".txt");
  std::string cmd = "env -u CUEPLAN_SEED " + env + (env.empty() ? "" : " ") +
                    "\"" CUEPLAN_CLI_PATH "\" " + args + " > \"" +
                    log.string() + "\" 2>&1";
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.output = read_file(log);
  return r;
}

/// filename -> bytes for every regular file under dir.
std::map<std::string, std::string> dir_digest(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file())
      out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

fs::path write_config(const char* tag, const std::string& text) {
  fs::path p = work_root() / (std::string(tag) + ".json");
  std::ofstream os(p);
  os << text;
  return p;
}

/// Short sequences keep the gen-heavy cases quick.
std::string quick_config() {
  static std::string path =
      write_config("quick", R"({"world": {"seq_len_range": [20, 40]}})")
          .string();
  return path;
}

}  // namespace

TEST_CASE("help exits 0, missing subcommand does not") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("").code != 0);
}

TEST_CASE("error kinds map to distinct exit codes") {
  // Validation: unknown predictor name.
  CliResult bad_model = run_cli("plan --model zz --seed 1 --trials 1");
  CHECK(bad_model.code == 1);
  CHECK(bad_model.output.find("unknown model") != std::string::npos);

  // Generation: six radius-25 balls cannot fit a 110x110 table.
  fs::path cramped = write_config("cramped", R"({
    "seed": 1,
    "world": {"n_balls": 6,
              "geometry": {"kind": "rectangular", "length_range": [110, 110]}}
  })");
  fs::path out = work_root() / "cramped_ds";
  CliResult placement =
      run_cli("gen --config \"" + cramped.string() + "\" --out \"" +
              out.string() + "\" --n 1");
  CHECK(placement.code == 2);

  // IO: dataset directory that does not exist.
  CliResult no_data =
      run_cli("eval --model cv --seed 1 --data /no/such/dataset");
  CHECK(no_data.code == 3);
}

TEST_CASE("seed is required and CUEPLAN_SEED must be numeric") {
  fs::path out = work_root() / "noseed_ds";
  CliResult r = run_cli("gen --out \"" + out.string() + "\" --n 1");
  CHECK(r.code == 1);
  CHECK(r.output.find("no seed") != std::string::npos);

  CliResult bad_env = run_cli("gen --out \"" + out.string() + "\" --n 1",
                              "CUEPLAN_SEED=abc");
  CHECK(bad_env.code == 1);
}

TEST_CASE("gen is byte-identical across reruns and seed sources") {
  auto gen = [&](const char* dir, const std::string& extra,
                 const std::string& env = "") {
    fs::path out = work_root() / dir;
    CliResult r = run_cli("gen --config \"" + quick_config() + "\" --out \"" +
                              out.string() + "\" --n 3 " + extra,
                          env);
    REQUIRE(r.code == 0);
    return dir_digest(out);
  };

  auto a = gen("ds_a", "--seed 5");
  auto b = gen("ds_b", "--seed 5");
  CHECK(a == b);
  CHECK(a.count("manifest.json") == 1);
  CHECK(a.size() == 4);  // manifest + three sequences

  // Env seed matches the equivalent flag seed; the flag beats the env.
  CHECK(gen("ds_c", "", "CUEPLAN_SEED=5") == a);
  CHECK(gen("ds_d", "--seed 5", "CUEPLAN_SEED=99") == a);
  CHECK(gen("ds_e", "--seed 6") != a);

  // A config-file seed is the final fallback.
  fs::path seeded = write_config(
      "seeded", R"({"seed": 5, "world": {"seq_len_range": [20, 40]}})");
  fs::path out = work_root() / "ds_f";
  CliResult r = run_cli("gen --config \"" + seeded.string() + "\" --out \"" +
                        out.string() + "\" --n 3");
  REQUIRE(r.code == 0);
  CHECK(dir_digest(out) == a);
}

TEST_CASE("gen rejects unknown spec variants") {
  fs::path out = work_root() / "ds_bad_spec";
  CliResult r = run_cli("gen --seed 1 --out \"" + out.string() +
                        "\" --n 1 --spec bogus");
  CHECK(r.code == 1);
  CHECK(r.output.find("unknown spec variant") != std::string::npos);
}

TEST_CASE("eval, imagine and plan smoke runs") {
  fs::path data = work_root() / "smoke_ds";
  REQUIRE(run_cli("gen --config \"" + quick_config() + "\" --seed 11 --out \"" +
                  data.string() + "\" --n 4")
              .code == 0);

  SUBCASE("eval writes the error table CSV") {
    fs::path csv = work_root() / "cv_errors.csv";
    CliResult r = run_cli("eval --model cv --seed 1 --data \"" + data.string() +
                          "\" --horizon 3 --out \"" + csv.string() + "\"");
    CHECK(r.code == 0);
    std::string text = read_file(csv);
    CHECK(text.rfind("k,stratum,angular_deg,magnitude_rel,count,excluded\n",
                     0) == 0);
    // header + 3 strata x 3 horizons
    CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  }

  SUBCASE("imagine dumps a trajectory and frames") {
    fs::path out = work_root() / "imagined";
    CliResult r = run_cli("imagine --model cv --seed 1 --data \"" +
                          data.string() + "\" --index 0 --T 5 --out \"" +
                          out.string() + "\" --resolution 16");
    CHECK(r.code == 0);
    CHECK(r.output.find("6 frames") != std::string::npos);
    CHECK(fs::exists(out / "imagined.blrd"));
    CHECK(fs::exists(out / "frame_000000.ppm"));
    CHECK(fs::exists(out / "frame_000005.ppm"));

    fs::path quiet = work_root() / "imagined_quiet";
    CliResult r0 = run_cli("imagine --model cv --seed 1 --data \"" +
                           data.string() + "\" --index 0 --T 5 --out \"" +
                           quiet.string() + "\" --resolution 0");
    CHECK(r0.code == 0);
    CHECK(r0.output.find("0 frames") != std::string::npos);
    CHECK(!fs::exists(quiet / "frame_000000.ppm"));
  }

  SUBCASE("imagine rejects an out-of-range index") {
    fs::path out = work_root() / "imagined_oob";
    CliResult r = run_cli("imagine --model cv --seed 1 --data \"" +
                          data.string() + "\" --index 99 --T 5 --out \"" +
                          out.string() + "\"");
    CHECK(r.code == 1);
  }

  SUBCASE("plan with the random baseline reports hit rates") {
    fs::path csv = work_root() / "plan.csv";
    CliResult r = run_cli(
        "plan --model random --seed 3 --trials 2 --T 30 --out \"" +
        csv.string() + "\"");
    CHECK(r.code == 0);
    CHECK(r.output.find("hit@") != std::string::npos);
    std::string text = read_file(csv);
    CHECK(text.rfind("trial,world_seed,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2
  }

  SUBCASE("learned models need an existing checkpoint") {
    CliResult no_flag = run_cli("plan --model oc --seed 1 --trials 1");
    CHECK(no_flag.code == 1);
    CHECK(no_flag.output.find("--ckpt") != std::string::npos);

    CliResult missing = run_cli(
        "plan --model oc --seed 1 --trials 1 --ckpt /no/such/model.blnn");
    CHECK(missing.code == 1);
    CHECK(missing.output.find("not found") != std::string::npos);
  }
}
