#include "cueplan/worldgen.hpp"

#include <cmath>
#include <fstream>

#include "cueplan/errors.hpp"
#include "cueplan/parallel.hpp"
#include "cueplan/rng.hpp"
#include "json_util.hpp"

namespace cueplan {

namespace {

constexpr int kMaxRejections = 10000;
constexpr double kTau = 6.283185307179586476925286766559;

void check_range(double lo, double hi, const char* what) {
  if (!(lo > 0.0) || !(hi >= lo)) {
    throw ValidationError(std::string("invalid range for ") + what);
  }
}

}  // namespace

void validate_spec(const WorldSpec& spec) {
  if (spec.n_balls < 1) throw ValidationError("n_balls must be >= 1");
  if (spec.ball_radius <= 0.0) throw ValidationError("ball_radius must be positive");
  if (spec.glimpse_size < 1) throw ValidationError("glimpse_size must be >= 1");
  check_range(spec.force_mag_range[0], spec.force_mag_range[1], "force magnitude");
  if (spec.seq_len_range[0] < 1 || spec.seq_len_range[1] < spec.seq_len_range[0]) {
    throw ValidationError("invalid sequence length range");
  }
  if (const auto* rect = std::get_if<Rectangular>(&spec.geometry)) {
    check_range(rect->length_range[0], rect->length_range[1], "wall length");
  } else {
    const auto& fam = std::get<PolygonFamily>(spec.geometry);
    if (fam.templates.empty()) throw ValidationError("no polygon templates");
    check_range(fam.scale_range[0], fam.scale_range[1], "polygon scale");
    for (const auto& name : fam.templates) polygon_template(name, 1.0);
  }
}

std::vector<Vec2> polygon_template(const std::string& name, double scale) {
  std::vector<Vec2> unit;
  if (name == "rectangle") {
    unit = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  } else if (name == "right-trapezoid") {
    unit = {{0.0, 0.0}, {1.0, 0.0}, {0.6, 0.8}, {0.0, 0.8}};
  } else if (name == "hexagon") {
    for (int k = 0; k < 6; ++k) {
      double a = kTau * k / 6.0;
      unit.push_back({0.5 + 0.5 * std::cos(a), 0.5 + 0.5 * std::sin(a)});
    }
  } else if (name == "l-shape") {
    unit = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.45},
            {0.45, 0.45}, {0.45, 1.0}, {0.0, 1.0}};
  } else {
    throw ValidationError("unknown polygon template: " + name);
  }
  for (Vec2& v : unit) v *= scale;
  return unit;
}

Vec2 sample_force(Rng& rng, const std::array<double, 2>& mag_range) {
  double angle = rng.uniform(0.0, kTau);
  double mag = rng.uniform(mag_range[0], mag_range[1]);
  return Vec2{std::cos(angle), std::sin(angle)} * mag;
}

std::pair<WorldState, ForceMap> sample_world(const WorldSpec& spec, uint64_t seed) {
  validate_spec(spec);
  Rng rng(seed);

  Table table;
  if (const auto* rect = std::get_if<Rectangular>(&spec.geometry)) {
    double w = rng.uniform(rect->length_range[0], rect->length_range[1]);
    double h = rng.uniform(rect->length_range[0], rect->length_range[1]);
    table = make_rect_table(w, h);
  } else {
    const auto& fam = std::get<PolygonFamily>(spec.geometry);
    size_t idx = rng.uniform_index(fam.templates.size());
    double s = rng.uniform(fam.scale_range[0], fam.scale_range[1]);
    table = make_table(polygon_template(fam.templates[idx], s));
  }

  WorldState state;
  state.table = table;
  double r = spec.ball_radius;
  double mass = ball_mass_for_radius(r);
  int rejections = 0;
  for (int i = 0; i < spec.n_balls; ++i) {
    while (true) {
      Vec2 c{rng.uniform(table.bbox_min.x, table.bbox_max.x),
             rng.uniform(table.bbox_min.y, table.bbox_max.y)};
      bool ok = point_in_polygon(table.vertices, c) &&
                distance_to_polygon_edges(table.vertices, c) >= r;
      for (const Ball& other : state.balls) {
        if (!ok) break;
        ok = norm(c - other.center) >= r + other.radius;
      }
      if (ok) {
        state.balls.push_back({i, c, {0.0, 0.0}, r, mass});
        break;
      }
      if (++rejections >= kMaxRejections) {
        throw PlacementFailure("ball placement failed after " +
                               std::to_string(kMaxRejections) + " rejections");
      }
    }
  }

  ForceMap forces;
  for (int i = 0; i < spec.n_balls; ++i) forces[i] = sample_force(rng, spec.force_mag_range);
  validate_world(state);
  return {std::move(state), std::move(forces)};
}

Sequence generate_sequence(const WorldSpec& spec, uint64_t seed,
                           const PhysicsParams& params) {
  auto [state, forces] = sample_world(spec, split_seed(seed, 0));
  Rng len_rng(split_seed(seed, 1));
  int T = len_rng.uniform_int(spec.seq_len_range[0], spec.seq_len_range[1]);
  Sequence seq;
  seq.trajectory = simulate(state, forces, T, params);
  seq.forces_at_t0 = std::move(forces);
  seq.spec_used = spec;
  seq.seed = seed;
  return seq;
}

Dataset generate_dataset(const WorldSpec& spec, int n_sequences, uint64_t master_seed,
                         const PhysicsParams& params, int threads) {
  if (n_sequences < 1) throw ValidationError("n_sequences must be >= 1");
  validate_spec(spec);
  Dataset ds;
  ds.spec = spec;
  ds.master_seed = master_seed;
  ds.sequences.resize(size_t(n_sequences));
  parallel_for(n_sequences, threads, [&](int i) {
    try {
      ds.sequences[size_t(i)] = generate_sequence(spec, split_seed(master_seed, uint64_t(i)), params);
    } catch (const PlacementFailure& e) {
      throw PlacementFailure("sequence " + std::to_string(i) + ": " + e.what());
    }
  });
  return ds;
}

std::vector<WorldSpec> test_spec_variants() {
  std::vector<WorldSpec> specs;

  WorldSpec train;
  train.name = "train";
  train.n_balls = 2;
  specs.push_back(train);

  WorldSpec large = train;
  large.name = "large-walls";
  large.geometry = Rectangular{{800.0, 1200.0}};
  specs.push_back(large);

  for (int n : {3, 4, 6}) {
    WorldSpec s = train;
    s.name = std::to_string(n) + "-ball";
    s.n_balls = n;
    specs.push_back(s);
  }

  WorldSpec poly = train;
  poly.name = "non-rectangular";
  poly.geometry = PolygonFamily{};
  specs.push_back(poly);

  for (const WorldSpec& s : specs) validate_spec(s);
  return specs;
}

nlohmann::json vec2_to_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

Vec2 vec2_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw IoFailure("expected [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json spec_to_json(const WorldSpec& spec) {
  nlohmann::json g;
  if (const auto* rect = std::get_if<Rectangular>(&spec.geometry)) {
    g = {{"kind", "rectangular"}, {"length_range", rect->length_range}};
  } else {
    const auto& fam = std::get<PolygonFamily>(spec.geometry);
    g = {{"kind", "polygon-family"},
         {"templates", fam.templates},
         {"scale_range", fam.scale_range}};
  }
  return {{"name", spec.name},
          {"n_balls", spec.n_balls},
          {"geometry", g},
          {"force_mag_range", spec.force_mag_range},
          {"seq_len_range", spec.seq_len_range},
          {"ball_radius", spec.ball_radius},
          {"glimpse_size", spec.glimpse_size}};
}

WorldSpec spec_from_json(const nlohmann::json& j) {
  WorldSpec spec;
  spec.name = j.value("name", spec.name);
  spec.n_balls = j.value("n_balls", spec.n_balls);
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    std::string kind = g.value("kind", "rectangular");
    if (kind == "rectangular") {
      Rectangular r;
      if (g.contains("length_range")) {
        r.length_range = g.at("length_range").get<std::array<double, 2>>();
      }
      spec.geometry = r;
    } else if (kind == "polygon-family") {
      PolygonFamily f;
      if (g.contains("templates")) {
        f.templates = g.at("templates").get<std::vector<std::string>>();
      }
      if (g.contains("scale_range")) {
        f.scale_range = g.at("scale_range").get<std::array<double, 2>>();
      }
      spec.geometry = f;
    } else {
      throw ValidationError("unknown geometry kind: " + kind);
    }
  }
  if (j.contains("force_mag_range")) {
    spec.force_mag_range = j.at("force_mag_range").get<std::array<double, 2>>();
  }
  if (j.contains("seq_len_range")) {
    spec.seq_len_range = j.at("seq_len_range").get<std::array<int, 2>>();
  }
  spec.ball_radius = j.value("ball_radius", spec.ball_radius);
  spec.glimpse_size = j.value("glimpse_size", spec.glimpse_size);
  validate_spec(spec);
  return spec;
}

std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoFailure("cannot open for writing: " + file.string());
  os.write(text.data(), std::streamsize(text.size()));
  if (!os) throw IoFailure("write failed: " + file.string());
}

nlohmann::json load_json_file(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoFailure("cannot open for reading: " + file.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("bad JSON in " + file.string() + ": " + e.what());
  }
  return j;
}

namespace {

std::string seq_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%06d.blrd", index);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json seqs = nlohmann::json::array();
  for (size_t i = 0; i < ds.sequences.size(); ++i) {
    const Sequence& s = ds.sequences[i];
    save_blrd(s.trajectory, dir / seq_filename(int(i)));
    nlohmann::json table = nlohmann::json::array();
    for (Vec2 v : s.trajectory.table.vertices) table.push_back(vec2_to_json(v));
    nlohmann::json forces;
    for (const auto& [id, f] : s.forces_at_t0) {
      forces[std::to_string(id)] = vec2_to_json(f);
    }
    seqs.push_back({{"file", seq_filename(int(i))},
                    {"seed", s.seed},
                    {"steps", s.trajectory.steps()},
                    {"n_balls", s.trajectory.ball_count()},
                    {"radius", s.spec_used.ball_radius},
                    {"table", table},
                    {"forces", forces}});
  }
  nlohmann::json manifest = {{"format", "cueplan-dataset-v1"},
                             {"master_seed", ds.master_seed},
                             {"n_sequences", ds.sequences.size()},
                             {"spec", spec_to_json(ds.spec)},
                             {"sequences", seqs}};
  write_text_file(dir / "manifest.json", canonical_dump(manifest));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest = load_json_file(dir / "manifest.json");
  if (manifest.value("format", "") != "cueplan-dataset-v1") {
    throw IoFailure("unrecognized dataset format in " + dir.string());
  }
  Dataset ds;
  ds.master_seed = manifest.at("master_seed").get<uint64_t>();
  ds.spec = spec_from_json(manifest.at("spec"));
  const auto& seqs = manifest.at("sequences");
  if (seqs.size() != manifest.at("n_sequences").get<size_t>()) {
    throw IoFailure("manifest sequence count mismatch in " + dir.string());
  }
  for (const auto& sj : seqs) {
    Sequence s;
    s.seed = sj.at("seed").get<uint64_t>();
    s.spec_used = ds.spec;
    s.trajectory = load_blrd(dir / sj.at("file").get<std::string>());
    std::vector<Vec2> verts;
    for (const auto& vj : sj.at("table")) verts.push_back(vec2_from_json(vj));
    s.trajectory.table = make_table(std::move(verts));
    for (const auto& [key, fj] : sj.at("forces").items()) {
      s.forces_at_t0[std::stoi(key)] = vec2_from_json(fj);
    }
    s.trajectory.forces_at_t0 = s.forces_at_t0;
    if (s.trajectory.steps() != sj.at("steps").get<int>()) {
      throw IoFailure("trajectory length mismatch for " +
                      sj.at("file").get<std::string>());
    }
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

}  // namespace cueplan
