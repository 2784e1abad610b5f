#include "cueplan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cueplan/errors.hpp"
#include "cueplan/parallel.hpp"

namespace cueplan {
namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ErrorTable evaluate_sequence(Predictor& predictor, const Sequence& seq, int h) {
  const Trajectory& traj = seq.trajectory;
  const int T = traj.steps();
  const int n = traj.ball_count();
  ErrorTable table(predictor.name(), h);
  const std::vector<bool> near = near_collision_mask(traj);
  // mask_prefix[f] = flagged frames among 0..f-1; lets the per-sample stratum
  // test (any flagged frame in t+1..t+k) run in O(1).
  std::vector<int> mask_prefix(near.size() + 1, 0);
  for (size_t f = 0; f < near.size(); ++f)
    mask_prefix[f + 1] = mask_prefix[f] + (near[f] ? 1 : 0);

  predictor.reset();
  for (int t = 0; t < T; ++t) {
    ObservedFrame frame;
    frame.state = traj.state_at(t);
    frame.t = t;
    for (int i = 0; i < n; ++i)
      frame.displacement[traj.frames[t][i].id] = traj.step_velocity(i, t);
    if (t == 0) frame.forces = seq.forces_at_t0;

    std::map<int, Prediction> preds = predictor.step(frame);
    for (int i = 0; i < n; ++i) {
      const int id = traj.frames[t][i].id;
      auto it = preds.find(id);
      if (it == preds.end())
        throw ValidationError("predictor returned no prediction for ball " +
                              std::to_string(id));
      if (int(it->second.velocities.size()) < h)
        throw ValidationError("prediction horizon shorter than requested h");
      for (int k = 1; k <= h; ++k) {
        if (t + k > T) break;
        const Vec2 u = traj.step_velocity(i, t + k);
        const Vec2 up = it->second.velocities[k - 1];
        auto ang = angular_error(u, up);
        const bool is_near = mask_prefix[t + k + 1] - mask_prefix[t + 1] > 0;
        ErrorCell& stratum = is_near ? table.near[k - 1] : table.non_near[k - 1];
        if (!ang) {
          ++table.overall[k - 1].excluded;
          ++stratum.excluded;
          continue;
        }
        const double mag = *magnitude_rel_error(u, up);
        table.overall[k - 1].add(*ang, mag);
        stratum.add(*ang, mag);
      }
    }
  }
  return table;
}

}  // namespace

std::optional<double> angular_error(Vec2 u_true, Vec2 u_pred) {
  const double nt = norm(u_true);
  if (nt <= kVelocityEps) return std::nullopt;
  const double np = norm(u_pred);
  if (np <= kVelocityEps) return 180.0;
  double c = dot(u_true, u_pred) / (nt * np);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c) * kRadToDeg;
}

std::optional<double> magnitude_rel_error(Vec2 u_true, Vec2 u_pred) {
  const double nt = norm(u_true);
  if (nt <= kVelocityEps) return std::nullopt;
  return std::abs(norm(u_pred) - nt) / nt;
}

std::vector<bool> near_collision_mask(const Trajectory& traj, int window) {
  std::vector<bool> mask(traj.frames.size(), false);
  const int last = int(traj.frames.size()) - 1;
  for (const CollisionEvent& ev : traj.events) {
    const int lo = std::max(0, ev.step - window);
    const int hi = std::min(last, ev.step + 1 + window);
    for (int t = lo; t <= hi; ++t) mask[t] = true;
  }
  return mask;
}

void ErrorTable::merge(const ErrorTable& o) {
  if (h != o.h || model != o.model)
    throw ValidationError("cannot merge mismatched error tables");
  for (int k = 0; k < h; ++k) {
    overall[k].merge(o.overall[k]);
    near[k].merge(o.near[k]);
    non_near[k].merge(o.non_near[k]);
  }
}

ErrorTable evaluate(const PredictorFactory& make_predictor, const Dataset& ds,
                    int h, int threads) {
  if (ds.sequences.empty()) throw EmptyResults("evaluate: empty dataset");
  if (h < 1) throw ValidationError("evaluate: h must be >= 1");

  std::vector<ErrorTable> partial(ds.sequences.size());
  parallel_for(ds.sequences.size(), threads, [&](size_t i) {
    auto predictor = make_predictor();
    if (predictor->horizon() < h)
      throw ValidationError("predictor horizon below evaluation h");
    partial[i] = evaluate_sequence(*predictor, ds.sequences[i], h);
  });

  ErrorTable table = std::move(partial[0]);
  for (size_t i = 1; i < partial.size(); ++i) table.merge(partial[i]);
  return table;
}

void write_error_csv(const ErrorTable& table, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoFailure("cannot open " + file.string() + " for writing");
  os << "k,stratum,angular_deg,magnitude_rel,count,excluded\n";
  auto row = [&](int k, const char* name, const ErrorCell& c) {
    os << k << ',' << name << ',' << fmt(c.ang_mean()) << ',' << fmt(c.mag_mean())
       << ',' << c.count << ',' << c.excluded << '\n';
  };
  for (int k = 1; k <= table.h; ++k) {
    row(k, "overall", table.overall[k - 1]);
    row(k, "near", table.near[k - 1]);
    row(k, "non_near", table.non_near[k - 1]);
  }
  if (!os) throw IoFailure("failed writing " + file.string());
}

std::string format_error_report(const std::vector<ErrorTable>& tables) {
  if (tables.empty()) throw EmptyResults("format_error_report");
  std::ostringstream os;
  std::vector<int> ks{1, 5, 20};
  ks.erase(std::remove_if(ks.begin(), ks.end(),
                          [&](int k) { return k > tables[0].h; }),
           ks.end());

  auto cell = [](const ErrorCell& c) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%7.2f deg / %6.3f", c.ang_mean(), c.mag_mean());
    return std::string(buf);
  };
  for (int k : ks) {
    os << "t+" << k << " (angular / relative magnitude)\n";
    for (const ErrorTable& t : tables) {
      char head[32];
      std::snprintf(head, sizeof(head), "  %-8s", t.model.c_str());
      os << head << " overall " << cell(t.overall[k - 1]) << "   near "
         << cell(t.near[k - 1]) << "   away " << cell(t.non_near[k - 1]) << "\n";
    }
  }
  return os.str();
}

}  // namespace cueplan
