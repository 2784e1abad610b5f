#include "cueplan/trajectory.hpp"

#include <cstring>
#include <fstream>

#include "cueplan/errors.hpp"

namespace cueplan {

namespace {

constexpr char kMagic[5] = {'B', 'L', 'R', 'D', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

WorldState Trajectory::state_at(int t) const {
  if (t < 0 || t >= int(frames.size())) throw OutOfRange("frame index out of range");
  WorldState s;
  s.table = table;
  s.balls = frames[t];
  s.t = t;
  return s;
}

Vec2 Trajectory::step_velocity(int ball_index, int t) const {
  if (t < 0 || t >= int(frames.size())) throw OutOfRange("frame index out of range");
  if (ball_index < 0 || ball_index >= ball_count()) {
    throw OutOfRange("ball index out of range");
  }
  if (t == 0) return frames[0][ball_index].velocity;
  return frames[t][ball_index].center - frames[t - 1][ball_index].center;
}

void save_blrd(const Trajectory& traj, const std::filesystem::path& file) {
  if (traj.frames.empty()) throw ValidationError("cannot save empty trajectory");
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoFailure("cannot open for writing: " + file.string());
  os.write(kMagic, 5);
  uint32_t n = uint32_t(traj.ball_count());
  put_u32(os, n);
  put_u32(os, uint32_t(traj.steps()));
  put_f64(os, n > 0 ? traj.frames[0][0].radius : 0.0);
  for (const auto& frame : traj.frames) {
    if (frame.size() != n) throw ValidationError("ragged trajectory frames");
    for (const Ball& b : frame) {
      put_f64(os, b.center.x);
      put_f64(os, b.center.y);
      put_f64(os, b.velocity.x);
      put_f64(os, b.velocity.y);
    }
  }
  for (const CollisionEvent& e : traj.events) {
    put_u32(os, uint32_t(e.step));
    char kind = char(uint8_t(e.kind));
    os.write(&kind, 1);
    put_u32(os, uint32_t(e.a));
    put_u32(os, uint32_t(e.b));
    put_f64(os, e.toi_fraction);
  }
  if (!os) throw IoFailure("write failed: " + file.string());
}

Trajectory load_blrd(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoFailure("cannot open for reading: " + file.string());
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0) {
    throw IoFailure("bad magic in " + file.string());
  }
  uint32_t n = get_u32(is);
  uint32_t T = get_u32(is);
  double radius = get_f64(is);
  if (!is || n > 1u << 20 || T > 1u << 24) {
    throw IoFailure("corrupt header in " + file.string());
  }
  Trajectory traj;
  traj.frames.assign(T + 1, std::vector<Ball>(n));
  double mass = ball_mass_for_radius(radius);
  for (auto& frame : traj.frames) {
    for (uint32_t i = 0; i < n; ++i) {
      Ball& b = frame[i];
      b.id = int(i);
      b.center.x = get_f64(is);
      b.center.y = get_f64(is);
      b.velocity.x = get_f64(is);
      b.velocity.y = get_f64(is);
      b.radius = radius;
      b.mass = mass;
    }
  }
  if (!is) throw IoFailure("truncated frames in " + file.string());
  while (is.peek() != std::char_traits<char>::eof()) {
    CollisionEvent e;
    e.step = int(get_u32(is));
    char kind;
    is.read(&kind, 1);
    e.kind = CollisionKind(uint8_t(kind));
    e.a = int(get_u32(is));
    e.b = int(get_u32(is));
    e.toi_fraction = get_f64(is);
    if (!is) throw IoFailure("truncated event record in " + file.string());
    traj.events.push_back(e);
  }
  return traj;
}

}  // namespace cueplan
