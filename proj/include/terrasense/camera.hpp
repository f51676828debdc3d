// Synthetic cameras over the flat terrain world.
//
// Two models: a robot-mounted pinhole (first-person training data) and an
// orthographic overhead view (viewpoint-transfer evaluation). Both project
// to / unproject from the z = 0 ground plane and are exact mutual inverses
// there. Pixel coordinates are continuous; pixel (col, row) covers
// [col, col+1) x [row, row+1) with its center at (col+0.5, row+0.5).
#pragma once

#include <optional>
#include <vector>

#include "terrasense/image.hpp"
#include "terrasense/terrain.hpp"

namespace terra {

inline constexpr Rgb kSkyColor{142, 186, 230};

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
};

// Robot-mounted pinhole. The extrinsic stores the camera axes (right,
// down, optical) and center in the robot base frame: base x forward,
// y left, z up.
struct PinholeCamera {
  double fx = 300.0, fy = 300.0, cx = 160.0, cy = 120.0;
  int width = 320, height = 240;
  Vec3 axis_right, axis_down, axis_optical;
  Vec3 center;

  // Mounted height_m above the base origin, optical axis pitched down
  // from horizontal-forward by pitch_down radians.
  static PinholeCamera mounted(double height_m = 0.35,
                               double pitch_down = 20.0 * kPi / 180.0) {
    PinholeCamera c;
    double s = std::sin(pitch_down), co = std::cos(pitch_down);
    c.axis_right = {0.0, -1.0, 0.0};
    c.axis_down = {-s, 0.0, -co};
    c.axis_optical = {co, 0.0, -s};
    c.center = {0.0, 0.0, height_m};
    return c;
  }

  void validate() const {
    if (fx <= 0 || fy <= 0) throw ConfigError("camera: fx, fy must be positive");
    if (width <= 0 || height <= 0)
      throw ConfigError("camera: image size must be positive");
    if (cx < 0 || cx > width || cy < 0 || cy > height)
      throw ConfigError("camera: principal point outside image");
  }
};

// Camera placement in world coordinates for a given robot pose.
struct CameraFrame {
  Vec3 c;                // camera center
  Vec3 ex, ey, ez;       // right / down / optical, world coords
};

inline CameraFrame world_frame(const PinholeCamera& cam, const Pose2& robot) {
  double cs = std::cos(robot.yaw), sn = std::sin(robot.yaw);
  auto to_world = [&](const Vec3& v) {
    return Vec3{cs * v.x - sn * v.y, sn * v.x + cs * v.y, v.z};
  };
  CameraFrame f;
  f.ex = to_world(cam.axis_right);
  f.ey = to_world(cam.axis_down);
  f.ez = to_world(cam.axis_optical);
  Vec3 c = to_world(cam.center);
  f.c = {robot.p.x + c.x, robot.p.y + c.y, c.z};
  return f;
}

struct PixelHit {
  double u = 0, v = 0;   // continuous pixel coordinates
  bool in_frame = false;
};

// Ground point -> pixel. Empty when the point is behind the camera.
inline std::optional<PixelHit> project_ground(const PinholeCamera& cam,
                                              const Pose2& robot,
                                              const Vec2& ground) {
  CameraFrame f = world_frame(cam, robot);
  Vec3 d = Vec3{ground.x, ground.y, 0.0} - f.c;
  double z = d.dot(f.ez);
  if (z <= 1e-9) return std::nullopt;
  PixelHit h;
  h.u = cam.fx * d.dot(f.ex) / z + cam.cx;
  h.v = cam.fy * d.dot(f.ey) / z + cam.cy;
  h.in_frame = h.u >= 0.0 && h.u < cam.width && h.v >= 0.0 && h.v < cam.height;
  return h;
}

// Pixel -> ground point. Empty when the ray does not reach the plane
// (at or above the horizon).
inline std::optional<Vec2> unproject_pixel(const PinholeCamera& cam,
                                           const Pose2& robot, double u,
                                           double v) {
  CameraFrame f = world_frame(cam, robot);
  Vec3 dir = f.ex * ((u - cam.cx) / cam.fx) + f.ey * ((v - cam.cy) / cam.fy) +
             f.ez;
  if (dir.z >= -1e-12) return std::nullopt;
  double t = -f.c.z / dir.z;
  Vec3 g = f.c + dir * t;
  return Vec2{g.x, g.y};
}

// Overhead orthographic camera: a fixed world window, row 0 at the north
// (max-y) edge so renders read like maps.
struct OrthoCamera {
  double px_per_m = 10.0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static OrthoCamera over(const TerrainGrid& g, double px_per_m = 10.0) {
    return {px_per_m, 0.0, 0.0, g.extent_x(), g.extent_y()};
  }
  int width() const {
    return static_cast<int>(std::lround((x1 - x0) * px_per_m));
  }
  int height() const {
    return static_cast<int>(std::lround((y1 - y0) * px_per_m));
  }
  void validate() const {
    if (px_per_m <= 0) throw ConfigError("ortho camera: px_per_m must be positive");
    if (x1 <= x0 || y1 <= y0)
      throw ConfigError("ortho camera: empty world window");
  }

  PixelHit project(const Vec2& p) const {
    PixelHit h;
    h.u = (p.x - x0) * px_per_m;
    h.v = (y1 - p.y) * px_per_m;
    h.in_frame = h.u >= 0.0 && h.u < width() && h.v >= 0.0 && h.v < height();
    return h;
  }
  Vec2 unproject(double u, double v) const {
    return {x0 + u / px_per_m, y1 - v / px_per_m};
  }
};

// Out-of-world ground hits sample the nearest world point, so the terrain
// visually extends to the horizon instead of cutting to a void.
inline Vec2 clamp_into_world(const TerrainGrid& g, Vec2 p) {
  double e = 1e-9;
  p.x = clamp(p.x, 0.0, g.extent_x() - e);
  p.y = clamp(p.y, 0.0, g.extent_y() - e);
  return p;
}

inline Image render_pinhole(const TerrainGrid& grid, const PinholeCamera& cam,
                            const Pose2& robot, std::uint64_t render_seed) {
  cam.validate();
  if (world_frame(cam, robot).c.z <= 0.0)
    throw ConfigError("render_pinhole: camera must sit above the ground");
  Image img(cam.width, cam.height);
  for (int r = 0; r < cam.height; ++r)
    for (int c = 0; c < cam.width; ++c) {
      auto g = unproject_pixel(cam, robot, c + 0.5, r + 0.5);
      img.at(r, c) = g ? ground_color(grid, clamp_into_world(grid, *g),
                                      render_seed)
                       : kSkyColor;
    }
  return img;
}

inline Image render_ortho(const TerrainGrid& grid, const OrthoCamera& cam,
                          std::uint64_t render_seed) {
  cam.validate();
  Image img(cam.width(), cam.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      Vec2 p = cam.unproject(c + 0.5, r + 0.5);
      img.at(r, c) = ground_color(grid, clamp_into_world(grid, p), render_seed);
    }
  return img;
}

// --- traversal tracks and label projection -----------------------------------

// One decision step of a rollout: where the robot really was, where its
// integrated odometry believes it was, and what it estimated there.
struct TrackPoint {
  Pose2 true_pose;
  Pose2 est_pose;
  double mu_hat = 0, rough_hat = 0;  // clamped inference estimates
  long step = 0;
};

// Dead-reckoning in the estimated frame: body-frame displacement from the
// estimator, heading from the (noisy) gyro channel. Anchored at the true
// start pose.
class OdometryIntegrator {
 public:
  explicit OdometryIntegrator(const Pose2& start) : est_(start) {}

  // dx_body: displacement over the last step, in the pre-step body frame.
  const Pose2& advance(Vec2 dx_body, double omega_obs, double dt) {
    est_.p = est_.p + rotate(dx_body, est_.yaw);
    est_.yaw += omega_obs * dt;
    return est_;
  }
  const Pose2& pose() const { return est_; }

 private:
  Pose2 est_;
};

struct PixelLabel {
  double u = 0, v = 0;
  double mu_hat = 0, rough_hat = 0;
  long source_step = 0;  // decision step the estimate was made at
};

// Project every track point whose estimated planar distance from the
// capture pose lies in [min_dist, max_dist] into the capture frame.
// All geometry runs in the ESTIMATED frame — the self-supervision
// contract — so label placement inherits odometry error.
inline std::vector<PixelLabel> project_traversal(
    const std::vector<TrackPoint>& track, std::size_t capture_idx,
    const PinholeCamera& cam, double min_dist = 1.0, double max_dist = 5.0) {
  if (capture_idx >= track.size())
    throw ConfigError("project_traversal: capture index out of range");
  const Pose2& cap = track[capture_idx].est_pose;
  std::vector<PixelLabel> out;
  for (const TrackPoint& tp : track) {
    Vec2 d = tp.est_pose.p - cap.p;
    double dist = d.norm();
    if (dist < min_dist || dist > max_dist) continue;
    Vec2 rel = rotate(d, -cap.yaw);  // capture base frame
    auto hit = project_ground(cam, Pose2{}, rel);
    if (!hit || !hit->in_frame) continue;
    out.push_back({hit->u, hit->v, tp.mu_hat, tp.rough_hat, tp.step});
  }
  return out;
}

struct LabeledImage {
  Image rgb;
  std::vector<PixelLabel> labels;
  Pose2 true_pose, est_pose;  // capture poses
  long step = 0;              // capture decision step within the episode
  int episode = 0;
  double time_s = 0;
};

}  // namespace terra
