#pragma once

#include <array>
#include <cmath>
#include <optional>

namespace motkit::geom {

// Camera convention: right handed, z forward, x right, y down. The pose
// rotation maps world coordinates into the camera frame (KITTI-style), so
// ingested KITTI extrinsics need no axis flip.

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

struct Point2 {
    double u = 0.0;
    double v = 0.0;

    Point2 operator+(const Point2& o) const { return {u + o.u, v + o.v}; }
    Point2 operator-(const Point2& o) const { return {u - o.u, v - o.v}; }
    Point2 operator*(double s) const { return {u * s, v * s}; }
};

inline double norm(const Point2& p) { return std::hypot(p.u, p.v); }
inline double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

struct CameraIntrinsics {
    double fx = 1.0;  // focal length x, pixels
    double fy = 1.0;  // focal length y, pixels
    double cx = 0.0;  // principal point x, pixels
    double cy = 0.0;  // principal point y, pixels
};

struct CameraPose {
    // Row-major world->camera rotation, plus translation in meters.
    std::array<std::array<double, 3>, 3> rotation = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Point3 translation;

    Point3 to_camera(const Point3& p) const {
        const auto& r = rotation;
        return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + translation.x,
                r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + translation.y,
                r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + translation.z};
    }

    // Inverse transform, valid because the rotation is orthonormal.
    Point3 to_world(const Point3& c) const {
        const auto& r = rotation;
        const Point3 d = c - translation;
        return {r[0][0] * d.x + r[1][0] * d.y + r[2][0] * d.z,
                r[0][1] * d.x + r[1][1] * d.y + r[2][1] * d.z,
                r[0][2] * d.x + r[1][2] * d.y + r[2][2] * d.z};
    }
};

// Orthonormality check with det +1, tolerance 1e-6.
bool is_valid_rotation(const std::array<std::array<double, 3>, 3>& r, double tol = 1e-6);

// World->camera rotation for a camera whose heading is yaw radians about the
// world y (down) axis; yaw 0 looks along +z.
CameraPose pose_from_position_yaw(const Point3& camera_position, double yaw);

struct Projection {
    Point2 point;
    double depth = 0.0;  // camera-frame z, meters
};

inline constexpr double kBehindCameraEpsilon = 1e-9;

// Pinhole projection. Returns nullopt when the point lies at or behind the
// camera plane (depth <= 1e-9); the caller decides whether that terminates a
// propagated track. No near-plane clamping is performed.
std::optional<Projection> project(const CameraIntrinsics& intr, const CameraPose& pose,
                                  const Point3& point);

// Per-frame velocity from the two preceding world positions, meters/frame.
inline Point3 world_velocity(const Point3& p_prev, const Point3& p_prevprev) {
    return p_prev - p_prevprev;
}

// Linear extrapolation: p_last + steps * v. steps >= 1.
inline Point3 propagate_constant_velocity(const Point3& p_last, const Point3& v, int steps) {
    return p_last + v * static_cast<double>(steps);
}

inline Point2 propagate_constant_velocity(const Point2& p_last, const Point2& v, int steps) {
    return p_last + v * static_cast<double>(steps);
}

}  // namespace motkit::geom
