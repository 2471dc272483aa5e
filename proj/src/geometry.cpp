#include "motkit/geometry.hpp"

#include <cmath>

namespace motkit::geom {

bool is_valid_rotation(const std::array<std::array<double, 3>, 3>& r, double tol) {
    // R * R^T == I
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += r[i][k] * r[j][k];
            const double expected = (i == j) ? 1.0 : 0.0;
            if (std::abs(dot - expected) > tol) return false;
        }
    }
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    return std::abs(det - 1.0) <= tol;
}

CameraPose pose_from_position_yaw(const Point3& camera_position, double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    CameraPose pose;
    // Camera axes in world coordinates: right (c,0,-s), down (0,1,0),
    // forward (s,0,c). World->camera rows are these axes.
    pose.rotation = {{{c, 0.0, -s}, {0.0, 1.0, 0.0}, {s, 0.0, c}}};
    const Point3& p = camera_position;
    pose.translation = {-(c * p.x - s * p.z), -p.y, -(s * p.x + c * p.z)};
    return pose;
}

std::optional<Projection> project(const CameraIntrinsics& intr, const CameraPose& pose,
                                  const Point3& point) {
    const Point3 c = pose.to_camera(point);
    if (c.z <= kBehindCameraEpsilon) return std::nullopt;
    Projection result;
    result.point = {intr.fx * c.x / c.z + intr.cx, intr.fy * c.y / c.z + intr.cy};
    result.depth = c.z;
    return result;
}

}  // namespace motkit::geom
