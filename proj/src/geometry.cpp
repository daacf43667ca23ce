#include "leris/geometry.hpp"

#include <algorithm>

namespace leris
{

Vec3 normalized(const Vec3& v)
{
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n))
        throw GeometryError("cannot normalize a zero or non-finite vector");
    return v * (1.0 / n);
}

double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

double angle_between(const Vec3& a, const Vec3& b)
{
    const double c = dot(normalized(a), normalized(b));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

SteeringAngles steering_angles_from_estimate(const Vec3& u_hat, const Vec3& ris_center)
{
    const Vec3 d = u_hat - ris_center;
    const double horizontal = std::hypot(d.x, d.y);
    if (horizontal == 0.0 && d.z == 0.0)
        throw GeometryError("estimate coincides with the RIS center");
    SteeringAngles out;
    out.theta = std::atan2(d.z, horizontal);
    out.phi = horizontal == 0.0 ? 0.0 : std::atan2(d.y, d.x);
    return out;
}

Vec3 direction_from_angles(const SteeringAngles& a)
{
    const double c = std::cos(a.theta);
    return {c * std::cos(a.phi), c * std::sin(a.phi), std::sin(a.theta)};
}

RigidTransform::RigidTransform(const std::array<Vec3, 3>& rows, const Vec3& origin)
    : rows_(rows), origin_(origin)
{
}

Vec3 RigidTransform::rotate(const Vec3& v) const
{
    return {dot(rows_[0], v), dot(rows_[1], v), dot(rows_[2], v)};
}

Vec3 RigidTransform::rotate_back(const Vec3& v) const
{
    return rows_[0] * v.x + rows_[1] * v.y + rows_[2] * v.z;
}

Vec3 RigidTransform::apply(const Vec3& world) const { return rotate(world - origin_); }

Vec3 RigidTransform::invert(const Vec3& local) const { return rotate_back(local) + origin_; }

RigidTransform canonical_frame_for_plane(const Vec3& plane_boresight, const Vec3& plane_point,
                                         const Vec3& in_plane_hint)
{
    const Vec3 y_axis = normalized(plane_boresight);
    Vec3 hint = in_plane_hint;
    Vec3 x_axis = hint - y_axis * dot(hint, y_axis);
    if (norm(x_axis) < 1e-9)
    {
        // Hint is along the boresight; fall back to whichever world axis is
        // least aligned with it.
        hint = std::abs(y_axis.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
        x_axis = hint - y_axis * dot(hint, y_axis);
    }
    x_axis = normalized(x_axis);
    const Vec3 z_axis = cross(x_axis, y_axis);
    return RigidTransform({x_axis, y_axis, z_axis}, plane_point);
}

Vec3 ue_boresight(double theta_ue, double phi_ue, OrientationConvention convention)
{
    const double horizontal = std::cos(theta_ue);
    const double toward_y = convention == OrientationConvention::toward_leris_wall ? -1.0 : 1.0;
    return normalized(Vec3{horizontal * std::sin(phi_ue), toward_y * horizontal * std::cos(phi_ue),
                           std::sin(theta_ue)});
}

std::string to_string(OrientationConvention convention)
{
    return convention == OrientationConvention::toward_leris_wall ? "toward_leris_wall"
                                                                  : "toward_positive_y";
}

OrientationConvention orientation_convention_from_string(const std::string& name)
{
    if (name == "toward_leris_wall")
        return OrientationConvention::toward_leris_wall;
    if (name == "toward_positive_y")
        return OrientationConvention::toward_positive_y;
    throw std::invalid_argument("unknown orientation convention '" + name + "'");
}

} // namespace leris
