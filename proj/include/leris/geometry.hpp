#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace leris
{

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Thrown for degenerate geometric input (coincident points, zero vectors).
class GeometryError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3& operator+=(const Vec3& o)
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o)
    {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s)
    {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

// Throws GeometryError for the zero vector.
Vec3 normalized(const Vec3& v);

double distance(const Vec3& a, const Vec3& b);

// Angle between two directions, in [0, pi].
double angle_between(const Vec3& a, const Vec3& b);

// Position plus unit boresight (LED emission axis, PD normal or RIS normal).
struct Pose
{
    Vec3 position;
    Vec3 boresight{0.0, 1.0, 0.0};
};

// Elevation theta in [-pi/2, pi/2] above the xy plane, azimuth phi in (-pi, pi]
// measured from +x toward +y.
struct SteeringAngles
{
    double theta = 0.0;
    double phi = 0.0;
};

// Elevation/azimuth of u_hat seen from the RIS center. The azimuth uses atan2
// so the quadrant is unambiguous when u_hat lies behind the center in x.
SteeringAngles steering_angles_from_estimate(const Vec3& u_hat, const Vec3& ris_center);

// Unit vector for an elevation/azimuth pair; inverse of the above up to range.
Vec3 direction_from_angles(const SteeringAngles& angles);

// Orthonormal rotation plus translation. `apply` maps world coordinates into
// the frame, `invert` maps them back.
class RigidTransform
{
  public:
    RigidTransform() = default;
    RigidTransform(const std::array<Vec3, 3>& rows, const Vec3& origin);

    Vec3 apply(const Vec3& world) const;
    Vec3 invert(const Vec3& local) const;
    Vec3 rotate(const Vec3& world_dir) const;
    Vec3 rotate_back(const Vec3& local_dir) const;

    const std::array<Vec3, 3>& rows() const { return rows_; }
    const Vec3& origin() const { return origin_; }

  private:
    std::array<Vec3, 3> rows_{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    Vec3 origin_;
};

// Frame in which an LED plane with the given boresight lies on y = 0 and emits
// toward +y, so the planar closed-form solver applies. The local x axis
// follows `in_plane_hint` projected onto the plane (world +x by default, or
// world +z when the boresight is along x). `plane_point` becomes the origin.
RigidTransform canonical_frame_for_plane(const Vec3& plane_boresight,
                                         const Vec3& plane_point = {},
                                         const Vec3& in_plane_hint = {1.0, 0.0, 0.0});

// Mapping from the UE elevation/azimuth angles to the PD normal.
//
// toward_leris_wall: theta = 90 deg faces +z (parallel to the ceiling LED
// plane), theta = 0 deg faces -y (parallel to the LeRIS at y = 0), phi rotates
// about z. toward_positive_y mirrors the horizontal component.
enum class OrientationConvention
{
    toward_leris_wall,
    toward_positive_y,
};

Vec3 ue_boresight(double theta_ue, double phi_ue,
                  OrientationConvention convention = OrientationConvention::toward_leris_wall);

std::string to_string(OrientationConvention convention);
OrientationConvention orientation_convention_from_string(const std::string& name);

} // namespace leris
