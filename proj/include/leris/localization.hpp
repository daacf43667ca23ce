#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leris/geometry.hpp"
#include "leris/optical_channel.hpp"

namespace leris
{

// Exponent applied to the power ratios when forming the squared-distance
// ratios: 2/(m_l+1) for an arbitrarily tilted receiver, 2/(m_l+3) when the PD
// plane is parallel to the LED plane.
enum class ExponentModel
{
    general,
    parallel,
};

std::string_view to_string(ExponentModel model);

// alpha_j estimates d_1^2 / d_{j+1}^2 for the ordered LEDs 1..4.
struct AlphaTriple
{
    double a1 = 1.0;
    double a2 = 1.0;
    double a3 = 1.0;
    ExponentModel model = ExponentModel::parallel;
};

struct XiCoefficients
{
    double xi1 = 0.0;
    double xi2 = 0.0;
    double xi3 = 0.0;
};

enum class Constraint
{
    alpha1_unity,
    alpha3_unity,
    alpha1_eq_alpha3,
    xi2_zero,
    equidistant_pair,
    parallel_plane_degenerate, // UE on the LED plane (y_hat = 0)
    collinear_leds,
    z_denominator_zero,
    negative_radicand,
    insufficient_los,
};

std::string_view to_string(Constraint c);

// In-plane coordinates of an LED in the canonical frame (y = 0).
struct PlanarPoint
{
    double x = 0.0;
    double z = 0.0;
};

using LedQuad = std::array<PlanarPoint, 4>;

// Relative distance of each guarded quantity from its degenerate value.
// Larger is better conditioned.
struct ConstraintMargins
{
    double alpha1_unity = 0.0;
    double alpha3_unity = 0.0;
    double alpha1_eq_alpha3 = 0.0;
    double xi2 = 0.0;
    double equidistance = 0.0; // only meaningful for parallel planes

    double min() const;
};

struct PlacementValidity
{
    bool ok = true;
    std::vector<Constraint> violated;
    ConstraintMargins margins;
};

class LocalizationError : public std::runtime_error
{
  public:
    LocalizationError(const std::string& what, std::vector<Constraint> tags);
    const std::vector<Constraint>& tags() const { return tags_; }

  private:
    std::vector<Constraint> tags_;
};

inline constexpr double kDefaultEpsilon = 1e-6;

// Distance from the RSS of one LED. y_hat is the UE offset from the LED plane
// along the LED boresight; the arrival angle is taken from the measurement.
double estimate_distance(const OpticalMeasurement& measurement, const Led& led,
                         const PhotoDetector& pd, double y_hat);

AlphaTriple compute_alphas(std::span<const double, 4> powers, double lambertian_order,
                           ExponentModel model);

XiCoefficients xi_coefficients(const AlphaTriple& alphas, const LedQuad& leds);

double solve_x(double z_hat, const AlphaTriple& alphas, const LedQuad& leds,
               double epsilon = kDefaultEpsilon);
double solve_y(double x_hat, double z_hat, const AlphaTriple& alphas, const LedQuad& leds,
               double epsilon = kDefaultEpsilon);
double solve_z(const AlphaTriple& alphas, const XiCoefficients& xis, const LedQuad& leds,
               double epsilon = kDefaultEpsilon);

// Full closed-form chain in the canonical frame. Swaps the in-plane axes when
// xi_2 vanishes. Throws LocalizationError for degenerate placements.
struct ClosedFormSolution
{
    Vec3 position;
    XiCoefficients xis;
    bool axis_swapped = false;
};

ClosedFormSolution solve_closed_form(const AlphaTriple& alphas, const LedQuad& leds,
                                     double epsilon = kDefaultEpsilon);

bool is_collinear(const LedQuad& leds, double epsilon = kDefaultEpsilon);

// Checks the alpha/xi denominators; with parallel_planes also rejects sets that
// contain an equidistant pair (alpha ratios are then exact distance ratios).
PlacementValidity validate_placement(const LedQuad& leds, const AlphaTriple& alphas,
                                     bool parallel_planes, double epsilon = kDefaultEpsilon);

// Same constraints expressed through known LED-UE distances (parallel planes).
PlacementValidity validate_placement(const LedQuad& leds, std::span<const double, 4> distances,
                                     double epsilon = kDefaultEpsilon);

// Distance error of the RSS estimator for a LoS/non-LoS ratio k_opt and a
// noise-to-LoS power ratio.
double localization_error_model(double d_true, double k_opt, double noise_to_los,
                                double lambertian_order);

// LEDs sharing one mounting plane (ceiling row, LeRIS face, ...).
struct LedGroup
{
    std::string name;
    Vec3 boresight{0.0, 1.0, 0.0};
    std::vector<Led> leds;
};

struct Box
{
    Vec3 lo;
    Vec3 hi;
    bool contains(const Vec3& p, double tol = 1e-9) const;
};

enum class SolveMode
{
    // Rescales powers by the cosine mismatch implied by the known UE
    // orientation and iterates the parallel-law closed form to a fixed point.
    orientation_compensated,
    // Single pass with the exponent model picked from the tilt (or forced).
    closed_form,
};

std::string_view to_string(SolveMode mode);

struct LocalizerOptions
{
    SolveMode mode = SolveMode::orientation_compensated;
    std::optional<ExponentModel> forced_model;
    double parallel_threshold = deg_to_rad(1.0);
    double epsilon = kDefaultEpsilon;
    int max_iterations = 200;
    double convergence_tolerance = 1e-12; // metres
    std::optional<Box> bounds;
};

struct LocalizationDiagnostics
{
    PlacementValidity validity;
    double tilt = 0.0; // angle between PD normal and the LED-plane normal it faces
    bool collinear_group = false;
    bool axis_swapped = false;
    bool converged = true;
    int iterations = 0;
    double bias_sensitivity = 0.0; // displacement for a 1 % common power error
    double ratio_residual = 0.0;
    std::array<double, 4> distance_estimates{};
    std::vector<std::string> rejected_groups;
};

struct LocalizationEstimate
{
    Vec3 u_hat;
    AlphaTriple alphas;
    XiCoefficients xis;
    std::array<int, 4> leds_used{};
    std::string group;
    RigidTransform frame;
    LocalizationDiagnostics diagnostics;
};

// Estimates the UE position from per-LED measurements. Only the boresight and
// optical parameters of `receiver` are used, never its position.
LocalizationEstimate localize(std::span<const OpticalMeasurement> measurements,
                              std::span<const LedGroup> groups, const PhotoDetector& receiver,
                              const LocalizerOptions& options = {});

} // namespace leris
