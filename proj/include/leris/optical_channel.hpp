#pragma once

#include <random>
#include <span>
#include <variant>
#include <vector>

#include "leris/geometry.hpp"

namespace leris
{

using Rng = std::mt19937_64;

// Infrared LED. Each LED transmits on its own frequency, identified by
// channel_id, so the receiver separates them ideally.
struct Led
{
    Pose pose;
    double optical_power = 0.05; // W
    double lambertian_order = 2.0;
    int channel_id = 0;
};

struct PhotoDetector
{
    Pose pose;
    double area = 1e-4; // m^2
    double filter_gain = 1.0;
    double refractive_index = 1.5;
    double half_fov = deg_to_rad(75.0);
    double noise_power = 5e-14; // same unit as received optical power
};

// Small Lambertian reflecting element for first-order non-LoS paths.
struct ReflectorPatch
{
    Vec3 center;
    Vec3 normal{0.0, 0.0, 1.0};
    double area = 1e-2;
    double reflectance = 0.8;
};

struct OpticalMeasurement
{
    int led_channel_id = 0;
    double p_los = 0.0;
    double p_nlos = 0.0;
    double p_noise = 0.0;
    double p_r = 0.0;
    double arrival_angle = 0.0;   // psi_a at the PD
    double departure_angle = 0.0; // psi_d at the LED
    bool has_los = false;
};

// Half-power semi-angle of a Lambertian emitter, acos(2^(-1/m_l)).
double half_power_beamwidth(double lambertian_order);

// n_c^2 / sin^2(half_fov) inside the field of view (boundary inclusive), 0 outside.
double concentrator_gain(double arrival_angle, const PhotoDetector& pd);

// Departure/arrival geometry of one transmitter-receiver pair.
struct LinkGeometry
{
    double distance = 0.0;
    double cos_departure = 0.0;
    double cos_arrival = 0.0;
};

LinkGeometry link_geometry(const Pose& transmitter, const Pose& receiver);

// LoS DC gain. Zero when either cosine is non-positive or the arrival angle is
// outside the FoV.
double los_gain(const Led& led, const PhotoDetector& pd);

// First-order reflection gain summed over patches.
double nlos_gain(const Led& led, const PhotoDetector& pd, std::span<const ReflectorPatch> patches);

// Non-LoS synthesis: explicit reflectors, or a LoS-to-non-LoS power ratio K
// (optionally log-normal jittered with unit median; sigma in natural-log units).
struct PatchNlos
{
    std::vector<ReflectorPatch> patches;
};

struct KRatioNlos
{
    double k_pwe = 100.0;
    double log_jitter_sigma = 0.0;
};

using NlosMode = std::variant<PatchNlos, KRatioNlos>;

enum class NoiseMode
{
    fixed,    // adds noise_power verbatim
    gaussian, // adds |N(0, noise_power)|
};

OpticalMeasurement synthesize_measurement(const Led& led, const PhotoDetector& pd,
                                          const NlosMode& nlos, NoiseMode noise, Rng& rng);

} // namespace leris
