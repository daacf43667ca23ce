#include "leris/optical_channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leris
{

double half_power_beamwidth(double lambertian_order)
{
    if (!(lambertian_order >= 1.0))
        throw std::invalid_argument("Lambertian order must be >= 1");
    if (std::isinf(lambertian_order))
        return 0.0;
    return std::acos(std::pow(2.0, -1.0 / lambertian_order));
}

double concentrator_gain(double arrival_angle, const PhotoDetector& pd)
{
    if (arrival_angle < 0.0 || arrival_angle > pd.half_fov)
        return 0.0;
    const double s = std::sin(pd.half_fov);
    return pd.refractive_index * pd.refractive_index / (s * s);
}

LinkGeometry link_geometry(const Pose& transmitter, const Pose& receiver)
{
    const Vec3 v = receiver.position - transmitter.position;
    LinkGeometry g;
    g.distance = norm(v);
    if (g.distance == 0.0)
        throw GeometryError("transmitter and receiver are coincident");
    g.cos_departure = dot(transmitter.boresight, v) / g.distance;
    g.cos_arrival = -dot(receiver.boresight, v) / g.distance;
    return g;
}

namespace
{

double arrival_angle_of(double cos_arrival) { return std::acos(std::clamp(cos_arrival, -1.0, 1.0)); }

// Lambertian factor (m+1)/(2 pi) cos^m(psi_d), shared by LoS and reflections.
double lambertian_intensity(double order, double cos_departure)
{
    return (order + 1.0) / (2.0 * kPi) * std::pow(cos_departure, order);
}

} // namespace

double los_gain(const Led& led, const PhotoDetector& pd)
{
    const LinkGeometry g = link_geometry(led.pose, pd.pose);
    if (g.cos_departure <= 0.0 || g.cos_arrival <= 0.0)
        return 0.0;
    const double gc = concentrator_gain(arrival_angle_of(g.cos_arrival), pd);
    if (gc == 0.0)
        return 0.0;
    return lambertian_intensity(led.lambertian_order, g.cos_departure) * pd.area * pd.filter_gain /
           (g.distance * g.distance) * gc * g.cos_arrival;
}

double nlos_gain(const Led& led, const PhotoDetector& pd, std::span<const ReflectorPatch> patches)
{
    double total = 0.0;
    for (const auto& patch : patches)
    {
        const Pose surface{patch.center, normalized(patch.normal)};
        // LED -> patch: departure at the LED, incidence on the patch.
        const Vec3 to_patch = patch.center - led.pose.position;
        const double d1 = norm(to_patch);
        const Vec3 to_pd = pd.pose.position - patch.center;
        const double d2 = norm(to_pd);
        if (d1 == 0.0 || d2 == 0.0)
            continue;
        const double cos_dep = dot(led.pose.boresight, to_patch) / d1;
        const double cos_inc = -dot(surface.boresight, to_patch) / d1;
        const double cos_exit = dot(surface.boresight, to_pd) / d2;
        const double cos_arr = -dot(pd.pose.boresight, to_pd) / d2;
        if (cos_dep <= 0.0 || cos_inc <= 0.0 || cos_exit <= 0.0 || cos_arr <= 0.0)
            continue;
        const double gc = concentrator_gain(arrival_angle_of(cos_arr), pd);
        if (gc == 0.0)
            continue;
        total += patch.reflectance * lambertian_intensity(led.lambertian_order, cos_dep) * pd.area *
                 pd.filter_gain / (d1 * d1 * d2 * d2) * cos_inc * cos_exit * gc * cos_arr * patch.area;
    }
    return total;
}

OpticalMeasurement synthesize_measurement(const Led& led, const PhotoDetector& pd,
                                          const NlosMode& nlos, NoiseMode noise, Rng& rng)
{
    OpticalMeasurement m;
    m.led_channel_id = led.channel_id;
    const LinkGeometry g = link_geometry(led.pose, pd.pose);
    m.departure_angle = std::acos(std::clamp(g.cos_departure, -1.0, 1.0));
    m.arrival_angle = arrival_angle_of(g.cos_arrival);

    const double h_los = los_gain(led, pd);
    if (h_los == 0.0)
        return m;
    m.has_los = true;
    m.p_los = h_los * led.optical_power;

    if (const auto* patches = std::get_if<PatchNlos>(&nlos))
    {
        m.p_nlos = nlos_gain(led, pd, patches->patches) * led.optical_power;
    }
    else
    {
        const auto& ratio = std::get<KRatioNlos>(nlos);
        double k = ratio.k_pwe;
        if (ratio.log_jitter_sigma > 0.0)
        {
            std::normal_distribution<double> jitter(0.0, ratio.log_jitter_sigma);
            k *= std::exp(jitter(rng));
        }
        m.p_nlos = std::isinf(k) ? 0.0 : m.p_los / k;
    }

    if (noise == NoiseMode::fixed)
    {
        m.p_noise = pd.noise_power;
    }
    else if (pd.noise_power > 0.0)
    {
        std::normal_distribution<double> gauss(0.0, pd.noise_power);
        m.p_noise = std::abs(gauss(rng));
    }
    m.p_r = m.p_los + m.p_nlos + m.p_noise;
    return m;
}

} // namespace leris
