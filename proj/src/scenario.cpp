#include "leris/scenario.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace leris
{

std::string_view to_string(LedMode mode)
{
    return mode == LedMode::ceiling_only ? "ceiling_only" : "ceiling_plus_leris";
}

LedMode led_mode_from_string(std::string_view name)
{
    if (name == "ceiling_only")
        return LedMode::ceiling_only;
    if (name == "ceiling_plus_leris")
        return LedMode::ceiling_plus_leris;
    throw std::invalid_argument("unknown LED mode '" + std::string(name) + "'");
}

double Scenario::rf_noise_power() const { return std::pow(10.0, (rf_noise_power_dbm - 30.0) / 10.0); }

void Scenario::set_lambertian_order(double order)
{
    for (Led& led : ceiling_leds)
        led.lambertian_order = order;
    for (Led& led : leris_leds)
        led.lambertian_order = order;
}

std::vector<LedGroup> Scenario::led_groups(LedMode mode) const
{
    std::vector<LedGroup> groups;
    groups.push_back({"ceiling", ceiling_boresight, ceiling_leds});
    if (mode == LedMode::ceiling_plus_leris)
        groups.push_back({"leris", leris_boresight, leris_leds});
    return groups;
}

std::vector<const Led*> Scenario::leds(LedMode mode) const
{
    std::vector<const Led*> out;
    for (const Led& led : ceiling_leds)
        out.push_back(&led);
    if (mode == LedMode::ceiling_plus_leris)
        for (const Led& led : leris_leds)
            out.push_back(&led);
    return out;
}

LinkBudget Scenario::link_budget(const Vec3& ue_position) const
{
    LinkBudget b;
    b.tx_gain = tx_gain;
    b.rx_gain = rx_gain;
    b.tx_power = tx_power;
    b.noise_power = rf_noise_power();
    b.wavelength = ris.wavelength;
    b.reference_distance = reference_distance;
    b.d1 = distance(ap_position, ris.actual_center());
    b.d2 = distance(ue_position, ris.actual_center());
    b.effective_area = effective_area(ris, ris.wavelength);
    return b;
}

Scenario build_default_scenario()
{
    Scenario s;
    const double ceiling_x[] = {3.5, 4.5, 5.5, 6.5};
    const double leris_x[] = {4.1, 4.7, 5.3, 5.9};
    for (int i = 0; i < 4; ++i)
    {
        s.ceiling_leds.push_back({{{ceiling_x[i], 5.0, 3.0}, s.ceiling_boresight}, 0.05, 2.0, i + 1});
        s.leris_leds.push_back({{{leris_x[i], 0.0, 1.5}, s.leris_boresight}, 0.05, 2.0, i + 5});
    }
    s.ris.wavelength = 0.125;
    s.ris.element_side = s.ris.wavelength / 2.0;
    s.ris.center = {5.0, 0.0, 1.5};
    s.ris.rows = 40;
    s.ris.cols = 40;
    s.pd.area = 1e-4;
    s.pd.filter_gain = 1.0;
    s.pd.refractive_index = 1.5;
    s.pd.half_fov = deg_to_rad(75.0);
    s.pd.noise_power = 5e-14;
    s.localizer.bounds = s.ue_position_range;
    return s;
}

void validate(const Scenario& s)
{
    const auto inside = [&](const Vec3& p) {
        return p.x >= 0.0 && p.x <= s.room.x && p.y >= 0.0 && p.y <= s.room.y && p.z >= 0.0 && p.z <= s.room.z;
    };
    std::set<int> channels;
    const auto check_led = [&](const Led& led, const char* kind) {
        if (!inside(led.pose.position))
            throw std::invalid_argument(std::string(kind) + " LED outside the room");
        if (!(led.optical_power > 0.0))
            throw std::invalid_argument("LED optical power must be positive");
        if (!(led.lambertian_order >= 1.0))
            throw std::invalid_argument("Lambertian order must be >= 1");
        if (!channels.insert(led.channel_id).second)
            throw std::invalid_argument("duplicate LED channel id " + std::to_string(led.channel_id));
    };
    for (const Led& led : s.ceiling_leds)
        check_led(led, "ceiling");
    for (const Led& led : s.leris_leds)
    {
        check_led(led, "LeRIS");
        if (std::abs(led.pose.position.y - s.ris.center.y) > 1e-9)
            throw std::invalid_argument("LeRIS LEDs must lie on the RIS plane");
    }
    if (s.ris.rows < 1 || s.ris.cols < 1)
        throw std::invalid_argument("RIS needs at least one element");
    if (!(s.ris.element_side > 0.0) || !(s.ris.wavelength > 0.0))
        throw std::invalid_argument("RIS element side and wavelength must be positive");
    if (!(s.ris.efficiency > 0.0 && s.ris.efficiency <= 1.0))
        throw std::invalid_argument("RIS efficiency must be in (0, 1]");
    if (!(s.ris.kappa_hw >= 0.0))
        throw std::invalid_argument("kappa_hw must be >= 0");
    if (!(s.pd.area > 0.0) || !(s.pd.filter_gain > 0.0 && s.pd.filter_gain <= 1.0) ||
        !(s.pd.refractive_index >= 1.0) || !(s.pd.half_fov > 0.0 && s.pd.half_fov <= kPi / 2.0))
        throw std::invalid_argument("invalid photodetector parameters");
    if (!(s.k_pwe > 0.0))
        throw std::invalid_argument("K_PWE must be positive");
    const Box& r = s.ue_position_range;
    if (r.lo.x > r.hi.x || r.lo.y > r.hi.y || r.lo.z > r.hi.z)
        throw std::invalid_argument("empty UE position range");
    if (s.theta_ue_range.lo > s.theta_ue_range.hi || s.phi_ue_range.lo > s.phi_ue_range.hi)
        throw std::invalid_argument("empty UE angle range");
}

} // namespace leris
