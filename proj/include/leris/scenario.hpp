#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "leris/beamforming.hpp"
#include "leris/geometry.hpp"
#include "leris/localization.hpp"
#include "leris/optical_channel.hpp"

namespace leris
{

enum class LedMode
{
    ceiling_only,
    ceiling_plus_leris,
};

std::string_view to_string(LedMode mode);
LedMode led_mode_from_string(std::string_view name);

struct AngleRange
{
    double lo = -kPi / 2.0;
    double hi = kPi / 2.0;
};

// Room, optical anchors, RIS and link parameters of one simulated environment.
struct Scenario
{
    Vec3 room{10.0, 10.0, 3.0};
    std::vector<Led> ceiling_leds;
    std::vector<Led> leris_leds;
    Vec3 ceiling_boresight{0.0, 0.0, -1.0};
    Vec3 leris_boresight{0.0, 1.0, 0.0};

    RisPanel ris;
    Vec3 ap_position{5.0, 20.0, 1.5};
    double tx_power = 1.0;
    double tx_gain = 1.0;
    double rx_gain = 1.0;
    double reference_distance = 1.0;
    double rf_noise_power_dbm = -130.0;

    PhotoDetector pd;
    NoiseMode optical_noise = NoiseMode::fixed;
    double k_pwe = 100.0;
    double k_log_jitter = 0.0;

    Box ue_position_range{{0.0, 0.5, 0.5}, {10.0, 5.0, 2.5}};
    AngleRange theta_ue_range;
    AngleRange phi_ue_range;
    OrientationConvention convention = OrientationConvention::toward_leris_wall;
    Vec3 fig2_position{4.2, 2.5, 1.5};

    LocalizerOptions localizer;
    Quadrature quadrature;

    double rf_noise_power() const;
    void set_lambertian_order(double order);
    std::vector<LedGroup> led_groups(LedMode mode) const;
    std::vector<const Led*> leds(LedMode mode) const;
    LinkBudget link_budget(const Vec3& ue_position) const;
};

// Tables I and II of the reference setup.
Scenario build_default_scenario();

// Throws std::invalid_argument on an inconsistent scenario.
void validate(const Scenario& scenario);

} // namespace leris
