#include <doctest.h>

#include <sstream>

#include "leris/beamforming.hpp"

using namespace leris;

namespace
{

RisPanel panel_of(int side)
{
    RisPanel p;
    p.rows = side;
    p.cols = side;
    return p;
}

const Vec3 kAp{5.0, 20.0, 1.5};

SteeringAngles grid_argmax(const FarFieldKernel& kernel, double step_deg)
{
    const int n_phi = static_cast<int>(std::lround(360.0 / step_deg));
    std::vector<double> phis(static_cast<std::size_t>(n_phi)), row(phis.size());
    for (int j = 0; j < n_phi; ++j)
        phis[static_cast<std::size_t>(j)] = deg_to_rad(j * step_deg);
    SteeringAngles best;
    double best_power = -1.0;
    for (int i = 0; i <= static_cast<int>(std::lround(90.0 / step_deg)); ++i)
    {
        const double theta = deg_to_rad(i * step_deg);
        kernel.row_power(theta, phis, row);
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] > best_power)
            {
                best_power = row[j];
                best = {theta, phis[j]};
            }
    }
    return best;
}

} // namespace

TEST_SUITE("beamforming")
{
    TEST_CASE("zeta")
    {
        RisPanel p = panel_of(40);
        CHECK(zeta(1, 1, kPi / 2.0, 0.0, p) == doctest::Approx(5.03125).epsilon(1e-14));
        for (int m : {1, 7, 40})
            CHECK(zeta(m, 3, 0.0, 0.7, p) == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(zeta(3, 5, 0.4, kPi / 2.0, p) == doctest::Approx(zeta(30, 5, 0.4, kPi / 2.0, p)).epsilon(1e-12));
    }

    TEST_CASE("omega")
    {
        RisPanel p = panel_of(40);
        const double w = omega(1, kAp, p, {0.0, 0.3});
        CHECK(w == doctest::Approx(320.0 * kPi).epsilon(1e-12));
        CHECK(omega(17, kAp, p, {0.0, 1.1}) == doctest::Approx(w).epsilon(1e-12));
        CHECK(omega(5, Vec3{5.0, 21.0, 1.5}, p, {0.4, 0.3}) > omega(5, kAp, p, {0.4, 0.3}));
    }

    TEST_CASE("single element has unit magnitude")
    {
        RisPanel p = panel_of(1);
        Rng rng(1);
        const PhaseProfile profile = steering_profile({0.5, 0.2}, p, kAp, rng);
        for (double t : {0.0, 0.3, 1.2})
            CHECK(std::abs(far_field(t, 0.9, profile, p, kAp)) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("coherent sum at the steering direction")
    {
        RisPanel p = panel_of(10);
        Rng rng(2);
        const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
        const PhaseProfile profile = steering_profile(steer, p, kAp, rng);
        CHECK(std::abs(far_field(steer.theta, steer.phi, profile, p, kAp)) >= 0.9 * 100.0);
    }

    TEST_CASE("random phases give mean power MN")
    {
        RisPanel p = panel_of(10);
        Rng rng(3);
        double sum = 0.0;
        const int draws = 2000;
        for (int i = 0; i < draws; ++i)
            sum += std::norm(far_field(0.6, 1.3, random_profile(p, rng), p, kAp));
        CHECK(sum / draws == doctest::Approx(100.0).epsilon(0.08));
    }

    TEST_CASE("profile phases are wrapped")
    {
        RisPanel p = panel_of(10);
        Rng rng(4);
        for (double v : steering_profile({0.3, 0.4}, p, kAp, rng).phases)
        {
            CHECK(v >= -kPi);
            CHECK(v < kPi);
        }
    }

    TEST_CASE("effective area and path loss")
    {
        CHECK(effective_area(panel_of(40), 0.125) == doctest::Approx(1.9894367886486917).epsilon(1e-14));
        CHECK(effective_area(panel_of(10), 0.125) == doctest::Approx(0.12433979929054323).epsilon(1e-14));
        RisPanel zero = panel_of(10);
        zero.element_gain = 0.0;
        CHECK(effective_area(zero, 0.125) == 0.0);

        const double c0 = 0.125 * 0.125 / std::pow(4.0 * kPi, 2);
        CHECK(c0 == doctest::Approx(9.894646840072048e-05).epsilon(1e-14));
        CHECK(path_loss(20.0, 5.0, 0.125, 1.0) == doctest::Approx(9.790403608974778e-13).epsilon(1e-12));
    }

    TEST_CASE("spectral efficiency")
    {
        LinkBudget b;
        b.d1 = 20.0;
        b.d2 = 5.0;
        b.effective_area = effective_area(panel_of(40), 0.125);
        CHECK(spectral_efficiency(b, 0.0) == 0.0);
        const double r = spectral_efficiency(b, 1e4);
        b.tx_power *= 2.0;
        CHECK(spectral_efficiency(b, 1e4) - r == doctest::Approx(1.0).epsilon(1e-3));
    }

    TEST_CASE("normalisation integrates to 4 pi")
    {
        for (int side : {1, 10, 25})
        {
            RisPanel p = panel_of(side);
            Rng rng(5);
            const PhaseProfile profile = steering_profile({0.5, 0.8}, p, kAp, rng);
            const Quadrature q{QuadratureRule::midpoint, 0.25};
            const GainPattern pattern(profile, p, kAp, q);
            const double integral = pattern.kernel_scale() * pattern_integral(pattern.kernel(), q);
            CHECK(integral == doctest::Approx(4.0 * kPi).epsilon(0.01));
        }
    }

    TEST_CASE("isotropic single element and efficiency scaling")
    {
        RisPanel p = panel_of(1);
        Rng rng(6);
        const PhaseProfile profile = random_profile(p, rng);
        CHECK(GainPattern(profile, p, kAp).gain(0.4, 1.0) == doctest::Approx(2.0).epsilon(1e-3));
        p.efficiency = 0.5;
        CHECK(GainPattern(profile, p, kAp).gain(0.4, 1.0) == doctest::Approx(1.0).epsilon(1e-3));
    }

    TEST_CASE("gain agrees with a double-resolution integral")
    {
        RisPanel p = panel_of(10);
        Rng rng(7);
        const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
        const PhaseProfile profile = steering_profile(steer, p, kAp, rng);
        const double coarse = GainPattern(profile, p, kAp, {QuadratureRule::midpoint, 0.5}).gain(steer);
        const double fine = GainPattern(profile, p, kAp, {QuadratureRule::midpoint, 0.25}).gain(steer);
        CHECK(std::abs(10.0 * std::log10(coarse / fine)) < 1.0);
        const double gl = GainPattern(profile, p, kAp, {QuadratureRule::gauss_legendre, 0.5}).gain(steer);
        CHECK(gl == doctest::Approx(fine).epsilon(0.01));
    }

    TEST_CASE("quadrature convergence check")
    {
        RisPanel p = panel_of(10);
        Rng rng(8);
        const PhaseProfile profile = steering_profile({0.5, 0.8}, p, kAp, rng);
        CHECK_NOTHROW(GainPattern(profile, p, kAp, {QuadratureRule::midpoint, 0.5, true}));
        RisPanel big = panel_of(40);
        const PhaseProfile sharp = steering_profile({0.5, 0.8}, big, kAp, rng);
        CHECK_THROWS_AS(GainPattern(sharp, big, kAp, {QuadratureRule::midpoint, 20.0, true}), QuadratureError);
    }

    TEST_CASE("steering peak lies at the commanded direction")
    {
        for (int side : {10, 25})
        {
            RisPanel p = panel_of(side);
            Rng rng(9);
            const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
            const FarFieldKernel kernel(steering_profile(steer, p, kAp, rng), p, kAp);
            const SteeringAngles peak = grid_argmax(kernel, 0.5);
            CHECK(std::abs(rad_to_deg(peak.theta - steer.theta)) <= 0.5);
            CHECK(std::abs(rad_to_deg(peak.phi - steer.phi)) <= 0.5);
        }
    }

    TEST_CASE("larger panels are more directive")
    {
        const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
        double previous = 0.0;
        for (int side : {5, 10, 20})
        {
            RisPanel p = panel_of(side);
            Rng rng(10);
            const double g = GainPattern(steering_profile(steer, p, kAp, rng), p, kAp).gain(steer);
            CHECK(g > previous);
            previous = g;
        }
    }

    TEST_CASE("hardware phase noise lowers the gain on average")
    {
        RisPanel p = panel_of(10);
        p.hardware_noise = true;
        const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
        double previous = 0.0;
        for (double kappa : {0.0, 1.0, 10.0})
        {
            p.kappa_hw = kappa;
            Rng rng(11);
            double sum = 0.0;
            for (int i = 0; i < 20; ++i)
                sum += std::norm(far_field(steer.theta, steer.phi, steering_profile(steer, p, kAp, rng), p, kAp));
            CHECK(sum > previous);
            previous = sum;
        }
    }

    TEST_CASE("panel offset costs gain at the commanded direction")
    {
        RisPanel p = panel_of(25);
        const SteeringAngles steer{deg_to_rad(30.0), deg_to_rad(45.0)};
        Rng rng(12);
        const PhaseProfile profile = steering_profile(steer, p, kAp, rng);
        const double aligned = std::norm(far_field(steer.theta, steer.phi, profile, p, kAp));
        p.position_offset = {0.03, 0.0, 0.0};
        const double shifted = std::norm(far_field(steer.theta, steer.phi, profile, p, kAp));
        CHECK(shifted < aligned);
    }

    TEST_CASE("beam pattern csv")
    {
        RisPanel p = panel_of(1);
        Rng rng(13);
        const GainPattern pattern(random_profile(p, rng), p, kAp);
        std::ostringstream os;
        write_beam_pattern_csv(os, pattern, 30.0);
        std::istringstream is(os.str());
        std::string line;
        std::getline(is, line);
        CHECK(line == "phi_deg,theta_deg,F_mag,gain_db");
        int rows = 0;
        while (std::getline(is, line))
            ++rows;
        CHECK(rows == 12 * 4);
    }
}
