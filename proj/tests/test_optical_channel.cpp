#include <doctest.h>

#include <limits>
#include <random>

#include "leris/optical_channel.hpp"

using namespace leris;

namespace
{

PhotoDetector table_pd()
{
    PhotoDetector pd;
    pd.area = 1e-4;
    pd.filter_gain = 1.0;
    pd.refractive_index = 1.5;
    pd.half_fov = deg_to_rad(75.0);
    pd.noise_power = 0.0;
    return pd;
}

// Direct transcription of the LoS expression with explicit cosines.
double reference_los(double m, double area, double gc, double d, double cos_d, double cos_a)
{
    return (m + 1.0) * area / (2.0 * kPi * d * d) * std::pow(cos_d, m) * gc * cos_a;
}

} // namespace

TEST_SUITE("optical_channel")
{
    TEST_CASE("half-power beamwidth")
    {
        CHECK(rad_to_deg(half_power_beamwidth(1.0)) == doctest::Approx(60.0).epsilon(1e-12));
        CHECK(rad_to_deg(half_power_beamwidth(2.0)) == doctest::Approx(45.0).epsilon(1e-12));
        CHECK(half_power_beamwidth(1e9) < 1e-4);
    }

    TEST_CASE("concentrator gain")
    {
        const PhotoDetector pd = table_pd();
        CHECK(concentrator_gain(deg_to_rad(80.0), pd) == 0.0);
        CHECK(concentrator_gain(0.0, pd) == doctest::Approx(2.411542731880104).epsilon(1e-12));
        CHECK(concentrator_gain(pd.half_fov, pd) == doctest::Approx(2.411542731880104).epsilon(1e-12));
        CHECK(concentrator_gain(std::nextafter(pd.half_fov, 2.0), pd) == 0.0);
    }

    TEST_CASE("LoS gain on axis")
    {
        Led led{{{0, 0, 0}, {0, 1, 0}}, 0.05, 1.0, 1};
        PhotoDetector pd = table_pd();
        pd.pose = {{0, 1, 0}, {0, -1, 0}};
        CHECK(los_gain(led, pd) == doctest::Approx(7.676178925121035e-05).epsilon(1e-12));

        pd.pose.position = {0, 2, 0};
        CHECK(los_gain(led, pd) == doctest::Approx(7.676178925121035e-05 / 4.0).epsilon(1e-12));

        pd.pose.boresight = {0, 1, 0};
        CHECK(los_gain(led, pd) == 0.0);
    }

    TEST_CASE("LoS gain off axis matches the explicit formula")
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        const PhotoDetector base = table_pd();
        int evaluated = 0;
        for (int i = 0; i < 500; ++i)
        {
            Led led{{{0, 0, 0}, normalized({u(rng), 3.0, u(rng)})}, 0.05, 2.0, 1};
            PhotoDetector pd = base;
            pd.pose = {{u(rng), 2.0 + u(rng) / 2.0, u(rng)}, normalized({u(rng), -3.0, u(rng)})};
            const Vec3 v = pd.pose.position - led.pose.position;
            const double d = norm(v);
            const double cos_d = dot(led.pose.boresight, v) / d;
            const double cos_a = -dot(pd.pose.boresight, v) / d;
            const double psi_a = std::acos(cos_a);
            const double expected = (cos_d > 0 && cos_a > 0 && psi_a <= pd.half_fov)
                                        ? reference_los(2.0, pd.area, 2.411542731880104, d, cos_d, cos_a)
                                        : 0.0;
            CHECK(los_gain(led, pd) == doctest::Approx(expected).epsilon(1e-12));
            evaluated += expected > 0.0;
        }
        CHECK(evaluated > 100);
    }

    TEST_CASE("parallel facing follows the inverse (m+3) law")
    {
        Led led{{{0, 0, 0}, {0, 1, 0}}, 0.05, 2.0, 1};
        PhotoDetector pd = table_pd();
        double reference = 0.0;
        for (double x = 0.0; x <= 3.0; x += 0.25)
        {
            // Fixed height, so both cosines equal y/d.
            pd.pose = {{x, 2.0, 0.4 * x}, {0, -1, 0}};
            const double d = norm(pd.pose.position);
            const double value = los_gain(led, pd) * std::pow(d, 2.0 + 3.0);
            if (reference == 0.0)
                reference = value;
            CHECK(value == doctest::Approx(reference).epsilon(1e-12));
        }
    }

    TEST_CASE("geometry reciprocity")
    {
        const Pose a{{1, 2, 3}, normalized({0.2, 1, -0.3})};
        const Pose b{{2, 5, 2.5}, normalized({-0.1, -1, 0.4})};
        const LinkGeometry ab = link_geometry(a, b);
        const LinkGeometry ba = link_geometry(b, a);
        CHECK(ab.distance == doctest::Approx(ba.distance));
        CHECK(ab.cos_departure == doctest::Approx(ba.cos_arrival));
        CHECK(ab.cos_arrival == doctest::Approx(ba.cos_departure));
    }

    TEST_CASE("non-LoS gain")
    {
        Led led{{{0, 0, 0}, {0, 1, 0}}, 0.05, 1.0, 1};
        PhotoDetector pd = table_pd();
        pd.pose = {{1, 1, 0}, {-1, 0, 0}};
        CHECK(nlos_gain(led, pd, {}) == 0.0);

        // LED and PD share a point 1 m in front of the patch, so every angle
        // is zero and both path legs are 1 m.
        ReflectorPatch patch{{0, 1, 0}, {0, -1, 0}, 1e-2, 0.8};
        pd.pose = {{0, 0, 0}, {0, 1, 0}};
        const double g = nlos_gain(led, pd, std::vector<ReflectorPatch>{patch});
        CHECK(g == doctest::Approx(6.140943140096829e-07).epsilon(1e-12));

        patch.reflectance = 0.0;
        CHECK(nlos_gain(led, pd, std::vector<ReflectorPatch>{patch}) == 0.0);
    }

    TEST_CASE("non-LoS gain is additive and monotone in reflectance")
    {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(-2.0, 2.0), r01(0.0, 1.0);
        Led led{{{0, 0, 3}, {0, 0, -1}}, 0.05, 2.0, 1};
        PhotoDetector pd = table_pd();
        pd.pose = {{1, 1, 1}, {0, 0, 1}};
        std::vector<ReflectorPatch> a, b;
        for (int i = 0; i < 10; ++i)
        {
            a.push_back({{u(rng), u(rng), 0.0}, {0, 0, 1}, 1e-2, r01(rng)});
            b.push_back({{u(rng), u(rng), 0.0}, {0, 0, 1}, 1e-2, r01(rng)});
        }
        std::vector<ReflectorPatch> ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        CHECK(nlos_gain(led, pd, ab) == doctest::Approx(nlos_gain(led, pd, a) + nlos_gain(led, pd, b)).epsilon(1e-12));

        std::vector<ReflectorPatch> brighter = a;
        brighter[0].reflectance = std::min(1.0, brighter[0].reflectance + 0.1);
        CHECK(nlos_gain(led, pd, brighter) >= nlos_gain(led, pd, a));
    }

    TEST_CASE("measurement synthesis")
    {
        Led led{{{0, 0, 0}, {0, 1, 0}}, 0.05, 2.0, 1};
        PhotoDetector pd = table_pd();
        pd.pose = {{0.3, 2, 0.1}, {0, -1, 0}};
        Rng rng(7);

        OpticalMeasurement m =
            synthesize_measurement(led, pd, KRatioNlos{std::numeric_limits<double>::infinity()}, NoiseMode::fixed, rng);
        CHECK(m.has_los);
        CHECK(m.p_r == m.p_los);
        CHECK(m.p_los == doctest::Approx(los_gain(led, pd) * led.optical_power).epsilon(1e-15));

        m = synthesize_measurement(led, pd, KRatioNlos{100.0}, NoiseMode::fixed, rng);
        CHECK(m.p_nlos == doctest::Approx(m.p_los / 100.0).epsilon(1e-15));
        CHECK(m.p_los / m.p_nlos == doctest::Approx(100.0).epsilon(1e-14));
        CHECK(m.p_r == m.p_los + m.p_nlos + m.p_noise);

        pd.noise_power = 5e-14;
        m = synthesize_measurement(led, pd, KRatioNlos{100.0}, NoiseMode::fixed, rng);
        CHECK(m.p_noise == 5e-14);
        for (int i = 0; i < 100; ++i)
        {
            m = synthesize_measurement(led, pd, KRatioNlos{100.0, 0.3}, NoiseMode::gaussian, rng);
            CHECK(m.p_noise >= 0.0);
            CHECK(m.p_nlos >= 0.0);
            CHECK(m.p_r == m.p_los + m.p_nlos + m.p_noise);
        }

        pd.pose.boresight = normalized({1, -0.1, 0});
        m = synthesize_measurement(led, pd, KRatioNlos{100.0}, NoiseMode::fixed, rng);
        CHECK_FALSE(m.has_los);
        CHECK(m.p_los == 0.0);
    }
}
