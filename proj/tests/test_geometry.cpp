#include <doctest.h>

#include <random>

#include "leris/geometry.hpp"

using namespace leris;

namespace
{

void check_close(const Vec3& a, const Vec3& b, double tol)
{
    CHECK(std::abs(a.x - b.x) <= tol);
    CHECK(std::abs(a.y - b.y) <= tol);
    CHECK(std::abs(a.z - b.z) <= tol);
}

} // namespace

TEST_SUITE("geometry")
{
    TEST_CASE("distance examples")
    {
        CHECK(distance({0, 0, 0}, {0, 0, 0}) == 0.0);
        CHECK(distance({0, 0, 0}, {1, 0, 0}) == 1.0);
        CHECK(distance({3.5, 5, 3}, {5, 2.5, 1.5}) == doctest::Approx(3.278719262151).epsilon(1e-12));
    }

    TEST_CASE("distance is symmetric and obeys the triangle inequality")
    {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-10.0, 10.0);
        for (int i = 0; i < 1000; ++i)
        {
            const Vec3 a{u(rng), u(rng), u(rng)};
            const Vec3 b{u(rng), u(rng), u(rng)};
            const Vec3 c{u(rng), u(rng), u(rng)};
            CHECK(distance(a, b) == distance(b, a));
            CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12);
        }
    }

    TEST_CASE("normalized vectors have unit norm")
    {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        for (int i = 0; i < 1000; ++i)
        {
            const Vec3 v{u(rng), u(rng), u(rng)};
            CHECK(std::abs(norm(normalized(v)) - 1.0) <= 1e-12);
        }
        CHECK_THROWS_AS(normalized({0, 0, 0}), GeometryError);
    }

    TEST_CASE("steering angles examples")
    {
        const Vec3 c{5.0, 0.0, 1.5};
        SteeringAngles s = steering_angles_from_estimate({6.0, 1.0, 1.5}, c);
        CHECK(s.theta == doctest::Approx(0.0));
        CHECK(s.phi == doctest::Approx(kPi / 4.0));

        s = steering_angles_from_estimate({5.0, 1.0, 2.5}, c);
        CHECK(s.theta == doctest::Approx(kPi / 4.0));
        CHECK(s.phi == doctest::Approx(kPi / 2.0));

        s = steering_angles_from_estimate({6.0, 2.5, 2.5}, c);
        CHECK(s.theta == doctest::Approx(0.35560258298053327).epsilon(1e-12));
        CHECK(s.phi == doctest::Approx(1.1902899496825317).epsilon(1e-12));

        CHECK_THROWS_AS(steering_angles_from_estimate(c, c), GeometryError);
    }

    TEST_CASE("steering angles reproject to the estimate")
    {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ux(0.0, 10.0), uy(0.5, 5.0), uz(0.5, 2.5);
        const Vec3 c{5.0, 0.0, 1.5};
        for (int i = 0; i < 1000; ++i)
        {
            const Vec3 u{ux(rng), uy(rng), uz(rng)};
            const SteeringAngles s = steering_angles_from_estimate(u, c);
            const Vec3 back = c + direction_from_angles(s) * distance(u, c);
            CHECK(distance(back, u) <= 1e-9);
            CHECK(s.theta >= -kPi / 2.0);
            CHECK(s.theta <= kPi / 2.0);
            CHECK(s.phi > -kPi);
            CHECK(s.phi <= kPi);
        }
    }

    TEST_CASE("canonical frame examples")
    {
        const RigidTransform id = canonical_frame_for_plane({0, 1, 0});
        const Vec3 led{4.1, 0.0, 1.5};
        CHECK(distance(id.apply(led), led) <= 1e-15);
        CHECK(distance(id.rotate({0, 1, 0}), {0, 1, 0}) <= 1e-15);

        const RigidTransform ceiling = canonical_frame_for_plane({0, 0, -1});
        CHECK(distance(ceiling.rotate({0, 0, -1}), {0, 1, 0}) <= 1e-15);
        const Vec3 p{3.5, 5.0, 3.0};
        CHECK(distance(ceiling.invert(ceiling.apply(p)), p) <= 1e-12);
    }

    TEST_CASE("canonical frame round trip on random boresights")
    {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(-10.0, 10.0);
        for (int i = 0; i < 1000; ++i)
        {
            const Vec3 b = normalized({u(rng), u(rng), u(rng)});
            const Vec3 origin{u(rng), u(rng), u(rng)};
            const RigidTransform t = canonical_frame_for_plane(b, origin);
            const Vec3 p{u(rng), u(rng), u(rng)};
            CHECK(distance(t.invert(t.apply(p)), p) <= 1e-12);
            CHECK(distance(t.rotate(b), {0, 1, 0}) <= 1e-12);
            CHECK(std::abs(t.apply(origin).y) <= 1e-12);
        }
    }

    TEST_CASE("UE boresight convention")
    {
        check_close(ue_boresight(kPi / 2.0, 0.0), {0, 0, 1}, 1e-15);
        check_close(ue_boresight(0.0, 0.0), {0, -1, 0}, 1e-15);
        check_close(ue_boresight(0.0, 0.0, OrientationConvention::toward_positive_y), {0, 1, 0}, 1e-15);
        check_close(ue_boresight(0.0, kPi / 2.0), {1, 0, 0}, 1e-15);
        for (double t : {-1.2, 0.3, 0.9})
            for (double p : {-1.0, 0.2, 1.4})
                CHECK(std::abs(norm(ue_boresight(t, p)) - 1.0) <= 1e-12);
        CHECK(orientation_convention_from_string(to_string(OrientationConvention::toward_positive_y)) ==
              OrientationConvention::toward_positive_y);
    }
}
