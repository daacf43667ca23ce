#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "leris/scenario.hpp"
#include "leris/scenario_file.hpp"

using namespace leris;

TEST_SUITE("scenario")
{
    TEST_CASE("default scenario carries the reference tables")
    {
        const Scenario s = build_default_scenario();
        REQUIRE(s.ceiling_leds.size() == 4);
        REQUIRE(s.leris_leds.size() == 4);
        const double ceiling_x[] = {3.5, 4.5, 5.5, 6.5};
        const double leris_x[] = {4.1, 4.7, 5.3, 5.9};
        for (std::size_t i = 0; i < 4; ++i)
        {
            CHECK(s.ceiling_leds[i].pose.position == Vec3{ceiling_x[i], 5.0, 3.0});
            CHECK(s.leris_leds[i].pose.position == Vec3{leris_x[i], 0.0, 1.5});
            CHECK(s.ceiling_leds[i].optical_power == 0.05);
            CHECK(s.ceiling_leds[i].lambertian_order == 2.0);
        }
        CHECK(s.ris.rows == 40);
        CHECK(s.ris.wavelength == 0.125);
        CHECK(s.ris.element_side == 0.0625);
        CHECK(s.pd.area == 1e-4);
        CHECK(s.pd.refractive_index == 1.5);
        CHECK(rad_to_deg(s.pd.half_fov) == doctest::Approx(75.0));
        CHECK(s.rf_noise_power() == doctest::Approx(1e-16).epsilon(1e-12));
        CHECK_NOTHROW(validate(s));
    }

    TEST_CASE("led groups by mode")
    {
        const Scenario s = build_default_scenario();
        CHECK(s.led_groups(LedMode::ceiling_only).size() == 1);
        CHECK(s.led_groups(LedMode::ceiling_plus_leris).size() == 2);
        CHECK(s.leds(LedMode::ceiling_only).size() == 4);
        CHECK(s.leds(LedMode::ceiling_plus_leris).size() == 8);
        CHECK(led_mode_from_string(to_string(LedMode::ceiling_only)) == LedMode::ceiling_only);
        CHECK_THROWS(led_mode_from_string("walls"));
    }

    TEST_CASE("lambertian order applies to every LED")
    {
        Scenario s = build_default_scenario();
        s.set_lambertian_order(5.0);
        for (const Led* led : s.leds(LedMode::ceiling_plus_leris))
            CHECK(led->lambertian_order == 5.0);
    }

    TEST_CASE("text form round trip")
    {
        Scenario s = build_default_scenario();
        s.k_pwe = 37.5;
        s.ris.rows = 12;
        s.ris.cols = 9;
        s.convention = OrientationConvention::toward_positive_y;
        const std::string text = format_scenario(s);
        const Scenario back = parse_scenario(text);
        CHECK(format_scenario(back) == text);
        CHECK(scenario_hash(back) == scenario_hash(s));
        CHECK(back.k_pwe == 37.5);
        CHECK(back.ris.cols == 9);
        CHECK(back.convention == OrientationConvention::toward_positive_y);
        CHECK(scenario_hash(build_default_scenario()) != scenario_hash(s));
    }

    TEST_CASE("partial files keep defaults")
    {
        const Scenario s = parse_scenario("# comment\n[simulation]\nk_pwe = 150\n\n[leris]\nrows = 10\n");
        CHECK(s.k_pwe == 150.0);
        CHECK(s.ris.rows == 10);
        CHECK(s.ris.cols == 40);
    }

    TEST_CASE("malformed input is rejected with a location")
    {
        const auto message = [](const std::string& text) {
            try
            {
                parse_scenario(text, "cfg");
            }
            catch (const ScenarioFileError& e)
            {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(message("[simulation]\nk_pwe 150\n").find("cfg:2") != std::string::npos);
        CHECK(message("k_pwe = 150\n").find("section") != std::string::npos);
        CHECK(message("[simulation]\nk_pwe = 1\nk_pwe = 2\n").find("duplicate") != std::string::npos);
        CHECK(message("[simulation]\nbogus = 1\n").find("unknown key") != std::string::npos);
        CHECK(message("[simulation]\nk_pwe = abc\n").find("k_pwe") != std::string::npos);
        CHECK(message("[simulation]\nk_pwe = -1\n").find("K_PWE") != std::string::npos);
        CHECK(message("[leds]\nceiling_led_1 = [1, 2]\n") != "");
        CHECK(message("[leds]\nceiling_led_1 = [30, 5, 3]\n").find("outside") != std::string::npos);
    }

    TEST_CASE("file loading")
    {
        const std::filesystem::path dir = std::filesystem::path(LERIS_TEST_TMP) / "scenario";
        std::filesystem::create_directories(dir);
        const auto path = dir / "s.cfg";
        std::ofstream(path) << "[photodetector]\npsi_max_deg = 60\n";
        const Scenario s = load_scenario_file(path);
        CHECK(rad_to_deg(s.pd.half_fov) == doctest::Approx(60.0));
        CHECK_THROWS_AS(load_scenario_file(dir / "missing.cfg"), ScenarioFileError);
    }

    TEST_CASE("link budget")
    {
        const Scenario s = build_default_scenario();
        const LinkBudget b = s.link_budget({5.0, 5.0, 1.5});
        CHECK(b.d1 == doctest::Approx(20.0));
        CHECK(b.d2 == doctest::Approx(5.0));
        CHECK(b.effective_area == doctest::Approx(1.9894367886486917));
    }

    TEST_CASE("validation")
    {
        Scenario s = build_default_scenario();
        s.leris_leds[0].pose.position.y = 0.3;
        CHECK_THROWS_AS(validate(s), std::invalid_argument);
        s = build_default_scenario();
        s.leris_leds[1].channel_id = s.ceiling_leds[0].channel_id;
        CHECK_THROWS_AS(validate(s), std::invalid_argument);
        s = build_default_scenario();
        s.ris.efficiency = 1.5;
        CHECK_THROWS_AS(validate(s), std::invalid_argument);
    }
}
