#include <doctest.h>

#include <limits>
#include <set>
#include <sstream>

#include "leris/montecarlo.hpp"

using namespace leris;

namespace
{

SweepSpec small_spec()
{
    SweepSpec spec;
    spec.variable = SweepVariable::k_pwe;
    spec.values = {10.0, 150.0};
    spec.trials_per_point = 6;
    spec.array_side = 5;
    return spec;
}

std::string csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    write_sweep_csv(os, rows);
    return os.str();
}

} // namespace

TEST_SUITE("montecarlo")
{
    TEST_CASE("trial seeds are distinct and reproducible")
    {
        std::set<std::uint64_t> seen;
        for (std::size_t p = 0; p < 10; ++p)
            for (std::size_t t = 0; t < 100; ++t)
                seen.insert(trial_seed(7, p, t));
        CHECK(seen.size() == 1000);
        CHECK(trial_seed(7, 3, 4) == trial_seed(7, 3, 4));
        CHECK(trial_seed(7, 3, 4) != trial_seed(8, 3, 4));
    }

    TEST_CASE("sweeps do not depend on the worker count")
    {
        const Scenario s = build_default_scenario();
        const SweepSpec spec = small_spec();
        const std::string one = csv(run_sweep(s, spec, 7, 1));
        CHECK(csv(run_sweep(s, spec, 7, 3)) == one);
        CHECK(csv(run_sweep(s, spec, 8, 1)) != one);
    }

    TEST_CASE("one row per sweep value")
    {
        const Scenario s = build_default_scenario();
        SweepSpec spec = small_spec();
        spec.values = {50.0};
        const auto rows = run_sweep(s, spec, 1, 1);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].sweep_value == 50.0);
        CHECK(rows[0].n_trials == 6);
        CHECK(rows[0].elements == 25);
        CHECK(std::isinf(rows[0].kappa_hw));
        const std::string text = csv(rows);
        CHECK(text.rfind("sweep_value,led_mode,m_l,N,kappa_hw,", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);

        spec.trials_per_point = 0;
        CHECK_THROWS(run_sweep(s, spec, 1, 1));
    }

    TEST_CASE("sweep variables are reported in their units")
    {
        const Scenario s = build_default_scenario();
        SweepSpec spec = small_spec();
        spec.trials_per_point = 1;
        spec.compute_rate = false;
        spec.variable = SweepVariable::theta_ue;
        spec.values = {deg_to_rad(30.0)};
        CHECK(run_sweep(s, spec, 1, 1)[0].sweep_value == doctest::Approx(30.0));
        spec.variable = SweepVariable::offset;
        spec.values = {0.03};
        CHECK(run_sweep(s, spec, 1, 1)[0].sweep_value == doctest::Approx(3.0));
    }

    TEST_CASE("failed localization falls back to random phases")
    {
        Scenario s = build_default_scenario();
        s.ris.rows = s.ris.cols = 5;
        // Facing the floor: no LED is received.
        const UeTruth truth{{5.0, 3.0, 1.5}, deg_to_rad(-90.0), 0.0};
        Rng rng(3);
        const TrialResult r = run_trial(s, truth, {}, rng);
        CHECK_FALSE(r.localized());
        CHECK_FALSE(r.failure.empty());
        CHECK(std::isnan(r.delta_d));
        CHECK(r.rate > 0.0);
    }

    TEST_CASE("ideal channel steers at the true direction")
    {
        Scenario s = build_default_scenario();
        s.k_pwe = std::numeric_limits<double>::infinity();
        s.pd.noise_power = 0.0;
        s.ris.rows = s.ris.cols = 10;
        const UeTruth truth{{3.7, 2.6, 1.2}, deg_to_rad(60.0), deg_to_rad(10.0)};
        Rng rng(4);
        const TrialResult r = run_trial(s, truth, {}, rng);
        REQUIRE(r.localized());
        CHECK(r.delta_d < 1e-6);
        CHECK(r.steer_estimated.theta == doctest::Approx(r.steer_true.theta).epsilon(1e-6));
        CHECK(r.steer_estimated.phi == doctest::Approx(r.steer_true.phi).epsilon(1e-6));

        Rng rng2(4);
        Scenario diffuse = s;
        diffuse.ris.hardware_noise = true;
        diffuse.ris.kappa_hw = 0.0;
        CHECK(run_trial(diffuse, truth, {}, rng2).rate < r.rate);
    }

    TEST_CASE("rate skipped on request")
    {
        const Scenario s = build_default_scenario();
        Rng rng(5);
        const TrialResult r = run_trial(s, {{4.2, 2.5, 1.5}, deg_to_rad(60.0), 0.0}, {LedMode::ceiling_only, false}, rng);
        CHECK(std::isnan(r.rate));
    }

    TEST_CASE("presets")
    {
        const Scenario s = build_default_scenario();
        for (const std::string& name : preset_names())
        {
            const auto tables = preset(name, {3, std::nullopt}, s);
            CHECK_FALSE(tables.empty());
            for (const auto& t : tables)
                for (const auto& series : t.series)
                {
                    CHECK(series.trials_per_point == 3);
                    CHECK_FALSE(series.values.empty());
                }
        }
        CHECK(preset("fig6", {3, 2.0}, s).size() == 1);
        CHECK(preset("fig6", {3, 2.0}, s)[0].file_name == "fig6_offset_2cm.csv");
        CHECK_THROWS_AS(preset("fig9", {}, s), std::invalid_argument);
    }
}
