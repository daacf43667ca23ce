#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leris/localization.hpp"
#include "leris/scenario.hpp"

namespace leris
{

inline constexpr std::uint64_t kDefaultSeed = 20240607;

// Ground-truth UE placement for one trial.
struct UeTruth
{
    Vec3 position;
    double theta_ue = 0.0;
    double phi_ue = 0.0;
};

struct TrialOptions
{
    LedMode led_mode = LedMode::ceiling_plus_leris;
    bool compute_rate = true;
};

struct TrialResult
{
    UeTruth truth;
    Vec3 boresight;
    std::optional<LocalizationEstimate> estimate;
    std::string failure; // empty when localization succeeded
    double delta_d = 0.0; // NaN on failure
    SteeringAngles steer_estimated;
    SteeringAngles steer_true;
    double rate = 0.0; // NaN when not computed
    std::uint64_t seed = 0;

    bool localized() const { return estimate.has_value(); }
};

// Synthesises the per-LED measurements, localizes, configures the RIS from
// the estimate and evaluates the spectral efficiency at the true direction.
// On a localization failure the RIS falls back to random phases.
TrialResult run_trial(const Scenario& scenario, const UeTruth& truth, const TrialOptions& options, Rng& rng);

enum class SweepVariable
{
    theta_ue,
    k_pwe,
    array_size,
    kappa_hw,
    offset,
};

std::string_view to_string(SweepVariable v);

// One series of a sweep. Every value of `values` is one row of the output.
// Settings not swept come from the fields below.
struct SweepSpec
{
    SweepVariable variable = SweepVariable::k_pwe;
    std::vector<double> values; // theta in rad, offset in m, array size as elements per side
    int trials_per_point = 1000;
    LedMode led_mode = LedMode::ceiling_plus_leris;
    double lambertian_order = 2.0;
    int array_side = 40;
    bool hardware_noise = false;
    double kappa_hw = 0.0;
    double offset = 0.0; // m, along +x
    double k_pwe = 100.0;
    bool compute_rate = true;
    std::optional<Vec3> fixed_position;
    std::optional<double> fixed_phi_ue;
};

struct SweepRow
{
    double sweep_value = 0.0; // reported in degrees for theta_ue, cm for offset
    LedMode led_mode = LedMode::ceiling_plus_leris;
    double lambertian_order = 2.0;
    int elements = 0;
    double kappa_hw = 0.0; // +inf for ideal phase shifters
    double mean_delta_d = 0.0;
    double se_delta_d = 0.0;
    double mean_rate = 0.0;
    double se_rate = 0.0;
    int n_trials = 0;
    int n_failures = 0;
};

// Trial seed for (point, trial); independent of scheduling.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point, std::size_t trial);

// Scenario adjusted for one sweep point.
Scenario scenario_for_point(const Scenario& base, const SweepSpec& spec, double value);

// Draws the UE placement of one trial.
UeTruth sample_truth(const Scenario& scenario, const SweepSpec& spec, double value, Rng& rng);

std::vector<SweepRow> run_sweep(const Scenario& scenario, const SweepSpec& spec, std::uint64_t base_seed,
                                int workers = 1);

// Named experiment: one CSV made of the rows of several sweeps.
struct ExperimentTable
{
    std::string file_name;
    std::vector<SweepSpec> series;
};

struct PresetOptions
{
    int trials = 1000;
    std::optional<double> offset_cm; // fig6 only
};

std::vector<std::string> preset_names();

// Throws std::invalid_argument for an unknown name.
std::vector<ExperimentTable> preset(std::string_view name, const PresetOptions& options, const Scenario& scenario);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

} // namespace leris
