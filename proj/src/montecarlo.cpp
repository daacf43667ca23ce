#include "leris/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace leris
{

namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double pairwise_sum(std::span<const double> v)
{
    if (v.size() <= 8)
    {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanSe
{
    double mean = kNaN;
    double se = kNaN;
};

MeanSe mean_se(const std::vector<double>& v)
{
    MeanSe out;
    if (v.empty())
        return out;
    const double n = static_cast<double>(v.size());
    out.mean = pairwise_sum(v) / n;
    if (v.size() < 2)
    {
        out.se = 0.0;
        return out;
    }
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
    out.se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    return out;
}

double uniform(Rng& rng, double lo, double hi)
{
    if (lo == hi)
        return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct TrialSummary
{
    bool localized = false;
    double delta_d = kNaN;
    double rate = kNaN;
};

} // namespace

std::string_view to_string(SweepVariable v)
{
    switch (v)
    {
    case SweepVariable::theta_ue:
        return "theta_ue";
    case SweepVariable::k_pwe:
        return "k_pwe";
    case SweepVariable::array_size:
        return "array_size";
    case SweepVariable::kappa_hw:
        return "kappa_hw";
    case SweepVariable::offset:
        return "offset";
    }
    return "unknown";
}

TrialResult run_trial(const Scenario& scenario, const UeTruth& truth, const TrialOptions& options, Rng& rng)
{
    TrialResult r;
    r.truth = truth;
    r.boresight = ue_boresight(truth.theta_ue, truth.phi_ue, scenario.convention);

    PhotoDetector pd = scenario.pd;
    pd.pose = {truth.position, r.boresight};
    const NlosMode nlos = KRatioNlos{scenario.k_pwe, scenario.k_log_jitter};
    std::vector<OpticalMeasurement> measurements;
    for (const Led* led : scenario.leds(options.led_mode))
        measurements.push_back(synthesize_measurement(*led, pd, nlos, scenario.optical_noise, rng));

    const std::vector<LedGroup> groups = scenario.led_groups(options.led_mode);
    try
    {
        r.estimate = localize(measurements, groups, pd, scenario.localizer);
        r.delta_d = distance(r.estimate->u_hat, truth.position);
    }
    catch (const LocalizationError& e)
    {
        r.failure = e.what();
        r.delta_d = kNaN;
    }

    if (!options.compute_rate)
    {
        r.rate = kNaN;
        return r;
    }

    const RisPanel& panel = scenario.ris;
    r.steer_true = steering_angles_from_estimate(truth.position, panel.actual_center());
    PhaseProfile profile;
    bool steered = false;
    if (r.estimate)
    {
        try
        {
            r.steer_estimated = steering_angles_from_estimate(r.estimate->u_hat, panel.center);
            profile = steering_profile(r.steer_estimated, panel, scenario.ap_position, rng);
            steered = true;
        }
        catch (const GeometryError&)
        {
        }
    }
    if (!steered)
        profile = random_profile(panel, rng);

    const GainPattern pattern(profile, panel, scenario.ap_position, scenario.quadrature);
    r.rate = spectral_efficiency(scenario.link_budget(truth.position), pattern.gain(r.steer_true));
    return r;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point, std::size_t trial)
{
    return base_seed ^ splitmix64(splitmix64(static_cast<std::uint64_t>(point)) ^ static_cast<std::uint64_t>(trial));
}

Scenario scenario_for_point(const Scenario& base, const SweepSpec& spec, double value)
{
    Scenario s = base;
    s.set_lambertian_order(spec.lambertian_order);
    s.ris.rows = spec.array_side;
    s.ris.cols = spec.array_side;
    s.ris.hardware_noise = spec.hardware_noise;
    s.ris.kappa_hw = spec.kappa_hw;
    s.ris.position_offset = {spec.offset, 0.0, 0.0};
    s.k_pwe = spec.k_pwe;
    switch (spec.variable)
    {
    case SweepVariable::theta_ue:
        break;
    case SweepVariable::k_pwe:
        s.k_pwe = value;
        break;
    case SweepVariable::array_size:
        s.ris.rows = static_cast<int>(value);
        s.ris.cols = static_cast<int>(value);
        break;
    case SweepVariable::kappa_hw:
        s.ris.hardware_noise = true;
        s.ris.kappa_hw = value;
        break;
    case SweepVariable::offset:
        s.ris.position_offset = {value, 0.0, 0.0};
        break;
    }
    return s;
}

UeTruth sample_truth(const Scenario& s, const SweepSpec& spec, double value, Rng& rng)
{
    UeTruth t;
    const Box& b = s.ue_position_range;
    if (spec.fixed_position)
        t.position = *spec.fixed_position;
    else
        t.position = {uniform(rng, b.lo.x, b.hi.x), uniform(rng, b.lo.y, b.hi.y), uniform(rng, b.lo.z, b.hi.z)};
    t.theta_ue = spec.variable == SweepVariable::theta_ue ? value
                                                          : uniform(rng, s.theta_ue_range.lo, s.theta_ue_range.hi);
    t.phi_ue = spec.fixed_phi_ue ? *spec.fixed_phi_ue : uniform(rng, s.phi_ue_range.lo, s.phi_ue_range.hi);
    return t;
}

std::vector<SweepRow> run_sweep(const Scenario& scenario, const SweepSpec& spec, std::uint64_t base_seed,
                                int workers)
{
    if (spec.trials_per_point < 1)
        throw std::invalid_argument("trials_per_point must be >= 1");
    const std::size_t points = spec.values.size();
    const std::size_t trials = static_cast<std::size_t>(spec.trials_per_point);
    std::vector<Scenario> scenarios;
    for (double v : spec.values)
    {
        scenarios.push_back(scenario_for_point(scenario, spec, v));
        validate(scenarios.back());
    }

    const TrialOptions options{spec.led_mode, spec.compute_rate};
    std::vector<TrialSummary> results(points * trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto work = [&] {
        for (;;)
        {
            const std::size_t i = next.fetch_add(1);
            if (i >= results.size())
                return;
            const std::size_t p = i / trials;
            const std::size_t t = i % trials;
            try
            {
                Rng rng(trial_seed(base_seed, p, t));
                const UeTruth truth = sample_truth(scenarios[p], spec, spec.values[p], rng);
                const TrialResult r = run_trial(scenarios[p], truth, options, rng);
                results[i] = {r.localized(), r.delta_d, r.rate};
            }
            catch (...)
            {
                const std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next.store(results.size());
                return;
            }
        }
    };
    const int n_workers = std::max(1, workers);
    if (n_workers == 1)
    {
        work();
    }
    else
    {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w)
            pool.emplace_back(work);
        for (auto& th : pool)
            th.join();
    }
    if (error)
        std::rethrow_exception(error);

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < points; ++p)
    {
        const Scenario& s = scenarios[p];
        std::vector<double> dd;
        std::vector<double> rate;
        int failures = 0;
        for (std::size_t t = 0; t < trials; ++t)
        {
            const TrialSummary& r = results[p * trials + t];
            if (r.localized)
                dd.push_back(r.delta_d);
            else
                ++failures;
            if (!std::isnan(r.rate))
                rate.push_back(r.rate);
        }
        SweepRow row;
        const double v = spec.values[p];
        row.sweep_value = spec.variable == SweepVariable::theta_ue ? rad_to_deg(v)
                          : spec.variable == SweepVariable::offset ? v * 100.0
                                                                   : v;
        row.led_mode = spec.led_mode;
        row.lambertian_order = spec.lambertian_order;
        row.elements = s.ris.element_count();
        row.kappa_hw = s.ris.hardware_noise ? s.ris.kappa_hw : std::numeric_limits<double>::infinity();
        const MeanSe d = mean_se(dd);
        const MeanSe rr = mean_se(rate);
        row.mean_delta_d = d.mean;
        row.se_delta_d = d.se;
        row.mean_rate = rr.mean;
        row.se_rate = rr.se;
        row.n_trials = static_cast<int>(trials);
        row.n_failures = failures;
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::string> preset_names() { return {"fig2", "fig3", "fig4", "fig5", "fig6"}; }

std::vector<ExperimentTable> preset(std::string_view name, const PresetOptions& options, const Scenario& scenario)
{
    const std::vector<double> k_grid{10.0, 50.0, 100.0, 150.0};
    SweepSpec base;
    base.trials_per_point = options.trials;
    base.k_pwe = scenario.k_pwe;

    if (name == "fig2")
    {
        ExperimentTable table{"fig2.csv", {}};
        for (LedMode mode : {LedMode::ceiling_only, LedMode::ceiling_plus_leris})
            for (double m : {1.0, 2.0})
            {
                SweepSpec s = base;
                s.variable = SweepVariable::theta_ue;
                for (int deg = 0; deg <= 90; deg += 5)
                    s.values.push_back(deg_to_rad(deg));
                s.led_mode = mode;
                s.lambertian_order = m;
                s.compute_rate = false;
                s.fixed_position = scenario.fig2_position;
                s.fixed_phi_ue = 0.0;
                table.series.push_back(s);
            }
        return {table};
    }
    if (name == "fig3")
    {
        ExperimentTable table{"fig3.csv", {}};
        for (int side : {10, 25, 40})
        {
            SweepSpec s = base;
            s.values = k_grid;
            s.array_side = side;
            table.series.push_back(s);
        }
        return {table};
    }
    if (name == "fig4")
    {
        ExperimentTable table{"fig4.csv", {}};
        for (double kappa : {0.0, 1.0, 10.0})
            for (int side : {10, 40})
            {
                SweepSpec s = base;
                s.values = k_grid;
                s.array_side = side;
                s.hardware_noise = true;
                s.kappa_hw = kappa;
                table.series.push_back(s);
            }
        return {table};
    }
    if (name == "fig5")
    {
        ExperimentTable table{"fig5.csv", {}};
        for (LedMode mode : {LedMode::ceiling_only, LedMode::ceiling_plus_leris})
            for (double m : {1.0, 2.0, 5.0})
            {
                SweepSpec s = base;
                for (int k = 10; k <= 150; k += 20)
                    s.values.push_back(k);
                s.led_mode = mode;
                s.lambertian_order = m;
                s.compute_rate = false;
                table.series.push_back(s);
            }
        return {table};
    }
    if (name == "fig6")
    {
        std::vector<double> offsets_cm{1.0, 3.0};
        if (options.offset_cm)
            offsets_cm = {*options.offset_cm};
        std::vector<ExperimentTable> tables;
        for (double cm : offsets_cm)
        {
            ExperimentTable table{fmt::format("fig6_offset_{}cm.csv", cm), {}};
            for (int side : {10, 40})
            {
                SweepSpec s = base;
                s.values = {10.0, 50.0, 100.0, 150.0, 200.0, 250.0};
                s.array_side = side;
                s.offset = cm * 0.01;
                table.series.push_back(s);
            }
            tables.push_back(table);
        }
        return tables;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "sweep_value,led_mode,m_l,N,kappa_hw,mean_delta_d_m,se_delta_d,mean_R_bpshz,se_R,n_trials,n_failures\n";
    for (const SweepRow& r : rows)
        os << fmt::format("{:.9g},{},{:g},{},{:g},{:.9g},{:.9g},{:.9g},{:.9g},{},{}\n", r.sweep_value,
                          to_string(r.led_mode), r.lambertian_order, r.elements, r.kappa_hw, r.mean_delta_d,
                          r.se_delta_d, r.mean_rate, r.se_rate, r.n_trials, r.n_failures);
}

} // namespace leris
