#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "leris/beamforming.hpp"
#include "leris/localization.hpp"
#include "leris/montecarlo.hpp"
#include "leris/scenario.hpp"
#include "leris/scenario_file.hpp"
#include "leris/version.hpp"

namespace fs = std::filesystem;
using namespace leris;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitLocalization = 3;
constexpr int kExitQuadrature = 4;

// Error carrying the process exit status.
struct CliError
{
    int code;
    std::string message;
};

struct ScenarioSource
{
    bool use_default = false;
    std::string path;
};

void add_scenario_options(CLI::App& cmd, ScenarioSource& src)
{
    cmd.add_flag("--default", src.use_default, "Use the built-in desk-scale scenario");
    cmd.add_option("--scenario", src.path, "Scenario file");
}

Scenario load(const ScenarioSource& src)
{
    if (src.use_default && !src.path.empty())
        throw CliError{kExitConfig, "--default and --scenario are mutually exclusive"};
    if (!src.use_default && src.path.empty())
        throw CliError{kExitConfig, "either --default or --scenario <file> is required"};
    Scenario s;
    if (src.use_default)
    {
        s = build_default_scenario();
    }
    else
    {
        if (!fs::exists(src.path))
            throw CliError{kExitConfig, fmt::format("scenario file not found: {}", src.path)};
        try
        {
            s = load_scenario_file(src.path);
        }
        catch (const ScenarioFileError& e)
        {
            throw CliError{kExitConfig, e.what()};
        }
    }
    try
    {
        validate(s);
    }
    catch (const std::invalid_argument& e)
    {
        throw CliError{kExitConfig, fmt::format("invalid scenario: {}", e.what())};
    }
    return s;
}

LedMode parse_led_mode(const std::string& name)
{
    try
    {
        return led_mode_from_string(name);
    }
    catch (const std::invalid_argument& e)
    {
        throw CliError{kExitConfig, e.what()};
    }
}

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw CliError{kExitConfig, fmt::format("cannot write {}", path.string())};
    return out;
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& text, const std::string& where)
{
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw CliError{kExitConfig, fmt::format("{}: not a number: '{}'", where, t)};
    return v;
}

// ---------------------------------------------------------------- run-experiment

struct ExperimentArgs
{
    ScenarioSource source;
    std::string preset;
    int trials = 1000;
    std::uint64_t seed = kDefaultSeed;
    int workers = 0;
    std::string out = ".";
    std::optional<double> offset_cm;
};

int cmd_run_experiment(const ExperimentArgs& args)
{
    const Scenario scenario = load(args.source);
    if (args.trials < 1)
        throw CliError{kExitConfig, "--trials must be >= 1"};
    PresetOptions options;
    options.trials = args.trials;
    options.offset_cm = args.offset_cm;
    std::vector<ExperimentTable> tables;
    try
    {
        tables = preset(args.preset, options, scenario);
    }
    catch (const std::invalid_argument& e)
    {
        throw CliError{kExitConfig, e.what()};
    }

    const int workers = args.workers > 0 ? args.workers : std::max(1u, std::thread::hardware_concurrency());
    const fs::path out_dir(args.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw CliError{kExitConfig, fmt::format("cannot create output directory {}", out_dir.string())};

    nlohmann::json files = nlohmann::json::array();
    for (const ExperimentTable& table : tables)
    {
        std::vector<SweepRow> rows;
        nlohmann::json series = nlohmann::json::array();
        for (std::size_t i = 0; i < table.series.size(); ++i)
        {
            const SweepSpec& spec = table.series[i];
            const std::uint64_t seed = args.seed + i;
            const std::vector<SweepRow> part = run_sweep(scenario, spec, seed, workers);
            rows.insert(rows.end(), part.begin(), part.end());
            series.push_back({{"variable", to_string(spec.variable)},
                              {"seed", seed},
                              {"led_mode", to_string(spec.led_mode)},
                              {"lambertian_order", spec.lambertian_order},
                              {"array_side", spec.array_side},
                              {"hardware_noise", spec.hardware_noise},
                              {"kappa_hw", spec.kappa_hw},
                              {"offset_m", spec.offset},
                              {"k_pwe", spec.k_pwe},
                              {"values", spec.values}});
        }
        std::ofstream out = open_output(out_dir / table.file_name);
        write_sweep_csv(out, rows);
        if (!out)
            throw CliError{kExitConfig, fmt::format("failed writing {}", table.file_name)};
        files.push_back({{"name", table.file_name}, {"series", series}});
        std::cout << fmt::format("wrote {}\n", (out_dir / table.file_name).string());
    }

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["preset"] = args.preset;
    manifest["seed"] = args.seed;
    manifest["workers"] = workers;
    manifest["trials"] = args.trials;
    if (args.offset_cm)
        manifest["offset_cm"] = *args.offset_cm;
    manifest["scenario_source"] = args.source.use_default ? std::string("default") : args.source.path;
    manifest["scenario"] = format_scenario(scenario);
    manifest["scenario_hash"] = fmt::format("{:016x}", scenario_hash(scenario));
    manifest["files"] = files;
    std::ofstream mf = open_output(out_dir / "manifest.json");
    mf << manifest.dump(2) << '\n';
    std::cout << fmt::format("wrote {}\n", (out_dir / "manifest.json").string());
    return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs
{
    ScenarioSource source;
    std::vector<double> position;
    double theta_ue_deg = 90.0;
    double phi_ue_deg = 0.0;
    std::string mode = "ceiling_plus_leris";
    std::string out;
};

int cmd_synth(const SynthArgs& args)
{
    const Scenario scenario = load(args.source);
    const LedMode mode = parse_led_mode(args.mode);
    const Vec3 position{args.position[0], args.position[1], args.position[2]};
    PhotoDetector pd = scenario.pd;
    pd.noise_power = 0.0;
    pd.pose = {position, ue_boresight(deg_to_rad(args.theta_ue_deg), deg_to_rad(args.phi_ue_deg), scenario.convention)};
    const NlosMode nlos = KRatioNlos{std::numeric_limits<double>::infinity(), 0.0};
    Rng rng(kDefaultSeed);

    std::ostringstream text;
    text << fmt::format("# truth = {:.17g}, {:.17g}, {:.17g}\n", position.x, position.y, position.z);
    text << fmt::format("# theta_ue_deg = {:.17g}\n", args.theta_ue_deg);
    text << fmt::format("# phi_ue_deg = {:.17g}\n", args.phi_ue_deg);
    text << "channel_id,p_r\n";
    for (const Led* led : scenario.leds(mode))
    {
        const OpticalMeasurement m = synthesize_measurement(*led, pd, nlos, NoiseMode::fixed, rng);
        text << fmt::format("{},{:.17g}\n", led->channel_id, m.p_r);
    }
    if (args.out.empty())
    {
        std::cout << text.str();
    }
    else
    {
        std::ofstream out = open_output(args.out);
        out << text.str();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- localize

struct LocalizeArgs
{
    ScenarioSource source;
    std::string input;
    std::optional<double> theta_ue_deg;
    std::optional<double> phi_ue_deg;
    std::string mode = "ceiling_plus_leris";
};

struct RssInput
{
    std::vector<std::pair<int, double>> rows;
    std::optional<double> theta_ue_deg;
    std::optional<double> phi_ue_deg;
    std::optional<Vec3> truth;
};

RssInput read_rss(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw CliError{kExitConfig, fmt::format("RSS input not found: {}", path)};
    RssInput r;
    std::string line;
    int number = 0;
    while (std::getline(in, line))
    {
        ++number;
        const std::string where = fmt::format("{}:{}", path, number);
        std::string t = trim(line);
        if (t.empty())
            continue;
        if (t[0] == '#')
        {
            const std::string body = trim(std::string_view(t).substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                continue;
            const std::string key = trim(std::string_view(body).substr(0, eq));
            const std::string value = trim(std::string_view(body).substr(eq + 1));
            if (key == "theta_ue_deg")
                r.theta_ue_deg = parse_number(value, where);
            else if (key == "phi_ue_deg")
                r.phi_ue_deg = parse_number(value, where);
            else if (key == "truth")
            {
                std::vector<double> xyz;
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ','))
                    xyz.push_back(parse_number(item, where));
                if (xyz.size() != 3)
                    throw CliError{kExitConfig, fmt::format("{}: truth needs three coordinates", where)};
                r.truth = Vec3{xyz[0], xyz[1], xyz[2]};
            }
            continue;
        }
        if (t.rfind("channel_id", 0) == 0)
            continue;
        const auto comma = t.find(',');
        if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
            throw CliError{kExitConfig, fmt::format("{}: expected 'channel_id,p_r'", where)};
        const double id = parse_number(t.substr(0, comma), where);
        const double p = parse_number(t.substr(comma + 1), where);
        if (id != std::floor(id))
            throw CliError{kExitConfig, fmt::format("{}: channel id must be an integer", where)};
        if (!(p >= 0.0) || !std::isfinite(p))
            throw CliError{kExitConfig, fmt::format("{}: received power must be finite and >= 0", where)};
        r.rows.emplace_back(static_cast<int>(id), p);
    }
    return r;
}

int cmd_localize(const LocalizeArgs& args)
{
    const Scenario scenario = load(args.source);
    const LedMode mode = parse_led_mode(args.mode);
    const RssInput rss = read_rss(args.input);
    if (rss.rows.size() < 4)
        throw CliError{kExitConfig,
                       fmt::format("arity error: need at least 4 RSS rows, got {}", rss.rows.size())};

    std::vector<OpticalMeasurement> measurements;
    for (const auto& [id, p] : rss.rows)
    {
        const bool known = std::ranges::any_of(scenario.leds(mode), [id](const Led* l) { return l->channel_id == id; });
        if (!known)
            throw CliError{kExitConfig, fmt::format("unknown LED channel id {}", id)};
        if (std::ranges::any_of(measurements, [id](const OpticalMeasurement& m) { return m.led_channel_id == id; }))
            throw CliError{kExitConfig, fmt::format("duplicate LED channel id {}", id)};
        OpticalMeasurement m;
        m.led_channel_id = id;
        m.p_r = p;
        m.has_los = p > 0.0;
        measurements.push_back(m);
    }

    const double theta_deg = args.theta_ue_deg.value_or(rss.theta_ue_deg.value_or(90.0));
    const double phi_deg = args.phi_ue_deg.value_or(rss.phi_ue_deg.value_or(0.0));
    PhotoDetector pd = scenario.pd;
    pd.pose.boresight = ue_boresight(deg_to_rad(theta_deg), deg_to_rad(phi_deg), scenario.convention);

    const std::vector<LedGroup> groups = scenario.led_groups(mode);
    LocalizationEstimate est;
    try
    {
        est = localize(measurements, groups, pd, scenario.localizer);
    }
    catch (const LocalizationError& e)
    {
        std::string tags;
        for (Constraint c : e.tags())
            tags += fmt::format("{}{}", tags.empty() ? "" : ",", to_string(c));
        std::cerr << fmt::format("localization failed: {}\nviolated: {}\n", e.what(), tags);
        return kExitLocalization;
    }

    const LocalizationDiagnostics& d = est.diagnostics;
    const ConstraintMargins& mg = d.validity.margins;
    std::cout << fmt::format("estimate = {:.9f}, {:.9f}, {:.9f}\n", est.u_hat.x, est.u_hat.y, est.u_hat.z);
    if (rss.truth)
        std::cout << fmt::format("error_m = {:.3e}\n", distance(est.u_hat, *rss.truth));
    std::cout << fmt::format("group = {}\n", est.group);
    std::cout << fmt::format("leds_used = {}, {}, {}, {}\n", est.leds_used[0], est.leds_used[1], est.leds_used[2],
                             est.leds_used[3]);
    std::cout << fmt::format("alphas = {:.12g}, {:.12g}, {:.12g} ({})\n", est.alphas.a1, est.alphas.a2, est.alphas.a3,
                             to_string(est.alphas.model));
    std::cout << fmt::format("margins = alpha1_unity {:.3e}, alpha3_unity {:.3e}, alpha1_eq_alpha3 {:.3e}, xi2 "
                             "{:.3e}, equidistance {:.3e}\n",
                             mg.alpha1_unity, mg.alpha3_unity, mg.alpha1_eq_alpha3, mg.xi2, mg.equidistance);
    std::cout << fmt::format("tilt_deg = {:.6f}\n", rad_to_deg(d.tilt));
    std::cout << fmt::format("collinear_group = {}\naxis_swapped = {}\n", d.collinear_group, d.axis_swapped);
    std::cout << fmt::format("converged = {} ({} iterations)\n", d.converged, d.iterations);
    std::cout << fmt::format("bias_sensitivity_m = {:.3e}\n", d.bias_sensitivity);
    for (const std::string& g : d.rejected_groups)
        std::cout << fmt::format("rejected = {}\n", g);
    try
    {
        const SteeringAngles steer = steering_angles_from_estimate(est.u_hat, scenario.ris.center);
        std::cout << fmt::format("steer_theta_deg = {:.6f}\nsteer_phi_deg = {:.6f}\n", rad_to_deg(steer.theta),
                                 rad_to_deg(steer.phi));
    }
    catch (const GeometryError& e)
    {
        std::cout << fmt::format("steer = undefined ({})\n", e.what());
    }
    return kExitOk;
}

// ---------------------------------------------------------------- beam-pattern

struct BeamArgs
{
    ScenarioSource source;
    double steer_theta_deg = 30.0;
    double steer_phi_deg = 45.0;
    std::optional<int> side;
    std::optional<double> kappa_hw;
    double offset_cm = 0.0;
    std::uint64_t seed = kDefaultSeed;
    double grid_step_deg = 1.0;
    bool check_quadrature = false;
    std::string out;
};

int cmd_beam_pattern(const BeamArgs& args)
{
    Scenario scenario = load(args.source);
    RisPanel& panel = scenario.ris;
    if (args.side)
    {
        if (*args.side < 1)
            throw CliError{kExitConfig, "--side must be >= 1"};
        panel.rows = panel.cols = *args.side;
    }
    if (args.kappa_hw)
    {
        if (!(*args.kappa_hw >= 0.0))
            throw CliError{kExitConfig, "--kappa-hw must be >= 0"};
        panel.hardware_noise = true;
        panel.kappa_hw = *args.kappa_hw;
    }
    panel.position_offset = {args.offset_cm * 0.01, 0.0, 0.0};
    if (!(args.grid_step_deg > 0.0))
        throw CliError{kExitConfig, "--grid-step-deg must be positive"};

    Quadrature quad = scenario.quadrature;
    quad.check_convergence = args.check_quadrature;
    Rng rng(args.seed);
    const SteeringAngles steer{deg_to_rad(args.steer_theta_deg), deg_to_rad(args.steer_phi_deg)};
    const PhaseProfile profile = steering_profile(steer, panel, scenario.ap_position, rng);
    try
    {
        const GainPattern pattern(profile, panel, scenario.ap_position, quad);
        std::ostringstream text;
        write_beam_pattern_csv(text, pattern, args.grid_step_deg);
        if (args.out.empty())
        {
            std::cout << text.str();
        }
        else
        {
            std::ofstream out = open_output(args.out);
            out << text.str();
            std::cerr << fmt::format("gain at command = {:.6f} dB\n", 10.0 * std::log10(pattern.gain(steer)));
        }
    }
    catch (const QuadratureError& e)
    {
        std::cerr << fmt::format("quadrature did not converge: {} (coarse {:.9g}, fine {:.9g})\n", e.what(),
                                 e.coarse(), e.fine());
        return kExitQuadrature;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Locate-and-then-configure simulator for LED-equipped RIS links"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    ExperimentArgs exp;
    CLI::App* run = app.add_subcommand("run-experiment", "Run a figure preset and write CSV files plus a manifest");
    add_scenario_options(*run, exp.source);
    run->add_option("--preset", exp.preset, "fig2, fig3, fig4, fig5 or fig6")->required();
    run->add_option("--trials", exp.trials, "Trials per sweep point")->capture_default_str();
    run->add_option("--seed", exp.seed, "Base seed")->capture_default_str();
    run->add_option("--workers", exp.workers, "Worker threads (0 = hardware concurrency)")->capture_default_str();
    run->add_option("--out", exp.out, "Output directory")->capture_default_str();
    run->add_option("--offset-cm", exp.offset_cm, "RIS position offset for fig6, in cm");

    SynthArgs synth;
    CLI::App* syn = app.add_subcommand("synth", "Write noise-free RSS rows for a UE placement");
    add_scenario_options(*syn, synth.source);
    syn->add_option("--position", synth.position, "UE position x y z in metres")->expected(3)->required();
    syn->add_option("--theta-ue-deg", synth.theta_ue_deg, "UE elevation")->capture_default_str();
    syn->add_option("--phi-ue-deg", synth.phi_ue_deg, "UE azimuth")->capture_default_str();
    syn->add_option("--mode", synth.mode, "ceiling_only or ceiling_plus_leris")->capture_default_str();
    syn->add_option("--out", synth.out, "Output file (default stdout)");

    LocalizeArgs loc;
    CLI::App* lc = app.add_subcommand("localize", "Estimate the UE position from RSS rows");
    add_scenario_options(*lc, loc.source);
    lc->add_option("--input", loc.input, "CSV with channel_id,p_r rows")->required();
    lc->add_option("--theta-ue-deg", loc.theta_ue_deg, "UE elevation (overrides the input header)");
    lc->add_option("--phi-ue-deg", loc.phi_ue_deg, "UE azimuth (overrides the input header)");
    lc->add_option("--mode", loc.mode, "ceiling_only or ceiling_plus_leris")->capture_default_str();

    BeamArgs beam;
    CLI::App* bp = app.add_subcommand("beam-pattern", "Write the gain pattern of a steered RIS");
    add_scenario_options(*bp, beam.source);
    bp->add_option("--steer-theta-deg", beam.steer_theta_deg, "Commanded elevation")->capture_default_str();
    bp->add_option("--steer-phi-deg", beam.steer_phi_deg, "Commanded azimuth")->capture_default_str();
    bp->add_option("--side", beam.side, "Elements per side");
    bp->add_option("--kappa-hw", beam.kappa_hw, "Enable hardware phase noise with this concentration");
    bp->add_option("--offset-cm", beam.offset_cm, "Panel position offset along x, in cm")->capture_default_str();
    bp->add_option("--seed", beam.seed, "Seed for hardware phase noise")->capture_default_str();
    bp->add_option("--grid-step-deg", beam.grid_step_deg, "Output grid step")->capture_default_str();
    bp->add_flag("--check-quadrature", beam.check_quadrature, "Fail when halving the quadrature step moves the "
                                                              "normalisation integral by more than the tolerance");
    bp->add_option("--out", beam.out, "Output file (default stdout)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitConfig;
    }

    try
    {
        if (run->parsed())
            return cmd_run_experiment(exp);
        if (syn->parsed())
            return cmd_synth(synth);
        if (lc->parsed())
            return cmd_localize(loc);
        if (bp->parsed())
            return cmd_beam_pattern(beam);
    }
    catch (const CliError& e)
    {
        std::cerr << "error: " << e.message << '\n';
        return e.code;
    }
    catch (const QuadratureError& e)
    {
        std::cerr << fmt::format("quadrature did not converge: {}\n", e.what());
        return kExitQuadrature;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}
