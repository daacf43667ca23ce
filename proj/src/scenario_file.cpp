#include "leris/scenario_file.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace leris
{

namespace
{

std::string_view trim(std::string_view s)
{
    const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r'; };
    while (!s.empty() && !not_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && !not_space(s.back()))
        s.remove_suffix(1);
    return s;
}

struct Entry
{
    std::string value;
    std::string where;
};

class Reader
{
  public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    double number(const std::string& key) const { return parse_number(raw(key), key); }

    int integer(const std::string& key) const
    {
        const double v = number(key);
        if (v != std::floor(v))
            error(key, "expected an integer");
        return static_cast<int>(v);
    }

    bool boolean(const std::string& key) const
    {
        const std::string v = raw(key);
        if (v == "true")
            return true;
        if (v == "false")
            return false;
        error(key, "expected true or false");
    }

    std::string text(const std::string& key) const
    {
        std::string v = raw(key);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
            v = v.substr(1, v.size() - 2);
        return v;
    }

    std::vector<double> list(const std::string& key, std::size_t expected) const
    {
        std::string_view v = trim(raw(key));
        if (v.size() < 2 || v.front() != '[' || v.back() != ']')
            error(key, "expected a bracketed list");
        v = v.substr(1, v.size() - 2);
        std::vector<double> out;
        while (!trim(v).empty())
        {
            const auto comma = v.find(',');
            out.push_back(parse_number(std::string(trim(v.substr(0, comma))), key));
            if (comma == std::string_view::npos)
                break;
            v.remove_prefix(comma + 1);
        }
        if (out.size() != expected)
            error(key, fmt::format("expected {} values, got {}", expected, out.size()));
        return out;
    }

    Vec3 vec3(const std::string& key) const
    {
        const auto v = list(key, 3);
        return {v[0], v[1], v[2]};
    }

    [[noreturn]] void error(const std::string& key, const std::string& what) const
    {
        const auto it = entries_.find(key);
        const std::string where = it == entries_.end() ? std::string() : it->second.where + ": ";
        throw ScenarioFileError(where + key + ": " + what);
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

  private:
    const std::string& raw(const std::string& key) const { return entries_.at(key).value; }

    double parse_number(const std::string& s, const std::string& key) const
    {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
        {
            if (s == "inf")
                return std::numeric_limits<double>::infinity();
            error(key, "'" + s + "' is not a number");
        }
        return v;
    }

    std::map<std::string, Entry> entries_;
};

std::map<std::string, Entry> tokenize(std::string_view text, const std::string& origin)
{
    std::map<std::string, Entry> entries;
    std::string section;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line))
    {
        ++line_no;
        std::string_view l = line;
        if (const auto hash = l.find('#'); hash != std::string_view::npos)
            l = l.substr(0, hash);
        l = trim(l);
        if (l.empty())
            continue;
        const std::string where = fmt::format("{}:{}", origin, line_no);
        if (l.front() == '[' && l.back() == ']' && l.find('=') == std::string_view::npos)
        {
            section = std::string(trim(l.substr(1, l.size() - 2)));
            continue;
        }
        const auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw ScenarioFileError(where + ": expected 'key = value'");
        if (section.empty())
            throw ScenarioFileError(where + ": key outside of a [section]");
        const std::string key = section + "." + std::string(trim(l.substr(0, eq)));
        if (entries.count(key))
            throw ScenarioFileError(where + ": duplicate key " + key);
        entries[key] = {std::string(trim(l.substr(eq + 1))), where};
    }
    return entries;
}

std::vector<Led> read_leds(const Reader& r, const std::string& prefix, const Vec3& boresight,
                           const std::vector<Led>& fallback, std::vector<std::string>& used)
{
    std::vector<std::pair<int, Vec3>> found;
    for (const auto& [key, entry] : r.entries())
    {
        const std::string head = "leds." + prefix;
        if (key.rfind(head, 0) != 0)
            continue;
        const std::string index = key.substr(head.size());
        int i = 0;
        const auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), i);
        if (ec != std::errc() || ptr != index.data() + index.size() || i < 1)
            r.error(key, "unknown key");
        found.emplace_back(i, r.vec3(key));
        used.push_back(key);
    }
    if (found.empty())
    {
        std::vector<Led> out = fallback;
        for (Led& led : out)
            led.pose.boresight = boresight;
        return out;
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Led> out;
    for (const auto& [index, pos] : found)
        out.push_back({{pos, boresight}, 0.05, 2.0, 0});
    return out;
}

} // namespace

Scenario parse_scenario(std::string_view text, const std::string& origin)
{
    const Reader r(tokenize(text, origin));
    Scenario s = build_default_scenario();
    std::vector<std::string> used;
    const auto take = [&](const std::string& key, const std::function<void()>& apply) {
        if (r.has(key))
        {
            apply();
            used.push_back(key);
        }
    };

    take("room.dimensions_m", [&] { s.room = r.vec3("room.dimensions_m"); });

    take("leds.ceiling_boresight", [&] { s.ceiling_boresight = normalized(r.vec3("leds.ceiling_boresight")); });
    take("leds.leris_boresight", [&] { s.leris_boresight = normalized(r.vec3("leds.leris_boresight")); });
    const Led prototype = s.ceiling_leds.front();
    s.ceiling_leds = read_leds(r, "ceiling_led_", s.ceiling_boresight, s.ceiling_leds, used);
    s.leris_leds = read_leds(r, "leris_led_", s.leris_boresight, s.leris_leds, used);
    double power = prototype.optical_power;
    double order = prototype.lambertian_order;
    take("leds.optical_power_mw", [&] { power = r.number("leds.optical_power_mw") * 1e-3; });
    take("leds.lambertian_order", [&] { order = r.number("leds.lambertian_order"); });
    int channel = 1;
    for (Led& led : s.ceiling_leds)
    {
        led.optical_power = power;
        led.lambertian_order = order;
        led.channel_id = channel++;
    }
    for (Led& led : s.leris_leds)
    {
        led.optical_power = power;
        led.lambertian_order = order;
        led.channel_id = channel++;
    }

    take("leris.center", [&] { s.ris.center = r.vec3("leris.center"); });
    take("leris.rows", [&] { s.ris.rows = r.integer("leris.rows"); });
    take("leris.cols", [&] { s.ris.cols = r.integer("leris.cols"); });
    take("leris.wavelength_m", [&] {
        s.ris.wavelength = r.number("leris.wavelength_m");
        s.ris.element_side = s.ris.wavelength / 2.0;
    });
    take("leris.element_side_m", [&] { s.ris.element_side = r.number("leris.element_side_m"); });
    take("leris.efficiency", [&] { s.ris.efficiency = r.number("leris.efficiency"); });
    take("leris.element_gain", [&] { s.ris.element_gain = r.number("leris.element_gain"); });
    take("leris.hardware_noise", [&] { s.ris.hardware_noise = r.boolean("leris.hardware_noise"); });
    take("leris.kappa_hw", [&] { s.ris.kappa_hw = r.number("leris.kappa_hw"); });
    take("leris.offset_cm", [&] { s.ris.position_offset = r.vec3("leris.offset_cm") * 0.01; });

    take("link.ap_position", [&] { s.ap_position = r.vec3("link.ap_position"); });
    take("link.tx_power_w", [&] { s.tx_power = r.number("link.tx_power_w"); });
    take("link.tx_gain", [&] { s.tx_gain = r.number("link.tx_gain"); });
    take("link.rx_gain", [&] { s.rx_gain = r.number("link.rx_gain"); });
    take("link.reference_distance_m", [&] { s.reference_distance = r.number("link.reference_distance_m"); });
    take("link.rf_noise_power_dbm", [&] { s.rf_noise_power_dbm = r.number("link.rf_noise_power_dbm"); });

    take("photodetector.area_cm2", [&] { s.pd.area = r.number("photodetector.area_cm2") * 1e-4; });
    take("photodetector.filter_gain", [&] { s.pd.filter_gain = r.number("photodetector.filter_gain"); });
    take("photodetector.refractive_index", [&] { s.pd.refractive_index = r.number("photodetector.refractive_index"); });
    take("photodetector.psi_max_deg", [&] { s.pd.half_fov = deg_to_rad(r.number("photodetector.psi_max_deg")); });
    take("photodetector.optical_noise_power", [&] { s.pd.noise_power = r.number("photodetector.optical_noise_power"); });
    take("photodetector.noise_mode", [&] {
        const std::string v = r.text("photodetector.noise_mode");
        if (v == "fixed")
            s.optical_noise = NoiseMode::fixed;
        else if (v == "gaussian")
            s.optical_noise = NoiseMode::gaussian;
        else
            r.error("photodetector.noise_mode", "expected fixed or gaussian");
    });

    take("simulation.k_pwe", [&] { s.k_pwe = r.number("simulation.k_pwe"); });
    take("simulation.k_log_jitter", [&] { s.k_log_jitter = r.number("simulation.k_log_jitter"); });
    const auto range = [&](const std::string& key, double& lo, double& hi, double scale) {
        take(key, [&] {
            const auto v = r.list(key, 2);
            lo = v[0] * scale;
            hi = v[1] * scale;
        });
    };
    range("simulation.ue_x_range", s.ue_position_range.lo.x, s.ue_position_range.hi.x, 1.0);
    range("simulation.ue_y_range", s.ue_position_range.lo.y, s.ue_position_range.hi.y, 1.0);
    range("simulation.ue_z_range", s.ue_position_range.lo.z, s.ue_position_range.hi.z, 1.0);
    range("simulation.theta_ue_range_deg", s.theta_ue_range.lo, s.theta_ue_range.hi, kPi / 180.0);
    range("simulation.phi_ue_range_deg", s.phi_ue_range.lo, s.phi_ue_range.hi, kPi / 180.0);
    take("simulation.orientation_convention", [&] {
        try
        {
            s.convention = orientation_convention_from_string(r.text("simulation.orientation_convention"));
        }
        catch (const std::invalid_argument& e)
        {
            r.error("simulation.orientation_convention", e.what());
        }
    });
    take("simulation.fig2_position", [&] { s.fig2_position = r.vec3("simulation.fig2_position"); });
    s.localizer.bounds = s.ue_position_range;

    take("solver.mode", [&] {
        const std::string v = r.text("solver.mode");
        if (v == "orientation_compensated")
            s.localizer.mode = SolveMode::orientation_compensated;
        else if (v == "closed_form")
            s.localizer.mode = SolveMode::closed_form;
        else
            r.error("solver.mode", "expected orientation_compensated or closed_form");
    });
    take("solver.parallel_threshold_deg",
         [&] { s.localizer.parallel_threshold = deg_to_rad(r.number("solver.parallel_threshold_deg")); });
    take("solver.epsilon", [&] { s.localizer.epsilon = r.number("solver.epsilon"); });
    take("solver.max_iterations", [&] { s.localizer.max_iterations = r.integer("solver.max_iterations"); });

    take("quadrature.rule", [&] {
        const std::string v = r.text("quadrature.rule");
        if (v == "midpoint")
            s.quadrature.rule = QuadratureRule::midpoint;
        else if (v == "gauss_legendre")
            s.quadrature.rule = QuadratureRule::gauss_legendre;
        else
            r.error("quadrature.rule", "expected midpoint or gauss_legendre");
    });
    take("quadrature.step_deg", [&] { s.quadrature.step_deg = r.number("quadrature.step_deg"); });

    for (const auto& [key, entry] : r.entries())
        if (std::find(used.begin(), used.end(), key) == used.end())
            throw ScenarioFileError(entry.where + ": unknown key " + key);

    try
    {
        validate(s);
    }
    catch (const std::invalid_argument& e)
    {
        throw ScenarioFileError(origin + ": " + e.what());
    }
    return s;
}

Scenario load_scenario_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioFileError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str(), path.string());
}

namespace
{

std::string vec(const Vec3& v) { return fmt::format("[{}, {}, {}]", v.x, v.y, v.z); }

} // namespace

std::string format_scenario(const Scenario& s)
{
    std::string out;
    const auto line = [&](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    const Led& any = s.ceiling_leds.empty() ? s.leris_leds.front() : s.ceiling_leds.front();

    out += "[room]\n";
    line("dimensions_m", vec(s.room));

    out += "\n[leds]\n";
    line("ceiling_boresight", vec(s.ceiling_boresight));
    line("leris_boresight", vec(s.leris_boresight));
    for (std::size_t i = 0; i < s.ceiling_leds.size(); ++i)
        line(fmt::format("ceiling_led_{}", i + 1), vec(s.ceiling_leds[i].pose.position));
    for (std::size_t i = 0; i < s.leris_leds.size(); ++i)
        line(fmt::format("leris_led_{}", i + 1), vec(s.leris_leds[i].pose.position));
    line("optical_power_mw", fmt::format("{}", any.optical_power * 1e3));
    line("lambertian_order", fmt::format("{}", any.lambertian_order));

    out += "\n[leris]\n";
    line("center", vec(s.ris.center));
    line("rows", fmt::format("{}", s.ris.rows));
    line("cols", fmt::format("{}", s.ris.cols));
    line("wavelength_m", fmt::format("{}", s.ris.wavelength));
    line("element_side_m", fmt::format("{}", s.ris.element_side));
    line("efficiency", fmt::format("{}", s.ris.efficiency));
    line("element_gain", fmt::format("{}", s.ris.element_gain));
    line("hardware_noise", s.ris.hardware_noise ? "true" : "false");
    line("kappa_hw", fmt::format("{}", s.ris.kappa_hw));
    line("offset_cm", vec(s.ris.position_offset * 100.0));

    out += "\n[link]\n";
    line("ap_position", vec(s.ap_position));
    line("tx_power_w", fmt::format("{}", s.tx_power));
    line("tx_gain", fmt::format("{}", s.tx_gain));
    line("rx_gain", fmt::format("{}", s.rx_gain));
    line("reference_distance_m", fmt::format("{}", s.reference_distance));
    line("rf_noise_power_dbm", fmt::format("{}", s.rf_noise_power_dbm));

    out += "\n[photodetector]\n";
    line("area_cm2", fmt::format("{}", s.pd.area * 1e4));
    line("filter_gain", fmt::format("{}", s.pd.filter_gain));
    line("refractive_index", fmt::format("{}", s.pd.refractive_index));
    line("psi_max_deg", fmt::format("{}", rad_to_deg(s.pd.half_fov)));
    line("optical_noise_power", fmt::format("{}", s.pd.noise_power));
    line("noise_mode", s.optical_noise == NoiseMode::fixed ? "fixed" : "gaussian");

    out += "\n[simulation]\n";
    line("k_pwe", fmt::format("{}", s.k_pwe));
    line("k_log_jitter", fmt::format("{}", s.k_log_jitter));
    const Box& b = s.ue_position_range;
    line("ue_x_range", fmt::format("[{}, {}]", b.lo.x, b.hi.x));
    line("ue_y_range", fmt::format("[{}, {}]", b.lo.y, b.hi.y));
    line("ue_z_range", fmt::format("[{}, {}]", b.lo.z, b.hi.z));
    line("theta_ue_range_deg",
         fmt::format("[{}, {}]", rad_to_deg(s.theta_ue_range.lo), rad_to_deg(s.theta_ue_range.hi)));
    line("phi_ue_range_deg", fmt::format("[{}, {}]", rad_to_deg(s.phi_ue_range.lo), rad_to_deg(s.phi_ue_range.hi)));
    line("orientation_convention", to_string(s.convention));
    line("fig2_position", vec(s.fig2_position));

    out += "\n[solver]\n";
    line("mode", std::string(to_string(s.localizer.mode)));
    line("parallel_threshold_deg", fmt::format("{}", rad_to_deg(s.localizer.parallel_threshold)));
    line("epsilon", fmt::format("{}", s.localizer.epsilon));
    line("max_iterations", fmt::format("{}", s.localizer.max_iterations));

    out += "\n[quadrature]\n";
    line("rule", s.quadrature.rule == QuadratureRule::midpoint ? "midpoint" : "gauss_legendre");
    line("step_deg", fmt::format("{}", s.quadrature.step_deg));
    return out;
}

std::uint64_t scenario_hash(const Scenario& scenario)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : format_scenario(scenario))
    {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace leris
