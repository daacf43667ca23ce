#include "leris/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace leris
{

std::string_view to_string(ExponentModel model)
{
    return model == ExponentModel::general ? "general" : "parallel";
}

std::string_view to_string(SolveMode mode)
{
    return mode == SolveMode::orientation_compensated ? "orientation_compensated" : "closed_form";
}

std::string_view to_string(Constraint c)
{
    switch (c)
    {
    case Constraint::alpha1_unity:
        return "alpha1_unity";
    case Constraint::alpha3_unity:
        return "alpha3_unity";
    case Constraint::alpha1_eq_alpha3:
        return "alpha1_eq_alpha3";
    case Constraint::xi2_zero:
        return "xi2_zero";
    case Constraint::equidistant_pair:
        return "equidistant_pair";
    case Constraint::parallel_plane_degenerate:
        return "parallel_plane_degenerate";
    case Constraint::collinear_leds:
        return "collinear_leds";
    case Constraint::z_denominator_zero:
        return "z_denominator_zero";
    case Constraint::negative_radicand:
        return "negative_radicand";
    case Constraint::insufficient_los:
        return "insufficient_los";
    }
    return "unknown";
}

double ConstraintMargins::min() const
{
    return std::min({alpha1_unity, alpha3_unity, alpha1_eq_alpha3, xi2, equidistance});
}

namespace
{

std::string describe(const std::vector<Constraint>& tags)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < tags.size(); ++i)
        os << (i ? ", " : "") << to_string(tags[i]);
    return os.str();
}

[[noreturn]] void fail(const std::string& what, std::vector<Constraint> tags)
{
    const std::string message = what + " [" + describe(tags) + "]";
    throw LocalizationError(message, std::move(tags));
}

double relative_gap(double a, double b)
{
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

double xi2_scale(const AlphaTriple& a, const LedQuad& p)
{
    return 2.0 * (std::abs(a.a1 * (p[1].x - p[0].x)) + std::abs(a.a2 * (p[0].x - p[2].x)) +
                  std::abs(a.a1 * a.a2 * (p[2].x - p[1].x)));
}

double xi2_margin(const AlphaTriple& a, const LedQuad& p)
{
    const double scale = xi2_scale(a, p);
    if (scale == 0.0)
        return 0.0;
    return std::abs(xi_coefficients(a, p).xi2) / scale;
}

LedQuad swap_axes(const LedQuad& p)
{
    LedQuad out;
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = {p[i].z, p[i].x};
    return out;
}

// Terms of the z numerator/denominator weighted per LED (1, 2 and 4).
struct ZTerms
{
    double w1, w2, w4;
};

ZTerms z_weights(const AlphaTriple& a)
{
    return {a.a1 - a.a3, a.a1 * (a.a3 - 1.0), -a.a3 * (a.a1 - 1.0)};
}

} // namespace

LocalizationError::LocalizationError(const std::string& what, std::vector<Constraint> tags)
    : std::runtime_error(what), tags_(std::move(tags))
{
}

double estimate_distance(const OpticalMeasurement& measurement, const Led& led,
                         const PhotoDetector& pd, double y_hat)
{
    if (!(measurement.p_r > 0.0))
        throw std::invalid_argument("received power must be positive");
    if (!(y_hat > 0.0))
        throw std::invalid_argument("plane offset y_hat must be positive");
    const double gc = concentrator_gain(measurement.arrival_angle, pd);
    if (gc == 0.0)
        throw std::invalid_argument("arrival angle outside the field of view");
    const double m = led.lambertian_order;
    const double base = led.optical_power / measurement.p_r * (m + 1.0) * pd.area *
                        std::pow(y_hat, m) / (2.0 * kPi) * pd.filter_gain * gc *
                        std::cos(measurement.arrival_angle);
    return std::pow(base, 1.0 / (m + 2.0));
}

AlphaTriple compute_alphas(std::span<const double, 4> powers, double lambertian_order,
                           ExponentModel model)
{
    for (double p : powers)
        if (!(p > 0.0) || !std::isfinite(p))
            fail("received powers must be positive and finite", {Constraint::insufficient_los});
    const double e = model == ExponentModel::general ? 2.0 / (lambertian_order + 1.0)
                                                     : 2.0 / (lambertian_order + 3.0);
    AlphaTriple a;
    a.model = model;
    a.a1 = std::pow(powers[1] / powers[0], e);
    a.a2 = std::pow(powers[2] / powers[0], e);
    a.a3 = std::pow(powers[3] / powers[0], e);
    return a;
}

XiCoefficients xi_coefficients(const AlphaTriple& a, const LedQuad& p)
{
    const double x1 = p[0].x, x2 = p[1].x, x3 = p[2].x;
    const double z1 = p[0].z, z2 = p[1].z, z3 = p[2].z;
    XiCoefficients xi;
    xi.xi1 = 2.0 * (a.a1 * (z1 - z2) + a.a2 * (z3 - z1) + a.a1 * a.a2 * (z2 - z3));
    xi.xi2 = 2.0 * (a.a1 * (x2 - x1) + a.a2 * (x1 - x3) + a.a1 * a.a2 * (x3 - x2));
    xi.xi3 = a.a1 * (x2 * x2 - x1 * x1 + z2 * z2 - z1 * z1) +
             a.a2 * (x1 * x1 - x3 * x3 + z1 * z1 - z3 * z3) +
             a.a1 * a.a2 * (x3 * x3 - x2 * x2 + z3 * z3 - z2 * z2);
    return xi;
}

double solve_x(double z_hat, const AlphaTriple& alphas, const LedQuad& leds, double epsilon)
{
    const XiCoefficients xi = xi_coefficients(alphas, leds);
    const double scale = xi2_scale(alphas, leds);
    if (scale == 0.0 || std::abs(xi.xi2) <= epsilon * scale)
        fail("x solve: xi2 vanishes", {Constraint::xi2_zero});
    return (xi.xi1 * z_hat + xi.xi3) / xi.xi2;
}

double solve_y(double x_hat, double z_hat, const AlphaTriple& alphas, const LedQuad& leds,
               double epsilon)
{
    if (relative_gap(alphas.a1, 1.0) <= epsilon)
        fail("y solve: alpha1 equals one", {Constraint::alpha1_unity});
    const double r1 = (x_hat - leds[0].x) * (x_hat - leds[0].x) + (z_hat - leds[0].z) * (z_hat - leds[0].z);
    const double r2 = (x_hat - leds[1].x) * (x_hat - leds[1].x) + (z_hat - leds[1].z) * (z_hat - leds[1].z);
    const double radicand = (r1 - alphas.a1 * r2) / (alphas.a1 - 1.0);
    const double tol = epsilon * (r1 + std::abs(alphas.a1) * r2) / std::abs(alphas.a1 - 1.0);
    if (radicand < -tol)
        fail("y solve: negative radicand", {Constraint::negative_radicand});
    if (radicand <= tol)
        fail("y solve: UE lies on the LED plane", {Constraint::parallel_plane_degenerate});
    return std::sqrt(radicand);
}

bool is_collinear(const LedQuad& leds, double epsilon)
{
    std::size_t far = 1;
    double best = 0.0;
    for (std::size_t i = 1; i < 4; ++i)
    {
        const double dx = leds[i].x - leds[0].x, dz = leds[i].z - leds[0].z;
        const double d2 = dx * dx + dz * dz;
        if (d2 > best)
        {
            best = d2;
            far = i;
        }
    }
    if (best == 0.0)
        return true;
    const double ux = leds[far].x - leds[0].x, uz = leds[far].z - leds[0].z;
    for (std::size_t i = 1; i < 4; ++i)
    {
        const double vx = leds[i].x - leds[0].x, vz = leds[i].z - leds[0].z;
        if (std::abs(ux * vz - uz * vx) > epsilon * best)
            return false;
    }
    return true;
}

double solve_z(const AlphaTriple& alphas, const XiCoefficients& xis, const LedQuad& leds,
               double epsilon)
{
    std::vector<Constraint> tags;
    if (relative_gap(alphas.a1, 1.0) <= epsilon)
        tags.push_back(Constraint::alpha1_unity);
    if (relative_gap(alphas.a3, 1.0) <= epsilon)
        tags.push_back(Constraint::alpha3_unity);
    if (relative_gap(alphas.a1, alphas.a3) <= epsilon)
        tags.push_back(Constraint::alpha1_eq_alpha3);
    if (!tags.empty())
        fail("z solve: degenerate denominator", std::move(tags));

    const ZTerms w = z_weights(alphas);
    const auto num_term = [&](const PlanarPoint& p) {
        return p.x * (xis.xi2 * p.x - 2.0 * xis.xi3) + xis.xi2 * p.z * p.z;
    };
    const auto den_term = [&](const PlanarPoint& p) { return xis.xi1 * p.x + xis.xi2 * p.z; };

    const double t1 = w.w1 * den_term(leds[0]);
    const double t2 = w.w2 * den_term(leds[1]);
    const double t4 = w.w4 * den_term(leds[3]);
    const double den = 2.0 * (t1 + t2 + t4);
    const double scale = 2.0 * (std::abs(t1) + std::abs(t2) + std::abs(t4));
    if (scale == 0.0 || std::abs(den) <= epsilon * scale)
    {
        if (is_collinear(leds, epsilon))
            fail("z solve: LEDs are collinear", {Constraint::collinear_leds});
        fail("z solve: denominator vanishes", {Constraint::z_denominator_zero});
    }
    const double num = w.w1 * num_term(leds[0]) + w.w2 * num_term(leds[1]) + w.w4 * num_term(leds[3]);
    return num / den;
}

ClosedFormSolution solve_closed_form(const AlphaTriple& alphas, const LedQuad& leds, double epsilon)
{
    ClosedFormSolution out;
    LedQuad quad = leds;
    const double scale = xi2_scale(alphas, quad);
    if (scale == 0.0 || std::abs(xi_coefficients(alphas, quad).xi2) <= epsilon * scale)
    {
        quad = swap_axes(leds);
        out.axis_swapped = true;
    }
    out.xis = xi_coefficients(alphas, quad);
    const double z = solve_z(alphas, out.xis, quad, epsilon);
    const double x = solve_x(z, alphas, quad, epsilon);
    const double y = solve_y(x, z, alphas, quad, epsilon);
    out.position = out.axis_swapped ? Vec3{z, y, x} : Vec3{x, y, z};
    return out;
}

PlacementValidity validate_placement(const LedQuad& leds, const AlphaTriple& alphas,
                                     bool parallel_planes, double epsilon)
{
    PlacementValidity v;
    const bool collinear = is_collinear(leds, epsilon);
    v.margins.alpha1_unity = relative_gap(alphas.a1, 1.0);
    // alpha3 only enters the z denominator, which collinear sets never use.
    v.margins.alpha3_unity = collinear ? 1.0 : relative_gap(alphas.a3, 1.0);
    v.margins.alpha1_eq_alpha3 = collinear ? 1.0 : relative_gap(alphas.a1, alphas.a3);
    v.margins.xi2 = std::max(xi2_margin(alphas, leds), collinear ? 0.0 : xi2_margin(alphas, swap_axes(leds)));
    v.margins.equidistance = 1.0;
    if (parallel_planes)
    {
        const std::array<double, 4> r{1.0, 1.0 / alphas.a1, 1.0 / alphas.a2, 1.0 / alphas.a3};
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i + 1; j < 4; ++j)
                v.margins.equidistance = std::min(v.margins.equidistance, relative_gap(r[i], r[j]));
    }

    if (v.margins.alpha1_unity <= epsilon)
        v.violated.push_back(Constraint::alpha1_unity);
    if (v.margins.alpha3_unity <= epsilon)
        v.violated.push_back(Constraint::alpha3_unity);
    if (v.margins.alpha1_eq_alpha3 <= epsilon)
        v.violated.push_back(Constraint::alpha1_eq_alpha3);
    if (v.margins.xi2 <= epsilon)
        v.violated.push_back(Constraint::xi2_zero);
    if (parallel_planes && v.margins.equidistance <= epsilon)
        v.violated.push_back(Constraint::equidistant_pair);
    v.ok = v.violated.empty();
    return v;
}

PlacementValidity validate_placement(const LedQuad& leds, std::span<const double, 4> distances,
                                     double epsilon)
{
    for (double d : distances)
        if (!(d > 0.0))
            throw std::invalid_argument("distances must be positive");
    AlphaTriple a;
    a.model = ExponentModel::parallel;
    const double d1s = distances[0] * distances[0];
    a.a1 = d1s / (distances[1] * distances[1]);
    a.a2 = d1s / (distances[2] * distances[2]);
    a.a3 = d1s / (distances[3] * distances[3]);
    return validate_placement(leds, a, true, epsilon);
}

double localization_error_model(double d_true, double k_opt, double noise_to_los,
                                double lambertian_order)
{
    const double inv_k = std::isinf(k_opt) ? 0.0 : 1.0 / k_opt;
    return d_true * (1.0 - std::pow(1.0 / (1.0 + inv_k + noise_to_los), 1.0 / (lambertian_order + 2.0)));
}

bool Box::contains(const Vec3& p, double tol) const
{
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol &&
           p.z >= lo.z - tol && p.z <= hi.z + tol;
}

namespace
{

struct VisibleLed
{
    const Led* led = nullptr;
    const OpticalMeasurement* meas = nullptr;
    PlanarPoint point;
};

struct GroupOutcome
{
    LocalizationEstimate estimate;
    double margin = 0.0;
};

class GroupSolver
{
  public:
    GroupSolver(const LedGroup& group, std::span<const OpticalMeasurement> measurements,
                const PhotoDetector& receiver, const LocalizerOptions& options)
        : group_(group), receiver_(receiver), options_(options)
    {
        for (const Led& led : group.leds)
        {
            const auto it = std::find_if(measurements.begin(), measurements.end(), [&](const auto& m) {
                return m.led_channel_id == led.channel_id;
            });
            if (it != measurements.end() && it->has_los && it->p_r > 0.0)
                visible_.push_back({&led, &*it, {}});
        }
        if (visible_.size() < 4)
            fail("group '" + group.name + "' has fewer than four LoS LEDs", {Constraint::insufficient_los});

        const Vec3 origin = visible_.front().led->pose.position;
        Vec3 hint{1.0, 0.0, 0.0};
        double best = 0.0;
        for (const auto& v : visible_)
        {
            const double d = distance(v.led->pose.position, origin);
            if (d > best)
            {
                best = d;
                hint = v.led->pose.position - origin;
            }
        }
        frame_ = canonical_frame_for_plane(group.boresight, origin, hint);
        const double order = visible_.front().led->lambertian_order;
        for (auto& v : visible_)
        {
            const Vec3 local = frame_.apply(v.led->pose.position);
            if (std::abs(local.y) > 1e-6 * std::max(1.0, best))
                throw std::invalid_argument("LEDs of group '" + group.name + "' are not coplanar");
            if (v.led->lambertian_order != order)
                throw std::invalid_argument("LEDs of group '" + group.name +
                                            "' have different Lambertian orders");
            v.point = {local.x, local.z};
        }
        order_ = order;
        normal_local_ = frame_.rotate(receiver.pose.boresight);
        tilt_ = angle_between(receiver.pose.boresight, -group.boresight);
        parallel_ = tilt_ <= options.parallel_threshold;
        if (options.mode == SolveMode::orientation_compensated)
            model_ = ExponentModel::parallel;
        else
            model_ = options.forced_model.value_or(parallel_ ? ExponentModel::parallel : ExponentModel::general);
    }

    GroupOutcome solve()
    {
        choose_ordering();
        GroupOutcome out;
        LocalizationEstimate& est = out.estimate;
        est.group = group_.name;
        est.frame = frame_;
        for (std::size_t i = 0; i < 4; ++i)
            est.leds_used[i] = ordered_[i].led->channel_id;

        std::array<double, 4> raw{};
        for (std::size_t i = 0; i < 4; ++i)
            raw[i] = ordered_[i].meas->p_r;

        Run run = run_solver(raw);
        est.u_hat = frame_.invert(run.local);
        est.alphas = run.alphas;
        est.xis = run.xis;
        auto& diag = est.diagnostics;
        diag.validity = validity_;
        diag.tilt = tilt_;
        diag.collinear_group = collinear_;
        diag.axis_swapped = run.axis_swapped;
        diag.converged = run.converged;
        diag.iterations = run.iterations;
        diag.ratio_residual = run.residual;

        std::array<double, 4> biased = raw;
        for (double& p : biased)
            p *= 1.01;
        try
        {
            const Run shifted = run_solver(biased);
            diag.bias_sensitivity = distance(frame_.invert(shifted.local), est.u_hat);
        }
        catch (const LocalizationError&)
        {
            diag.bias_sensitivity = std::numeric_limits<double>::infinity();
        }

        for (std::size_t i = 0; i < 4; ++i)
        {
            OpticalMeasurement m = *ordered_[i].meas;
            const Vec3 led_local{ordered_[i].point.x, 0.0, ordered_[i].point.z};
            const Vec3 to_led = led_local - run.local;
            m.arrival_angle = std::acos(std::clamp(dot(normal_local_, to_led) / norm(to_led), -1.0, 1.0));
            try
            {
                diag.distance_estimates[i] = estimate_distance(m, *ordered_[i].led, receiver_, run.local.y);
            }
            catch (const std::invalid_argument&)
            {
                diag.distance_estimates[i] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        out.margin = validity_.margins.min();
        return out;
    }

  private:
    struct Run
    {
        Vec3 local;
        AlphaTriple alphas;
        XiCoefficients xis;
        bool axis_swapped = false;
        bool converged = true;
        int iterations = 1;
        double residual = 0.0;
    };

    LedQuad quad() const
    {
        return {ordered_[0].point, ordered_[1].point, ordered_[2].point, ordered_[3].point};
    }

    void choose_ordering()
    {
        const std::size_t n = visible_.size();
        double best = -1.0;
        double best_power = 0.0;
        std::vector<Constraint> seen;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c)
                    for (std::size_t d = 0; d < n; ++d)
                    {
                        if (a == b || a == c || a == d || b == c || b == d || c == d)
                            continue;
                        const std::array<const VisibleLed*, 4> pick{&visible_[a], &visible_[b], &visible_[c],
                                                                    &visible_[d]};
                        const LedQuad q{pick[0]->point, pick[1]->point, pick[2]->point, pick[3]->point};
                        const std::array<double, 4> p{pick[0]->meas->p_r, pick[1]->meas->p_r,
                                                      pick[2]->meas->p_r, pick[3]->meas->p_r};
                        const AlphaTriple al = compute_alphas(p, order_, model_);
                        const PlacementValidity v = validate_placement(q, al, parallel_, options_.epsilon);
                        if (!v.ok)
                        {
                            for (Constraint t : v.violated)
                                if (std::find(seen.begin(), seen.end(), t) == seen.end())
                                    seen.push_back(t);
                            continue;
                        }
                        const double margin = v.margins.min();
                        const double power = p[0] + p[1] + p[2] + p[3];
                        if (margin > best || (margin == best && power > best_power))
                        {
                            best = margin;
                            best_power = power;
                            for (std::size_t i = 0; i < 4; ++i)
                                ordered_[i] = *pick[i];
                            validity_ = v;
                        }
                    }
        if (best < 0.0)
            fail("group '" + group_.name + "' has no valid LED subset", std::move(seen));
        collinear_ = is_collinear(quad(), options_.epsilon);
    }

    // RMS of log(predicted / measured) over the ordered LEDs for a local
    // candidate, with the full LoS model and the known receiver orientation.
    double absolute_misfit(const Vec3& q, const std::array<double, 4>& measured) const
    {
        double ss = 0.0;
        const double gc = concentrator_gain(0.0, receiver_);
        for (std::size_t i = 0; i < 4; ++i)
        {
            const Led& led = *ordered_[i].led;
            const Vec3 v = Vec3{ordered_[i].point.x, 0.0, ordered_[i].point.z} - q;
            const double d = norm(v);
            const double cos_d = q.y / d;
            const double cos_a = dot(normal_local_, v) / d;
            if (cos_d <= 0.0 || cos_a <= 0.0 || std::acos(std::min(cos_a, 1.0)) > receiver_.half_fov)
                return std::numeric_limits<double>::infinity();
            const double pred = led.optical_power * (led.lambertian_order + 1.0) / (2.0 * kPi) *
                                std::pow(cos_d, led.lambertian_order) * receiver_.area * receiver_.filter_gain *
                                gc * cos_a / (d * d);
            const double e = std::log(pred / measured[i]);
            ss += e * e;
        }
        return std::sqrt(ss / 4.0);
    }

    // Spread of log(predicted / measured) for a local candidate under the
    // known receiver orientation; infinite when a measured LED would be dark.
    double ratio_residual(const Vec3& q) const
    {
        std::array<double, 4> logs{};
        for (std::size_t i = 0; i < 4; ++i)
        {
            const Vec3 led{ordered_[i].point.x, 0.0, ordered_[i].point.z};
            const Vec3 v = led - q;
            const double d = norm(v);
            const double cos_d = q.y / d;
            const double cos_a = dot(normal_local_, v) / d;
            if (cos_d <= 0.0 || cos_a <= 0.0 || std::acos(std::min(cos_a, 1.0)) > receiver_.half_fov)
                return std::numeric_limits<double>::infinity();
            const double pred = std::pow(cos_d, order_) * cos_a / (d * d) * ordered_[i].led->optical_power;
            logs[i] = std::log(pred / ordered_[i].meas->p_r);
        }
        const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / 4.0;
        double ss = 0.0;
        for (double l : logs)
            ss += (l - mean) * (l - mean);
        return std::sqrt(ss / 4.0);
    }

    bool in_bounds(const Vec3& local) const
    {
        return !options_.bounds || options_.bounds->contains(frame_.invert(local), 1e-6);
    }

    // One closed-form pass for the given (possibly compensated) powers.
    Run solve_pass(const std::array<double, 4>& powers) const
    {
        Run r;
        const LedQuad q = quad();
        r.alphas = compute_alphas(powers, order_, model_);
        const ClosedFormSolution s = solve_closed_form(r.alphas, q, options_.epsilon);
        r.local = s.position;
        r.xis = s.xis;
        r.axis_swapped = s.axis_swapped;
        r.residual = ratio_residual(r.local);
        return r;
    }

    struct BetaFit
    {
        double beta = 0.0;
        double misfit = std::numeric_limits<double>::infinity();
        bool inside = false;
    };

    // Angle around the LED line for a given position along the line and
    // radius, fitted to the absolute received powers.
    BetaFit fit_beta(double x, double rho, double z_line, const std::array<double, 4>& measured) const
    {
        const auto point = [&](double beta) {
            return Vec3{x, rho * std::cos(beta), z_line + rho * std::sin(beta)};
        };
        constexpr int kGrid = 360;
        const double lo = -kPi / 2.0;
        const double h = kPi / kGrid;
        std::array<double, kGrid + 1> value{};
        for (int i = 1; i < kGrid; ++i)
            value[i] = absolute_misfit(point(lo + i * h), measured);
        value[0] = value[kGrid] = std::numeric_limits<double>::infinity();

        const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
        const auto refine = [&](int i) {
            double a = lo + (i - 1) * h;
            double b = lo + (i + 1) * h;
            double c1 = b - golden * (b - a);
            double c2 = a + golden * (b - a);
            double f1 = absolute_misfit(point(c1), measured);
            double f2 = absolute_misfit(point(c2), measured);
            for (int it = 0; it < 100 && b - a > 1e-13; ++it)
            {
                if (f1 <= f2)
                {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - golden * (b - a);
                    f1 = absolute_misfit(point(c1), measured);
                }
                else
                {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + golden * (b - a);
                    f2 = absolute_misfit(point(c2), measured);
                }
            }
            const double beta = 0.5 * (a + b);
            const double f = absolute_misfit(point(beta), measured);
            if (std::isfinite(f) && f <= value[i])
                return std::pair{beta, f};
            return std::pair{lo + i * h, value[i]};
        };

        BetaFit best;
        for (int i = 1; i < kGrid; ++i)
        {
            if (!std::isfinite(value[i]) || value[i] > value[i - 1] || value[i] > value[i + 1])
                continue;
            const auto [beta, f] = refine(i);
            const bool inside = in_bounds(point(beta));
            if ((inside && !best.inside) ||
                (inside == best.inside && better_candidate(f, beta, best.misfit, best.beta)))
                best = {beta, f, inside};
        }
        return best;
    }

    // Minima that explain the powers equally well are resolved toward the
    // LED-plane normal.
    static bool better_candidate(double misfit, double beta, double best_misfit, double best_beta)
    {
        constexpr double kTie = 1e-6;
        if (misfit < best_misfit - kTie)
            return true;
        return std::abs(misfit - best_misfit) <= kTie && std::abs(beta) < std::abs(best_beta);
    }

    // Collinear group. With the LEDs on the local x axis, P_i d_i^(m+3) / C_i
    // is affine in x_i for the true position along the line and the true
    // radius, whatever the angle around the line and the receiver tilt. The
    // pair (x, rho) is fitted to that law, which is blind to a common power
    // scale, and the angle then follows from the absolute powers.
    Run solve_collinear(const std::array<double, 4>& measured) const
    {
        const LedQuad q = quad();
        const double z_line = (q[0].z + q[1].z + q[2].z + q[3].z) / 4.0;
        const double gc = concentrator_gain(0.0, receiver_);
        const double exponent = order_ + 3.0;
        std::array<double, 4> scale{};
        for (std::size_t i = 0; i < 4; ++i)
        {
            const Led& led = *ordered_[i].led;
            scale[i] = led.optical_power * (led.lambertian_order + 1.0) / (2.0 * kPi) * receiver_.area *
                       receiver_.filter_gain * gc;
        }
        const auto affine_misfit = [&](double x, double rho) {
            if (!(rho > 0.0))
                return std::numeric_limits<double>::infinity();
            double suu = 0.0, suv = 0.0, svv = 0.0, su = 0.0, sv = 0.0;
            std::array<double, 4> u{}, v{};
            for (std::size_t i = 0; i < 4; ++i)
            {
                const double dx = x - q[i].x;
                const double d2 = dx * dx + rho * rho;
                const double value = measured[i] * std::pow(d2, exponent / 2.0) / scale[i];
                u[i] = q[i].x / value;
                v[i] = 1.0 / value;
                suu += u[i] * u[i];
                suv += u[i] * v[i];
                svv += v[i] * v[i];
                su += u[i];
                sv += v[i];
            }
            const double det = suu * svv - suv * suv;
            if (!(std::abs(det) > 1e-300))
                return std::numeric_limits<double>::infinity();
            const double a = (su * svv - sv * suv) / det;
            const double b = (suu * sv - suv * su) / det;
            double ss = 0.0;
            for (std::size_t i = 0; i < 4; ++i)
            {
                const double e = 1.0 - a * u[i] - b * v[i];
                ss += e * e;
            }
            return std::sqrt(ss / 4.0);
        };

        // Search window: the bounds box seen from the LED line, or a generous
        // room-sized window without bounds.
        double x_lo = std::min({q[0].x, q[1].x, q[2].x, q[3].x}) - 10.0;
        double x_hi = std::max({q[0].x, q[1].x, q[2].x, q[3].x}) + 10.0;
        double rho_hi = 10.0;
        if (options_.bounds)
        {
            const Box& b = *options_.bounds;
            x_lo = std::numeric_limits<double>::infinity();
            x_hi = -x_lo;
            rho_hi = 0.0;
            for (int c = 0; c < 8; ++c)
            {
                const Vec3 corner{(c & 1) ? b.hi.x : b.lo.x, (c & 2) ? b.hi.y : b.lo.y, (c & 4) ? b.hi.z : b.lo.z};
                const Vec3 l = frame_.apply(corner);
                x_lo = std::min(x_lo, l.x);
                x_hi = std::max(x_hi, l.x);
                rho_hi = std::max(rho_hi, std::hypot(l.y, l.z - z_line));
            }
            const double pad = 0.05 * (x_hi - x_lo + rho_hi) + 1e-3;
            x_lo -= pad;
            x_hi += pad;
            rho_hi += pad;
        }

        constexpr int kNx = 120;
        constexpr int kNr = 60;
        const double hx = (x_hi - x_lo) / kNx;
        const double hr = rho_hi / kNr;
        std::vector<double> grid(static_cast<std::size_t>((kNx + 1) * (kNr + 1)));
        const auto at = [&](int i, int j) -> double& { return grid[static_cast<std::size_t>(i * (kNr + 1) + j)]; };
        for (int i = 0; i <= kNx; ++i)
            for (int j = 0; j <= kNr; ++j)
                at(i, j) = affine_misfit(x_lo + i * hx, j * hr);

        std::vector<std::pair<double, std::pair<int, int>>> minima;
        for (int i = 0; i <= kNx; ++i)
            for (int j = 1; j <= kNr; ++j)
            {
                const double f = at(i, j);
                if (!std::isfinite(f))
                    continue;
                bool is_min = true;
                for (int di = -1; di <= 1 && is_min; ++di)
                    for (int dj = -1; dj <= 1 && is_min; ++dj)
                    {
                        const int a = i + di, b = j + dj;
                        if ((di || dj) && a >= 0 && a <= kNx && b >= 1 && b <= kNr && at(a, b) < f)
                            is_min = false;
                    }
                if (is_min)
                    minima.push_back({f, {i, j}});
            }
        std::sort(minima.begin(), minima.end());
        if (minima.size() > 12)
            minima.resize(12);

        // Far from the line the law is nearly affine for any x, so the descent
        // stays inside the window.
        const auto windowed = [&](double x, double rho) {
            if (x < x_lo || x > x_hi || rho > rho_hi)
                return std::numeric_limits<double>::infinity();
            return affine_misfit(x, rho);
        };

        Run best;
        best.residual = std::numeric_limits<double>::infinity();
        double best_beta = 0.0;
        bool best_inside = false;
        bool found = false;
        for (const auto& [f0, cell] : minima)
        {
            const auto [x, rho] = nelder_mead(windowed, x_lo + cell.first * hx, cell.second * hr, hx, hr);
            const BetaFit fit = fit_beta(x, rho, z_line, measured);
            if (!std::isfinite(fit.misfit))
                continue;
            const bool take = !found || (fit.inside && !best_inside) ||
                              (fit.inside == best_inside && better_candidate(fit.misfit, fit.beta, best.residual, best_beta));
            if (take)
            {
                found = true;
                best.local = {x, rho * std::cos(fit.beta), z_line + rho * std::sin(fit.beta)};
                best.residual = fit.misfit;
                best_beta = fit.beta;
                best_inside = fit.inside;
            }
        }
        if (!found)
            fail("no receiver placement around the LED line matches the measured powers",
                 {Constraint::negative_radicand});

        std::array<double, 4> comp{};
        for (std::size_t i = 0; i < 4; ++i)
        {
            const Vec3 v = Vec3{q[i].x, 0.0, q[i].z} - best.local;
            const double d = norm(v);
            comp[i] = measured[i] * std::max(best.local.y / d, 1e-12) / std::max(dot(normal_local_, v) / d, 1e-12);
        }
        best.alphas = compute_alphas(comp, order_, ExponentModel::parallel);
        best.xis = xi_coefficients(best.alphas, q);
        return best;
    }

    template <typename F>
    static std::pair<double, double> nelder_mead(const F& f, double x0, double y0, double hx, double hy)
    {
        std::array<std::array<double, 3>, 3> s{{{x0, y0, 0.0}, {x0 + hx, y0, 0.0}, {x0, y0 + hy, 0.0}}};
        for (auto& p : s)
            p[2] = f(p[0], p[1]);
        for (int it = 0; it < 400; ++it)
        {
            std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a[2] < b[2]; });
            const double size = std::max(std::abs(s[1][0] - s[0][0]) + std::abs(s[1][1] - s[0][1]),
                                         std::abs(s[2][0] - s[0][0]) + std::abs(s[2][1] - s[0][1]));
            if (size < 1e-13)
                break;
            const double cx = 0.5 * (s[0][0] + s[1][0]);
            const double cy = 0.5 * (s[0][1] + s[1][1]);
            const auto probe = [&](double t) {
                const double px = cx + t * (s[2][0] - cx);
                const double py = cy + t * (s[2][1] - cy);
                return std::array<double, 3>{px, py, f(px, py)};
            };
            const auto r = probe(-1.0);
            if (r[2] < s[0][2])
            {
                const auto e = probe(-2.0);
                s[2] = e[2] < r[2] ? e : r;
            }
            else if (r[2] < s[1][2])
            {
                s[2] = r;
            }
            else
            {
                const auto c = probe(r[2] < s[2][2] ? -0.5 : 0.5);
                if (c[2] < std::min(r[2], s[2][2]))
                {
                    s[2] = c;
                }
                else
                {
                    for (int k = 1; k < 3; ++k)
                    {
                        s[k][0] = 0.5 * (s[0][0] + s[k][0]);
                        s[k][1] = 0.5 * (s[0][1] + s[k][1]);
                        s[k][2] = f(s[k][0], s[k][1]);
                    }
                }
            }
        }
        std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a[2] < b[2]; });
        return {s[0][0], s[0][1]};
    }

    Run run_solver(const std::array<double, 4>& raw) const
    {
        if (collinear_)
            return solve_collinear(raw);
        Run r = solve_pass(raw);
        if (options_.mode != SolveMode::orientation_compensated)
            return r;
        r.converged = false;
        for (int it = 1; it <= options_.max_iterations; ++it)
        {
            std::array<double, 4> comp{};
            for (std::size_t i = 0; i < 4; ++i)
            {
                const Vec3 led{ordered_[i].point.x, 0.0, ordered_[i].point.z};
                const Vec3 v = led - r.local;
                const double d = norm(v);
                const double cos_a = std::max(dot(normal_local_, v) / d, 1e-3);
                const double cos_d = std::max(r.local.y / d, 1e-12);
                comp[i] = raw[i] * cos_d / cos_a;
            }
            Run next = solve_pass(comp);
            next.iterations = it;
            const double step = distance(next.local, r.local);
            r = next;
            if (step <= options_.convergence_tolerance)
            {
                r.converged = true;
                break;
            }
        }
        return r;
    }

    const LedGroup& group_;
    const PhotoDetector& receiver_;
    const LocalizerOptions& options_;
    std::vector<VisibleLed> visible_;
    std::array<VisibleLed, 4> ordered_{};
    PlacementValidity validity_;
    RigidTransform frame_;
    Vec3 normal_local_;
    double order_ = 1.0;
    double tilt_ = 0.0;
    bool parallel_ = false;
    bool collinear_ = false;
    ExponentModel model_ = ExponentModel::parallel;
};

} // namespace

LocalizationEstimate localize(std::span<const OpticalMeasurement> measurements,
                              std::span<const LedGroup> groups, const PhotoDetector& receiver,
                              const LocalizerOptions& options)
{
    std::vector<GroupOutcome> outcomes;
    std::vector<std::string> rejected;
    std::vector<Constraint> tags;
    for (const LedGroup& group : groups)
    {
        try
        {
            GroupSolver solver(group, measurements, receiver, options);
            outcomes.push_back(solver.solve());
        }
        catch (const LocalizationError& e)
        {
            rejected.push_back(group.name + ": " + e.what());
            for (Constraint t : e.tags())
                if (std::find(tags.begin(), tags.end(), t) == tags.end())
                    tags.push_back(t);
        }
    }
    if (outcomes.empty())
    {
        std::string what = "no valid LED subset";
        for (const auto& r : rejected)
            what += "; " + r;
        throw LocalizationError(what, std::move(tags));
    }

    const auto better = [](const GroupOutcome& a, const GroupOutcome& b) {
        const double sa = a.estimate.diagnostics.bias_sensitivity;
        const double sb = b.estimate.diagnostics.bias_sensitivity;
        const double tie = 1e-9 * std::max({1.0, std::isfinite(sa) ? sa : 0.0, std::isfinite(sb) ? sb : 0.0});
        if (std::abs(sa - sb) > tie || std::isinf(sa) != std::isinf(sb))
            return sa < sb;
        return a.margin > b.margin;
    };
    auto best = outcomes.begin();
    for (auto it = outcomes.begin() + 1; it != outcomes.end(); ++it)
        if (better(*it, *best))
            best = it;
    LocalizationEstimate est = std::move(best->estimate);
    est.diagnostics.rejected_groups = std::move(rejected);
    return est;
}

} // namespace leris
