#include "leris/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "leris/von_mises.hpp"

namespace leris
{

double zeta(int m, int n, double theta, double phi, const RisPanel& panel)
{
    const Vec3 c = panel.actual_center();
    const double s = std::sin(theta);
    return panel.element_side * s * ((m - 0.5) * std::cos(phi) + (n - 0.5) * std::sin(phi)) +
           c.x * s * std::cos(phi) + c.z * std::cos(theta);
}

double omega(int m, const Vec3& ap, const RisPanel& panel, const SteeringAngles& angles,
             const Vec3& center)
{
    const double shift = panel.element_side * (m - 0.5) * std::sin(angles.theta);
    const double dx = ap.x - shift * std::cos(angles.phi) - center.x;
    const double dy = ap.y - center.y;
    const double dz = ap.z - shift * std::sin(angles.phi) - center.z;
    return panel.wavenumber() * std::sqrt(dx * dx + dy * dy + dz * dz);
}

double omega(int m, const Vec3& ap, const RisPanel& panel, const SteeringAngles& angles)
{
    return omega(m, ap, panel, angles, panel.actual_center());
}

PhaseProfile steering_profile(const SteeringAngles& steer, const RisPanel& panel, const Vec3& ap,
                              Rng& rng)
{
    PhaseProfile p;
    p.rows = panel.rows;
    p.cols = panel.cols;
    p.phases.resize(static_cast<std::size_t>(panel.element_count()));
    const double k0d = panel.wavenumber() * panel.element_side;
    const double a = std::cos(steer.phi) * std::sin(steer.theta);
    const double b = std::sin(steer.phi) * std::sin(steer.theta);
    const VonMises hw(0.0, panel.kappa_hw);
    std::size_t idx = 0;
    for (int m = 1; m <= panel.rows; ++m)
    {
        const double w = omega(m, ap, panel, steer, panel.center);
        for (int n = 1; n <= panel.cols; ++n)
        {
            double phase = -k0d * (m * a + n * b) - w;
            if (panel.hardware_noise)
                phase -= hw(rng);
            p.phases[idx++] = wrap_angle(phase);
        }
    }
    return p;
}

PhaseProfile random_profile(const RisPanel& panel, Rng& rng)
{
    PhaseProfile p;
    p.rows = panel.rows;
    p.cols = panel.cols;
    p.phases.resize(static_cast<std::size_t>(panel.element_count()));
    const VonMises uniform(0.0, 0.0);
    for (double& v : p.phases)
        v = uniform(rng);
    return p;
}

FarFieldKernel::FarFieldKernel(const PhaseProfile& profile, const RisPanel& panel, const Vec3& ap)
    : panel_(panel), ap_(ap), true_center_(panel.actual_center()), k0_(panel.wavenumber())
{
    if (profile.rows != panel.rows || profile.cols != panel.cols)
        throw std::invalid_argument("phase profile does not match the panel size");
    coeff_re_.resize(profile.phases.size());
    coeff_im_.resize(profile.phases.size());
    for (std::size_t i = 0; i < profile.phases.size(); ++i)
    {
        coeff_re_[i] = std::cos(profile.phases[i]);
        coeff_im_[i] = std::sin(profile.phases[i]);
    }
}

std::complex<double> FarFieldKernel::at(double theta, double phi) const
{
    std::complex<double> sum{0.0, 0.0};
    const SteeringAngles dir{theta, phi};
    std::size_t idx = 0;
    for (int m = 1; m <= panel_.rows; ++m)
    {
        const double w = omega(m, ap_, panel_, dir, true_center_);
        for (int n = 1; n <= panel_.cols; ++n, ++idx)
        {
            const double phase = k0_ * zeta(m, n, theta, phi, panel_) + w;
            sum += std::polar(1.0, phase) * std::complex<double>(coeff_re_[idx], coeff_im_[idx]);
        }
    }
    return sum;
}

void FarFieldKernel::row_power(double theta, std::span<const double> phis, std::span<double> out) const
{
    const std::size_t count = phis.size();
    const int rows = panel_.rows;
    const int cols = panel_.cols;
    const double kds = k0_ * panel_.element_side * std::sin(theta);
    const double shift_unit = panel_.element_side * std::sin(theta);
    const double dy = ap_.y - true_center_.y;

    std::vector<double> cos_phi(count), sin_phi(count);
    for (std::size_t j = 0; j < count; ++j)
    {
        cos_phi[j] = std::cos(phis[j]);
        sin_phi[j] = std::sin(phis[j]);
    }

    // Column phasors exp(j k0 D sin(theta) (n - 1/2) sin(phi)), built by recurrence.
    std::vector<double> col_re(static_cast<std::size_t>(cols) * count);
    std::vector<double> col_im(col_re.size());
    for (std::size_t j = 0; j < count; ++j)
    {
        const double step = kds * sin_phi[j];
        const double sr = std::cos(step), si = std::sin(step);
        double re = std::cos(0.5 * step), im = std::sin(0.5 * step);
        for (int n = 0; n < cols; ++n)
        {
            col_re[static_cast<std::size_t>(n) * count + j] = re;
            col_im[static_cast<std::size_t>(n) * count + j] = im;
            const double nr = re * sr - im * si;
            im = re * si + im * sr;
            re = nr;
        }
    }

    std::vector<double> f_re(count, 0.0), f_im(count, 0.0);
    std::vector<double> acc_re(count), acc_im(count);
    for (int m = 0; m < rows; ++m)
    {
        std::fill(acc_re.begin(), acc_re.end(), 0.0);
        std::fill(acc_im.begin(), acc_im.end(), 0.0);
        const double* cre = &coeff_re_[static_cast<std::size_t>(m) * cols];
        const double* cim = &coeff_im_[static_cast<std::size_t>(m) * cols];
        for (int n = 0; n < cols; ++n)
        {
            const double a = cre[n], b = cim[n];
            const double* br = &col_re[static_cast<std::size_t>(n) * count];
            const double* bi = &col_im[static_cast<std::size_t>(n) * count];
            double* __restrict ar = acc_re.data();
            double* __restrict ai = acc_im.data();
            for (std::size_t j = 0; j < count; ++j)
            {
                ar[j] += a * br[j] - b * bi[j];
                ai[j] += a * bi[j] + b * br[j];
            }
        }
        const double half = m + 0.5;
        const double shift = shift_unit * half;
        for (std::size_t j = 0; j < count; ++j)
        {
            const double dx = ap_.x - shift * cos_phi[j] - true_center_.x;
            const double dz = ap_.z - shift * sin_phi[j] - true_center_.z;
            const double phase = kds * half * cos_phi[j] + k0_ * std::sqrt(dx * dx + dy * dy + dz * dz);
            const double pr = std::cos(phase), pi = std::sin(phase);
            f_re[j] += pr * acc_re[j] - pi * acc_im[j];
            f_im[j] += pr * acc_im[j] + pi * acc_re[j];
        }
    }
    for (std::size_t j = 0; j < count; ++j)
        out[j] = f_re[j] * f_re[j] + f_im[j] * f_im[j];
}

std::complex<double> far_field(double theta, double phi, const PhaseProfile& profile,
                               const RisPanel& panel, const Vec3& ap)
{
    return FarFieldKernel(profile, panel, ap).at(theta, phi);
}

QuadratureError::QuadratureError(const std::string& what, double coarse, double fine)
    : std::runtime_error(what), coarse_(coarse), fine_(fine)
{
}

namespace
{

struct Nodes
{
    std::vector<double> x;
    std::vector<double> w;
};

Nodes midpoint_nodes(double lo, double hi, int count)
{
    Nodes out;
    const double h = (hi - lo) / count;
    for (int i = 0; i < count; ++i)
    {
        out.x.push_back(lo + (i + 0.5) * h);
        out.w.push_back(h);
    }
    return out;
}

Nodes gauss_legendre_nodes(double lo, double hi, int count)
{
    Nodes out;
    const unsigned n = static_cast<unsigned>(count);
    for (unsigned i = 1; i <= n; ++i)
    {
        double x = std::cos(kPi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it)
        {
            const double p = std::legendre(n, x);
            dp = n * (x * p - std::legendre(n - 1, x)) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        const double p1 = std::legendre(n - 1, x);
        dp = n * (x * std::legendre(n, x) - p1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.x.push_back(0.5 * (hi - lo) * x + 0.5 * (hi + lo));
        out.w.push_back(0.5 * (hi - lo) * w);
    }
    return out;
}

double integrate(const FarFieldKernel& kernel, QuadratureRule rule, double step_deg)
{
    const int n_theta = std::max(1, static_cast<int>(std::lround(90.0 / step_deg)));
    const int n_phi = std::max(1, static_cast<int>(std::lround(360.0 / step_deg)));
    const Nodes theta = rule == QuadratureRule::midpoint ? midpoint_nodes(0.0, kPi / 2.0, n_theta)
                                                         : gauss_legendre_nodes(0.0, kPi / 2.0, n_theta);
    const Nodes phi = midpoint_nodes(0.0, 2.0 * kPi, n_phi);
    std::vector<double> row(phi.x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < theta.x.size(); ++i)
    {
        kernel.row_power(theta.x[i], phi.x, row);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j)
            s += row[j] * phi.w[j];
        total += s * std::sin(theta.x[i]) * theta.w[i];
    }
    return total;
}

} // namespace

double pattern_integral(const FarFieldKernel& kernel, const Quadrature& quadrature)
{
    if (!(quadrature.step_deg > 0.0) || quadrature.step_deg > 90.0)
        throw std::invalid_argument("quadrature step must be in (0, 90] degrees");
    const double coarse = integrate(kernel, quadrature.rule, quadrature.step_deg);
    if (!quadrature.check_convergence)
        return coarse;
    const double fine = integrate(kernel, quadrature.rule, quadrature.step_deg / 2.0);
    const double change = std::abs(fine - coarse) / std::abs(fine);
    if (!(change <= quadrature.tolerance))
        throw QuadratureError(fmt::format("pattern integral did not converge: {:.6g} at {} deg, "
                                          "{:.6g} at {} deg (relative change {:.3g} > {:.3g})",
                                          coarse, quadrature.step_deg, fine, quadrature.step_deg / 2.0,
                                          change, quadrature.tolerance),
                              coarse, fine);
    return coarse;
}

GainPattern::GainPattern(const PhaseProfile& profile, const RisPanel& panel, const Vec3& ap,
                         const Quadrature& quadrature)
    : panel_(panel), kernel_(profile, panel, ap)
{
    Quadrature q = quadrature;
    if (q.check_convergence)
    {
        q.check_convergence = false;
        const double coarse = pattern_integral(kernel_, q);
        q.step_deg /= 2.0;
        const double fine = pattern_integral(kernel_, q);
        change_ = std::abs(fine - coarse) / std::abs(fine);
        if (!(change_ <= quadrature.tolerance))
            throw QuadratureError(fmt::format("pattern integral did not converge: relative change "
                                              "{:.3g} > {:.3g} when halving {} deg",
                                              change_, quadrature.tolerance, quadrature.step_deg),
                                  coarse, fine);
        denominator_ = coarse;
    }
    else
    {
        denominator_ = pattern_integral(kernel_, q);
    }
}

double GainPattern::gain(double theta, double phi) const
{
    const double f = std::norm(kernel_.at(theta, phi));
    return panel_.efficiency * 4.0 * kPi * f / denominator_;
}

double gain(double theta_u, double phi_u, const PhaseProfile& profile, const RisPanel& panel,
            const Vec3& ap, const Quadrature& quadrature)
{
    return GainPattern(profile, panel, ap, quadrature).gain(theta_u, phi_u);
}

double effective_area(const RisPanel& panel, double wavelength)
{
    return panel.rows * panel.cols * panel.element_gain * wavelength * wavelength / (4.0 * kPi);
}

double path_loss(double d1, double d2, double wavelength, double reference_distance)
{
    if (!(d1 > 0.0) || !(d2 > 0.0) || !(reference_distance > 0.0))
        throw std::invalid_argument("path-loss distances must be positive");
    const double c0 = wavelength * wavelength / std::pow(4.0 * kPi * reference_distance, 2.0);
    const double r = c0 / (d1 * d2);
    return r * r;
}

double spectral_efficiency(const LinkBudget& b, double ris_gain)
{
    if (!(b.noise_power > 0.0))
        throw std::invalid_argument("noise power must be positive");
    const double lp = path_loss(b.d1, b.d2, b.wavelength, b.reference_distance);
    const double snr = lp * b.tx_gain * b.rx_gain * b.tx_power * b.effective_area * ris_gain / b.noise_power;
    return std::log2(1.0 + snr);
}

void write_beam_pattern_csv(std::ostream& os, const GainPattern& pattern, double grid_step_deg)
{
    if (!(grid_step_deg > 0.0))
        throw std::invalid_argument("grid step must be positive");
    const int n_phi = static_cast<int>(std::lround(360.0 / grid_step_deg));
    const int n_theta = static_cast<int>(std::lround(90.0 / grid_step_deg));
    std::vector<double> phis(static_cast<std::size_t>(n_phi));
    for (int j = 0; j < n_phi; ++j)
        phis[static_cast<std::size_t>(j)] = deg_to_rad(j * grid_step_deg);
    std::vector<double> power(phis.size());
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_theta) + 1);
    for (int i = 0; i <= n_theta; ++i)
    {
        pattern.kernel().row_power(deg_to_rad(i * grid_step_deg), phis, power);
        rows[static_cast<std::size_t>(i)] = power;
    }
    const double scale = pattern.kernel_scale();
    os << "phi_deg,theta_deg,F_mag,gain_db\n";
    for (int j = 0; j < n_phi; ++j)
        for (int i = 0; i <= n_theta; ++i)
        {
            const double f2 = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double g = scale * f2;
            const double db = g > 0.0 ? 10.0 * std::log10(g) : -300.0;
            os << fmt::format("{:.6f},{:.6f},{:.9g},{:.6f}\n", j * grid_step_deg, i * grid_step_deg,
                              std::sqrt(f2), db);
        }
}

} // namespace leris
