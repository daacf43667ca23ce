#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "leris/geometry.hpp"
#include "leris/optical_channel.hpp"

namespace leris
{

// M x N panel of square elements on the y = 0 wall. `center` is where the
// configurator believes the panel is; the panel actually sits at
// center + position_offset.
struct RisPanel
{
    int rows = 40; // M
    int cols = 40; // N
    double wavelength = 0.125;
    double element_side = 0.0625; // D
    Vec3 center{5.0, 0.0, 1.5};
    double efficiency = 1.0;   // eta_eff
    double element_gain = 1.0; // G_e
    bool hardware_noise = false;
    double kappa_hw = 0.0;
    Vec3 position_offset{};

    double wavenumber() const { return 2.0 * kPi / wavelength; }
    Vec3 actual_center() const { return center + position_offset; }
    int element_count() const { return rows * cols; }
};

// Element phases Phi_mn, row-major with m (1..M) as the slow index, stored
// modulo 2 pi in [-pi, pi).
struct PhaseProfile
{
    int rows = 0;
    int cols = 0;
    std::vector<double> phases;

    double at(int m, int n) const { return phases[static_cast<std::size_t>((m - 1) * cols + (n - 1))]; }
};

// Path-length term of element (m, n) toward radiation direction (theta, phi),
// using the actual panel center.
double zeta(int m, int n, double theta, double phi, const RisPanel& panel);

// Impinging phase of row m for an AP at `ap`, evaluated at the direction
// (theta, phi) for a panel centred at `center`. It does not depend on n.
double omega(int m, const Vec3& ap, const RisPanel& panel, const SteeringAngles& angles,
             const Vec3& center);

// Same, for the actual panel center.
double omega(int m, const Vec3& ap, const RisPanel& panel, const SteeringAngles& angles);

// Steering configuration toward an estimated direction, built from the
// assumed center. Hardware phase errors are drawn per element when enabled.
PhaseProfile steering_profile(const SteeringAngles& steer, const RisPanel& panel, const Vec3& ap,
                              Rng& rng);

// Fully random phases (the diffuse mode of the surface).
PhaseProfile random_profile(const RisPanel& panel, Rng& rng);

// Far-field function F(theta, phi) of a configured panel.
std::complex<double> far_field(double theta, double phi, const PhaseProfile& profile,
                               const RisPanel& panel, const Vec3& ap);

// Evaluates |F|^2 along rows of constant theta. Reuses per-element work
// across a whole row of azimuths.
class FarFieldKernel
{
  public:
    FarFieldKernel(const PhaseProfile& profile, const RisPanel& panel, const Vec3& ap);

    std::complex<double> at(double theta, double phi) const;

    // out[j] = |F(theta, phis[j])|^2
    void row_power(double theta, std::span<const double> phis, std::span<double> out) const;

  private:
    RisPanel panel_;
    Vec3 ap_;
    Vec3 true_center_;
    double k0_;
    std::vector<double> coeff_re_;
    std::vector<double> coeff_im_;
};

enum class QuadratureRule
{
    midpoint,
    gauss_legendre, // Gauss-Legendre in theta, midpoint in phi
};

struct Quadrature
{
    QuadratureRule rule = QuadratureRule::midpoint;
    double step_deg = 0.5;
    bool check_convergence = false;
    double tolerance = 0.005; // relative change allowed when halving the step
};

class QuadratureError : public std::runtime_error
{
  public:
    QuadratureError(const std::string& what, double coarse, double fine);
    double coarse() const { return coarse_; }
    double fine() const { return fine_; }

  private:
    double coarse_;
    double fine_;
};

// Integral of |F|^2 sin(theta) over theta in [0, pi/2], phi in [0, 2 pi).
double pattern_integral(const FarFieldKernel& kernel, const Quadrature& quadrature);

// Gain evaluator with the normalisation integral computed once per profile.
class GainPattern
{
  public:
    GainPattern(const PhaseProfile& profile, const RisPanel& panel, const Vec3& ap,
                const Quadrature& quadrature = {});

    double gain(double theta, double phi) const;
    double gain(const SteeringAngles& direction) const { return gain(direction.theta, direction.phi); }
    double denominator() const { return denominator_; }
    double convergence_change() const { return change_; }
    const FarFieldKernel& kernel() const { return kernel_; }
    // Factor turning |F|^2 into gain.
    double kernel_scale() const { return panel_.efficiency * 4.0 * kPi / denominator_; }

  private:
    RisPanel panel_;
    FarFieldKernel kernel_;
    double denominator_ = 0.0;
    double change_ = 0.0;
};

double gain(double theta_u, double phi_u, const PhaseProfile& profile, const RisPanel& panel,
            const Vec3& ap, const Quadrature& quadrature = {});

double effective_area(const RisPanel& panel, double wavelength);

double path_loss(double d1, double d2, double wavelength, double reference_distance);

struct LinkBudget
{
    double tx_gain = 1.0; // G_t
    double rx_gain = 1.0; // G_r
    double tx_power = 1.0; // P_t, W
    double noise_power = 1e-16; // sigma_n^2, W
    double wavelength = 0.125;
    double reference_distance = 1.0; // d_0
    double d1 = 1.0; // AP to panel center
    double d2 = 1.0; // panel center to UE
    double effective_area = 0.0;
};

// log2(1 + l_p G_t G_r P_t A_eff G / sigma^2)
double spectral_efficiency(const LinkBudget& budget, double ris_gain);

// Writes `phi_deg,theta_deg,F_mag,gain_db` over phi in [0, 360), theta in [0, 90].
void write_beam_pattern_csv(std::ostream& os, const GainPattern& pattern, double grid_step_deg);

} // namespace leris
