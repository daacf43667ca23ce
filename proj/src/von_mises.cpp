#include "leris/von_mises.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leris
{

double wrap_angle(double a)
{
    double w = std::fmod(a + kPi, 2.0 * kPi);
    if (w < 0.0)
        w += 2.0 * kPi;
    return w - kPi;
}

VonMises::VonMises(double mu, double kappa) : mu_(mu), kappa_(kappa)
{
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
        throw std::invalid_argument("Von Mises concentration must be finite and >= 0");
    if (kappa > 0.0)
    {
        const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
        const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
        r_ = (1.0 + rho * rho) / (2.0 * rho);
    }
}

double VonMises::operator()(Rng& rng) const
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (kappa_ == 0.0)
        return wrap_angle(mu_ - kPi + 2.0 * kPi * unit(rng));
    for (;;)
    {
        const double u1 = unit(rng);
        const double u2 = unit(rng);
        const double u3 = unit(rng);
        const double z = std::cos(kPi * u1);
        const double f = (1.0 + r_ * z) / (r_ + z);
        const double c = kappa_ * (r_ - f);
        if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0)
        {
            const double theta = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
            return wrap_angle(mu_ + theta);
        }
    }
}

} // namespace leris
