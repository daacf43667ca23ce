#pragma once

#include "leris/optical_channel.hpp"

namespace leris
{

// Von Mises distribution on the circle, sampled with the Best-Fisher
// rejection method. kappa = 0 gives the uniform distribution on [-pi, pi).
class VonMises
{
  public:
    explicit VonMises(double mu = 0.0, double kappa = 0.0);

    double mu() const { return mu_; }
    double kappa() const { return kappa_; }

    // Sample wrapped to [-pi, pi).
    double operator()(Rng& rng) const;

  private:
    double mu_;
    double kappa_;
    double r_ = 0.0;
};

// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

} // namespace leris
