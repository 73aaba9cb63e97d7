#pragma once

#include <cstdint>

#include "weekcast/data.hpp"

namespace weekcast {

// Trend plus weekly seasonality:
//   open(t)  = base + slope*t + amplitude*sin(2*pi*t/period)
//   close(t) = the same curve evaluated at t + 0.5
// With noise > 0, each open/close gains an independent normal deviate scaled
// by `noise`. high/low bracket open and close by a spread of
// 0.1*|amplitude| plus a non-negative noise term, so generated rows always
// satisfy low <= open, close <= high. Dates are consecutive weekdays.
struct SynthSpec {
  std::size_t days = 300;
  double base = 100.0;
  double slope = 0.1;
  double amplitude = 5.0;
  double period = 5.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  Date start{2015, 1, 5};  // a Monday
};

// The deterministic open curve (noise excluded).
double synth_open(const SynthSpec& spec, std::size_t t);

Series synth_series(const SynthSpec& spec);
std::string synth_csv(const SynthSpec& spec);

}  // namespace weekcast
