#include "weekcast/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace weekcast {

namespace {

double curve(const SynthSpec& spec, double t) {
  return spec.base + spec.slope * t +
         spec.amplitude * std::sin(2.0 * std::numbers::pi * t / spec.period);
}

}  // namespace

double synth_open(const SynthSpec& spec, std::size_t t) {
  return curve(spec, static_cast<double>(t));
}

Series synth_series(const SynthSpec& spec) {
  if (spec.days < 1) throw ConfigError("synth: days must be >= 1");
  if (spec.period <= 0.0) throw ConfigError("synth: period must be positive");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Series series;
  series.reserve(spec.days);
  Date date = spec.start;
  for (std::size_t t = 0; t < spec.days; ++t) {
    while (weekday(date) == 0 || weekday(date) == 6) date = next_day(date);
    DailyRecord r;
    r.date = date;
    r.open = curve(spec, static_cast<double>(t));
    r.close = curve(spec, static_cast<double>(t) + 0.5);
    if (spec.noise > 0.0) {
      r.open += spec.noise * gauss(rng);
      r.close += spec.noise * gauss(rng);
    }
    double spread = 0.1 * std::fabs(spec.amplitude);
    if (spec.noise > 0.0) spread += std::fabs(spec.noise * gauss(rng));
    r.high = std::max(r.open, r.close) + spread;
    r.low = std::min(r.open, r.close) - spread;
    r.volume = 100000 + 137 * static_cast<std::int64_t>(t);
    if (r.low <= 0.0)
      throw ConfigError("synth: prices fell to " + std::to_string(r.low) +
                        "; raise base relative to slope/amplitude/noise");
    series.push_back(r);
    date = next_day(date);
  }
  return series;
}

std::string synth_csv(const SynthSpec& spec) { return to_csv(synth_series(spec)); }

}  // namespace weekcast
