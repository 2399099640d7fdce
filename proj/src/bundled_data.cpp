#include "copaug/experiment.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace copaug {

namespace {

// One year of high-frequency records.
constexpr double kSpanDays = 365.0;

constexpr double kTempMean = 17.0;
constexpr double kTempSeasonal = 6.5;
constexpr double kTempDiurnal = 0.6;
constexpr double kTempNoise = 0.8;
constexpr double kTempPhaseDays = 110.0;

constexpr double kSalMean = 37.6;
constexpr double kSalPerDegree = -0.11;
constexpr double kSalNoise = 0.35;

constexpr double kUvbScale = 28.0;
constexpr double kUvbSeasonal = 0.45;
constexpr double kUvbLogSd = 0.55;

constexpr double kChlaBase = 0.6;
constexpr double kChlaBloom = 2.4;
constexpr double kChlaBloomCenter = 20.5;
constexpr double kChlaBloomWidth = 1.4;
constexpr double kChlaSalinity = 0.35;
constexpr double kChlaUv = -0.004;
constexpr double kChlaLogSd = 0.10;
constexpr double kChlaLogSdPerUnit = 0.03;

}  // namespace

Table make_bundled_dataset(Index n, std::uint64_t seed, double missing_fraction) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "bundled dataset needs n >= 1");
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "missing fraction must lie in [0, 1)");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);
  MatrixXd v(n, 4);
  for (Index i = 0; i < n; ++i) {
    const double day = kSpanDays * static_cast<double>(i) / static_cast<double>(n);
    const double season = std::sin(two_pi * (day - kTempPhaseDays) / kSpanDays);
    const double diurnal = std::sin(two_pi * day);

    const double temp =
        kTempMean + kTempSeasonal * season + kTempDiurnal * diurnal + kTempNoise * rng.normal();
    const double sal = kSalMean + kSalPerDegree * (temp - kTempMean) + kSalNoise * rng.normal();
    const double uvb =
        kUvbScale * (1.0 + kUvbSeasonal * season) * std::exp(kUvbLogSd * rng.normal());

    const double bloom = kChlaBloom / (1.0 + std::exp(-(temp - kChlaBloomCenter) / kChlaBloomWidth));
    const double signal = kChlaBase + bloom + kChlaSalinity * (kSalMean - sal) * (kSalMean - sal) +
                          kChlaUv * uvb;
    const double log_sd = kChlaLogSd + kChlaLogSdPerUnit * signal;
    const double chla = std::max(signal, 0.05) * std::exp(log_sd * rng.normal());

    v(i, 0) = temp;
    v(i, 1) = sal;
    v(i, 2) = uvb;
    v(i, 3) = chla;
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 4; ++j) {
      if (rng.uniform() < missing_fraction) v(i, j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return Table({"temp", "sal", "uvb", "chla"}, std::move(v), kBundledTarget);
}

}  // namespace copaug
