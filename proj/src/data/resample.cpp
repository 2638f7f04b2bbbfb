#include "iitnet/data/resample.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace iitnet::data {

namespace {

// Reduce rate_out/rate_in to a small integer ratio up/down.
void rational_ratio(double rate_in, double rate_out, long long* up, long long* down) {
  if (!(rate_in > 0.0) || !(rate_out > 0.0))
    throw std::invalid_argument("resample: rates must be positive");
  const auto a = static_cast<long long>(std::llround(rate_out * 1e6));
  const auto b = static_cast<long long>(std::llround(rate_in * 1e6));
  const long long g = std::gcd(a, b);
  *up = a / g;
  *down = b / g;
  const double err = std::abs(static_cast<double>(*up) / static_cast<double>(*down) -
                              rate_out / rate_in);
  if (err > 1e-9 * (rate_out / rate_in))
    throw std::invalid_argument("resample: rate ratio is not rational");
}

}  // namespace

std::vector<double> resample(const std::vector<double>& x, double rate_in,
                             double rate_out) {
  long long up = 0, down = 0;
  rational_ratio(rate_in, rate_out, &up, &down);
  if (up == down) return x;

  const auto n = static_cast<long long>(x.size());
  const auto out_len = static_cast<long long>(
      std::llround(static_cast<double>(n) * up / static_cast<double>(down)));
  std::vector<double> y(static_cast<size_t>(out_len), 0.0);
  if (n == 0 || out_len == 0) return y;

  // Anti-alias/anti-image low-pass at the upsampled rate: cutoff pi/max(up,down),
  // Blackman window (passband ripple ~2e-4), 12 sinc lobes per side.
  const long long stretch = std::max(up, down);
  const long long half = 12 * stretch;
  const double cutoff = 1.0 / static_cast<double>(stretch);  // fraction of Nyquist
  std::vector<double> h(static_cast<size_t>(2 * half + 1));
  for (long long j = -half; j <= half; ++j) {
    const double t = cutoff * static_cast<double>(j);
    const double sinc = j == 0 ? 1.0 : std::sin(M_PI * t) / (M_PI * t);
    const double phase = M_PI * static_cast<double>(j) / static_cast<double>(half);
    const double window = 0.42 + 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
    h[static_cast<size_t>(j + half)] = cutoff * sinc * window;
  }
  // Normalize each polyphase branch to sum 1/up so DC passes through exactly
  // (the up-fold gain below restores unity).
  for (long long p = 0; p < up; ++p) {
    double s = 0.0;
    for (long long j = p; j < 2 * half + 1; j += up) s += h[static_cast<size_t>(j)];
    const double scale = 1.0 / (static_cast<double>(up) * s);
    for (long long j = p; j < 2 * half + 1; j += up) h[static_cast<size_t>(j)] *= scale;
  }

  // Output sample k sits at position k*down on the up-stuffed time axis; only
  // input samples m with |k*down - m*up| <= half contribute.
  for (long long k = 0; k < out_len; ++k) {
    const long long t = k * down;
    const long long m_lo = t >= half ? (t - half + up - 1) / up : 0;
    const long long m_hi = std::min((t + half) / up, n - 1);
    double acc = 0.0;
    for (long long m = m_lo; m <= m_hi; ++m) {
      const long long j = t - m * up;
      acc += x[static_cast<size_t>(m)] * h[static_cast<size_t>(j + half)];
    }
    y[static_cast<size_t>(k)] = static_cast<double>(up) * acc;
  }
  return y;
}

}  // namespace iitnet::data
