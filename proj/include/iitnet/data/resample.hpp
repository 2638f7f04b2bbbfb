#pragma once

#include <vector>

namespace iitnet::data {

// Rational-ratio resampling via zero-stuffing, windowed-sinc low-pass, and
// decimation. The ratio rate_out/rate_in must be rational (true for any pair
// of EDF sample rates); edges are treated as zero-padded. Output length is
// round(n * rate_out / rate_in). Per-phase tap normalization makes constant
// signals resample to themselves.
std::vector<double> resample(const std::vector<double>& x, double rate_in,
                             double rate_out);

}  // namespace iitnet::data
