#pragma once

// Reference computation of the per-class and overall scores, independent of
// the library implementation. Works in exact integer arithmetic as long as
// possible: kappa is the ratio of two exact integers (agreement counting
// over predicted/true marginal pairs), per-class scores are direct tallies.

#include <array>
#include <cstdint>

namespace testsupport {

struct OracleResult {
  std::array<long double, 5> precision{};
  std::array<long double, 5> recall{};
  std::array<long double, 5> f1{};
  long double accuracy = 0;
  long double mf1 = 0;
  long double kappa = 0;
};

// counts[p][t]: rows predicted, columns true.
inline OracleResult metrics_oracle(const long long (&counts)[5][5]) {
  OracleResult r;
  long long total = 0, diag = 0;
  long long row[5] = {0, 0, 0, 0, 0};
  long long col[5] = {0, 0, 0, 0, 0};
  for (int p = 0; p < 5; ++p)
    for (int t = 0; t < 5; ++t) {
      total += counts[p][t];
      row[p] += counts[p][t];
      col[t] += counts[p][t];
      if (p == t) diag += counts[p][t];
    }

  for (int i = 0; i < 5; ++i) {
    r.precision[i] =
        row[i] > 0 ? static_cast<long double>(counts[i][i]) / row[i] : 0.0L;
    r.recall[i] = col[i] > 0 ? static_cast<long double>(counts[i][i]) / col[i] : 0.0L;
    const long double denom = r.precision[i] + r.recall[i];
    r.f1[i] = denom > 0 ? 2.0L * r.precision[i] * r.recall[i] / denom : 0.0L;
    r.mf1 += r.f1[i] / 5.0L;
  }
  r.accuracy = static_cast<long double>(diag) / total;

  // Chance agreement via marginal pair counting: out of total^2 pairs of one
  // predicted and one true label, sum_i row_i*col_i agree. Then
  // kappa = (p_o - p_e) / (1 - p_e) = (total*diag - S) / (total^2 - S).
  long long S = 0;
  for (int i = 0; i < 5; ++i) S += row[i] * col[i];
  const long long numer = total * diag - S;
  const long long denom = total * total - S;
  if (denom == 0) {
    r.kappa = diag == total ? 1.0L : 0.0L;
  } else {
    r.kappa = static_cast<long double>(numer) / static_cast<long double>(denom);
  }
  return r;
}

}  // namespace testsupport
