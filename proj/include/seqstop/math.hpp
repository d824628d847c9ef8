#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace seqstop {

inline double norm_pdf(double x) {
  // 1/sqrt(2*pi)
  return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

// erfc-based so both tails keep full relative precision.
inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Pairwise summation. Fixed recursion order, so results are reproducible
// bit-for-bit and the error grows like log(n) instead of n.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("mean_se: empty sample");
  MeanSe r;
  r.mean = pairwise_sum(v) / double(n);
  if (n == 1) return r;
  std::vector<double> dev2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - r.mean;
    dev2[i] = d * d;
  }
  const double var = pairwise_sum(dev2) / double(n - 1);
  r.se = std::sqrt(var / double(n));
  return r;
}

}  // namespace seqstop
