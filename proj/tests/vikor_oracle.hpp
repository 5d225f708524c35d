#pragma once

// Straight-line VIKOR written from the textbook formulas, sharing no code
// with the library. Plain arrays and vectors, no Eigen.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace oracle {

// f is row-major n x m. Writes S, R, Q (length n). Returns false when every
// column is constant across two or more rows (nothing to rank on).
inline bool indices(const double* f, int n, int m, const double* w, const bool* benefit, double v, double* S,
                    double* R, double* Q) {
  for (int i = 0; i < n; ++i) S[i] = R[i] = Q[i] = 0.0;
  int live = 0;
  for (int j = 0; j < m; ++j) {
    double hi = f[j], lo = f[j];
    for (int i = 1; i < n; ++i) {
      hi = std::max(hi, f[i * m + j]);
      lo = std::min(lo, f[i * m + j]);
    }
    if (hi == lo) continue;  // degenerate column adds nothing
    ++live;
    const double best = benefit[j] ? hi : lo;
    const double worst = benefit[j] ? lo : hi;
    for (int i = 0; i < n; ++i) {
      const double t = w[j] * (best - f[i * m + j]) / (best - worst);
      S[i] += t;
      if (t > R[i]) R[i] = t;
    }
  }
  if (n >= 2 && live == 0) return false;

  double s_star = S[0], s_minus = S[0], r_star = R[0], r_minus = R[0];
  for (int i = 1; i < n; ++i) {
    s_star = std::min(s_star, S[i]);
    s_minus = std::max(s_minus, S[i]);
    r_star = std::min(r_star, R[i]);
    r_minus = std::max(r_minus, R[i]);
  }
  for (int i = 0; i < n; ++i) {
    const double qs = s_minus == s_star ? 0.0 : (S[i] - s_star) / (s_minus - s_star);
    const double qr = r_minus == r_star ? 0.0 : (R[i] - r_star) / (r_minus - r_star);
    Q[i] = v * qs + (1 - v) * qr;
  }
  return true;
}

struct Vikor {
  bool no_discrimination = false;
  std::vector<double> S, R, Q;
  std::vector<std::size_t> order;  // best first
  std::vector<std::size_t> compromise;
  bool advantage = false, stability = false;
};

inline Vikor vikor(const std::vector<std::vector<double>>& f, const std::vector<double>& w,
                   const std::vector<bool>& benefit, double v, const std::vector<std::string>& ids) {
  const std::size_t n = f.size(), m = w.size();
  Vikor out;
  out.S.assign(n, 0.0);
  out.R.assign(n, 0.0);
  out.Q.assign(n, 0.0);
  std::vector<double> flat;
  for (const auto& row : f) flat.insert(flat.end(), row.begin(), row.end());
  std::unique_ptr<bool[]> b(new bool[m]);
  for (std::size_t j = 0; j < m; ++j) b[j] = benefit[j];
  if (!indices(flat.data(), static_cast<int>(n), static_cast<int>(m), w.data(), b.get(), v, out.S.data(),
               out.R.data(), out.Q.data())) {
    out.no_discrimination = true;
    return out;
  }
  const double s_star = *std::min_element(out.S.begin(), out.S.end());
  const double r_star = *std::min_element(out.R.begin(), out.R.end());

  const double tol = 1e-12;
  for (std::size_t i = 0; i < n; ++i) out.order.push_back(i);
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t c) {
    if (std::fabs(out.Q[a] - out.Q[c]) > tol) return out.Q[a] < out.Q[c];
    if (std::fabs(out.S[a] - out.S[c]) > tol) return out.S[a] < out.S[c];
    if (std::fabs(out.R[a] - out.R[c]) > tol) return out.R[a] < out.R[c];
    return ids[a] < ids[c];
  });

  if (n == 1) {
    out.compromise = {0};
    return out;
  }
  const double dq = 1.0 / static_cast<double>(n - 1);
  const std::size_t first = out.order[0], second = out.order[1];
  out.advantage = out.Q[second] - out.Q[first] >= dq - tol;
  out.stability = out.S[first] <= s_star + tol || out.R[first] <= r_star + tol;
  if (!out.advantage) {
    for (auto i : out.order)
      if (out.Q[i] - out.Q[first] < dq - tol) out.compromise.push_back(i);
  } else if (!out.stability) {
    out.compromise = {first, second};
  } else {
    out.compromise = {first};
  }
  return out;
}

}  // namespace oracle
