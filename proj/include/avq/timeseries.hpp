#pragma once
// Time-series containers shared by the pipelines: sampled complex series on
// (possibly non-uniform) meshes, linear interpolation onto uniform meshes,
// and rectangular real grids for two-time response functions.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace avq {

struct TimeSeries {
  std::vector<double> t;
  std::vector<cplx> v;

  std::size_t size() const { return t.size(); }

  void push(double time, cplx value) {
    if (!t.empty() && time <= t.back() + 1e-15)
      throw Error("time samples must be strictly increasing");
    t.push_back(time);
    v.push_back(value);
  }
};

inline bool is_uniform_mesh(const std::vector<double>& t, double tol = 1e-9) {
  if (t.size() < 2) return true;
  const double dt = t[1] - t[0];
  for (std::size_t i = 1; i + 1 < t.size(); ++i)
    if (std::abs((t[i + 1] - t[i]) - dt) > tol * std::max(1.0, std::abs(dt)))
      return false;
  return true;
}

// piecewise-linear value at query time (clamped to the sampled range ends)
inline cplx interp_linear(const TimeSeries& s, double tq) {
  if (s.t.empty()) throw Error("interpolating empty series");
  if (tq <= s.t.front()) return s.v.front();
  if (tq >= s.t.back()) return s.v.back();
  const auto it = std::upper_bound(s.t.begin(), s.t.end(), tq);
  const std::size_t hi = static_cast<std::size_t>(it - s.t.begin());
  const std::size_t lo = hi - 1;
  const double w = (tq - s.t[lo]) / (s.t[hi] - s.t[lo]);
  return s.v[lo] * (1.0 - w) + s.v[hi] * w;
}

inline TimeSeries resample_uniform(const TimeSeries& s, double t0, double t1,
                                   double dt) {
  if (dt <= 0) throw Error("mesh step must be positive");
  TimeSeries out;
  const long n = static_cast<long>(std::round((t1 - t0) / dt));
  for (long i = 0; i <= n; ++i) {
    const double tq = t0 + static_cast<double>(i) * dt;
    out.t.push_back(tq);
    out.v.push_back(interp_linear(s, tq));
  }
  return out;
}

// rectangular real-valued grid: rows indexed by the slow axis (tau), columns
// by the fast axis (t)
struct RealGrid2D {
  std::vector<double> t;    // column coordinates
  std::vector<double> tau;  // row coordinates
  Eigen::MatrixXd v;        // tau.size() x t.size()

  void init(std::vector<double> tcols, std::vector<double> taurows) {
    t = std::move(tcols);
    tau = std::move(taurows);
    v = Eigen::MatrixXd::Zero(static_cast<long>(tau.size()),
                              static_cast<long>(t.size()));
  }
};

struct ComplexGrid2D {
  std::vector<double> wt;   // column coordinates (fast-axis frequency)
  std::vector<double> wtau; // row coordinates (slow-axis frequency)
  Eigen::MatrixXcd v;       // wtau.size() x wt.size()
  Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> pole;  // pole flags

  void init(std::vector<double> cols, std::vector<double> rows) {
    wt = std::move(cols);
    wtau = std::move(rows);
    v = Eigen::MatrixXcd::Zero(static_cast<long>(wtau.size()),
                               static_cast<long>(wt.size()));
    pole.setZero(static_cast<long>(wtau.size()),
                 static_cast<long>(wt.size()));
  }
};

inline std::vector<double> linspace_step(double x0, double x1, double dx) {
  std::vector<double> out;
  const long n = static_cast<long>(std::round((x1 - x0) / dx));
  for (long i = 0; i <= n; ++i) out.push_back(x0 + static_cast<double>(i) * dx);
  return out;
}

inline std::vector<double> linspace_count(double x0, double x1, int count) {
  if (count < 2) throw Error("mesh needs at least two points");
  std::vector<double> out(count);
  const double dx = (x1 - x0) / (count - 1);
  for (int i = 0; i < count; ++i) out[i] = x0 + dx * i;
  return out;
}

}  // namespace avq
