#pragma once

#include <functional>

#include "ureg/errors.hpp"
#include "ureg/types.hpp"

namespace ureg {

// Adaptive Dormand-Prince 5(4) with standard PI-free step control.
// Small smooth systems only; y' = f(t, y).
struct StepControl {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double h_init = 1e-3;
  double h_min = 1e-14;
  double h_max = 0.1;
  long max_steps = 2000000;
};

struct Rk45Stepper {
  using Rhs = std::function<Vec(double, const Vec&)>;

  Rk45Stepper(Rhs f, double t0, Vec y0, StepControl ctrl)
      : f_(std::move(f)), t_(t0), y_(std::move(y0)), ctrl_(ctrl), h_(ctrl.h_init) {
    k1_ = f_(t_, y_);
    tp_ = t_;
    yp_ = y_;
    kp_ = k1_;
  }

  double t() const { return t_; }
  const Vec& y() const { return y_; }
  // Solution values from the last accepted step, for dense interrogation.
  double t_prev() const { return tp_; }
  const Vec& y_prev() const { return yp_; }

  // Advances one accepted step, not beyond t_limit. Returns false when t has
  // reached t_limit. Throws NumericError on step-size underflow.
  bool step(double t_limit) {
    if (t_ >= t_limit) return false;
    long guard = 0;
    while (true) {
      if (++guard > 200) throw NumericError("integrator failed to find an acceptable step");
      double h = std::min(h_, t_limit - t_);
      if (h < ctrl_.h_min) {
        // A tiny closing step to the limit is fine when the error is small.
        h = t_limit - t_;
        if (h <= 0.0) return false;
      }

      bool domain_ok = true;
      Vec y5, err;
      try {
        attempt(h, y5, err);
      } catch (const Error&) {
        domain_ok = false;
      }

      if (domain_ok) {
        double scale = 0.0;
        for (int i = 0; i < y_.size(); ++i) {
          const double tol = ctrl_.abs_tol + ctrl_.rel_tol * std::max(std::abs(y_[i]), std::abs(y5[i]));
          scale = std::max(scale, std::abs(err[i]) / tol);
        }
        if (scale <= 1.0) {
          tp_ = t_;
          yp_ = y_;
          t_ += h;
          y_ = y5;
          k1_ = k7_;  // FSAL
          const double grow = scale > 1e-12 ? 0.9 * std::pow(scale, -0.2) : 5.0;
          h_ = std::min(ctrl_.h_max, h * std::min(5.0, std::max(0.2, grow)));
          ++steps_;
          if (steps_ > ctrl_.max_steps) throw NumericError("integrator exceeded its step budget");
          return true;
        }
        h_ = h * std::max(0.1, 0.9 * std::pow(scale, -0.25));
      } else {
        h_ = h * 0.25;
      }
      if (h_ < ctrl_.h_min) throw NumericError("integrator step size underflow");
    }
  }

  // Cubic Hermite interpolation on the last accepted step.
  Vec interpolate(double t) const {
    const double dt = t_ - tp_;
    if (dt <= 0.0) return y_;
    const double s = std::clamp((t - tp_) / dt, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * yp_ + h10 * dt * kp_ + h01 * y_ + h11 * dt * k1_;
  }

  // Re-seeds the state (used after a chart switch); re-evaluates the RHS.
  void reset(double t, Vec y) {
    t_ = t;
    y_ = std::move(y);
    tp_ = t;
    yp_ = y_;
    k1_ = f_(t_, y_);
    kp_ = k1_;
  }

  long accepted_steps() const { return steps_; }

 private:
  void attempt(double h, Vec& y5, Vec& err) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const Vec k2 = f_(t_ + h * 0.2, y_ + h * (a21 * k1_));
    const Vec k3 = f_(t_ + h * 0.3, y_ + h * (a31 * k1_ + a32 * k2));
    const Vec k4 = f_(t_ + h * 0.8, y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
    const Vec k5 = f_(t_ + h * 8.0 / 9.0, y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = f_(t_ + h, y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y5 = y_ + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7_ = f_(t_ + h, y5);
    kp_ = k1_;
    err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7_);
  }

  Rhs f_;
  double t_;
  Vec y_;
  StepControl ctrl_;
  double h_;
  Vec k1_, k7_, kp_;
  double tp_ = 0.0;
  Vec yp_;
  long steps_ = 0;
};

}  // namespace ureg
