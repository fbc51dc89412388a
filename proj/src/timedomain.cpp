#include "stabdom/timedomain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace {

// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense output (Hairer's contd5).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct Dense {
  Vec r1, r2, r3, r4, r5;
  double t0 = 0.0;
  double h = 0.0;
  Vec at(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
  }
};

}  // namespace

void IntegratorSettings::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("integrator tolerances must be > 0");
  if (!(max_step > 0.0) || !(min_step > 0.0) || min_step > max_step) {
    throw ConfigError("integrator steps must satisfy 0 < min_step <= max_step");
  }
  if (max_steps < 1) throw ConfigError("integrator max_steps must be >= 1");
}

const char* to_string(Halt h) { return h == Halt::Completed ? "Completed" : "WinderCapture"; }

std::vector<double> uniform_samples(double t_end, double dt) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor(t_end / dt + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) * dt);
  if (out.back() < t_end - 1e-12) out.push_back(t_end);
  return out;
}

Trajectory simulate(const SystemDef& sys, const Vec& x0, const Vec& params, double t_end,
                    const IntegratorSettings& settings, const std::vector<double>& sample_times,
                    const HaltCheck& capture) {
  if (!(t_end > 0.0)) throw PreconditionViolation("simulate: t_end must be > 0");
  settings.validate();
  if (x0.size() != sys.dim_state) throw PreconditionViolation("simulate: wrong state size");

  Trajectory traj;
  std::size_t next_sample = 0;
  const bool every_step = sample_times.empty();
  auto emit = [&](double t, const Vec& x) {
    traj.t.push_back(t);
    traj.states.push_back(x);
  };

  double t = 0.0;
  Vec x = x0;
  if (every_step) {
    emit(t, x);
  } else {
    while (next_sample < sample_times.size() && sample_times[next_sample] <= 0.0) {
      emit(sample_times[next_sample++], x);
    }
  }
  if (capture && capture(t, x)) {
    traj.halt = Halt::WinderCapture;
    return traj;
  }

  auto f = [&](const Vec& s) { return sys(s, params); };
  Vec k1 = f(x);

  // Initial step from the usual derivative-scale heuristic.
  const Vec sc0 = (settings.atol + settings.rtol * x.cwiseAbs().array()).matrix();
  const double dnx = (x.array() / sc0.array()).matrix().norm() / std::sqrt(double(x.size()));
  const double dnf = (k1.array() / sc0.array()).matrix().norm() / std::sqrt(double(x.size()));
  double h = (dnx < 1e-5 || dnf < 1e-5) ? 1e-6 : 0.01 * dnx / dnf;
  h = std::clamp(h, settings.min_step, settings.max_step);

  double err_prev = 1e-4;
  bool last_rejected = false;

  while (t < t_end) {
    if (traj.accepted_steps + traj.rejected_steps >= settings.max_steps) {
      throw IntegrationFailure("maximum number of integration steps reached");
    }
    if (t + h > t_end) h = t_end - t;

    Vec k2, k3, k4, k5, k6, k7, x5;
    bool ok = true;
    try {
      k2 = f(x + h * a21 * k1);
      k3 = f(x + h * (a31 * k1 + a32 * k2));
      k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = f(x5);
    } catch (const Error&) {
      ok = false;
    }

    double err = std::numeric_limits<double>::infinity();
    if (ok) {
      const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Vec sc =
          (settings.atol + settings.rtol * x.cwiseAbs().cwiseMax(x5.cwiseAbs()).array()).matrix();
      err = (e.array() / sc.array()).matrix().norm() / std::sqrt(double(x.size()));
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    }

    if (err <= 1.0) {
      Dense dense;
      dense.t0 = t;
      dense.h = h;
      dense.r1 = x;
      const Vec dx = x5 - x;
      dense.r2 = dx;
      const Vec bspl = h * k1 - dx;
      dense.r3 = bspl;
      dense.r4 = dx - h * k7 - bspl;
      dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

      const double t_new = (t_end - (t + h) < 1e-12 * std::max(1.0, t_end)) ? t_end : t + h;
      double halt_at = -1.0;
      if (capture) {
        for (int i = 1; i <= 4 && halt_at < 0.0; ++i) {
          const double ti = t + h * i / 4.0;
          const Vec xi = i == 4 ? x5 : dense.at(ti);
          if (capture(ti, xi)) halt_at = ti;
        }
      }
      const double emit_limit = halt_at >= 0.0 ? halt_at : t_new;
      if (every_step) {
        emit(emit_limit, halt_at >= 0.0 ? dense.at(halt_at) : x5);
      } else {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= emit_limit) {
          const double ts = sample_times[next_sample++];
          emit(ts, ts >= t_new ? x5 : dense.at(ts));
        }
      }
      ++traj.accepted_steps;
      if (halt_at >= 0.0) {
        traj.halt = Halt::WinderCapture;
        traj.halt_time = halt_at;
        return traj;
      }

      t = t_new;
      x = x5;
      k1 = k7;
      // PI step-size control.
      const double e = std::max(err, 1e-10);
      double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h = std::min(h * fac, settings.max_step);
      err_prev = std::max(err, 1e-4);
      last_rejected = false;
    } else {
      ++traj.rejected_steps;
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
      h *= fac;
      last_rejected = true;
      if (h < settings.min_step) {
        std::ostringstream os;
        os << "step size underflow at t = " << t;
        throw IntegrationFailure(os.str());
      }
    }
  }
  traj.halt_time = t;
  return traj;
}

StepMetrics step_response_metrics(const Trajectory& traj, const Vec& reference, double band) {
  if (traj.states.empty()) throw PreconditionViolation("step_response_metrics: empty trajectory");
  StepMetrics m;
  const auto pos = [&](std::size_t i) { return Vec(traj.states[i].head(2)); };
  const std::size_t n = traj.states.size();
  const Vec start = pos(0);
  const Vec last = pos(n - 1);
  const Vec ref = reference.head(2);

  const std::size_t tail = n - std::max<std::size_t>(1, n / 10);
  m.settled = true;
  for (std::size_t i = tail; i < n; ++i) {
    if ((pos(i) - last).norm() > band || !pos(i).allFinite()) {
      m.settled = false;
      break;
    }
  }
  if (traj.halt != Halt::Completed) m.settled = false;
  m.static_error = m.settled ? (last - ref).norm() : std::numeric_limits<double>::quiet_NaN();

  const Vec step = ref - start;
  const double mag = step.norm();
  if (mag > 0.0) {
    const Vec dir = step / mag;
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, (pos(i) - start).dot(dir));
    m.overshoot = std::max(0.0, peak - mag) / mag;
  }
  return m;
}

double peak_to_peak(const Trajectory& traj, int coord, double t0, double t1) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    if (traj.t[i] < t0 || traj.t[i] > t1) continue;
    lo = std::min(lo, traj.states[i][coord]);
    hi = std::max(hi, traj.states[i][coord]);
  }
  return hi >= lo ? hi - lo : 0.0;
}

}  // namespace stabdom
