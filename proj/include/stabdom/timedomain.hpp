#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stabdom/dynsys.hpp"

namespace stabdom {

struct IntegratorSettings {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 0.1;
  double min_step = 1e-12;
  int max_steps = 5'000'000;

  void validate() const;
};

enum class Halt { Completed, WinderCapture };
const char* to_string(Halt h);

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> states;
  Halt halt = Halt::Completed;
  double halt_time = 0.0;
  int accepted_steps = 0;
  int rejected_steps = 0;
};

/// Returns true when the integration must stop at (t, state).
using HaltCheck = std::function<bool(double t, const Vec& state)>;

/// Dormand-Prince 5(4) with dense output.
///
/// States are reported at `sample_times` (sorted, inside [0, t_end]); when empty, every
/// accepted step is reported. `capture` is checked on each accepted step at the step end and
/// on a few interior dense-output points; a hit ends the run with Halt::WinderCapture.
Trajectory simulate(const SystemDef& sys, const Vec& x0, const Vec& params, double t_end,
                    const IntegratorSettings& settings, const std::vector<double>& sample_times = {},
                    const HaltCheck& capture = {});

std::vector<double> uniform_samples(double t_end, double dt);

struct StepMetrics {
  double static_error = 0.0;  // NaN when not settled
  double overshoot = 0.0;     // relative to the step magnitude
  bool settled = false;
};

/// Position is read from the first two state components. Settled means every sample of the
/// last 10% stays within `band` of the final position.
StepMetrics step_response_metrics(const Trajectory& traj, const Vec& reference, double band = 1e-3);

/// Peak-to-peak amplitude of component `coord` over samples with t in [t0, t1].
double peak_to_peak(const Trajectory& traj, int coord, double t0, double t1);

}  // namespace stabdom
