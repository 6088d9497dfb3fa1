// Reference experiments shared by several test binaries.
#ifndef TEMPUS_FRI_TESTS_FIXTURES_HPP
#define TEMPUS_FRI_TESTS_FIXTURES_HPP

#include <tempus_fri/tempus_fri.hpp>

namespace fixture
{

using tempus_fri::Json;

inline Json x1()
{
    Json j = Json::parse(R"({
      "signal": {"kind": "random_dirac", "K": 5, "period": 1.0, "seed": 1,
                 "amplitude_mean": 0.5, "amplitude_std": 1.0},
      "kernel": {"M": 5, "peak": 0.4},
      "machines": [
        {"label": "ctem", "type": "ctem", "amplitude": 0.9, "frequency": 11, "phase": "random"},
        {"label": "iftem", "type": "iftem", "bias": 1.5, "scale": 1.0, "threshold": 0.09}
      ],
      "solver": {"method": "genfri", "max_iters": 50, "max_restarts": 50},
      "seed": 2024
    })");
    return j;
}

inline Json x2()
{
    return Json::parse(R"({
      "signal": {"kind": "explicit", "period": 1.0,
                 "pulse": {"type": "bspline", "degree": 3, "time_scale": 10},
                 "amplitudes": [0.5, -0.35, 0.3], "shifts": [0.20, 0.34, 0.74]},
      "kernel": {"M": 3},
      "machines": [
        {"label": "ctem", "type": "ctem", "amplitude": 0.3, "frequency": 7, "phase": "random"},
        {"label": "iftem", "type": "iftem", "bias": 1.3, "scale": 1.0, "threshold": 0.09}
      ],
      "solver": {"method": "genfri", "max_iters": 50, "max_restarts": 50},
      "seed": 2024
    })");
}

inline Json x1_multichannel()
{
    return Json::parse(R"({
      "signal": {"kind": "random_dirac", "K": 5, "period": 1.0, "seed": 1,
                 "amplitude_mean": 0.5, "amplitude_std": 1.0},
      "kernel": {"M": 5, "peak": 0.2},
      "machines": [
        {"label": "ctem2", "type": "ctem", "channels": [
          {"amplitude": 0.9, "frequency": 5.5, "phase": "random"},
          {"amplitude": 0.9, "frequency": 5.5, "phase": "random"}]},
        {"label": "iftem2", "type": "iftem", "channels": [
          {"bias": 1.5, "scale": 1.0, "threshold": 0.18, "integrator_init": 0.0},
          {"bias": 1.5, "scale": 0.82, "threshold": 0.22, "integrator_init": 0.07}]}
      ],
      "solver": {"method": "genfri", "max_iters": 50, "max_restarts": 50},
      "seed": 2024
    })");
}

inline Json x2_multichannel()
{
    return Json::parse(R"({
      "signal": {"kind": "explicit", "period": 1.0,
                 "pulse": {"type": "bspline", "degree": 3, "time_scale": 10},
                 "amplitudes": [0.5, -0.35, 0.3], "shifts": [0.20, 0.34, 0.74]},
      "kernel": {"M": 3},
      "machines": [
        {"label": "ctem2", "type": "ctem", "channels": [
          {"amplitude": 0.4, "frequency": 3.5, "phase": "random"},
          {"amplitude": 0.4, "frequency": 3.5, "phase": "random"}]},
        {"label": "iftem2", "type": "iftem", "channels": [
          {"bias": 1.3, "scale": 1.0, "threshold": 0.18, "integrator_init": 0.0},
          {"bias": 1.3, "scale": 0.82, "threshold": 0.22, "integrator_init": 0.07}]}
      ],
      "solver": {"method": "genfri", "max_iters": 50, "max_restarts": 50},
      "seed": 2024
    })");
}

inline tempus_fri::ResolvedExperiment resolve(const Json& j)
{
    return tempus_fri::resolve(tempus_fri::run_config_from_json(j));
}

} // namespace fixture

#endif
