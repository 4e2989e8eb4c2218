#pragma once

#include <shmm/model.hpp>

namespace shmm::bench {

// Four-state, three-component discretized model of the size used for daily
// station records.
inline ModelParams station_model() {
  ModelParams m = ModelParams::zeros({4, 3, 2, 365, EmissionMode::Discretized, 0.1});
  m.Q << 0.71, 0.12, 0.13, 0.04,
         0.01, 0.40, 0.42, 0.17,
         0.20, 0.20, 0.45, 0.15,
         0.01, 0.22, 0.15, 0.62;
  m.p << 0.96, 0.01, 0.03,
         0.01, 0.19, 0.80,
         0.42, 0.20, 0.38,
         0.01, 0.19, 0.80;
  m.lambda << 0.20, 0.21,
              0.41, 2.30,
              2.21, 13.65,
              0.18, 0.19;
  m.beta << 0.3, -0.1, 0.05, 0.02,
            0.2, 0.1, 0.0, 0.03,
            -0.1, 0.15, 0.02, 0.0,
            0.05, 0.05, 0.01, -0.01;
  return m;
}

}  // namespace shmm::bench
