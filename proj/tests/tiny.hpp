// SPDX-License-Identifier: Apache-2.0
// Small synthetic training setups shared by the training tests and the
// acceptance runner.
#pragma once

#include <vector>

#include "asd/data.hpp"
#include "asd/training.hpp"

namespace asd::testing {

inline std::vector<training::TrainingSample> tiny_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.height = spec.width = size;
  spec.train_count = count;
  spec.test_count = 0;
  spec.anomaly_radius_min = 1;
  spec.anomaly_radius_max = 2;
  spec.seed = seed;
  std::vector<training::TrainingSample> out;
  for (auto& s : data::generate_synthetic(spec).train) {
    out.push_back({std::move(s.image), data::make_normal_mask(s.labels, 0)});
  }
  return out;
}

inline training::TrainConfig tiny_config(std::size_t epochs, std::size_t warmup) {
  training::TrainConfig c;
  c.epochs = epochs;
  c.warmup_epochs = warmup;
  c.descriptor_length = 3;
  c.scales = {{0.5, 1.0}, 5};
  c.learning_rate = 1e-3;
  return c;
}

}  // namespace asd::testing
