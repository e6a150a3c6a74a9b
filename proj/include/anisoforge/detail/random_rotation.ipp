#pragma once

#include <random>

namespace anisoforge {

template <class Rng>
Tensor3 random_rotation(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng));
  } while (q.norm() < 1e-8);
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace anisoforge
