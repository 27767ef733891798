#pragma once

#include <vector>

#include "skewlap/laplace.hpp"
#include "skewlap/rng.hpp"
#include "skewlap/types.hpp"

namespace skewlap::testutil {

inline WhitenedThird random_symmetric_tensor(index_t d, Rng& rng, double scale = 1.0) {
  std::vector<double> a(static_cast<std::size_t>(d) * d * d, 0.0);
  for (index_t k = 0; k < d; ++k)
    for (index_t j = 0; j <= k; ++j)
      for (index_t i = 0; i <= j; ++i) {
        const double t = scale * rng.next_normal();
        const index_t idx[3] = {i, j, k};
        index_t p[3];
        for (int a0 = 0; a0 < 3; ++a0)
          for (int a1 = 0; a1 < 3; ++a1) {
            if (a1 == a0) continue;
            const int a2 = 3 - a0 - a1;
            p[0] = idx[a0];
            p[1] = idx[a1];
            p[2] = idx[a2];
            a[p[0] + static_cast<std::size_t>(d) * (p[1] + d * p[2])] = t;
          }
      }
  return WhitenedThird::from_dense(d, std::move(a));
}

inline mat_t random_spd(index_t d, Rng& rng) {
  mat_t A(d, d);
  for (index_t i = 0; i < d; ++i)
    for (index_t j = 0; j < d; ++j) A(i, j) = rng.next_normal();
  return A * A.transpose() + static_cast<double>(d) * mat_t::Identity(d, d);
}

// <T, H3(z)> = <T, z^(x)3> - 3 <T, I>.z
inline double hermite3_contract(const WhitenedThird& t, const vec_t& z) {
  return t.contract_cube(z) - 3.0 * t.contract_eye().dot(z);
}

}  // namespace skewlap::testutil
