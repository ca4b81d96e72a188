#pragma once

#include <cmath>
#include <random>

#include "regtune/instances.hpp"

namespace regtune::testing {

inline Dataset random_dataset(std::mt19937_64& rng, Eigen::Index m, Eigen::Index p)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset ds{Matrix(m, p), Vector(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) ds.X(i, j) = u(rng);
        ds.y(i) = u(rng);
    }
    return ds;
}

inline ProblemInstance random_instance(std::mt19937_64& rng, Eigen::Index m, Eigen::Index p, Eigen::Index mv)
{
    return {random_dataset(rng, m, p), random_dataset(rng, mv, p)};
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

inline Dataset identity2(double y0, double y1)
{
    Dataset ds{Matrix::Identity(2, 2), Vector(2)};
    ds.y << y0, y1;
    return ds;
}

} // namespace regtune::testing
