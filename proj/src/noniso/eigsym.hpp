#pragma once

#include "noniso/mat.hpp"

#include <vector>

namespace noniso {

struct EigSym {
    Mat vectors;                // columns are eigenvectors, orthonormal
    std::vector<double> values; // ascending; ties keep input column order
};

// Dense symmetric eigendecomposition: Householder tridiagonalization
// followed by QL iterations with implicit shifts. Orders this project needs
// never exceed a few dozen, so no blocking or deflation heuristics.
EigSym eig_symmetric(const Mat& m);

} // namespace noniso
