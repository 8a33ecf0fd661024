#pragma once

#include "tomopair/grid.hpp"

namespace tomopair {

// Classical comparison filters: median filtering and nonlinear diffusion of
// the Perona-Malik type, the two baselines the learned restorations are
// judged against.

// Each voxel is replaced by the median of its (2r+1)^d neighborhood with
// edge clamping; radius 0 is the identity.
ScalarField median_filter(const ScalarField& f, const std::vector<std::size_t>& radius);
ScalarField median_filter(const ScalarField& f, std::size_t radius);

// Robust default contrast parameter: 1.4826 * MAD of the gradient magnitude.
double nad_default_lambda(const ScalarField& f);

// Explicit divergence-form diffusion with diffusivity g(s) = 1/(1+(s/lambda)^2)
// per axis difference and zero-flux boundaries. dt must respect the explicit
// stability bound 1/(2d); lambda <= 0 selects nad_default_lambda(f).
ScalarField nad_filter(const ScalarField& f, std::size_t steps, double dt, double lambda);

} // namespace tomopair
