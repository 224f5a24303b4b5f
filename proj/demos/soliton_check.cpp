// Builds the one- and two-soliton solutions on a grid and reports how well
// they satisfy the field equations and the zero-curvature condition.
#include <cstdio>

#include "abdeform/abdeform.hpp"

using namespace abdeform;

int main() {
    const Grid grid(10.0, 5.0, 801, 401);
    for (const AbSolution& s : {one_soliton(grid, 1.5), two_soliton(grid, 1.1, 1.0)}) {
        const ResidualReport r = ab_residuals(s);
        std::printf("%-12s  r1 %.2e  r2 %.2e  norm %.2e\n", s.name.c_str(), r.r1_norm, r.r2_norm, r.norm_residual);
        for (cplx lam : default_lambdas())
            std::printf("    curvature at lambda = (%4.1f,%4.1f): %.2e\n", lam.real(), lam.imag(),
                        curvature_residual(s, lam));
    }
}
