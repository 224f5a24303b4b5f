// Runs the deformation ansatz on several candidate fields and prints the
// classification with the diagnostics that drove it.
#include <cstdio>

#include "abdeform/abdeform.hpp"

using namespace abdeform;

int main() {
    const Grid grid(10.0, 5.0, 801, 401);
    struct Candidate {
        const char* label;
        ComplexField A;
    };
    const Candidate candidates[] = {
        {"one_soliton", one_soliton(grid, 1.5).A},
        {"kink", kink_ansatz(grid, 1.5)},
        {"two_soliton", two_soliton(grid, 1.1, 1.0).A},
        {"kk", kk_kak_ansatz(grid, 2.0, KinkBranch::KK)},
        {"kak", kk_kak_ansatz(grid, 2.0, KinkBranch::KAK)},
    };
    for (const auto& c : candidates) {
        const NhdReport r = nhd_from_ansatz(c.A);
        std::printf("%-12s %-20s singular ratio %.2e  imag ratio %.2e\n", c.label, to_string(r.classification),
                    r.diag.singular_ratio, r.diag.imag_ratio);
    }
}
