// Deforms the one-soliton at first order in epsilon and prints the
// conservation verdict for the first four charges.
#include <cstdio>
#include <cstdlib>

#include "abdeform/abdeform.hpp"

using namespace abdeform;

int main(int argc, char** argv) {
    QidConfig cfg;
    if (argc > 1) cfg.epsilon = std::atof(argv[1]);
    const Grid grid(10.0, 5.0, 801, 401);
    const QidRun run = qid_solution(one_soliton(grid, 1.5), cfg);
    const QidReport rep = qid_report(run);
    std::printf("epsilon %.3g  perturbative %s  anomaly remainder %.3g\n", run.epsilon,
                run.perturbative_ok ? "yes" : "no", rep.anomaly_remainder);
    for (const auto& [n, v] : rep.verdict) {
        const auto& a = rep.first_order.at(n);
        std::printf("  Q^-%d  %-24s |S| %.2e  R %.2e\n", n, to_string(v), std::abs(a.S), a.R);
    }
}
