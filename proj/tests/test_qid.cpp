#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "abdeform/qid.hpp"

using namespace abdeform;

namespace {

const Grid kSmall(10.0, 5.0, 401, 201);

double max_diff(const ComplexField& a, const ComplexField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST(Potential, ZeroDeformationIsTheIdentity) {
    const auto s = one_soliton(kSmall, 1.5);
    for (auto mode : {PotentialMode::Exact, PotentialMode::FirstOrder}) {
        const auto B = deformed_potential(s.B, 0.0, mode);
        for (std::size_t k = 0; k < B.size(); ++k) ASSERT_EQ(B[k], cplx(s.B[k].real()));
    }
}

TEST(Potential, VacuumIsFixed) {
    const ComplexField one(kSmall, 1.0);
    for (double eps : {0.1, 0.5, 2.0})
        for (auto mode : {PotentialMode::Exact, PotentialMode::FirstOrder})
            EXPECT_EQ(max_diff(deformed_potential(one, eps, mode), one), 0.0);
}

TEST(Potential, ExactFormMatchesTheAngleForm) {
    // B = 1 - 16 V_eps(psi) with B0 = cos psi, for |psi| <= pi
    const Grid g(1.0, 1.0, 5, 5);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), ep(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double psi = ang(rng), eps = ep(rng);
        const ComplexField P(g, psi), B0(g, std::cos(psi));
        const double b = deformed_potential(B0, eps, PotentialMode::Exact)[0].real();
        const double v = sg_deformed_potential(P, eps)[0].real();
        ASSERT_NEAR(b, 1.0 - 16.0 * v, 1e-12) << "psi=" << psi << " eps=" << eps;
    }
}

TEST(Potential, AngleFormReducesToSineGordon) {
    const Grid g(1.0, 1.0, 5, 5);
    EXPECT_NEAR(sg_deformed_potential(ComplexField(g, std::numbers::pi), 0.0)[0].real(), 0.125, 1e-15);
    EXPECT_EQ(sg_deformed_potential(ComplexField(g, 0.0), 0.7)[0], cplx(0.0));
    for (double psi : {-5.0, -1.0, 0.3, 2.0, 6.0})
        EXPECT_NEAR(sg_deformed_potential(ComplexField(g, psi), 0.0)[0].real(), (1.0 - std::cos(psi)) / 16.0,
                    1e-14);
    EXPECT_THROW(sg_deformed_potential(ComplexField(g, 2.0 * std::numbers::pi), 0.1), DomainError);
}

TEST(Potential, FirstOrderIsTheDerivativeOfTheExactForm) {
    const auto s = one_soliton(kSmall, 1.5);
    double prev = 0.0;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        const auto ex = deformed_potential(s.B, eps, PotentialMode::Exact);
        const auto fo = deformed_potential(s.B, eps, PotentialMode::FirstOrder);
        const double d = max_diff(ex, fo);
        if (prev > 0.0) EXPECT_GE(observed_order(prev, d), 1.9);
        prev = d;
    }
    EXPECT_LT(prev, 1e-4);
}

TEST(Potential, RejectsInvalidInput) {
    const Grid g(1.0, 1.0, 5, 5);
    EXPECT_THROW(deformed_potential(ComplexField(g, 1.5), 0.1, PotentialMode::Exact), DomainError);
    EXPECT_THROW(deformed_potential(ComplexField(g, 0.0), -0.1, PotentialMode::Exact), ParameterError);
    // rounding slightly outside the interval is tolerated
    EXPECT_NO_THROW(deformed_potential(ComplexField(g, 1.0 + 1e-12), 0.1, PotentialMode::Exact));
}

TEST(FirstOrderAnomaly, VanishesOnTheVacuum) {
    EXPECT_EQ(anomaly_first_order(ComplexField(kSmall, 1.0)).max_abs(), 0.0);
}

TEST(FirstOrderAnomaly, ClosedFormAgreesAwayFromTheCentre) {
    const double gh = 1.5;
    const Grid g(8.0, 2.0, 1601, 41);
    const auto s = one_soliton(g, gh);
    const auto fd = anomaly_first_order(s.B);
    const auto cf = anomaly_first_order_one_soliton(g, gh);
    const double limit = 0.5 * gh * (1.0 - 2.0 * std::numbers::ln2);  // one-sided value at theta -> 0+
    double worst = 0.0;
    for (int j = 2; j < g.nt() - 2; ++j)
        for (int i = 2; i < g.nx() - 2; ++i) {
            const double th = gh * g.x(i) + g.t(j) / gh;
            if (std::abs(th) < 3.0 * gh * g.hx()) continue;
            worst = std::max(worst, std::abs(fd(i, j) - cf(i, j)));
        }
    EXPECT_LT(worst, 0.05 * std::abs(limit));
    EXPECT_EQ(parity_split(cf).report.dominant, Dominance::Odd);
    EXPECT_EQ(parity_split(fd).report.dominant, Dominance::Odd);
}

TEST(FirstOrderAnomaly, OneSidedLimitsAtTheCentre) {
    const double gh = 1.5;
    const double limit = 0.5 * gh * (1.0 - 2.0 * std::numbers::ln2);
    const Grid g(1.0, 1.0, 5, 5);
    // delta shifts theta so that the sampled node sits just off the centre
    const cplx right = anomaly_first_order_one_soliton(g, gh, 1e-9)(g.cx(), g.ct());
    const cplx left = anomaly_first_order_one_soliton(g, gh, -1e-9)(g.cx(), g.ct());
    EXPECT_NEAR(right.imag(), limit, 1e-6);
    EXPECT_NEAR(left.imag(), -limit, 1e-6);
    EXPECT_EQ(anomaly_first_order_one_soliton(g, gh)(g.cx(), g.ct()), cplx(0.0));
}

TEST(FirstOrderSolver, VacuumGivesZero) {
    AbSolution vac{"vacuum", ComplexField(kSmall), ComplexField(kSmall, 1.0)};
    EXPECT_EQ(solve_first_order(vac).max_abs(), 0.0);
}

TEST(FirstOrderSolver, SatisfiesTheLinearisedEquation) {
    double prev = 0.0;
    for (int level = 0; level < 2; ++level) {
        const Grid g(10.0, 5.0, level ? 801 : 401, level ? 401 : 201);
        const auto s = one_soliton(g, 1.5);
        const auto A1 = solve_first_order(s);
        for (int i = 0; i < g.nx(); ++i) ASSERT_EQ(A1(i, g.ct()), cplx(0.0));
        const double rel = interior_l2(first_order_residual(s, A1)) / interior_l2(first_order_rhs(s));
        EXPECT_LT(rel, 1e-2);
        // the source has a kink where B0 = -1, which limits the rate to first order
        if (level) EXPECT_GE(observed_order(prev, rel), 0.9);
        prev = rel;
    }
}

TEST(FirstOrderSolver, TimeIntegrationIsFourthOrder) {
    std::vector<ComplexField> sol;
    for (int nt : {201, 401, 801}) {
        const Grid g(8.0, 2.0, 401, nt);
        sol.push_back(solve_first_order(sg_map(sg_kink_psi(g, 1.0))));
    }
    auto gap = [&](int k) {
        const Grid& g = sol[k].grid();
        double m = 0.0;
        for (int j = 0; j < g.nt(); ++j)
            for (int i = 0; i < g.nx(); ++i) m = std::max(m, std::abs(sol[k](i, j) - sol[k + 1](i, 2 * j)));
        return m;
    };
    EXPECT_GE(observed_order(gap(0), gap(1)), 3.5);
}

TEST(FirstOrderSolver, EvenBaseGivesEvenCorrection) {
    const auto s = one_soliton(kSmall, 1.5);
    EXPECT_EQ(parity_split(solve_first_order(s)).report.dominant, Dominance::Even);
    const Grid g(10.0, 5.0, 801, 401);
    const auto two = parity_split(solve_first_order(two_soliton(g, 1.1, 1.0))).report;
    EXPECT_GT(two.even_norm, two.odd_norm);
    EXPECT_LE(two.ratio, 0.1);
}

// Marching away from t = 0 the correction stays bounded. Ahead of the
// pulse it decays to zero; behind it the linearised operator d_x d_t - 1
// radiates a small wake that reaches the trailing edge. For t < 0 the
// roles of the two edges swap.
TEST(FirstOrderSolver, BoundedWithASmallTrailingWake) {
    const Grid g(10.0, 5.0, 801, 401);
    const auto A1 = solve_first_order(one_soliton(g, 1.5));
    const double peak = A1.max_abs();
    double ahead = 0.0, behind = 0.0;
    for (int j = 0; j < g.nt(); ++j) {
        const bool fwd = j >= g.ct();
        ahead = std::max(ahead, std::abs(A1(fwd ? g.nx() - 1 : 0, j)));
        behind = std::max(behind, std::abs(A1(fwd ? 0 : g.nx() - 1, j)));
    }
    EXPECT_TRUE(A1.all_finite());
    EXPECT_LT(ahead, 1e-6 * peak);
    EXPECT_LT(behind, 2e-2 * peak);
}

TEST(FirstOrderSolver, GuardsAndErrors) {
    const auto s = one_soliton(kSmall, 1.5);
    QidConfig cfg;
    cfg.solver_substeps = 0;
    EXPECT_THROW(solve_first_order(s, cfg), ParameterError);
    cfg.solver_substeps = 1;
    cfg.growth_limit = 1e-3;
    EXPECT_THROW(solve_first_order(s, cfg), SolverError);
    AbSolution bad{"bad", s.A, ComplexField(kSmall, 1.5)};
    EXPECT_THROW(solve_first_order(bad), DomainError);
    cfg = {};
    cfg.epsilon = -0.1;
    EXPECT_THROW(qid_solution(s, cfg), ParameterError);
}

TEST(QidSolution, ZeroDeformationReturnsTheBase) {
    const auto s = one_soliton(kSmall, 1.5);
    QidConfig cfg;
    cfg.epsilon = 0.0;
    const auto run = qid_solution(s, cfg);
    EXPECT_EQ(max_diff(run.A, s.A), 0.0);
    EXPECT_EQ(max_diff(run.B, s.B), 0.0);
    EXPECT_LT(interior_max(anomaly(run.deformed())), 1e-4);
}

TEST(QidSolution, AssemblyAndPerturbativeFlag) {
    const auto s = one_soliton(kSmall, 1.5);
    QidConfig cfg;
    cfg.epsilon = 0.1;
    const auto run = qid_solution(s, cfg);
    for (std::size_t k = 0; k < run.A.size(); ++k) {
        ASSERT_EQ(run.A[k], s.A[k] + 0.1 * run.a1_field[k]);
        ASSERT_EQ(run.B[k].imag(), 0.0);
    }
    EXPECT_TRUE(run.perturbative_ok);
    EXPECT_EQ(run.deformed().name, "one_soliton_qid");
    EXPECT_EQ(run.deformed().params.at("epsilon"), 0.1);
    cfg.epsilon = 0.5;
    EXPECT_FALSE(qid_solution(s, cfg).perturbative_ok);
}

TEST(QidSolution, AnomalyRemainderIsSecondOrder) {
    const auto s = one_soliton(kSmall, 1.5);
    auto remainder = [&](double eps) {
        QidConfig cfg;
        cfg.epsilon = eps;
        const auto run = qid_solution(s, cfg);
        return interior_l2(anomaly(run.deformed()) - run.anomaly1 * cplx(eps));
    };
    EXPECT_GE(observed_order(remainder(0.1), remainder(0.05)), 1.8);
}

TEST(QidReport, SolitonVerdicts) {
    const auto run = qid_solution(one_soliton(kSmall, 1.5));
    const auto rep = qid_report(run);
    EXPECT_EQ(rep.verdict.at(2), ChargeVerdict::LocallyConserved);
    // f0^{-4} vanishes identically for a real amplitude
    EXPECT_EQ(rep.first_order.at(4).status, ConservationStatus::TriviallyConserved);
    EXPECT_EQ(rep.verdict.at(4), ChargeVerdict::LocallyConserved);
    for (int n : {1, 3}) EXPECT_EQ(rep.verdict.at(n), ChargeVerdict::AsymptoticallyConserved) << "n = " << n;
    EXPECT_EQ(rep.parity.at("anomaly1").dominant, Dominance::Odd);
    EXPECT_EQ(rep.parity.at("A1").dominant, Dominance::Even);
    EXPECT_STREQ(to_string(ChargeVerdict::NotProtected), "NotProtected");
}

TEST(QidReport, ShiftedTwoSolitonIsNotProtected) {
    const Grid g(10.0, 5.0, 801, 401);
    const auto rep = qid_report(qid_solution(two_soliton(g, 1.1, 1.0, 1.0, 0.0)));
    EXPECT_EQ(rep.verdict.at(3), ChargeVerdict::NotProtected);
    EXPECT_GE(rep.first_order.at(3).ratio, 0.1);
}
