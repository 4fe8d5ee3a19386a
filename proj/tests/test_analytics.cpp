#include <gtest/gtest.h>

#include <cmath>

#include "paoi/analytics.hpp"
#include "paoi/model.hpp"
#include "paoi/rng.hpp"

namespace paoi {
namespace {

ChannelParams noise_free() {
    ChannelParams ch;
    ch.noise_power = 0.0;
    return ch;
}

DistanceMatrix two_link_geometry() {
    // d11 = 10, d21 = 20; link 2's receiver far enough to be irrelevant
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{100, 100}, {130, 100}};
    l.rx_pos = {{110, 100}, {400, 400}};
    return distance_matrix(l);
}

Policy random_policy(std::size_t n, Rng& rng, double lo = 0.05, double hi = 1.0) {
    Policy pol;
    pol.p.resize(n);
    for (double& v : pol.p) v = rng.uniform(lo, hi);
    return pol;
}

// ---- Eq. (2), conditional success ------------------------------------------

TEST(CondSuccess, NoNoiseNoInterference) {
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{0, 0}};
    l.rx_pos = {{30, 40}};
    EXPECT_DOUBLE_EQ(cond_success_given_active_set(0, {}, distance_matrix(l), noise_free()), 1.0);
}

TEST(CondSuccess, TwoLinkClosedForm) {
    // d11=10, d21=20, alpha=3, beta=1, sigma^2=0 -> 1/(1 + (20/10)^-3) = 8/9
    DistanceMatrix dm = two_link_geometry();
    double v = cond_success_given_active_set(0, {1}, dm, noise_free());
    EXPECT_NEAR(v, 8.0 / 9.0, 1e-12);
}

TEST(CondSuccess, TwoLinkFadeMonteCarlo) {
    // independent oracle: success = P[h0 g0 > beta h1 g1] over exponential fades
    DistanceMatrix dm = two_link_geometry();
    ChannelParams ch = noise_free();
    double closed = cond_success_given_active_set(0, {1}, dm, ch);
    double g0 = ch.tx_power * std::pow(dm.direct(0), -ch.pathloss_exp);
    double g1 = ch.tx_power * std::pow(dm(1, 0), -ch.pathloss_exp);
    Rng rng(2024);
    const int n = 10'000'000;
    std::int64_t ok = 0;
    for (int t = 0; t < n; ++t)
        if (rng.exponential(1.0) * g0 > ch.capture_ratio * rng.exponential(1.0) * g1) ++ok;
    double emp = static_cast<double>(ok) / n;
    double sigma = std::sqrt(closed * (1.0 - closed) / n);
    EXPECT_NEAR(emp, closed, 3.0 * sigma);
}

TEST(CondSuccess, NoiseOnlyExponent) {
    // beta=1, sigma^2=1e-12 W, P_t=0.1 W, d=50, alpha=3 -> exp(-1.25e-6)
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{0, 0}};
    l.rx_pos = {{50, 0}};
    ChannelParams ch;  // defaults carry exactly these constants
    double v = cond_success_given_active_set(0, {}, distance_matrix(l), ch);
    EXPECT_NEAR(v, std::exp(-1.25e-6), 1e-15);
    EXPECT_NEAR(v, 0.99999875000078120, 1e-15);
}

// ---- Eq. (3), average success ----------------------------------------------

TEST(SuccessProbability, SingleLinkIsActivation) {
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{0, 0}};
    l.rx_pos = {{10, 0}};
    Policy pol = uniform_policy(1, 0.7);
    EXPECT_DOUBLE_EQ(success_probability(0, pol, distance_matrix(l), noise_free()), 0.7);
}

double subset_oracle(std::size_t i, const Policy& pol, const DistanceMatrix& dm,
                     const ChannelParams& ch) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < dm.n; ++j)
        if (j != i) others.push_back(j);
    double total = 0.0;
    for (std::size_t mask = 0; mask < (1ULL << others.size()); ++mask) {
        double w = 1.0;
        std::vector<std::size_t> active;
        for (std::size_t b = 0; b < others.size(); ++b) {
            if (mask & (1ULL << b)) {
                w *= pol.p[others[b]];
                active.push_back(others[b]);
            } else {
                w *= 1.0 - pol.p[others[b]];
            }
        }
        total += w * cond_success_given_active_set(i, active, dm, ch);
    }
    return pol.p[i] * total;
}

TEST(SuccessProbability, SubsetEnumerationOracle) {
    ChannelParams ch;
    for (std::uint64_t s = 0; s < 5; ++s) {
        LayoutGenSpec spec;
        spec.n_links = 6;
        spec.seed = 60 + s;
        DistanceMatrix dm = distance_matrix(generate_layout(spec));
        Rng rng(70 + s);
        Policy pol = random_policy(6, rng);
        for (std::size_t i = 0; i < 6; ++i) {
            double a = success_probability(i, pol, dm, ch);
            double b = subset_oracle(i, pol, dm, ch);
            EXPECT_NEAR(a, b, 1e-12 * std::abs(b));
        }
    }
}

TEST(SuccessProbability, Monotonicity) {
    LayoutGenSpec spec;
    spec.n_links = 4;
    spec.seed = 8;
    DistanceMatrix dm = distance_matrix(generate_layout(spec));
    ChannelParams ch;
    Rng rng(9);
    Policy pol = random_policy(4, rng, 0.1, 0.9);
    double base = success_probability(0, pol, dm, ch);
    Policy up = pol;
    up.p[0] = std::min(1.0, pol.p[0] + 0.05);
    EXPECT_GE(success_probability(0, up, dm, ch), base);
    for (std::size_t j = 1; j < 4; ++j) {
        Policy bump = pol;
        bump.p[j] = std::min(1.0, pol.p[j] + 0.05);
        EXPECT_LE(success_probability(0, bump, dm, ch), base);
    }
}

// ---- Eqs. (7), (9) ---------------------------------------------------------

TEST(PreemptionProb, KnownValueAndLimits) {
    EXPECT_NEAR(preemption_prob({0.5, 1.0}), 0.393469340287367, 1e-15);
    EXPECT_NEAR(preemption_prob({1e-12, 1.0}), 0.0, 1e-11);   // lambda -> 0+
    EXPECT_NEAR(preemption_prob({0.5, 1e-12}), 0.0, 1e-11);   // mu -> 0+
}

TEST(EffectiveGenerationInterval, QuadratureOracle) {
    // trapezoid quadrature of the defining truncated-exponential mean
    TrafficParams tr{0.5, 1.0};
    double gamma = preemption_prob(tr);
    const int steps = 2'000'000;
    double h = tr.slot_duration / steps;
    double acc = 0.0;
    for (int k = 0; k <= steps; ++k) {
        double s = k * h;
        double f = s * tr.arrival_rate * std::exp(-tr.arrival_rate * s);
        acc += (k == 0 || k == steps) ? 0.5 * f : f;
    }
    double quad = acc * h / gamma;
    double closed = effective_generation_interval(tr);
    EXPECT_NEAR(closed, quad, 1e-9);
    EXPECT_NEAR(closed, 0.458505917463202, 1e-12);
}

TEST(EffectiveGenerationInterval, Limits) {
    // mu -> infinity: the conditioning becomes vacuous, mean -> 1/lambda
    EXPECT_NEAR(effective_generation_interval({0.5, 1e6}), 2.0, 1e-9);
    // lambda*mu -> 0: mean -> mu/2
    EXPECT_NEAR(effective_generation_interval({1e-6, 1.0}), 0.5, 1e-4);
    // gamma = 0 is a domain error
    TrafficParams bad{0.5, 1.0};
    bad.arrival_rate = 0.0;
    EXPECT_THROW(effective_generation_interval(bad), std::invalid_argument);
}

// ---- Eqs. (10)-(12) --------------------------------------------------------

Layout single_link_layout() {
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{0, 0}};
    l.rx_pos = {{10, 0}};
    return l;
}

TEST(PaoiBreakdown, PerfectSuccessUnitRate) {
    // q=0, lambda=1, mu=1 -> e_paoi = e + 1
    Layout l = single_link_layout();
    PaoiBreakdown b =
        paoi_breakdown(0, uniform_policy(1, 1.0), distance_matrix(l), noise_free(), {1.0, 1.0});
    EXPECT_NEAR(b.e_paoi, 3.718281828459045, 1e-12);
    EXPECT_DOUBLE_EQ(b.fail_prob, 0.0);
    // q=0 -> e_T = gamma / (lambda (1 - gamma))
    double gamma = b.preempt_prob;
    EXPECT_NEAR(b.e_T, gamma / (1.0 * (1.0 - gamma)), 1e-12);
}

TEST(PaoiBreakdown, ForcedEightyPercent) {
    // q=0.2, lambda=0.5, mu=1 -> 1/(0.5 e^{-0.5} 0.8) + 1
    Layout l = single_link_layout();
    PaoiBreakdown b =
        paoi_breakdown(0, uniform_policy(1, 0.8), distance_matrix(l), noise_free(), {0.5, 1.0});
    EXPECT_NEAR(b.e_paoi, 5.121803176750320, 1e-12);
}

TEST(PaoiBreakdown, StructuralIdentities) {
    LayoutGenSpec spec;
    spec.n_links = 5;
    spec.seed = 21;
    DistanceMatrix dm = distance_matrix(generate_layout(spec));
    ChannelParams ch;
    Rng rng(22);
    Policy pol = random_policy(5, rng);
    TrafficParams tr{0.7, 1.0};
    for (std::size_t i = 0; i < 5; ++i) {
        PaoiBreakdown b = paoi_breakdown(i, pol, dm, ch, tr);
        double lam = tr.arrival_rate;
        EXPECT_NEAR(b.e_Y * lam * (1.0 - b.preempt_prob) * (1.0 - b.fail_prob), 1.0, 1e-12);
        EXPECT_NEAR(b.e_Y, b.e_T + b.e_W, 1e-12 * b.e_Y);
        EXPECT_NEAR(b.e_paoi, b.e_Y + b.e_S, 1e-12 * b.e_paoi);
        EXPECT_DOUBLE_EQ(b.e_W, 1.0 / lam);
        EXPECT_DOUBLE_EQ(b.e_S, tr.slot_duration);
    }
}

TEST(PaoiBreakdown, NoiseFreeSingleLinkExact) {
    // e_paoi(p=1) = 1/(lambda e^{-mu lambda}) + mu exactly
    Layout l = single_link_layout();
    TrafficParams tr{0.3, 1.0};
    PaoiBreakdown b =
        paoi_breakdown(0, uniform_policy(1, 1.0), distance_matrix(l), noise_free(), tr);
    EXPECT_DOUBLE_EQ(b.e_paoi, 1.0 / (0.3 * std::exp(-0.3)) + 1.0);
}

TEST(PaoiBreakdown, InfiniteSentinel) {
    // overwhelming noise drives phi to 0 -> +inf, not a crash
    Layout l = single_link_layout();
    ChannelParams ch;
    ch.noise_power = 1e12;
    PaoiBreakdown b = paoi_breakdown(0, uniform_policy(1, 1.0), distance_matrix(l), ch, {0.5, 1.0});
    EXPECT_TRUE(std::isinf(b.e_paoi));
    EXPECT_TRUE(std::isinf(b.e_Y));
}

// ---- Eq. (13) objective and gradient ---------------------------------------

TEST(NetworkObjective, SingleLinkMonotoneNegativeGrad) {
    DistanceMatrix dm = distance_matrix(single_link_layout());
    TrafficParams tr{0.5, 1.0};
    double prev = std::numeric_limits<double>::infinity();
    for (double p = 0.1; p <= 1.0 + 1e-12; p += 0.1) {
        auto rep = network_objective(uniform_policy(1, std::min(p, 1.0)), dm, noise_free(), tr, true);
        EXPECT_LT(rep.mean_paoi, prev);
        EXPECT_LT((*rep.grad)[0], 0.0);
        prev = rep.mean_paoi;
    }
}

TEST(NetworkObjective, MeanOfPerLink) {
    LayoutGenSpec spec;
    spec.n_links = 6;
    spec.seed = 31;
    DistanceMatrix dm = distance_matrix(generate_layout(spec));
    auto rep = network_objective(uniform_policy(6, 0.6), dm, ChannelParams{}, {0.5, 1.0}, false);
    double s = 0.0;
    for (double v : rep.per_link_paoi) s += v;
    EXPECT_NEAR(rep.mean_paoi, s / 6.0, 1e-12 * rep.mean_paoi);
}

TEST(NetworkObjective, FiniteDifferenceGradient) {
    ChannelParams ch;
    TrafficParams tr{0.5, 1.0};
    for (std::uint64_t s = 0; s < 10; ++s) {
        LayoutGenSpec spec;
        spec.n_links = 5;
        spec.seed = 40 + s;
        SuccessModel model = SuccessModel::build(distance_matrix(generate_layout(spec)), ch);
        Rng rng(50 + s);
        Policy pol = random_policy(5, rng, 0.1, 0.95);
        auto rep = network_objective(pol, model, tr, true);
        const double h = 1e-6;
        for (std::size_t k = 0; k < 5; ++k) {
            Policy lo = pol, hi = pol;
            lo.p[k] -= h;
            hi.p[k] += h;
            double fd = (network_objective(hi, model, tr, false).mean_paoi -
                         network_objective(lo, model, tr, false).mean_paoi) /
                        (2 * h);
            double g = (*rep.grad)[k];
            EXPECT_NEAR(g, fd, 1e-6 * (std::abs(g) + std::abs(fd)));
        }
    }
}

TEST(NetworkObjective, MirrorSymmetryGrad) {
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{100, 300}, {500, 300}};
    l.rx_pos = {{130, 300}, {470, 300}};
    auto rep =
        network_objective(uniform_policy(2, 0.6), distance_matrix(l), ChannelParams{}, {0.5, 1.0},
                          true);
    EXPECT_NEAR((*rep.grad)[0], (*rep.grad)[1], 1e-12 * std::abs((*rep.grad)[0]));
    EXPECT_NEAR(rep.per_link_paoi[0], rep.per_link_paoi[1], 1e-12 * rep.per_link_paoi[0]);
}

TEST(NetworkObjective, ClampedGradFlag) {
    Layout l = single_link_layout();
    ChannelParams ch;
    ch.noise_power = 1e12;  // phi ~ 0
    auto rep = network_objective(uniform_policy(1, 0.5), distance_matrix(l), ch, {0.5, 1.0}, true);
    EXPECT_TRUE(rep.grad_clamped);
    EXPECT_TRUE(std::isfinite((*rep.grad)[0]));
}

}  // namespace
}  // namespace paoi
