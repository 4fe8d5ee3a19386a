#ifndef PAOI_VALIDATE_HPP
#define PAOI_VALIDATE_HPP

#include <cmath>
#include <string>
#include <vector>

#include "paoi/analytics.hpp"
#include "paoi/glinet.hpp"
#include "paoi/model.hpp"
#include "paoi/rng.hpp"
#include "paoi/schedulers.hpp"
#include "paoi/simulator.hpp"

namespace paoi {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace valdetail {

// Average success probability by explicit enumeration of interferer
// activation subsets, weighted by their Bernoulli probabilities. Independent
// route against the closed-form product.
inline double subset_enumeration_success(std::size_t i, const Policy& pol,
                                         const DistanceMatrix& dm, const ChannelParams& ch) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < dm.n; ++j)
        if (j != i) others.push_back(j);
    const std::size_t m = others.size();
    double total = 0.0;
    for (std::size_t mask = 0; mask < (1ULL << m); ++mask) {
        double weight = 1.0;
        std::vector<std::size_t> active;
        for (std::size_t b = 0; b < m; ++b) {
            if (mask & (1ULL << b)) {
                weight *= pol.p[others[b]];
                active.push_back(others[b]);
            } else {
                weight *= 1.0 - pol.p[others[b]];
            }
        }
        total += weight * cond_success_given_active_set(i, active, dm, ch);
    }
    return pol.p[i] * total;
}

inline Policy random_policy(std::size_t n, Rng& rng, double lo = 0.05, double hi = 1.0) {
    Policy pol;
    pol.p.resize(n);
    for (double& v : pol.p) v = rng.uniform(lo, hi);
    return pol;
}

inline std::uint64_t hash_layout(const Layout& l) {
    ByteHash h;
    for (const auto& v : l.tx_pos) {
        h.update(v.x);
        h.update(v.y);
    }
    for (const auto& v : l.rx_pos) {
        h.update(v.x);
        h.update(v.y);
    }
    h.update(l.side_length);
    return h.digest();
}

inline std::uint64_t hash_stats(const SimStats& s) {
    ByteHash h;
    for (const auto& l : s.links) {
        h.update(l.deliveries);
        h.update(l.preempted);
        h.update(l.paoi_sum);
        h.update(l.y_sum);
    }
    return h.digest();
}

inline std::uint64_t hash_params(const NetParams& p) {
    ByteHash h;
    p.for_each_tensor([&](const std::vector<double>& v) { h.update_range(v); });
    p.for_each_scalar([&](double v) { h.update(v); });
    return h.digest();
}

inline std::uint64_t hash_policy(const Policy& p) {
    ByteHash h;
    h.update_range(p.p);
    return h.digest();
}

}  // namespace valdetail

/// Release-gate checks: closed forms against independent oracles, the
/// simulator against the closed forms, gradients against finite differences
/// and double-run determinism hashes.
inline ValidationReport run_validation(std::uint64_t seed = 1) {
    ValidationReport rep;
    ChannelParams ch;
    TrafficParams tr{0.5, 1.0};

    {  // closed-form success probability vs subset enumeration
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            LayoutGenSpec spec;
            spec.n_links = 6;
            spec.seed = derive_seed(seed, 100 + trial);
            Layout l = generate_layout(spec);
            DistanceMatrix dm = distance_matrix(l);
            Rng rng(derive_seed(seed, 200 + trial));
            Policy pol = valdetail::random_policy(6, rng);
            for (std::size_t i = 0; i < 6; ++i) {
                double a = success_probability(i, pol, dm, ch);
                double b = valdetail::subset_enumeration_success(i, pol, dm, ch);
                worst = std::max(worst, std::abs(a - b) / std::max(1e-300, std::abs(b)));
            }
        }
        rep.checks.push_back({"eq3_subset_oracle", worst < 1e-12, worst, 1e-12});
    }

    {  // forced-success queueing vs closed form
        Layout l;
        l.side_length = 600;
        l.tx_pos = {{100, 100}};
        l.rx_pos = {{110, 100}};
        SimConfig sc;
        sc.layout = l;
        sc.policy = uniform_policy(1, 1.0);
        sc.traffic = tr;
        sc.n_slots = 1'000'000;
        sc.seed = derive_seed(seed, 300);
        sc.forced_success_prob = 0.8;
        SimStats st = run(sc);
        double gamma = preemption_prob(tr);
        double exact = 1.0 / (tr.arrival_rate * (1.0 - gamma) * 0.8) + tr.slot_duration;
        double err = std::abs(st.mean_paoi() - exact) / exact;
        rep.checks.push_back({"queueing_vs_eq12", err < 0.01, err, 0.01});
    }

    {  // full simulator vs analytics
        LayoutGenSpec spec;
        spec.n_links = 6;
        spec.seed = derive_seed(seed, 400);
        Layout l = generate_layout(spec);
        SimConfig sc;
        sc.layout = l;
        sc.policy = uniform_policy(6, 0.8);
        sc.traffic = tr;
        sc.n_slots = 500'000;
        sc.seed = derive_seed(seed, 401);
        SimStats st = run(sc);
        double analytic = network_objective(sc.policy, distance_matrix(l), ch, tr, false).mean_paoi;
        double sim = 0.0;
        for (const auto& link : st.links) sim += link.mean_paoi();
        sim /= 6.0;
        double err = std::abs(sim - analytic) / analytic;
        rep.checks.push_back({"simulator_vs_analytics", err < 0.03, err, 0.03});
    }

    {  // analytic objective gradient vs central finite differences
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            LayoutGenSpec spec;
            spec.n_links = 5;
            spec.seed = derive_seed(seed, 500 + trial);
            Layout l = generate_layout(spec);
            SuccessModel model = SuccessModel::build(distance_matrix(l), ch);
            Rng rng(derive_seed(seed, 600 + trial));
            Policy pol = valdetail::random_policy(5, rng, 0.1, 0.95);
            auto r = network_objective(pol, model, tr, true);
            const double h = 1e-6;
            for (std::size_t k = 0; k < 5; ++k) {
                Policy lo = pol, hi = pol;
                lo.p[k] -= h;
                hi.p[k] += h;
                double fd = (network_objective(hi, model, tr, false).mean_paoi -
                             network_objective(lo, model, tr, false).mean_paoi) /
                            (2 * h);
                double g = (*r.grad)[k];
                worst = std::max(worst, std::abs(g - fd) / (std::abs(g) + std::abs(fd) + 1e-12));
            }
        }
        rep.checks.push_back({"objective_gradient_fd", worst < 1e-6, worst, 1e-6});
    }

    {  // full network parameter gradient on a down-scaled net
        NetConfig nc;
        nc.grid_resolution = 12;
        nc.conv_filter_sizes = {3, 3, 3};
        nc.hidden_sizes = {4, 4};
        // f = 1 so finite differences see exactly the dependence the
        // final-round-only backprop covers
        nc.feedback_rounds = 1;
        LayoutGenSpec spec;
        spec.n_links = 4;
        spec.side_length = 120.0;
        spec.d_max = 40.0;
        spec.seed = derive_seed(seed, 700);
        Layout l = generate_layout(spec);
        NetParams params = NetParams::glorot(nc, derive_seed(seed, 701));
        auto lg = loss_and_gradients({l}, params, nc, ch, tr);
        const double h = 1e-5;
        double worst = 0.0;
        auto check_one = [&](double& slot, double g) {
            double save = slot;
            slot = save + h;
            double fp = loss_and_gradients({l}, params, nc, ch, tr).loss;
            slot = save - h;
            double fm = loss_and_gradients({l}, params, nc, ch, tr).loss;
            slot = save;
            double fd = (fp - fm) / (2 * h);
            worst = std::max(worst, std::abs(g - fd) / (std::abs(g) + std::abs(fd) + 1e-10));
        };
        check_one(params.k1[4], lg.grad.k1[4]);
        check_one(params.k2[0], lg.grad.k2[0]);
        check_one(params.k3[8], lg.grad.k3[8]);
        check_one(params.cb1, lg.grad.cb1);
        check_one(params.w1[3], lg.grad.w1[3]);
        check_one(params.b2[1], lg.grad.b2[1]);
        check_one(params.w_out[2], lg.grad.w_out[2]);
        check_one(params.b_out, lg.grad.b_out);
        rep.checks.push_back({"glinet_gradient_fd", worst < 1e-5, worst, 1e-5});
    }

    {  // double-run determinism
        LayoutGenSpec spec;
        spec.n_links = 20;
        spec.seed = derive_seed(seed, 800);
        auto h1 = valdetail::hash_layout(generate_layout(spec));
        auto h2 = valdetail::hash_layout(generate_layout(spec));
        bool ok = h1 == h2;

        Layout l = generate_layout(spec);
        SimConfig sc;
        sc.layout = l;
        sc.policy = uniform_policy(20, 0.5);
        sc.traffic = tr;
        sc.n_slots = 20'000;
        sc.seed = derive_seed(seed, 801);
        ok = ok && valdetail::hash_stats(run(sc)) == valdetail::hash_stats(run(sc));

        OptimizerConfig oc;
        oc.max_iters = 5;
        ok = ok && valdetail::hash_policy(coordinate_descent(l, ch, tr, oc).final_policy) ==
                       valdetail::hash_policy(coordinate_descent(l, ch, tr, oc).final_policy);

        NetConfig nc;
        nc.grid_resolution = 10;
        nc.conv_filter_sizes = {3, 3, 3};
        nc.hidden_sizes = {4, 4};
        nc.init_seed = derive_seed(seed, 802);
        nc.hyper.epochs = 2;
        nc.hyper.batch_size = 2;
        nc.hyper.threads = 2;
        std::vector<Layout> ds;
        for (int i = 0; i < 6; ++i) {
            LayoutGenSpec s2;
            s2.n_links = 4;
            s2.seed = derive_seed(seed, 810 + i);
            ds.push_back(generate_layout(s2));
        }
        NetParams p0 = NetParams::glorot(nc, nc.init_seed);
        auto t1 = train(ds, p0, nc, ch, tr);
        auto t2 = train(ds, p0, nc, ch, tr);
        ok = ok && valdetail::hash_params(t1.first) == valdetail::hash_params(t2.first);

        GridSpec gs{nc.grid_resolution, ds[0].side_length};
        ok = ok && valdetail::hash_policy(infer(ds[0], t1.first, nc, gs)) ==
                       valdetail::hash_policy(infer(ds[0], t2.first, nc, gs));

        rep.checks.push_back({"determinism_double_run", ok, ok ? 0.0 : 1.0, 0.0});
    }

    return rep;
}

}  // namespace paoi

#endif
