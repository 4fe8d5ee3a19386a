#ifndef PAOI_ANALYTICS_HPP
#define PAOI_ANALYTICS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "paoi/model.hpp"

namespace paoi {

// Failure probabilities above 1 - kPhiFloor are clamped when forming
// gradients so optimizers can escape p ~ 0 regions.
inline constexpr double kPhiFloor = 1e-9;

/// Per-link closed-form quantities of the preemptive unit-buffer scheme.
struct PaoiBreakdown {
    double succ_prob = 0.0;     // average success probability of a service period
    double fail_prob = 0.0;     // q = 1 - succ_prob
    double preempt_prob = 0.0;  // gamma = 1 - exp(-mu * lambda)
    double e_T = 0.0;           // mean time from first generation to delivery
    double e_W = 0.0;           // mean idle wait, 1 / lambda
    double e_S = 0.0;           // service time, mu
    double e_Y = 0.0;           // mean interdeparture time
    double e_paoi = 0.0;        // mean peak age, e_Y + e_S
};

/// Pairwise interference structure cached once per (layout, channel):
/// noise[i] is the noise attenuation of the direct link, coupling(j, i) the
/// per-slot success depression a transmission of link j inflicts on link i.
struct SuccessModel {
    std::size_t n = 0;
    std::vector<double> noise;     // exp(-beta sigma^2 / (P d_ii^-alpha))
    std::vector<double> coupling;  // coupling[j * n + i] = r / (1 + r), r = beta (d_ji / d_ii)^-alpha

    double coupling_jn(std::size_t j, std::size_t i) const { return coupling[j * n + i]; }

    static SuccessModel build(const DistanceMatrix& dm, const ChannelParams& ch) {
        ch.validate();
        SuccessModel m;
        m.n = dm.n;
        m.noise.resize(dm.n);
        m.coupling.assign(dm.n * dm.n, 0.0);
        for (std::size_t i = 0; i < dm.n; ++i) {
            double gain = ch.tx_power * std::pow(dm.direct(i), -ch.pathloss_exp);
            m.noise[i] = std::exp(-ch.capture_ratio * ch.noise_power / gain);
            for (std::size_t j = 0; j < dm.n; ++j) {
                if (j == i) continue;
                double r = ch.capture_ratio *
                           std::pow(dm(j, i) / dm.direct(i), -ch.pathloss_exp);
                m.coupling[j * dm.n + i] = r / (1.0 + r);
            }
        }
        return m;
    }

    /// Average success probability of link i under policy `pol`.
    double phi(std::size_t i, const Policy& pol) const {
        double v = pol.p[i] * noise[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            v *= 1.0 - pol.p[j] * coupling[j * n + i];
        }
        return v;
    }
};

/// Success probability of link i over the Rayleigh fades, conditioned on the
/// exact set of interfering transmitters.
inline double cond_success_given_active_set(std::size_t i, const std::vector<std::size_t>& active,
                                            const DistanceMatrix& dm, const ChannelParams& ch) {
    ch.validate();
    double gain = ch.tx_power * std::pow(dm.direct(i), -ch.pathloss_exp);
    double v = std::exp(-ch.capture_ratio * ch.noise_power / gain);
    for (std::size_t j : active) {
        double r = ch.capture_ratio * std::pow(dm(j, i) / dm.direct(i), -ch.pathloss_exp);
        v /= 1.0 + r;
    }
    return v;
}

/// Average success probability of link i: activation times the noise term
/// times the product over potential interferers.
inline double success_probability(std::size_t i, const Policy& pol, const DistanceMatrix& dm,
                                  const ChannelParams& ch) {
    pol.validate();
    return SuccessModel::build(dm, ch).phi(i, pol);
}

/// Probability that a service period is cut short by a fresh arrival.
inline double preemption_prob(const TrafficParams& tr) {
    tr.validate();
    return -std::expm1(-tr.slot_duration * tr.arrival_rate);
}

/// Mean interarrival time conditioned on preempting the service in progress.
inline double effective_generation_interval(const TrafficParams& tr) {
    double gamma = preemption_prob(tr);
    if (gamma <= 0.0)
        throw std::domain_error("effective_generation_interval: preemption probability is zero");
    return 1.0 / tr.arrival_rate + tr.slot_duration * (1.0 - 1.0 / gamma);
}

namespace detail {

inline PaoiBreakdown breakdown_from_phi(double phi, const TrafficParams& tr) {
    PaoiBreakdown b;
    b.succ_prob = phi;
    b.fail_prob = 1.0 - phi;
    b.preempt_prob = preemption_prob(tr);
    b.e_W = 1.0 / tr.arrival_rate;
    b.e_S = tr.slot_duration;
    const double lam = tr.arrival_rate;
    const double gamma = b.preempt_prob;
    const double q = b.fail_prob;
    if (phi <= 0.0) {
        b.e_T = b.e_Y = b.e_paoi = std::numeric_limits<double>::infinity();
        return b;
    }
    b.e_T = (gamma + q - gamma * q) / (lam * (1.0 - gamma) * (1.0 - q));
    b.e_Y = 1.0 / (lam * (1.0 - gamma) * (1.0 - q));
    b.e_paoi = b.e_Y + b.e_S;
    return b;
}

}  // namespace detail

inline PaoiBreakdown paoi_breakdown(std::size_t i, const Policy& pol, const DistanceMatrix& dm,
                                    const ChannelParams& ch, const TrafficParams& tr) {
    tr.validate();
    return detail::breakdown_from_phi(success_probability(i, pol, dm, ch), tr);
}

struct ObjectiveReport {
    std::vector<double> per_link_paoi;
    double mean_paoi = 0.0;
    std::optional<std::vector<double>> grad;  // d(mean_paoi) / d p_k
    bool grad_clamped = false;                // some phi hit the clamp floor
};

/// Network mean PAoI under `pol`, with the exact analytic gradient obtained
/// by chain rule through the success-probability product when requested.
inline ObjectiveReport network_objective(const Policy& pol, const SuccessModel& model,
                                         const TrafficParams& tr, bool want_grad) {
    pol.validate();
    tr.validate();
    const std::size_t n = model.n;
    const double lam = tr.arrival_rate;
    const double gamma = preemption_prob(tr);
    const double scale = lam * (1.0 - gamma);

    ObjectiveReport rep;
    rep.per_link_paoi.resize(n);
    std::vector<double> phi(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = model.phi(i, pol);
        rep.per_link_paoi[i] =
            phi[i] > 0.0 ? 1.0 / (scale * phi[i]) + tr.slot_duration
                         : std::numeric_limits<double>::infinity();
        sum += rep.per_link_paoi[i];
    }
    rep.mean_paoi = sum / static_cast<double>(n);

    if (want_grad) {
        std::vector<double> grad(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double ph = phi[i];
            if (ph < kPhiFloor) {
                ph = kPhiFloor;
                rep.grad_clamped = true;
            }
            // dE_i / dphi_i at the (possibly clamped) phi
            double dE = -1.0 / (scale * ph * ph);
            // own access probability: phi_i is linear in p_i
            grad[i] += dE * ph / pol.p[i];
            // interferers: phi_i carries a factor (1 - p_k c_ki)
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                double c = model.coupling_jn(k, i);
                if (c == 0.0) continue;
                grad[k] += dE * ph * (-c) / (1.0 - pol.p[k] * c);
            }
        }
        for (double& g : grad) g /= static_cast<double>(n);
        rep.grad = std::move(grad);
    }
    return rep;
}

inline ObjectiveReport network_objective(const Policy& pol, const DistanceMatrix& dm,
                                         const ChannelParams& ch, const TrafficParams& tr,
                                         bool want_grad) {
    return network_objective(pol, SuccessModel::build(dm, ch), tr, want_grad);
}

}  // namespace paoi

#endif
