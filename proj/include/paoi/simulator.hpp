#ifndef PAOI_SIMULATOR_HPP
#define PAOI_SIMULATOR_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "paoi/analytics.hpp"
#include "paoi/model.hpp"
#include "paoi/rng.hpp"

namespace paoi {

struct SimConfig {
    Layout layout;
    Policy policy;
    ChannelParams channel;
    TrafficParams traffic;
    std::uint64_t n_slots = 1'000'000;
    std::uint64_t seed = 0;
    // Replaces the SINR capture test with a Bernoulli coin; isolates the
    // queueing dynamics from the PHY.
    std::optional<double> forced_success_prob;
    // Every link holds a fresh packet in every slot and attempts are
    // slot-aligned; isolates the PHY from the queueing dynamics.
    bool saturated = false;
    bool record_samples = false;

    void validate() const {
        layout.validate();
        // unlike the analytic layer, the simulator tolerates p = 0 (a link
        // that never transmits is a legal degenerate run)
        for (double v : policy.p)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("SimConfig: probabilities must lie in [0, 1]");
        channel.validate();
        traffic.validate();
        if (n_slots < 1) throw std::invalid_argument("SimConfig: n_slots must be >= 1");
        if (policy.size() != layout.n_links())
            throw std::invalid_argument("SimConfig: policy size != layout size");
        if (forced_success_prob && !(*forced_success_prob >= 0.0 && *forced_success_prob <= 1.0))
            throw std::invalid_argument("SimConfig: forced_success_prob out of range");
    }
};

struct PaoiSample {
    double delivery_time = 0.0;  // continuous slot units
    double paoi = 0.0;
};

struct LinkStats {
    std::uint64_t service_periods = 0;  // resolved periods (preempted or completed)
    std::uint64_t preempted = 0;
    std::uint64_t attempts = 0;          // activated transmissions
    std::uint64_t decode_successes = 0;  // capture events among attempts
    std::uint64_t deliveries = 0;
    std::uint64_t buffered_slots = 0;  // slot starts at which a packet was held
    double paoi_sum = 0.0;
    double paoi_sq_sum = 0.0;
    std::uint64_t paoi_count = 0;
    double y_sum = 0.0;

    double mean_paoi() const {
        return paoi_count ? paoi_sum / static_cast<double>(paoi_count)
                          : std::numeric_limits<double>::quiet_NaN();
    }
    double mean_interdeparture() const {
        return paoi_count ? y_sum / static_cast<double>(paoi_count)
                          : std::numeric_limits<double>::quiet_NaN();
    }
    double paoi_stddev() const {
        if (paoi_count < 2) return std::numeric_limits<double>::quiet_NaN();
        double m = mean_paoi();
        return std::sqrt(paoi_sq_sum / static_cast<double>(paoi_count) - m * m);
    }
    double empirical_preemption() const {
        return service_periods ? static_cast<double>(preempted) / static_cast<double>(service_periods)
                               : std::numeric_limits<double>::quiet_NaN();
    }
};

struct SimStats {
    std::vector<LinkStats> links;
    std::vector<std::vector<PaoiSample>> samples;  // populated when record_samples
    std::uint64_t slots_simulated = 0;
    double wall_seconds = 0.0;

    double mean_paoi() const {
        double s = 0.0;
        std::uint64_t c = 0;
        for (const auto& l : links) {
            s += l.paoi_sum;
            c += l.paoi_count;
        }
        return c ? s / static_cast<double>(c) : std::numeric_limits<double>::quiet_NaN();
    }
};

/// Per-slot success frequency of link i; its expectation is the Eq.-style
/// average success probability when every slot holds a packet.
inline double empirical_success_probability(const SimStats& stats, std::size_t i) {
    const auto& l = stats.links.at(i);
    if (l.buffered_slots == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(l.decode_successes) / static_cast<double>(l.buffered_slots);
}

namespace detail {

// Number of slot starts k*mu falling inside [a, b).
inline std::uint64_t busy_slot_starts(double a, double b, double mu) {
    if (b <= a) return 0;
    auto lo = static_cast<std::int64_t>(std::ceil(a / mu - 1e-12));
    auto hi = static_cast<std::int64_t>(std::ceil(b / mu - 1e-12));
    return hi > lo ? static_cast<std::uint64_t>(hi - lo) : 0;
}

// SINR capture test for link i with independently activated interferers.
inline bool capture_draw(std::size_t i, const Policy& pol, const DistanceMatrix& dm,
                         const ChannelParams& ch, Rng& rng) {
    const double alpha = ch.pathloss_exp;
    double signal = ch.tx_power * rng.exponential(1.0) * std::pow(dm.direct(i), -alpha);
    double interference = 0.0;
    for (std::size_t j = 0; j < dm.n; ++j) {
        if (j == i) continue;
        if (rng.bernoulli(pol.p[j]))
            interference += ch.tx_power * rng.exponential(1.0) * std::pow(dm(j, i), -alpha);
    }
    return signal > ch.capture_ratio * (ch.noise_power + interference);
}

// One link of the preemptive unit-buffer process. Service is anchored at the
// generation (or preempting-arrival) instant and lasts exactly one service
// time; the transmission outcome is decided only for periods that end
// un-preempted, and a failed update is discarded.
inline void run_link(const SimConfig& cfg, const DistanceMatrix& dm, std::size_t i,
                     LinkStats& out, std::vector<PaoiSample>* dump) {
    const double mu = cfg.traffic.slot_duration;
    const double lam = cfg.traffic.arrival_rate;
    const double horizon = static_cast<double>(cfg.n_slots) * mu;
    Rng rng(derive_seed(cfg.seed, 1000 + i));

    double next_arrival = rng.exponential(lam);
    double last_delivery = -1.0;  // no delivery yet

    while (next_arrival < horizon) {
        const double busy_start = next_arrival;
        double service_end = next_arrival + mu;
        next_arrival += rng.exponential(lam);
        // preempting arrivals restart the service period
        while (next_arrival < service_end) {
            ++out.service_periods;
            ++out.preempted;
            service_end = next_arrival + mu;
            next_arrival += rng.exponential(lam);
        }
        if (service_end > horizon) break;
        ++out.service_periods;
        out.buffered_slots += busy_slot_starts(busy_start, service_end, mu);

        bool delivered = false;
        if (rng.bernoulli(cfg.policy.p[i])) {
            ++out.attempts;
            bool ok = cfg.forced_success_prob ? rng.bernoulli(*cfg.forced_success_prob)
                                              : capture_draw(i, cfg.policy, dm, cfg.channel, rng);
            if (ok) {
                ++out.decode_successes;
                delivered = true;
            }
        }
        if (delivered) {
            ++out.deliveries;
            if (last_delivery >= 0.0) {
                double y = service_end - last_delivery;
                double paoi = y + mu;
                out.y_sum += y;
                out.paoi_sum += paoi;
                out.paoi_sq_sum += paoi * paoi;
                ++out.paoi_count;
                if (dump) dump->push_back({service_end, paoi});
            }
            last_delivery = service_end;
        }
        // failure or non-activation discards the update; either way the
        // buffer is empty and the next arrival starts a fresh cycle
    }
}

inline void run_saturated(const SimConfig& cfg, const DistanceMatrix& dm, SimStats& stats) {
    const std::size_t n = cfg.layout.n_links();
    const double mu = cfg.traffic.slot_duration;
    const double alpha = cfg.channel.pathloss_exp;
    std::vector<Rng> rngs;
    rngs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(derive_seed(cfg.seed, 1000 + i));
    std::vector<char> active(n);
    std::vector<double> last_delivery(n, -1.0);

    for (std::uint64_t s = 0; s < cfg.n_slots; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            active[i] = rngs[i].bernoulli(cfg.policy.p[i]);
            auto& l = stats.links[i];
            ++l.buffered_slots;
            ++l.service_periods;
            if (active[i]) ++l.attempts;
        }
        const double slot_end = static_cast<double>(s + 1) * mu;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            bool ok;
            if (cfg.forced_success_prob) {
                ok = rngs[i].bernoulli(*cfg.forced_success_prob);
            } else {
                double signal =
                    cfg.channel.tx_power * rngs[i].exponential(1.0) * std::pow(dm.direct(i), -alpha);
                double interference = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i && active[j])
                        interference += cfg.channel.tx_power * rngs[i].exponential(1.0) *
                                        std::pow(dm(j, i), -alpha);
                ok = signal > cfg.channel.capture_ratio * (cfg.channel.noise_power + interference);
            }
            if (!ok) continue;
            auto& l = stats.links[i];
            ++l.decode_successes;
            ++l.deliveries;
            if (last_delivery[i] >= 0.0) {
                double y = slot_end - last_delivery[i];
                double paoi = y + mu;
                l.y_sum += y;
                l.paoi_sum += paoi;
                l.paoi_sq_sum += paoi * paoi;
                ++l.paoi_count;
                if (cfg.record_samples) stats.samples[i].push_back({slot_end, paoi});
            }
            last_delivery[i] = slot_end;
        }
    }
}

}  // namespace detail

inline SimStats run(const SimConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = cfg.layout.n_links();
    DistanceMatrix dm = distance_matrix(cfg.layout);

    SimStats stats;
    stats.links.resize(n);
    if (cfg.record_samples) stats.samples.resize(n);
    stats.slots_simulated = cfg.n_slots;

    if (cfg.saturated) {
        detail::run_saturated(cfg, dm, stats);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            detail::run_link(cfg, dm, i, stats.links[i],
                             cfg.record_samples ? &stats.samples[i] : nullptr);
    }
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

}  // namespace paoi

#endif
