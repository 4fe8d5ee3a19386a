#ifndef PAOI_MODEL_HPP
#define PAOI_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "paoi/rng.hpp"

namespace paoi {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Physical-layer constants: fixed transmit power, path-loss exponent,
/// linear SINR capture threshold and AWGN power.
struct ChannelParams {
    double tx_power = 0.1;        // watts
    double pathloss_exp = 3.0;    // dimensionless, > 2
    double capture_ratio = 1.0;   // linear SINR threshold
    double noise_power = 1e-12;   // watts (-90 dBm)

    void validate() const {
        if (!(tx_power > 0.0)) throw std::invalid_argument("ChannelParams: tx_power must be > 0");
        if (!(pathloss_exp > 2.0)) throw std::invalid_argument("ChannelParams: pathloss_exp must be > 2");
        if (!(capture_ratio > 0.0)) throw std::invalid_argument("ChannelParams: capture_ratio must be > 0");
        if (!(noise_power >= 0.0)) throw std::invalid_argument("ChannelParams: noise_power must be >= 0");
    }
};

/// Traffic constants: Poisson status-update rate and the deterministic
/// service time of one transmission (the slot duration).
struct TrafficParams {
    double arrival_rate = 0.5;   // packets per unit time
    double slot_duration = 1.0;  // deterministic service time

    void validate() const {
        if (!(arrival_rate > 0.0)) throw std::invalid_argument("TrafficParams: arrival_rate must be > 0");
        if (!(slot_duration > 0.0)) throw std::invalid_argument("TrafficParams: slot_duration must be > 0");
    }
};

/// Positions of the N transmitter/receiver pairs inside an L x L region.
struct Layout {
    std::vector<Vec2> tx_pos;
    std::vector<Vec2> rx_pos;
    double side_length = 0.0;

    std::size_t n_links() const { return tx_pos.size(); }

    void validate() const {
        if (tx_pos.size() != rx_pos.size())
            throw std::invalid_argument("Layout: tx_pos and rx_pos sizes differ");
        if (!(side_length > 0.0)) throw std::invalid_argument("Layout: side_length must be > 0");
        auto inside = [this](const Vec2& v) {
            return v.x >= 0.0 && v.x <= side_length && v.y >= 0.0 && v.y <= side_length;
        };
        for (const auto& v : tx_pos)
            if (!inside(v)) throw std::invalid_argument("Layout: transmitter outside region");
        for (const auto& v : rx_pos)
            if (!inside(v)) throw std::invalid_argument("Layout: receiver outside region");
    }
};

/// Cross-distance matrix: entry (j, i) is the distance from the transmitter
/// of link j to the receiver of link i; the diagonal holds direct distances.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> d;  // row-major, d[j * n + i]

    double operator()(std::size_t j, std::size_t i) const { return d[j * n + i]; }
    double direct(std::size_t i) const { return d[i * n + i]; }
};

/// Per-link slot-access probabilities, each in (0, 1].
struct Policy {
    std::vector<double> p;

    std::size_t size() const { return p.size(); }

    void validate() const {
        for (double v : p)
            if (!(v > 0.0 && v <= 1.0))
                throw std::invalid_argument("Policy: probabilities must lie in (0, 1]");
    }
};

struct LayoutGenSpec {
    std::size_t n_links = 100;
    double side_length = 600.0;
    double d_min = 2.0;
    double d_max = 80.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_links == 0) throw std::invalid_argument("LayoutGenSpec: n_links must be > 0");
        if (!(d_min > 0.0 && d_min <= d_max && d_max < side_length))
            throw std::invalid_argument("LayoutGenSpec: need 0 < d_min <= d_max < side_length");
    }
};

/// Transmitters uniform over the square; each receiver area-uniform over the
/// annulus [d_min, d_max] around its transmitter, rejection-sampled to stay
/// inside the region. A transmitter whose receiver budget is exhausted is
/// redrawn.
inline Layout generate_layout(const LayoutGenSpec& spec) {
    spec.validate();
    constexpr int kRxAttempts = 1000;
    constexpr int kTxAttempts = 1000;
    const double two_pi = 2.0 * M_PI;

    Layout layout;
    layout.side_length = spec.side_length;
    layout.tx_pos.reserve(spec.n_links);
    layout.rx_pos.reserve(spec.n_links);

    Rng rng(derive_seed(spec.seed, /*stream=*/0x4c41594fULL));
    for (std::size_t i = 0; i < spec.n_links; ++i) {
        bool placed = false;
        for (int t = 0; t < kTxAttempts && !placed; ++t) {
            Vec2 tx{rng.uniform(0.0, spec.side_length), rng.uniform(0.0, spec.side_length)};
            for (int a = 0; a < kRxAttempts; ++a) {
                // area-uniform radius in the annulus
                double r2 = spec.d_min * spec.d_min +
                            rng.uniform() * (spec.d_max * spec.d_max - spec.d_min * spec.d_min);
                double r = std::sqrt(r2);
                double theta = rng.uniform(0.0, two_pi);
                Vec2 rx{tx.x + r * std::cos(theta), tx.y + r * std::sin(theta)};
                if (rx.x >= 0.0 && rx.x <= spec.side_length && rx.y >= 0.0 &&
                    rx.y <= spec.side_length) {
                    layout.tx_pos.push_back(tx);
                    layout.rx_pos.push_back(rx);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed)
            throw std::runtime_error("generate_layout: retry budget exhausted (d_max too large?)");
    }
    return layout;
}

inline DistanceMatrix distance_matrix(const Layout& layout) {
    layout.validate();
    const std::size_t n = layout.n_links();
    DistanceMatrix dm;
    dm.n = n;
    dm.d.resize(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            double dist = distance(layout.tx_pos[j], layout.rx_pos[i]);
            if (dist == 0.0)
                throw std::invalid_argument("distance_matrix: zero distance (singular path loss)");
            dm.d[j * n + i] = dist;
        }
    return dm;
}

inline Policy uniform_policy(std::size_t n, double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("uniform_policy: p must lie in (0, 1]");
    Policy pol;
    pol.p.assign(n, p);
    return pol;
}

}  // namespace paoi

#endif
