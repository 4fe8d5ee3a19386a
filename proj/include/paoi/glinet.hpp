#ifndef PAOI_GLINET_HPP
#define PAOI_GLINET_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "paoi/analytics.hpp"
#include "paoi/model.hpp"
#include "paoi/rng.hpp"

namespace paoi {

struct GridSpec {
    std::size_t resolution = 150;  // cells per side
    double side_length = 600.0;

    void validate() const {
        if (resolution < 1) throw std::invalid_argument("GridSpec: resolution must be >= 1");
        if (!(side_length > 0.0)) throw std::invalid_argument("GridSpec: side_length must be > 0");
    }

    // 0-based cell index of a coordinate; cells are right-closed so that a
    // coordinate of exactly 0 lands in the first cell.
    std::size_t cell(double v) const {
        auto c = static_cast<long long>(std::ceil(v * static_cast<double>(resolution) / side_length));
        c = std::clamp(c, 1LL, static_cast<long long>(resolution));
        return static_cast<std::size_t>(c - 1);
    }
};

/// Access-probability-weighted occupancy grids of transmitters and receivers.
struct DensityGrid {
    std::size_t r = 0;
    std::vector<double> tx;  // row-major r x r
    std::vector<double> rx;
};

inline DensityGrid build_density_grids(const Layout& layout, const Policy& pol,
                                       const GridSpec& gs) {
    gs.validate();
    if (pol.size() != layout.n_links())
        throw std::invalid_argument("build_density_grids: policy size != layout size");
    DensityGrid g;
    g.r = gs.resolution;
    g.tx.assign(g.r * g.r, 0.0);
    g.rx.assign(g.r * g.r, 0.0);
    for (std::size_t i = 0; i < layout.n_links(); ++i) {
        g.tx[gs.cell(layout.tx_pos[i].x) * g.r + gs.cell(layout.tx_pos[i].y)] += pol.p[i];
        g.rx[gs.cell(layout.rx_pos[i].x) * g.r + gs.cell(layout.rx_pos[i].y)] += pol.p[i];
    }
    return g;
}

struct TrainHyper {
    double learning_rate = 0.02;
    double momentum = 0.9;
    // cap on the L2 norm of the mean batch gradient; the PAoI objective has
    // 1/phi^2 tails, so a single near-outage layout can otherwise emit a
    // step large enough to destroy the parameters
    double clip_norm = 10.0;
    std::size_t batch_size = 16;
    std::size_t epochs = 20;
    std::size_t threads = 1;
};

struct NetConfig {
    std::array<std::size_t, 3> conv_filter_sizes{11, 11, 11};  // odd, centered
    std::array<std::size_t, 2> hidden_sizes{30, 30};
    std::size_t feedback_rounds = 3;
    static constexpr std::size_t input_features = 8;  // 6 conv + prev p + normalized distance
    std::size_t grid_resolution = 150;
    double feature_distance_scale = 80.0;  // d_max used to normalize direct distances
    double p_floor = 1e-4;
    std::uint64_t init_seed = 0;
    TrainHyper hyper;

    void validate() const {
        for (std::size_t c : conv_filter_sizes)
            if (c % 2 == 0 || c == 0)
                throw std::invalid_argument("NetConfig: filter sizes must be odd");
        if (feedback_rounds < 1)
            throw std::invalid_argument("NetConfig: feedback_rounds must be >= 1");
        if (hidden_sizes[0] == 0 || hidden_sizes[1] == 0)
            throw std::invalid_argument("NetConfig: hidden sizes must be > 0");
        if (grid_resolution < 1)
            throw std::invalid_argument("NetConfig: grid_resolution must be >= 1");
    }
};

/// All trainable parameters. The three convolution kernels are shared
/// between the transmitter and receiver grid stacks.
struct NetParams {
    std::vector<double> k1, k2, k3;  // c x c kernels, row-major
    double cb1 = 0.0, cb2 = 0.0, cb3 = 0.0;
    std::vector<double> w1;  // h1 x 8
    std::vector<double> b1;  // h1
    std::vector<double> w2;  // h2 x h1
    std::vector<double> b2;  // h2
    std::vector<double> w_out;  // h2
    double b_out = 0.0;

    static NetParams zeros(const NetConfig& cfg) {
        cfg.validate();
        NetParams p;
        p.k1.assign(cfg.conv_filter_sizes[0] * cfg.conv_filter_sizes[0], 0.0);
        p.k2.assign(cfg.conv_filter_sizes[1] * cfg.conv_filter_sizes[1], 0.0);
        p.k3.assign(cfg.conv_filter_sizes[2] * cfg.conv_filter_sizes[2], 0.0);
        p.w1.assign(cfg.hidden_sizes[0] * NetConfig::input_features, 0.0);
        p.b1.assign(cfg.hidden_sizes[0], 0.0);
        p.w2.assign(cfg.hidden_sizes[1] * cfg.hidden_sizes[0], 0.0);
        p.b2.assign(cfg.hidden_sizes[1], 0.0);
        p.w_out.assign(cfg.hidden_sizes[1], 0.0);
        return p;
    }

    static NetParams glorot(const NetConfig& cfg, std::uint64_t seed) {
        NetParams p = zeros(cfg);
        Rng rng(derive_seed(seed, 0x474c49ULL));
        auto fill = [&](std::vector<double>& v, std::size_t fan_in, std::size_t fan_out) {
            double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (double& x : v) x = rng.uniform(-lim, lim);
        };
        fill(p.k1, p.k1.size(), p.k1.size());
        fill(p.k2, p.k2.size(), p.k2.size());
        fill(p.k3, p.k3.size(), p.k3.size());
        fill(p.w1, NetConfig::input_features, cfg.hidden_sizes[0]);
        fill(p.w2, cfg.hidden_sizes[0], cfg.hidden_sizes[1]);
        fill(p.w_out, cfg.hidden_sizes[1], 1);
        // Grids are mostly zero, so zero conv biases would leave every empty
        // cell exactly on the ReLU kink; start slightly off it.
        p.cb1 = rng.uniform(0.01, 0.1);
        p.cb2 = rng.uniform(0.01, 0.1);
        p.cb3 = rng.uniform(0.01, 0.1);
        return p;
    }

    template <typename F>
    void for_each_tensor(F&& f) {
        f(k1); f(k2); f(k3);
        f(w1); f(b1); f(w2); f(b2); f(w_out);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        f(k1); f(k2); f(k3);
        f(w1); f(b1); f(w2); f(b2); f(w_out);
    }
    template <typename F>
    void for_each_scalar(F&& f) {
        f(cb1); f(cb2); f(cb3); f(b_out);
    }
    template <typename F>
    void for_each_scalar(F&& f) const {
        f(cb1); f(cb2); f(cb3); f(b_out);
    }

    // this += a * other (shapes must match)
    void axpy(double a, const NetParams& o) {
        auto add = [a](std::vector<double>& dst, const std::vector<double>& src) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
        };
        add(k1, o.k1); add(k2, o.k2); add(k3, o.k3);
        add(w1, o.w1); add(b1, o.b1); add(w2, o.w2); add(b2, o.b2); add(w_out, o.w_out);
        cb1 += a * o.cb1; cb2 += a * o.cb2; cb3 += a * o.cb3; b_out += a * o.b_out;
    }

    void scale(double a) {
        for_each_tensor([a](std::vector<double>& v) { for (double& x : v) x *= a; });
        for_each_scalar([a](double& x) { x *= a; });
    }
};

struct InferStats {
    std::uint64_t conv_macs = 0;
    std::uint64_t fc_macs = 0;
};

namespace glidetail {

// Centered zero-padded cross-correlation, stride 1, same size.
inline void conv2d(const std::vector<double>& in, std::size_t r, const std::vector<double>& k,
                   std::size_t c, double bias, std::vector<double>& z, InferStats* stats) {
    const long long h = static_cast<long long>(c) / 2;
    const long long rr = static_cast<long long>(r);
    z.assign(r * r, 0.0);
    for (long long x = 0; x < rr; ++x) {
        for (long long y = 0; y < rr; ++y) {
            double acc = bias;
            for (long long a = 0; a < static_cast<long long>(c); ++a) {
                long long u = x + a - h;
                if (u < 0 || u >= rr) continue;
                for (long long b = 0; b < static_cast<long long>(c); ++b) {
                    long long v = y + b - h;
                    if (v < 0 || v >= rr) continue;
                    acc += in[u * rr + v] * k[a * c + b];
                }
            }
            z[x * rr + y] = acc;
        }
    }
    if (stats) stats->conv_macs += static_cast<std::uint64_t>(r) * r * c * c;
}

inline std::vector<double> relu(const std::vector<double>& z) {
    std::vector<double> m(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) m[i] = z[i] > 0.0 ? z[i] : 0.0;
    return m;
}

// dIn[u][v] += sum_{a,b} dOut[u - a + h][v - b + h] * k[a][b]
inline void conv2d_input_grad(const std::vector<double>& dout, std::size_t r,
                              const std::vector<double>& k, std::size_t c,
                              std::vector<double>& din) {
    const long long h = static_cast<long long>(c) / 2;
    const long long rr = static_cast<long long>(r);
    for (long long u = 0; u < rr; ++u)
        for (long long v = 0; v < rr; ++v) {
            double acc = 0.0;
            for (long long a = 0; a < static_cast<long long>(c); ++a) {
                long long x = u - a + h;
                if (x < 0 || x >= rr) continue;
                for (long long b = 0; b < static_cast<long long>(c); ++b) {
                    long long y = v - b + h;
                    if (y < 0 || y >= rr) continue;
                    acc += dout[x * rr + y] * k[a * c + b];
                }
            }
            din[u * rr + v] += acc;
        }
}

// dK[a][b] += sum_{x,y} dOut[x][y] * in[x + a - h][y + b - h]
inline void conv2d_kernel_grad(const std::vector<double>& in, const std::vector<double>& dout,
                               std::size_t r, std::size_t c, std::vector<double>& dk,
                               double& dbias) {
    const long long h = static_cast<long long>(c) / 2;
    const long long rr = static_cast<long long>(r);
    for (long long a = 0; a < static_cast<long long>(c); ++a)
        for (long long b = 0; b < static_cast<long long>(c); ++b) {
            double acc = 0.0;
            for (long long x = 0; x < rr; ++x) {
                long long u = x + a - h;
                if (u < 0 || u >= rr) continue;
                for (long long y = 0; y < rr; ++y) {
                    long long v = y + b - h;
                    if (v < 0 || v >= rr) continue;
                    acc += dout[x * rr + y] * in[u * rr + v];
                }
            }
            dk[a * c + b] += acc;
        }
    for (double d : dout) dbias += d;
}

struct StackCache {
    std::vector<double> m0;          // input grid
    std::vector<double> z1, z2, z3;  // pre-activations
    std::vector<double> m1, m2, m3;  // feature maps
};

inline StackCache conv_stack(const std::vector<double>& grid, std::size_t r,
                             const NetParams& params, const NetConfig& cfg, InferStats* stats) {
    StackCache s;
    s.m0 = grid;
    conv2d(s.m0, r, params.k1, cfg.conv_filter_sizes[0], params.cb1, s.z1, stats);
    s.m1 = relu(s.z1);
    conv2d(s.m1, r, params.k2, cfg.conv_filter_sizes[1], params.cb2, s.z2, stats);
    s.m2 = relu(s.z2);
    conv2d(s.m2, r, params.k3, cfg.conv_filter_sizes[2], params.cb3, s.z3, stats);
    s.m3 = relu(s.z3);
    return s;
}

struct FcCache {
    std::vector<double> x;        // input_features
    std::vector<double> z1, a1;   // h1
    std::vector<double> z2, a2;   // h2
    double zo = 0.0, p = 0.0;
};

inline FcCache fc_link(const double* x, const NetParams& params, const NetConfig& cfg,
                       InferStats* stats) {
    const std::size_t nf = NetConfig::input_features;
    const std::size_t h1 = cfg.hidden_sizes[0];
    const std::size_t h2 = cfg.hidden_sizes[1];
    FcCache c;
    c.x.assign(x, x + nf);
    c.z1.resize(h1);
    c.a1.resize(h1);
    for (std::size_t i = 0; i < h1; ++i) {
        double acc = params.b1[i];
        for (std::size_t j = 0; j < nf; ++j) acc += params.w1[i * nf + j] * x[j];
        c.z1[i] = acc;
        c.a1[i] = acc > 0.0 ? acc : 0.0;
    }
    c.z2.resize(h2);
    c.a2.resize(h2);
    for (std::size_t i = 0; i < h2; ++i) {
        double acc = params.b2[i];
        for (std::size_t j = 0; j < h1; ++j) acc += params.w2[i * h1 + j] * c.a1[j];
        c.z2[i] = acc;
        c.a2[i] = acc > 0.0 ? acc : 0.0;
    }
    double zo = params.b_out;
    for (std::size_t j = 0; j < h2; ++j) zo += params.w_out[j] * c.a2[j];
    c.zo = zo;
    c.p = 1.0 / (1.0 + std::exp(-zo));
    if (stats) stats->fc_macs += nf * h1 + h1 * h2 + h2;
    return c;
}

}  // namespace glidetail

/// Forward pass of the three-layer convolution stage over both grids; the
/// feature maps of all three layers are retained for the gather step.
struct ConvMaps {
    glidetail::StackCache tx, rx;
    std::size_t r = 0;
};

inline ConvMaps conv_forward(const DensityGrid& grid, const NetParams& params,
                             const NetConfig& cfg, InferStats* stats = nullptr) {
    cfg.validate();
    ConvMaps m;
    m.r = grid.r;
    m.tx = glidetail::conv_stack(grid.tx, grid.r, params, cfg, stats);
    m.rx = glidetail::conv_stack(grid.rx, grid.r, params, cfg, stats);
    return m;
}

/// Per-link feature rows: the three transmitter-stack maps sampled at the
/// receiver's cell, the three receiver-stack maps at the transmitter's cell,
/// the previous access probability, and the normalized direct distance.
inline std::vector<double> gather_link_features(const ConvMaps& maps, const Layout& layout,
                                                const Policy& prev, const GridSpec& gs,
                                                double d_max) {
    const std::size_t n = layout.n_links();
    const std::size_t nf = NetConfig::input_features;
    std::vector<double> feats(n * nf);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rx_cell = gs.cell(layout.rx_pos[i].x) * maps.r + gs.cell(layout.rx_pos[i].y);
        std::size_t tx_cell = gs.cell(layout.tx_pos[i].x) * maps.r + gs.cell(layout.tx_pos[i].y);
        double* row = feats.data() + i * nf;
        row[0] = maps.tx.m1[rx_cell];
        row[1] = maps.tx.m2[rx_cell];
        row[2] = maps.tx.m3[rx_cell];
        row[3] = maps.rx.m1[tx_cell];
        row[4] = maps.rx.m2[tx_cell];
        row[5] = maps.rx.m3[tx_cell];
        row[6] = prev.p[i];
        row[7] = distance(layout.tx_pos[i], layout.rx_pos[i]) / d_max;
    }
    return feats;
}

/// Shared-weight fully connected stage applied to each link independently.
inline Policy fc_forward(const std::vector<double>& features, const NetParams& params,
                         const NetConfig& cfg, InferStats* stats = nullptr) {
    const std::size_t nf = NetConfig::input_features;
    if (features.size() % nf != 0)
        throw std::invalid_argument("fc_forward: feature matrix width mismatch");
    const std::size_t n = features.size() / nf;
    Policy pol;
    pol.p.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        pol.p[i] = glidetail::fc_link(features.data() + i * nf, params, cfg, stats).p;
    return pol;
}

/// Feedback-round inference: grids from the previous round's policy feed the
/// convolution and per-link stages; the final policy is clamped to
/// [p_floor, 1].
inline Policy infer(const Layout& layout, const NetParams& params, const NetConfig& cfg,
                    const GridSpec& gs, InferStats* stats = nullptr) {
    cfg.validate();
    gs.validate();
    if (gs.resolution != cfg.grid_resolution)
        throw std::invalid_argument("infer: grid resolution does not match the trained network");
    Policy p = uniform_policy(layout.n_links(), 0.5);
    for (std::size_t round = 0; round < cfg.feedback_rounds; ++round) {
        DensityGrid grid = build_density_grids(layout, p, gs);
        ConvMaps maps = conv_forward(grid, params, cfg, stats);
        auto feats = gather_link_features(maps, layout, p, gs, cfg.feature_distance_scale);
        p = fc_forward(feats, params, cfg, stats);
    }
    for (double& v : p.p) v = std::clamp(v, cfg.p_floor, 1.0);
    return p;
}

struct LossGrad {
    double loss = 0.0;  // batch mean of the per-layout mean PAoI
    NetParams grad;     // sum of per-layout gradient contributions
    bool clamped = false;
};

namespace glidetail {

// Backprop through the final feedback round of one layout; earlier rounds
// enter as constants. Adds this layout's gradient into `grad`.
inline double layout_loss_grad(const Layout& layout, const NetParams& params,
                               const NetConfig& cfg, const ChannelParams& ch,
                               const TrafficParams& tr, NetParams& grad, bool& clamped) {
    const GridSpec gs{cfg.grid_resolution, layout.side_length};
    const std::size_t n = layout.n_links();
    const std::size_t nf = NetConfig::input_features;
    const std::size_t h1 = cfg.hidden_sizes[0];
    const std::size_t h2 = cfg.hidden_sizes[1];

    // forward: keep only the final round's caches
    Policy prev = uniform_policy(n, 0.5);
    DensityGrid grid;
    ConvMaps maps;
    std::vector<double> feats;
    std::vector<FcCache> fc(n);
    Policy p;
    for (std::size_t round = 0; round < cfg.feedback_rounds; ++round) {
        grid = build_density_grids(layout, prev, gs);
        maps = conv_forward(grid, params, cfg, nullptr);
        feats = gather_link_features(maps, layout, prev, gs, cfg.feature_distance_scale);
        p.p.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            fc[i] = fc_link(feats.data() + i * nf, params, cfg, nullptr);
            p.p[i] = fc[i].p;
        }
        if (round + 1 < cfg.feedback_rounds) prev = p;
    }

    const DistanceMatrix dm = distance_matrix(layout);
    ObjectiveReport rep = network_objective(p, SuccessModel::build(dm, ch), tr, true);
    clamped = clamped || rep.grad_clamped;

    // backward: FC per link, gathering map gradients as sparse scatters
    std::vector<double> g_tx1(grid.r * grid.r, 0.0), g_tx2 = g_tx1, g_tx3 = g_tx1;
    std::vector<double> g_rx1 = g_tx1, g_rx2 = g_tx1, g_rx3 = g_tx1;
    std::vector<double> dz1(h1), dz2(h2);
    for (std::size_t i = 0; i < n; ++i) {
        const FcCache& c = fc[i];
        double dzo = (*rep.grad)[i] * c.p * (1.0 - c.p);
        for (std::size_t j = 0; j < h2; ++j) grad.w_out[j] += dzo * c.a2[j];
        grad.b_out += dzo;
        for (std::size_t j = 0; j < h2; ++j)
            dz2[j] = c.z2[j] > 0.0 ? dzo * params.w_out[j] : 0.0;
        for (std::size_t j = 0; j < h2; ++j) {
            for (std::size_t k = 0; k < h1; ++k) grad.w2[j * h1 + k] += dz2[j] * c.a1[k];
            grad.b2[j] += dz2[j];
        }
        for (std::size_t k = 0; k < h1; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < h2; ++j) acc += params.w2[j * h1 + k] * dz2[j];
            dz1[k] = c.z1[k] > 0.0 ? acc : 0.0;
        }
        for (std::size_t k = 0; k < h1; ++k) {
            for (std::size_t j = 0; j < nf; ++j) grad.w1[k * nf + j] += dz1[k] * c.x[j];
            grad.b1[k] += dz1[k];
        }
        double dx[NetConfig::input_features] = {};
        for (std::size_t j = 0; j < nf; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < h1; ++k) acc += params.w1[k * nf + j] * dz1[k];
            dx[j] = acc;
        }
        std::size_t rx_cell = gs.cell(layout.rx_pos[i].x) * grid.r + gs.cell(layout.rx_pos[i].y);
        std::size_t tx_cell = gs.cell(layout.tx_pos[i].x) * grid.r + gs.cell(layout.tx_pos[i].y);
        g_tx1[rx_cell] += dx[0];
        g_tx2[rx_cell] += dx[1];
        g_tx3[rx_cell] += dx[2];
        g_rx1[tx_cell] += dx[3];
        g_rx2[tx_cell] += dx[4];
        g_rx3[tx_cell] += dx[5];
        // dx[6], dx[7] flow into constants (previous-round policy, geometry)
    }

    auto stack_backward = [&](const StackCache& s, std::vector<double>& g1, std::vector<double>& g2,
                              std::vector<double>& g3) {
        const std::size_t r = grid.r;
        std::vector<double> dz(r * r);
        // layer 3
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = s.z3[i] > 0.0 ? g3[i] : 0.0;
        conv2d_kernel_grad(s.m2, dz, r, cfg.conv_filter_sizes[2], grad.k3, grad.cb3);
        conv2d_input_grad(dz, r, params.k3, cfg.conv_filter_sizes[2], g2);
        // layer 2
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = s.z2[i] > 0.0 ? g2[i] : 0.0;
        conv2d_kernel_grad(s.m1, dz, r, cfg.conv_filter_sizes[1], grad.k2, grad.cb2);
        conv2d_input_grad(dz, r, params.k2, cfg.conv_filter_sizes[1], g1);
        // layer 1
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = s.z1[i] > 0.0 ? g1[i] : 0.0;
        conv2d_kernel_grad(s.m0, dz, r, cfg.conv_filter_sizes[0], grad.k1, grad.cb1);
    };
    stack_backward(maps.tx, g_tx1, g_tx2, g_tx3);
    stack_backward(maps.rx, g_rx1, g_rx2, g_rx3);

    return rep.mean_paoi;
}

template <typename F>
inline void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t t = std::min(threads, count);
    for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += t) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace glidetail

/// Batch loss and exact parameter gradients. The loss is the batch mean of
/// the per-layout mean PAoI at the final-round policy; gradient
/// contributions are summed over layouts (reduction in layout order, so the
/// result is bit-deterministic regardless of thread count).
inline LossGrad loss_and_gradients(const std::vector<Layout>& batch, const NetParams& params,
                                   const NetConfig& cfg, const ChannelParams& ch,
                                   const TrafficParams& tr, std::size_t threads = 1) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    LossGrad out;
    out.grad = NetParams::zeros(cfg);

    std::vector<NetParams> grads(batch.size());
    std::vector<double> losses(batch.size());
    std::vector<char> clamps(batch.size(), 0);
    glidetail::parallel_for(batch.size(), threads, [&](std::size_t b) {
        grads[b] = NetParams::zeros(cfg);
        bool cl = false;
        losses[b] = glidetail::layout_loss_grad(batch[b], params, cfg, ch, tr, grads[b], cl);
        clamps[b] = cl;
    });
    double sum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        sum += losses[b];
        out.grad.axpy(1.0, grads[b]);
        out.clamped = out.clamped || clamps[b];
    }
    out.loss = sum / static_cast<double>(batch.size());
    if (!std::isfinite(out.loss)) out.clamped = true;
    return out;
}

struct TrainingCurve {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;    // per epoch
    std::size_t lr_halvings = 0;
};

/// Minibatch gradient descent with momentum over random layouts; the last
/// tenth of the set is held out for validation and the best-validation
/// parameters are returned. Deterministic under the config seed.
inline std::pair<NetParams, TrainingCurve> train(const std::vector<Layout>& dataset,
                                                 const NetParams& params0, const NetConfig& cfg,
                                                 const ChannelParams& ch,
                                                 const TrafficParams& tr) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty training set");
    const std::size_t n_val = std::max<std::size_t>(1, dataset.size() / 10);
    const std::size_t n_train = dataset.size() > n_val ? dataset.size() - n_val : dataset.size();
    std::vector<Layout> val(dataset.begin() + static_cast<long>(n_train), dataset.end());
    if (val.empty()) val.push_back(dataset.back());

    NetParams params = params0;
    NetParams velocity = NetParams::zeros(cfg);
    TrainingCurve curve;
    double lr = cfg.hyper.learning_rate;
    NetParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int rising = 0;
    std::size_t halvings = 0;

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.hyper.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.init_seed, 0x5348ULL + epoch));
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.hyper.batch_size) {
            std::size_t end = std::min(start + cfg.hyper.batch_size, n_train);
            std::vector<Layout> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            LossGrad lg = loss_and_gradients(batch, params, cfg, ch, tr, cfg.hyper.threads);
            epoch_loss += lg.loss;
            ++n_batches;
            double step = -lr / static_cast<double>(batch.size());
            if (cfg.hyper.clip_norm > 0.0) {
                double sq = 0.0;
                lg.grad.for_each_tensor([&](const std::vector<double>& v) {
                    for (double x : v) sq += x * x;
                });
                lg.grad.for_each_scalar([&](double x) { sq += x * x; });
                double norm = std::sqrt(sq) / static_cast<double>(batch.size());
                if (norm > cfg.hyper.clip_norm) lg.grad.scale(cfg.hyper.clip_norm / norm);
            }
            velocity.scale(cfg.hyper.momentum);
            velocity.axpy(step, lg.grad);
            params.axpy(1.0, velocity);
        }
        epoch_loss /= static_cast<double>(n_batches);
        curve.train_loss.push_back(epoch_loss);

        LossGrad vl = loss_and_gradients(val, params, cfg, ch, tr, cfg.hyper.threads);
        curve.val_loss.push_back(vl.loss);
        if (vl.loss < best_val) {
            best_val = vl.loss;
            best = params;
        }

        if (epoch > 0 && epoch_loss > curve.train_loss[epoch - 1]) {
            if (++rising >= 5) {
                if (halvings >= 4) break;
                lr *= 0.5;
                ++halvings;
                rising = 0;
                velocity = NetParams::zeros(cfg);
            }
        } else {
            rising = 0;
        }
    }
    curve.lr_halvings = halvings;
    return {best, curve};
}

// ---- weights file ----------------------------------------------------------
// magic "GLINET", u32 version, config integers, then parameter tensors as
// little-endian IEEE-754 doubles, row-major, in declaration order.

namespace glidetail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("weights file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t lo = get_u32(is);
    std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}
inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}
inline double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace glidetail

inline constexpr std::uint32_t kWeightsVersion = 1;

inline void save_params(const NetParams& params, const NetConfig& cfg, const std::string& path) {
    using namespace glidetail;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    os.write("GLINET", 6);
    put_u32(os, kWeightsVersion);
    put_u32(os, static_cast<std::uint32_t>(cfg.conv_filter_sizes[0]));
    put_u32(os, static_cast<std::uint32_t>(cfg.conv_filter_sizes[1]));
    put_u32(os, static_cast<std::uint32_t>(cfg.conv_filter_sizes[2]));
    put_u32(os, static_cast<std::uint32_t>(cfg.hidden_sizes[0]));
    put_u32(os, static_cast<std::uint32_t>(cfg.hidden_sizes[1]));
    put_u32(os, static_cast<std::uint32_t>(cfg.feedback_rounds));
    put_u32(os, static_cast<std::uint32_t>(NetConfig::input_features));
    put_u32(os, static_cast<std::uint32_t>(cfg.grid_resolution));
    put_f64(os, cfg.feature_distance_scale);
    put_f64(os, cfg.p_floor);
    put_f64(os, cfg.hyper.learning_rate);
    put_f64(os, cfg.hyper.momentum);
    put_u32(os, static_cast<std::uint32_t>(cfg.hyper.batch_size));
    put_u32(os, static_cast<std::uint32_t>(cfg.hyper.epochs));
    put_u64(os, cfg.init_seed);
    auto tensor = [&](const std::vector<double>& v) {
        for (double x : v) put_f64(os, x);
    };
    tensor(params.k1); put_f64(os, params.cb1);
    tensor(params.k2); put_f64(os, params.cb2);
    tensor(params.k3); put_f64(os, params.cb3);
    tensor(params.w1); tensor(params.b1);
    tensor(params.w2); tensor(params.b2);
    tensor(params.w_out); put_f64(os, params.b_out);
    if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

inline std::pair<NetParams, NetConfig> load_params(const std::string& path) {
    using namespace glidetail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, "GLINET", 6) != 0)
        throw std::runtime_error("load_params: bad magic");
    if (get_u32(is) != kWeightsVersion) throw std::runtime_error("load_params: bad version");
    NetConfig cfg;
    cfg.conv_filter_sizes[0] = get_u32(is);
    cfg.conv_filter_sizes[1] = get_u32(is);
    cfg.conv_filter_sizes[2] = get_u32(is);
    cfg.hidden_sizes[0] = get_u32(is);
    cfg.hidden_sizes[1] = get_u32(is);
    cfg.feedback_rounds = get_u32(is);
    if (get_u32(is) != NetConfig::input_features)
        throw std::runtime_error("load_params: feature count mismatch");
    cfg.grid_resolution = get_u32(is);
    cfg.feature_distance_scale = get_f64(is);
    cfg.p_floor = get_f64(is);
    cfg.hyper.learning_rate = get_f64(is);
    cfg.hyper.momentum = get_f64(is);
    cfg.hyper.batch_size = get_u32(is);
    cfg.hyper.epochs = get_u32(is);
    cfg.init_seed = get_u64(is);
    cfg.validate();
    NetParams p = NetParams::zeros(cfg);
    auto tensor = [&](std::vector<double>& v) {
        for (double& x : v) x = get_f64(is);
    };
    tensor(p.k1); p.cb1 = get_f64(is);
    tensor(p.k2); p.cb2 = get_f64(is);
    tensor(p.k3); p.cb3 = get_f64(is);
    tensor(p.w1); tensor(p.b1);
    tensor(p.w2); tensor(p.b2);
    tensor(p.w_out); p.b_out = get_f64(is);
    return {std::move(p), cfg};
}

}  // namespace paoi

#endif
