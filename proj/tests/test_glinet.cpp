#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "paoi/glinet.hpp"
#include "paoi/model.hpp"

namespace paoi {
namespace {

NetConfig small_net() {
    NetConfig nc;
    nc.grid_resolution = 12;
    nc.conv_filter_sizes = {3, 3, 3};
    nc.hidden_sizes = {4, 4};
    nc.feedback_rounds = 1;
    return nc;
}

Layout small_layout(std::uint64_t seed, std::size_t n = 4) {
    LayoutGenSpec spec;
    spec.n_links = n;
    spec.side_length = 120.0;
    spec.d_max = 40.0;
    spec.seed = seed;
    return generate_layout(spec);
}

const ChannelParams kCh{};
const TrafficParams kTr{0.5, 1.0};

// ---- density grids ----------------------------------------------------------

TEST(DensityGrids, PaperCellExample) {
    // L=600, R=150: a transmitter at (2, 2) with p=1 fills the first cell
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{2.0, 2.0}};
    l.rx_pos = {{10.0, 2.0}};
    GridSpec gs{150, 600.0};
    DensityGrid g = build_density_grids(l, uniform_policy(1, 1.0), gs);
    EXPECT_DOUBLE_EQ(g.tx[0], 1.0);
}

TEST(DensityGrids, SumEqualsPolicySum) {
    Layout l = small_layout(1, 5);
    Policy pol;
    pol.p = {0.3, 0.2, 0.9, 0.5, 0.15};
    GridSpec gs{12, l.side_length};
    DensityGrid g = build_density_grids(l, pol, gs);
    double tx_sum = 0.0, rx_sum = 0.0;
    for (double v : g.tx) tx_sum += v;
    for (double v : g.rx) rx_sum += v;
    EXPECT_NEAR(tx_sum, 2.05, 1e-9);
    EXPECT_NEAR(rx_sum, 2.05, 1e-9);
}

TEST(DensityGrids, CollisionsAccumulate) {
    Layout l;
    l.side_length = 600.0;
    l.tx_pos = {{1.0, 1.0}, {2.0, 2.0}};
    l.rx_pos = {{50.0, 50.0}, {60.0, 60.0}};
    Policy pol;
    pol.p = {0.4, 0.5};
    DensityGrid g = build_density_grids(l, pol, GridSpec{150, 600.0});
    EXPECT_DOUBLE_EQ(g.tx[0], 0.9);
}

TEST(DensityGrids, LinearInPolicy) {
    Layout l = small_layout(2, 6);
    GridSpec gs{12, l.side_length};
    Policy a, b, sum;
    a.p = {0.1, 0.2, 0.3, 0.1, 0.2, 0.3};
    b.p = {0.4, 0.1, 0.2, 0.5, 0.1, 0.2};
    sum.p.resize(6);
    for (int i = 0; i < 6; ++i) sum.p[i] = a.p[i] + b.p[i];
    DensityGrid ga = build_density_grids(l, a, gs);
    DensityGrid gb = build_density_grids(l, b, gs);
    DensityGrid gs2 = build_density_grids(l, sum, gs);
    for (std::size_t k = 0; k < gs2.tx.size(); ++k)
        EXPECT_NEAR(gs2.tx[k], ga.tx[k] + gb.tx[k], 1e-12);
}

// ---- convolution stage ------------------------------------------------------

TEST(ConvForward, ZeroWeightsZeroMaps) {
    Layout l = small_layout(3);
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    DensityGrid g = build_density_grids(l, uniform_policy(4, 0.5), GridSpec{12, l.side_length});
    ConvMaps maps = conv_forward(g, p, nc);
    for (double v : maps.tx.m3) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : maps.tx.m1) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(ConvForward, IdentityKernelPassesGridThrough) {
    Layout l = small_layout(4);
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    p.k1[4] = 1.0;  // center of the 3x3 kernel
    DensityGrid g = build_density_grids(l, uniform_policy(4, 0.7), GridSpec{12, l.side_length});
    ConvMaps maps = conv_forward(g, p, nc);
    for (std::size_t k = 0; k < g.tx.size(); ++k) EXPECT_DOUBLE_EQ(maps.tx.m1[k], g.tx[k]);
}

// independent naive cross-correlation oracle
std::vector<double> naive_conv(const std::vector<double>& in, std::size_t r,
                               const std::vector<double>& k, std::size_t c, double bias) {
    std::vector<double> out(r * r, 0.0);
    int h = static_cast<int>(c) / 2;
    for (int x = 0; x < static_cast<int>(r); ++x)
        for (int y = 0; y < static_cast<int>(r); ++y) {
            double acc = bias;
            for (int a = 0; a < static_cast<int>(c); ++a)
                for (int b = 0; b < static_cast<int>(c); ++b) {
                    int u = x + a - h, v = y + b - h;
                    if (u >= 0 && u < static_cast<int>(r) && v >= 0 && v < static_cast<int>(r))
                        acc += in[u * r + v] * k[a * c + b];
                }
            out[x * r + y] = acc;
        }
    return out;
}

TEST(ConvForward, MatchesNaiveOracle) {
    NetConfig nc = small_net();
    nc.conv_filter_sizes = {5, 3, 3};
    NetParams p = NetParams::glorot(nc, 99);
    Layout l = small_layout(5, 6);
    DensityGrid g = build_density_grids(l, uniform_policy(6, 0.6), GridSpec{12, l.side_length});
    ConvMaps maps = conv_forward(g, p, nc);
    std::vector<double> z1 = naive_conv(g.tx, 12, p.k1, 5, p.cb1);
    for (std::size_t k = 0; k < z1.size(); ++k) {
        EXPECT_NEAR(maps.tx.z1[k], z1[k], 1e-12);
        EXPECT_NEAR(maps.tx.m1[k], std::max(0.0, z1[k]), 1e-12);
    }
    std::vector<double> z2 = naive_conv(maps.tx.m1, 12, p.k2, 3, p.cb2);
    for (std::size_t k = 0; k < z2.size(); ++k) EXPECT_NEAR(maps.tx.z2[k], z2[k], 1e-12);
}

TEST(ConvForward, KernelsSharedBetweenStacks) {
    // a layout whose tx and rx point sets coincide must give identical stacks
    Layout l;
    l.side_length = 120.0;
    l.tx_pos = {{10, 10}, {60, 60}};
    l.rx_pos = {{60, 60}, {10, 10}};
    NetConfig nc = small_net();
    NetParams p = NetParams::glorot(nc, 7);
    DensityGrid g = build_density_grids(l, uniform_policy(2, 0.5), GridSpec{12, l.side_length});
    ConvMaps maps = conv_forward(g, p, nc);
    for (std::size_t k = 0; k < maps.tx.m3.size(); ++k)
        EXPECT_DOUBLE_EQ(maps.tx.m3[k], maps.rx.m3[k]);
}

// ---- features and FC stage --------------------------------------------------

TEST(GatherFeatures, ZeroMapsShape) {
    Layout l;
    l.side_length = 120.0;
    l.tx_pos = {{10, 10}};
    l.rx_pos = {{50, 10}};  // d = 40
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    GridSpec gs{12, l.side_length};
    Policy prev = uniform_policy(1, 0.5);
    ConvMaps maps = conv_forward(build_density_grids(l, prev, gs), p, nc);
    auto f = gather_link_features(maps, l, prev, gs, 80.0);
    ASSERT_EQ(f.size(), 8u);
    for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(f[k], 0.0);
    EXPECT_DOUBLE_EQ(f[6], 0.5);
    EXPECT_DOUBLE_EQ(f[7], 0.5);
}

TEST(FcForward, ZeroParamsGiveHalf) {
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    std::vector<double> feats(3 * 8, 0.3);
    Policy pol = fc_forward(feats, p, nc);
    ASSERT_EQ(pol.size(), 3u);
    for (double v : pol.p) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(FcForward, MatchesDenseOracle) {
    NetConfig nc = small_net();
    NetParams p = NetParams::glorot(nc, 31);
    Rng rng(32);
    std::vector<double> x(8);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    Policy pol = fc_forward(x, p, nc);
    // naive dense forward
    std::vector<double> a1(4), a2(4);
    for (int i = 0; i < 4; ++i) {
        double acc = p.b1[i];
        for (int j = 0; j < 8; ++j) acc += p.w1[i * 8 + j] * x[j];
        a1[i] = std::max(0.0, acc);
    }
    for (int i = 0; i < 4; ++i) {
        double acc = p.b2[i];
        for (int j = 0; j < 4; ++j) acc += p.w2[i * 4 + j] * a1[j];
        a2[i] = std::max(0.0, acc);
    }
    double zo = p.b_out;
    for (int j = 0; j < 4; ++j) zo += p.w_out[j] * a2[j];
    EXPECT_NEAR(pol.p[0], 1.0 / (1.0 + std::exp(-zo)), 1e-12);
}

TEST(FcForward, IdenticalFeaturesIdenticalOutput) {
    NetConfig nc = small_net();
    NetParams p = NetParams::glorot(nc, 33);
    std::vector<double> feats(2 * 8);
    Rng rng(34);
    for (int j = 0; j < 8; ++j) feats[j] = feats[8 + j] = rng.uniform(-1.0, 1.0);
    Policy pol = fc_forward(feats, p, nc);
    EXPECT_DOUBLE_EQ(pol.p[0], pol.p[1]);
}

// ---- inference --------------------------------------------------------------

TEST(Infer, ZeroParamsSingleRoundIsHalf) {
    Layout l = small_layout(8);
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    Policy pol = infer(l, p, nc, GridSpec{12, l.side_length});
    for (double v : pol.p) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Infer, Deterministic) {
    Layout l = small_layout(9);
    NetConfig nc = small_net();
    nc.feedback_rounds = 3;
    NetParams p = NetParams::glorot(nc, 40);
    Policy a = infer(l, p, nc, GridSpec{12, l.side_length});
    Policy b = infer(l, p, nc, GridSpec{12, l.side_length});
    EXPECT_EQ(a.p, b.p);
}

TEST(Infer, OutputWithinConstraint) {
    Layout l = small_layout(10, 8);
    NetConfig nc = small_net();
    nc.feedback_rounds = 2;
    NetParams p = NetParams::glorot(nc, 41);
    Policy pol = infer(l, p, nc, GridSpec{12, l.side_length});
    for (double v : pol.p) {
        EXPECT_GE(v, nc.p_floor);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Infer, PermutationEquivariant) {
    Layout l = small_layout(11, 5);
    NetConfig nc = small_net();
    nc.feedback_rounds = 2;
    NetParams p = NetParams::glorot(nc, 42);
    Policy a = infer(l, p, nc, GridSpec{12, l.side_length});
    Layout swapped = l;
    std::swap(swapped.tx_pos[0], swapped.tx_pos[3]);
    std::swap(swapped.rx_pos[0], swapped.rx_pos[3]);
    Policy b = infer(swapped, p, nc, GridSpec{12, swapped.side_length});
    EXPECT_DOUBLE_EQ(a.p[0], b.p[3]);
    EXPECT_DOUBLE_EQ(a.p[3], b.p[0]);
    EXPECT_DOUBLE_EQ(a.p[1], b.p[1]);
}

TEST(Infer, WrongResolutionRejected) {
    Layout l = small_layout(12);
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    EXPECT_THROW(infer(l, p, nc, GridSpec{20, l.side_length}), std::invalid_argument);
}

TEST(Infer, OperationCountersMatchStructure) {
    Layout l = small_layout(13, 6);
    NetConfig nc = small_net();
    nc.conv_filter_sizes = {5, 3, 3};
    nc.feedback_rounds = 3;
    NetParams p = NetParams::glorot(nc, 50);
    InferStats st;
    infer(l, p, nc, GridSpec{12, l.side_length}, &st);
    const std::uint64_t r2 = 12 * 12;
    const std::uint64_t conv = 3 * 2 * r2 * (25 + 9 + 9);  // f * two stacks * R^2 * sum c_k^2
    const std::uint64_t fc = 3 * 6 * (8 * 4 + 4 * 4 + 4);  // f * N * per-link FC cost
    EXPECT_EQ(st.conv_macs, conv);
    EXPECT_EQ(st.fc_macs, fc);
}

// ---- loss and gradients -----------------------------------------------------

TEST(LossAndGradients, ZeroParamsSingleLinkEqualsClosedForm) {
    Layout l;
    l.side_length = 120.0;
    l.tx_pos = {{30, 30}};
    l.rx_pos = {{50, 30}};
    NetConfig nc = small_net();
    NetParams p = NetParams::zeros(nc);
    ChannelParams ch;
    ch.noise_power = 0.0;
    auto lg = loss_and_gradients({l}, p, nc, ch, kTr);
    // p = 0.5, q = 0.5 for one noise-free link
    double gamma = preemption_prob(kTr);
    double exact = 1.0 / (kTr.arrival_rate * (1.0 - gamma) * 0.5) + 1.0;
    EXPECT_NEAR(lg.loss, exact, 1e-12);
}

TEST(LossAndGradients, FiniteDifferenceOracle) {
    NetConfig nc = small_net();
    Layout l = small_layout(60);
    NetParams params = NetParams::glorot(nc, 61);
    auto lg = loss_and_gradients({l}, params, nc, kCh, kTr);
    const double h = 1e-5;
    auto check = [&](double& slot, double g) {
        double save = slot;
        slot = save + h;
        double fp = loss_and_gradients({l}, params, nc, kCh, kTr).loss;
        slot = save - h;
        double fm = loss_and_gradients({l}, params, nc, kCh, kTr).loss;
        slot = save;
        double fd = (fp - fm) / (2 * h);
        EXPECT_NEAR(g, fd, 1e-5 * (std::abs(g) + std::abs(fd) + 1e-8));
    };
    check(params.k1[4], lg.grad.k1[4]);
    check(params.k2[2], lg.grad.k2[2]);
    check(params.k3[6], lg.grad.k3[6]);
    check(params.cb1, lg.grad.cb1);
    check(params.cb2, lg.grad.cb2);
    check(params.cb3, lg.grad.cb3);
    check(params.w1[5], lg.grad.w1[5]);
    check(params.b1[2], lg.grad.b1[2]);
    check(params.w2[7], lg.grad.w2[7]);
    check(params.b2[0], lg.grad.b2[0]);
    check(params.w_out[1], lg.grad.w_out[1]);
    check(params.b_out, lg.grad.b_out);
}

TEST(LossAndGradients, DuplicatedLayoutDoublesGradients) {
    NetConfig nc = small_net();
    Layout l = small_layout(62);
    NetParams params = NetParams::glorot(nc, 63);
    auto one = loss_and_gradients({l}, params, nc, kCh, kTr);
    auto two = loss_and_gradients({l, l}, params, nc, kCh, kTr);
    EXPECT_DOUBLE_EQ(two.loss, one.loss);  // batch mean
    EXPECT_DOUBLE_EQ(two.grad.k1[4], 2.0 * one.grad.k1[4]);
    EXPECT_DOUBLE_EQ(two.grad.w1[3], 2.0 * one.grad.w1[3]);
    EXPECT_DOUBLE_EQ(two.grad.b_out, 2.0 * one.grad.b_out);
}

TEST(LossAndGradients, ThreadCountDoesNotChangeResult) {
    NetConfig nc = small_net();
    std::vector<Layout> batch;
    for (std::uint64_t s = 0; s < 5; ++s) batch.push_back(small_layout(70 + s));
    NetParams params = NetParams::glorot(nc, 71);
    auto a = loss_and_gradients(batch, params, nc, kCh, kTr, 1);
    auto b = loss_and_gradients(batch, params, nc, kCh, kTr, 4);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.grad.k1, b.grad.k1);
    EXPECT_EQ(a.grad.w2, b.grad.w2);
    EXPECT_EQ(a.grad.b_out, b.grad.b_out);
}

// ---- training ---------------------------------------------------------------

TEST(Train, LossDecreases) {
    NetConfig nc = small_net();
    nc.feedback_rounds = 2;
    nc.init_seed = 80;
    nc.hyper.epochs = 8;
    nc.hyper.batch_size = 8;
    nc.hyper.learning_rate = 0.01;
    std::vector<Layout> ds;
    for (std::uint64_t s = 0; s < 40; ++s) ds.push_back(small_layout(900 + s, 6));
    NetParams p0 = NetParams::glorot(nc, nc.init_seed);
    auto [params, curve] = train(ds, p0, nc, kCh, kTr);
    ASSERT_EQ(curve.train_loss.size(), 8u);
    EXPECT_LT(curve.train_loss.back(), curve.train_loss.front());
}

TEST(Train, DeterministicUnderSeed) {
    NetConfig nc = small_net();
    nc.init_seed = 81;
    nc.hyper.epochs = 3;
    nc.hyper.batch_size = 4;
    std::vector<Layout> ds;
    for (std::uint64_t s = 0; s < 12; ++s) ds.push_back(small_layout(950 + s));
    NetParams p0 = NetParams::glorot(nc, nc.init_seed);
    auto a = train(ds, p0, nc, kCh, kTr);
    auto b = train(ds, p0, nc, kCh, kTr);
    EXPECT_EQ(a.first.k1, b.first.k1);
    EXPECT_EQ(a.first.w1, b.first.w1);
    EXPECT_EQ(a.first.b_out, b.first.b_out);
    EXPECT_EQ(a.second.train_loss, b.second.train_loss);
}

// ---- weights file -----------------------------------------------------------

TEST(WeightsFile, RoundTripBitExact) {
    NetConfig nc = small_net();
    nc.feedback_rounds = 2;
    nc.init_seed = 90;
    NetParams p = NetParams::glorot(nc, 90);
    std::string path = (std::filesystem::temp_directory_path() / "paoi_net_rt.glinet").string();
    save_params(p, nc, path);
    auto [q, cfg2] = load_params(path);
    EXPECT_EQ(q.k1, p.k1);
    EXPECT_EQ(q.k2, p.k2);
    EXPECT_EQ(q.k3, p.k3);
    EXPECT_EQ(q.w1, p.w1);
    EXPECT_EQ(q.b1, p.b1);
    EXPECT_EQ(q.w2, p.w2);
    EXPECT_EQ(q.b2, p.b2);
    EXPECT_EQ(q.w_out, p.w_out);
    EXPECT_EQ(q.cb1, p.cb1);
    EXPECT_EQ(q.b_out, p.b_out);
    EXPECT_EQ(cfg2.grid_resolution, nc.grid_resolution);
    EXPECT_EQ(cfg2.feedback_rounds, nc.feedback_rounds);
    EXPECT_EQ(cfg2.conv_filter_sizes, nc.conv_filter_sizes);
    std::filesystem::remove(path);
}

TEST(WeightsFile, TruncatedFileRejected) {
    NetConfig nc = small_net();
    NetParams p = NetParams::glorot(nc, 91);
    std::string path = (std::filesystem::temp_directory_path() / "paoi_net_trunc.glinet").string();
    save_params(p, nc, path);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    EXPECT_THROW(load_params(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(WeightsFile, BadMagicRejected) {
    std::string path = (std::filesystem::temp_directory_path() / "paoi_net_magic.glinet").string();
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOTNET" << std::string(64, '\0');
    }
    EXPECT_THROW(load_params(path), std::runtime_error);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace paoi
