#ifndef PAOI_EXPERIMENTS_HPP
#define PAOI_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paoi/analytics.hpp"
#include "paoi/glinet.hpp"
#include "paoi/io.hpp"
#include "paoi/model.hpp"
#include "paoi/schedulers.hpp"
#include "paoi/simulator.hpp"
#include "paoi/validate.hpp"

namespace paoi {

/// Everything a harness run needs: layout generation, physical and traffic
/// parameters, method list and per-method knobs. Populated from a JSON
/// config file with every field optional (struct defaults apply).
struct HarnessConfig {
    LayoutGenSpec gen;
    ChannelParams channel;
    TrafficParams traffic{0.5, 1.0};
    std::vector<double> lambda_sweep{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<std::string> methods{"uniform", "coordinate_descent"};
    double uniform_p = 0.5;
    std::string weights_path;
    std::string layout_path;  // when set, commands operate on this layout file
    std::string policy_path;
    std::string method = "coordinate_descent";  // for `optimize`
    std::size_t n_layouts = 10;
    std::size_t n_train = 10000;
    std::size_t n_test = 5000;
    std::uint64_t n_slots = 1'000'000;
    bool sim_confirm = true;
    bool dump_samples = false;
    std::size_t reps = 5;
    std::vector<std::size_t> n_sweep{25, 50, 100, 200, 400};
    std::string out_dir = ".";
    std::size_t threads = 1;
    OptimizerConfig opt;
    NetConfig net;
};

inline HarnessConfig parse_config(const nlohmann::json& j) {
    HarnessConfig c;
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("n_links", c.gen.n_links);
    get("side_length", c.gen.side_length);
    get("d_min", c.gen.d_min);
    get("d_max", c.gen.d_max);
    get("seed", c.gen.seed);
    get("tx_power", c.channel.tx_power);
    get("pathloss_exp", c.channel.pathloss_exp);
    get("capture_ratio", c.channel.capture_ratio);
    get("noise_power", c.channel.noise_power);
    get("lambda", c.traffic.arrival_rate);
    get("slot_duration", c.traffic.slot_duration);
    get("lambda_sweep", c.lambda_sweep);
    get("methods", c.methods);
    get("uniform_p", c.uniform_p);
    get("weights", c.weights_path);
    get("layout", c.layout_path);
    get("policy", c.policy_path);
    get("method", c.method);
    get("n_layouts", c.n_layouts);
    get("n_train", c.n_train);
    get("n_test", c.n_test);
    get("n_slots", c.n_slots);
    get("sim_confirm", c.sim_confirm);
    get("dump_samples", c.dump_samples);
    get("reps", c.reps);
    get("n_sweep", c.n_sweep);
    get("out_dir", c.out_dir);
    get("threads", c.threads);
    if (j.contains("opt")) {
        const auto& o = j.at("opt");
        auto geto = [&o](const char* key, auto& slot) {
            if (o.contains(key)) slot = o.at(key).get<std::decay_t<decltype(slot)>>();
        };
        geto("max_iters", c.opt.max_iters);
        geto("tol", c.opt.tol);
        geto("p_floor", c.opt.p_floor);
        geto("scalar_budget", c.opt.scalar_budget);
        geto("learning_rate", c.opt.learning_rate);
        geto("momentum", c.opt.momentum);
        geto("seed", c.opt.seed);
    }
    if (j.contains("net")) {
        const auto& n = j.at("net");
        auto getn = [&n](const char* key, auto& slot) {
            if (n.contains(key)) slot = n.at(key).get<std::decay_t<decltype(slot)>>();
        };
        getn("conv", c.net.conv_filter_sizes);
        getn("hidden", c.net.hidden_sizes);
        getn("feedback_rounds", c.net.feedback_rounds);
        getn("grid_resolution", c.net.grid_resolution);
        getn("distance_scale", c.net.feature_distance_scale);
        getn("p_floor", c.net.p_floor);
        getn("init_seed", c.net.init_seed);
        getn("learning_rate", c.net.hyper.learning_rate);
        getn("momentum", c.net.hyper.momentum);
        getn("clip_norm", c.net.hyper.clip_norm);
        getn("batch_size", c.net.hyper.batch_size);
        getn("epochs", c.net.hyper.epochs);
    }
    c.net.hyper.threads = c.threads;
    return c;
}

inline HarnessConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    nlohmann::json j;
    is >> j;
    return parse_config(j);
}

namespace expdetail {

inline std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline Layout eval_layout(const HarnessConfig& cfg, std::size_t index) {
    LayoutGenSpec spec = cfg.gen;
    spec.seed = derive_seed(cfg.gen.seed, 0xe7a1ULL + index);
    return generate_layout(spec);
}

inline Metadata base_metadata(const HarnessConfig& cfg) {
    Metadata m;
    m["seed"] = std::to_string(cfg.gen.seed);
    m["n_links"] = std::to_string(cfg.gen.n_links);
    m["side_length"] = fmt_double(cfg.gen.side_length);
    m["d_min"] = fmt_double(cfg.gen.d_min);
    m["d_max"] = fmt_double(cfg.gen.d_max);
    m["lambda"] = fmt_double(cfg.traffic.arrival_rate);
    m["slot_duration"] = fmt_double(cfg.traffic.slot_duration);
    m["tx_power"] = fmt_double(cfg.channel.tx_power);
    m["pathloss_exp"] = fmt_double(cfg.channel.pathloss_exp);
    m["capture_ratio"] = fmt_double(cfg.channel.capture_ratio);
    m["noise_power"] = fmt_double(cfg.channel.noise_power);
    return m;
}

struct MethodRunner {
    const HarnessConfig& cfg;
    std::optional<std::pair<NetParams, NetConfig>> net;  // loaded lazily

    explicit MethodRunner(const HarnessConfig& c) : cfg(c) {}

    void ensure_net() {
        if (net) return;
        if (cfg.weights_path.empty())
            throw std::runtime_error("gli-net method requires a weights file (\"weights\")");
        net = load_params(cfg.weights_path);
    }

    Policy policy_for(const std::string& method, const Layout& layout,
                      const TrafficParams& tr) {
        if (method == "uniform") return uniform_policy(layout.n_links(), cfg.uniform_p);
        if (method == "coordinate_descent" || method == "cd")
            return coordinate_descent(layout, cfg.channel, tr, cfg.opt).final_policy;
        if (method == "projected_gradient" || method == "pg")
            return projected_gradient(layout, cfg.channel, tr, cfg.opt).final_policy;
        if (method == "gli-net" || method == "glinet") {
            ensure_net();
            GridSpec gs{net->second.grid_resolution, layout.side_length};
            return infer(layout, net->first, net->second, gs);
        }
        throw std::runtime_error("unknown method: " + method);
    }
};

}  // namespace expdetail

/// `gen`: write reproducible train/test layout datasets plus a manifest.
inline void cmd_gen_dataset(const HarnessConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    auto write_set = [&](const std::string& prefix, std::size_t count, std::uint64_t stream) {
        for (std::size_t i = 0; i < count; ++i) {
            LayoutGenSpec spec = cfg.gen;
            spec.seed = derive_seed(cfg.gen.seed, stream + i);
            Layout l = generate_layout(spec);
            char name[64];
            std::snprintf(name, sizeof name, "%s_%05zu.csv", prefix.c_str(), i);
            Metadata m;
            m["seed"] = std::to_string(spec.seed);
            m["d_min"] = fmt_double(spec.d_min);
            m["d_max"] = fmt_double(spec.d_max);
            save_layout(l, expdetail::join(cfg.out_dir, name), m);
        }
    };
    write_set("train", cfg.n_train, 0x7261ULL);
    write_set("test", cfg.n_test, 0x7e57ULL);
    Metadata manifest = expdetail::base_metadata(cfg);
    manifest["n_train"] = std::to_string(cfg.n_train);
    manifest["n_test"] = std::to_string(cfg.n_test);
    write_metadata(expdetail::join(cfg.out_dir, "manifest.txt"), manifest);
}

/// `analyze`: per-link closed-form breakdown for one layout and policy.
inline void cmd_analyze(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    Layout layout =
        cfg.layout_path.empty() ? expdetail::eval_layout(cfg, 0) : load_layout(cfg.layout_path);
    Policy pol = cfg.policy_path.empty() ? uniform_policy(layout.n_links(), cfg.uniform_p)
                                         : load_policy(cfg.policy_path);
    DistanceMatrix dm = distance_matrix(layout);
    CsvWriter csv(expdetail::join(cfg.out_dir, "breakdown.csv"),
                  "link,succ_prob,fail_prob,preempt_prob,e_T,e_W,e_S,e_Y,e_paoi",
                  expdetail::base_metadata(cfg));
    for (std::size_t i = 0; i < layout.n_links(); ++i) {
        PaoiBreakdown b = paoi_breakdown(i, pol, dm, cfg.channel, cfg.traffic);
        csv.row(i, b.succ_prob, b.fail_prob, b.preempt_prob, b.e_T, b.e_W, b.e_S, b.e_Y, b.e_paoi);
    }
}

/// `simulate`: Monte Carlo run with a per-link stats summary and an optional
/// PAoI sample dump.
inline void cmd_simulate(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    SimConfig sc;
    sc.layout =
        cfg.layout_path.empty() ? expdetail::eval_layout(cfg, 0) : load_layout(cfg.layout_path);
    sc.policy = cfg.policy_path.empty() ? uniform_policy(sc.layout.n_links(), cfg.uniform_p)
                                        : load_policy(cfg.policy_path);
    sc.channel = cfg.channel;
    sc.traffic = cfg.traffic;
    sc.n_slots = cfg.n_slots;
    sc.seed = cfg.gen.seed;
    sc.record_samples = cfg.dump_samples;
    SimStats st = run(sc);
    Metadata meta = expdetail::base_metadata(cfg);
    meta["n_slots"] = std::to_string(cfg.n_slots);
    CsvWriter csv(expdetail::join(cfg.out_dir, "sim_stats.csv"),
                  "link,service_periods,preempted,attempts,decode_successes,deliveries,"
                  "empirical_success,empirical_preemption,mean_paoi,mean_interdeparture",
                  meta);
    for (std::size_t i = 0; i < st.links.size(); ++i) {
        const auto& l = st.links[i];
        csv.row(i, l.service_periods, l.preempted, l.attempts, l.decode_successes, l.deliveries,
                empirical_success_probability(st, i), l.empirical_preemption(), l.mean_paoi(),
                l.mean_interdeparture());
    }
    if (cfg.dump_samples) {
        CsvWriter dump(expdetail::join(cfg.out_dir, "paoi_samples.csv"), "link,delivery_slot,paoi",
                       meta);
        for (std::size_t i = 0; i < st.samples.size(); ++i)
            for (const auto& s : st.samples[i])
                dump.row(i, static_cast<std::uint64_t>(
                                std::ceil(s.delivery_time / cfg.traffic.slot_duration)) - 1,
                         s.paoi);
    }
}

/// `optimize`: one optimizer run; writes the trace and the final policy.
inline void cmd_optimize(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    Layout layout =
        cfg.layout_path.empty() ? expdetail::eval_layout(cfg, 0) : load_layout(cfg.layout_path);
    OptimizerTrace trace;
    if (cfg.method == "coordinate_descent" || cfg.method == "cd")
        trace = coordinate_descent(layout, cfg.channel, cfg.traffic, cfg.opt);
    else if (cfg.method == "projected_gradient" || cfg.method == "pg")
        trace = projected_gradient(layout, cfg.channel, cfg.traffic, cfg.opt);
    else
        throw std::runtime_error("optimize: unknown method " + cfg.method);
    Metadata meta = expdetail::base_metadata(cfg);
    meta["method"] = cfg.method;
    CsvWriter csv(expdetail::join(cfg.out_dir, "trace.csv"), "iter,objective,wall_ms", meta);
    double per_iter_ms = 1000.0 * trace.wall_seconds / std::max<std::size_t>(1, trace.iterations);
    for (std::size_t i = 0; i < trace.objective.size(); ++i)
        csv.row(i, trace.objective[i], per_iter_ms * static_cast<double>(i + 1));
    save_policy(trace.final_policy, expdetail::join(cfg.out_dir, "policy.csv"));
}

/// `train`: generate a training set, run unsupervised training, save weights
/// and the loss curve.
inline void cmd_train(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<Layout> dataset;
    dataset.reserve(cfg.n_train);
    for (std::size_t i = 0; i < cfg.n_train; ++i) {
        LayoutGenSpec spec = cfg.gen;
        spec.seed = derive_seed(cfg.gen.seed, 0x7261ULL + i);
        dataset.push_back(generate_layout(spec));
    }
    NetConfig nc = cfg.net;
    nc.feature_distance_scale = cfg.gen.d_max;
    NetParams p0 = NetParams::glorot(nc, nc.init_seed);
    auto [params, curve] = train(dataset, p0, nc, cfg.channel, cfg.traffic);
    std::string weights =
        cfg.weights_path.empty() ? expdetail::join(cfg.out_dir, "net.glinet") : cfg.weights_path;
    save_params(params, nc, weights);
    Metadata meta = expdetail::base_metadata(cfg);
    meta["weights"] = weights;
    CsvWriter csv(expdetail::join(cfg.out_dir, "training_curve.csv"),
                  "epoch,train_loss,val_loss", meta);
    for (std::size_t e = 0; e < curve.train_loss.size(); ++e)
        csv.row(e, curve.train_loss[e], curve.val_loss[e]);
}

/// `infer`: load weights, map one layout to a policy.
inline void cmd_infer(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    expdetail::MethodRunner runner(cfg);
    Layout layout =
        cfg.layout_path.empty() ? expdetail::eval_layout(cfg, 0) : load_layout(cfg.layout_path);
    Policy pol = runner.policy_for("gli-net", layout, cfg.traffic);
    save_policy(pol, expdetail::join(cfg.out_dir, "policy.csv"));
}

/// `paoi-vs-lambda`: mean analytic PAoI per (lambda, method) over the
/// evaluation layouts, with an optional simulator confirmation column.
inline void cmd_paoi_vs_lambda(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    expdetail::MethodRunner runner(cfg);
    std::vector<Layout> layouts;
    for (std::size_t i = 0; i < cfg.n_layouts; ++i) layouts.push_back(expdetail::eval_layout(cfg, i));
    std::vector<DistanceMatrix> dms;
    for (const auto& l : layouts) dms.push_back(distance_matrix(l));

    Metadata meta = expdetail::base_metadata(cfg);
    meta["n_layouts"] = std::to_string(cfg.n_layouts);
    CsvWriter csv(expdetail::join(cfg.out_dir, "paoi_vs_lambda.csv"),
                  "lambda,method,mean_paoi,sim_paoi,ci95", meta);
    for (double lam : cfg.lambda_sweep) {
        TrafficParams tr{lam, cfg.traffic.slot_duration};
        for (const auto& method : cfg.methods) {
            double acc = 0.0;
            Policy first_policy;
            for (std::size_t i = 0; i < layouts.size(); ++i) {
                Policy pol = runner.policy_for(method, layouts[i], tr);
                if (i == 0) first_policy = pol;
                acc += network_objective(pol, dms[i], cfg.channel, tr, false).mean_paoi;
            }
            double mean = acc / static_cast<double>(layouts.size());
            double sim_mean = std::numeric_limits<double>::quiet_NaN();
            double ci95 = std::numeric_limits<double>::quiet_NaN();
            if (cfg.sim_confirm) {
                SimConfig sc;
                sc.layout = layouts[0];
                sc.policy = first_policy;
                sc.channel = cfg.channel;
                sc.traffic = tr;
                sc.n_slots = cfg.n_slots;
                sc.seed = derive_seed(cfg.gen.seed, 0x51ULL);
                SimStats st = run(sc);
                // unweighted mean over links, matching the analytic objective
                double s = 0.0, var_mean = 0.0;
                std::size_t cnt = 0;
                for (const auto& l : st.links) {
                    if (l.paoi_count == 0) continue;
                    double m = l.mean_paoi();
                    double n = static_cast<double>(l.paoi_count);
                    s += m;
                    var_mean += std::max(0.0, l.paoi_sq_sum / n - m * m) / n;
                    ++cnt;
                }
                if (cnt > 0) {
                    sim_mean = s / static_cast<double>(cnt);
                    ci95 = 1.96 * std::sqrt(var_mean) / static_cast<double>(cnt);
                }
            }
            csv.row(lam, method, mean, sim_mean, ci95);
        }
    }
}

/// `paoi-cdf`: per-layout mean PAoI for each method, sorted, with the
/// empirical CDF column.
inline void cmd_paoi_cdf(const HarnessConfig& cfg) {
    if (cfg.n_layouts < 2) throw std::invalid_argument("paoi-cdf: need at least 2 layouts");
    std::filesystem::create_directories(cfg.out_dir);
    expdetail::MethodRunner runner(cfg);

    Metadata meta = expdetail::base_metadata(cfg);
    meta["n_layouts"] = std::to_string(cfg.n_layouts);
    CsvWriter csv(expdetail::join(cfg.out_dir, "paoi_cdf.csv"), "method,layout,mean_paoi,cdf",
                  meta);
    for (const auto& method : cfg.methods) {
        if (method == "gli-net" || method == "glinet") runner.ensure_net();
        std::vector<std::pair<double, std::size_t>> values(cfg.n_layouts);
        glidetail::parallel_for(cfg.n_layouts, cfg.threads, [&](std::size_t i) {
            Layout l = expdetail::eval_layout(cfg, i);
            expdetail::MethodRunner local(cfg);
            local.net = runner.net;
            Policy pol = local.policy_for(method, l, cfg.traffic);
            values[i] = {network_objective(pol, distance_matrix(l), cfg.channel, cfg.traffic, false)
                             .mean_paoi,
                         i};
        });
        std::sort(values.begin(), values.end());
        for (std::size_t k = 0; k < values.size(); ++k)
            csv.row(method, values[k].second, values[k].first,
                    static_cast<double>(k + 1) / static_cast<double>(values.size()));
    }
}

/// `bench-timing`: median wall time to optimize a single layout vs N.
inline void cmd_bench_timing(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    expdetail::MethodRunner runner(cfg);
    Metadata meta = expdetail::base_metadata(cfg);
    meta["reps"] = std::to_string(cfg.reps);
    CsvWriter csv(expdetail::join(cfg.out_dir, "bench_timing.csv"), "N,method,median_ms,reps",
                  meta);
    for (std::size_t n : cfg.n_sweep) {
        LayoutGenSpec spec = cfg.gen;
        spec.n_links = n;
        spec.seed = derive_seed(cfg.gen.seed, 0xbe ^ n);
        Layout layout = generate_layout(spec);
        for (const auto& method : cfg.methods) {
            std::vector<double> times;
            for (std::size_t r = 0; r <= cfg.reps; ++r) {  // first rep is warm-up
                auto t0 = std::chrono::steady_clock::now();
                Policy pol = runner.policy_for(method, layout, cfg.traffic);
                double ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
                (void)pol;
                if (r > 0) times.push_back(ms);
            }
            std::sort(times.begin(), times.end());
            csv.row(n, method, times[times.size() / 2], cfg.reps);
        }
    }
}

/// `validate`: oracle suites and determinism checks; nonzero exit on any
/// failure.
inline int cmd_validate(const HarnessConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    ValidationReport rep = run_validation(cfg.gen.seed == 0 ? 1 : cfg.gen.seed);
    CsvWriter csv(expdetail::join(cfg.out_dir, "validation.csv"),
                  "check,pass,measured_error,threshold", expdetail::base_metadata(cfg));
    for (const auto& c : rep.checks) {
        csv.row(c.name, c.pass ? 1 : 0, c.measured, c.threshold);
        std::printf("[%s] %-24s error=%.3e threshold=%.3e\n", c.pass ? "PASS" : "FAIL",
                    c.name.c_str(), c.measured, c.threshold);
    }
    return rep.all_pass() ? 0 : 1;
}

}  // namespace paoi

#endif
