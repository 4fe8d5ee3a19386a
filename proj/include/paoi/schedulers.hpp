#ifndef PAOI_SCHEDULERS_HPP
#define PAOI_SCHEDULERS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "paoi/analytics.hpp"
#include "paoi/model.hpp"

namespace paoi {

struct OptimizerConfig {
    std::size_t max_iters = 200;   // sweeps (coordinate descent) or steps (gradient)
    double tol = 1e-10;            // absolute objective-change stopping threshold
    double p_floor = 1e-4;         // keeps the open constraint 0 < p numerically safe
    std::size_t scalar_budget = 60;  // objective evaluations per 1-D minimization
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(p_floor > 0.0 && p_floor < 1.0))
            throw std::invalid_argument("OptimizerConfig: p_floor must lie in (0, 1)");
        if (!(tol > 0.0)) throw std::invalid_argument("OptimizerConfig: tol must be > 0");
    }
};

struct OptimizerTrace {
    std::vector<double> objective;  // per sweep / per iteration
    Policy final_policy;
    double final_objective = 0.0;
    std::size_t iterations = 0;
    double wall_seconds = 0.0;
    bool converged = false;
    std::uint64_t objective_terms = 0;  // per-link terms evaluated in 1-D searches
};

namespace detail {

inline double canonical_objective(const Policy& pol, const SuccessModel& model,
                                  const TrafficParams& tr) {
    return network_objective(pol, model, tr, false).mean_paoi;
}

// Golden-section minimization of a unimodal f on [lo, hi]. Ties prefer the
// smaller abscissa.
template <typename F>
inline double golden_section(F&& f, double lo, double hi, std::size_t budget) {
    constexpr double invphi = 0.6180339887498949;
    double c = hi - invphi * (hi - lo);
    double d = lo + invphi * (hi - lo);
    double fc = f(c), fd = f(d);
    std::size_t evals = 2;
    double best_x = fc <= fd ? c : d;
    double best_f = std::min(fc, fd);
    while (evals < budget) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - invphi * (hi - lo);
            fc = f(c);
            if (fc < best_f || (fc == best_f && c < best_x)) {
                best_f = fc;
                best_x = c;
            }
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + invphi * (hi - lo);
            fd = f(d);
            if (fd < best_f || (fd == best_f && d < best_x)) {
                best_f = fd;
                best_x = d;
            }
        }
        ++evals;
    }
    return best_x;
}

}  // namespace detail

/// Cyclic per-link scalar minimization of the network mean PAoI. Each 1-D
/// subproblem is convex in p_i (sum of 1/p and 1/(1 - c p) terms), so a
/// bracketed golden-section search suffices. The objective trace is
/// non-increasing by construction: a candidate that does not improve the
/// canonically evaluated objective is rejected.
inline OptimizerTrace coordinate_descent(const Layout& layout, const ChannelParams& ch,
                                         const TrafficParams& tr, const OptimizerConfig& cfg) {
    cfg.validate();
    tr.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const DistanceMatrix dm = distance_matrix(layout);
    const SuccessModel model = SuccessModel::build(dm, ch);
    const std::size_t n = model.n;
    const double lam = tr.arrival_rate;
    const double scale = lam * (1.0 - preemption_prob(tr));
    const double inv_n = 1.0 / static_cast<double>(n);

    OptimizerTrace trace;
    Policy pol = uniform_policy(n, 0.5);
    double cur = detail::canonical_objective(pol, model, tr);
    if (!std::isfinite(cur)) {
        for (double& v : pol.p) v = std::clamp(v, cfg.p_floor, 1.0);
        cur = detail::canonical_objective(pol, model, tr);
    }

    std::vector<double> base(n);
    for (std::size_t sweep = 0; sweep < cfg.max_iters; ++sweep) {
        const double sweep_start = cur;
        for (std::size_t i = 0; i < n; ++i) {
            // phi_k as a function of x = p_i: phi_i = base[i] * x,
            // phi_k = base[k] * (1 - c_ik x) for k != i.
            for (std::size_t k = 0; k < n; ++k) {
                double b = (k == i) ? model.noise[i] : pol.p[k] * model.noise[k];
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == k || j == i) continue;
                    b *= 1.0 - pol.p[j] * model.coupling_jn(j, k);
                }
                base[k] = b;
            }
            auto eval = [&](double x) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    double phi = (k == i) ? base[k] * x
                                          : base[k] * (1.0 - model.coupling_jn(i, k) * x);
                    s += phi > 0.0 ? 1.0 / (scale * phi) : std::numeric_limits<double>::infinity();
                }
                trace.objective_terms += n;
                return s * inv_n + tr.slot_duration;
            };
            double cand = detail::golden_section(eval, cfg.p_floor, 1.0, cfg.scalar_budget);
            double old = pol.p[i];
            pol.p[i] = cand;
            double next = detail::canonical_objective(pol, model, tr);
            if (next <= cur) {
                cur = next;
            } else {
                pol.p[i] = old;  // keep monotonicity under fp noise
            }
        }
        trace.objective.push_back(cur);
        ++trace.iterations;
        if (sweep_start - cur < cfg.tol) {
            trace.converged = true;
            break;
        }
    }

    trace.final_policy = pol;
    trace.final_objective = cur;
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return trace;
}

/// Projected gradient descent with momentum on the closed-form objective,
/// using the exact analytic gradient. Returns the best iterate seen.
inline OptimizerTrace projected_gradient(const Layout& layout, const ChannelParams& ch,
                                         const TrafficParams& tr, const OptimizerConfig& cfg) {
    cfg.validate();
    tr.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const DistanceMatrix dm = distance_matrix(layout);
    const SuccessModel model = SuccessModel::build(dm, ch);
    const std::size_t n = model.n;

    OptimizerTrace trace;
    Policy pol = uniform_policy(n, 0.5);
    std::vector<double> velocity(n, 0.0);
    double eta = cfg.learning_rate;
    int retries = 0;

    Policy best = pol;
    double best_obj = std::numeric_limits<double>::infinity();
    double prev_obj = std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        ObjectiveReport rep = network_objective(pol, model, tr, true);
        if (!std::isfinite(rep.mean_paoi)) {
            if (++retries > 10) break;
            eta *= 0.5;
            pol = best_obj < std::numeric_limits<double>::infinity() ? best
                                                                     : uniform_policy(n, 0.5);
            std::fill(velocity.begin(), velocity.end(), 0.0);
            continue;
        }
        trace.objective.push_back(rep.mean_paoi);
        ++trace.iterations;
        if (rep.mean_paoi < best_obj) {
            best_obj = rep.mean_paoi;
            best = pol;
        }
        if (std::abs(prev_obj - rep.mean_paoi) < cfg.tol && it > 0) {
            trace.converged = true;
            break;
        }
        prev_obj = rep.mean_paoi;
        const auto& grad = *rep.grad;
        for (std::size_t i = 0; i < n; ++i) {
            velocity[i] = cfg.momentum * velocity[i] - eta * grad[i];
            pol.p[i] = std::clamp(pol.p[i] + velocity[i], cfg.p_floor, 1.0);
        }
    }

    trace.final_policy = best;
    trace.final_objective = best_obj;
    trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return trace;
}

}  // namespace paoi

#endif
