#pragma once

// Log-pseudolikelihood, local normalizing integrals by tensor-product
// Gauss-Legendre quadrature, and maximum-pseudolikelihood fitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "rst/diagram.hpp"
#include "rst/gibbs.hpp"
#include "rst/optimize.hpp"

#include <nlohmann/json_fwd.hpp>
#include <nlohmann/json.hpp>

namespace rst {

struct QuadratureSpec {
    int nodes_per_axis = 64;
};

namespace detail {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Nodes via Newton iteration on Legendre polynomials.
inline GaussLegendreRule gauss_legendre(int n) {
    GaussLegendreRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        r.nodes[i] = x;
        r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return r;
}

inline const GaussLegendreRule& cached_rule(int n) {
    thread_local GaussLegendreRule rule;
    thread_local int cached_n = -1;
    if (cached_n != n) {
        rule = gauss_legendre(n);
        cached_n = n;
    }
    return rule;
}

// One quadrature node of the cluster correction for a single point's local
// normalizer. The geometry and cluster features depend only on the fixed
// neighborhoods, not on theta, so they are computed once per data set and
// reused across objective evaluations during fitting.
struct CorrectionNode {
    double weight = 0.0;
    double a = 0.0;                 // (z1 - xbar1)^2
    double b = 0.0;                 // z2^2
    std::vector<double> features;   // active cluster length per k, 0 if inactive
};

// Quadrature nodes for exp(-E(z)) - exp(-E_base(z)), supported on the
// delta-balls around the fixed members and smooth between exactly
// computable breakpoints (ball tangencies and member ordinates), so
// panel-wise Gauss-Legendre converges fast despite the activation jumps.
inline std::vector<CorrectionNode> correction_nodes(const std::vector<Neighborhood>& nbhd_sets,
                                                    double xbar1, const ModelConfig& config,
                                                    const QuadratureSpec& quad) {
    std::vector<CorrectionNode> out;
    std::vector<PpdPoint> members;
    for (const auto& nb : nbhd_sets)
        for (const auto& y : nb.members) members.push_back(y);
    if (members.empty()) return out;

    const double delta = config.delta;

    // vertical extent of the active region, split where member balls start,
    // end, or are centered
    double t_lo = std::numeric_limits<double>::infinity(), t_hi = 0.0;
    std::vector<double> cuts;
    for (const auto& y : members) {
        t_lo = std::min(t_lo, y.x2 - delta);
        t_hi = std::max(t_hi, y.x2 + delta);
        for (double c : {y.x2 - delta, y.x2, y.x2 + delta}) cuts.push_back(c);
    }
    t_lo = std::max(t_lo, 0.0);
    if (t_hi <= t_lo) return out;
    cuts.push_back(t_lo);
    cuts.push_back(t_hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const int n = std::max(12, quad.nodes_per_axis / 4);
    const auto& rule = cached_rule(n);
    const int K = config.K;

    std::vector<double> xb;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double ta = std::max(cuts[c], t_lo), tb = std::min(cuts[c + 1], t_hi);
        if (tb <= ta) continue;
        for (int j = 0; j < n; ++j) {
            const double t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * rule.nodes[j];
            const double wt = 0.5 * (tb - ta) * rule.weights[j];

            // per-k active z1 interval: intersection of the member balls'
            // chords at height t
            xb.clear();
            double row_lo = 0.0, row_hi = 0.0;
            bool any = false;
            for (const auto& nb : nbhd_sets) {
                if (nb.empty()) continue;
                double lo = -std::numeric_limits<double>::infinity();
                double hi = std::numeric_limits<double>::infinity();
                bool ok = true;
                for (const auto& y : nb.members) {
                    const double dv = t - y.x2;
                    const double w2 = delta * delta - dv * dv;
                    if (w2 <= 0.0) { ok = false; break; }
                    const double w = std::sqrt(w2);
                    lo = std::max(lo, y.x1 - w);
                    hi = std::min(hi, y.x1 + w);
                }
                if (!ok || hi <= lo) continue;
                xb.push_back(lo);
                xb.push_back(hi);
                row_lo = any ? std::min(row_lo, lo) : lo;
                row_hi = any ? std::max(row_hi, hi) : hi;
                any = true;
            }
            if (!any) continue;
            for (const auto& y : members)
                if (y.x1 > row_lo && y.x1 < row_hi) xb.push_back(y.x1);
            std::sort(xb.begin(), xb.end());
            xb.erase(std::unique(xb.begin(), xb.end()), xb.end());

            for (std::size_t p = 0; p + 1 < xb.size(); ++p) {
                const double xa = xb[p], xz = xb[p + 1];
                if (xz <= xa) continue;
                for (int i = 0; i < n; ++i) {
                    const double z1 = 0.5 * (xa + xz) + 0.5 * (xz - xa) * rule.nodes[i];
                    const double wx = 0.5 * (xz - xa) * rule.weights[i];
                    const PpdPoint z{z1, t};
                    CorrectionNode node;
                    node.weight = wt * wx;
                    node.a = (z1 - xbar1) * (z1 - xbar1);
                    node.b = t * t;
                    node.features.assign(K, 0.0);
                    bool active = false;
                    for (int k = 1; k <= K; ++k) {
                        const Neighborhood& nb = nbhd_sets[k - 1];
                        if (nb.empty()) continue;
                        double len = 0.0;
                        bool all_within = true;
                        for (const auto& y : nb.members) {
                            const double d = dist(z, y);
                            if (d > delta) { all_within = false; break; }
                            len += d;
                        }
                        if (all_within) {
                            node.features[k - 1] = len;
                            active = true;
                        }
                    }
                    if (active) out.push_back(std::move(node));
                }
            }
        }
    }
    return out;
}

// log(analytic baseline + cluster correction) for one point, given its
// precomputed correction nodes.
inline double log_normalizer_from_nodes(const std::vector<CorrectionNode>& nodes,
                                        const Theta& theta) {
    const double analytic = 0.5 * M_PI / std::sqrt(theta.theta_H * theta.theta_V);
    double correction = 0.0;
    const int K = static_cast<int>(theta.theta_k.size());
    for (const auto& node : nodes) {
        double cluster = 0.0;
        for (int k = 0; k < K; ++k) cluster += theta.theta_k[k] * node.features[k];
        correction += node.weight * std::exp(-theta.theta_H * node.a - theta.theta_V * node.b) *
                      std::expm1(-cluster);
    }
    const double total = analytic + correction;
    if (!(total > 0.0))
        throw error("local_log_normalizer: non-positive integral (theta_k too negative)");
    return std::log(total);
}

}  // namespace detail

// log of the double integral over R x R+ of exp(-conditional_energy(z))
// against the fixed neighborhoods of x. The Gaussian baseline integrates in
// closed form; only the cluster correction needs quadrature.
inline double local_log_normalizer(const std::vector<Neighborhood>& nbhd_sets, double xbar1,
                                   const Theta& theta, const ModelConfig& config,
                                   const QuadratureSpec& quad = {}) {
    if (theta.theta_H <= 0.0 || theta.theta_V <= 0.0)
        throw error("local_log_normalizer: theta_H and theta_V must be > 0 (divergent integral)");
    bool interacting = false;
    for (double v : theta.theta_k)
        if (v != 0.0) interacting = true;
    if (!interacting)
        return std::log(0.5 * M_PI / std::sqrt(theta.theta_H * theta.theta_V));
    return detail::log_normalizer_from_nodes(detail::correction_nodes(nbhd_sets, xbar1, config, quad),
                                             theta);
}

inline double local_log_normalizer(const PpdPoint& x, const Theta& theta,
                                   const ModelConfig& config, const ProjectedDiagram& ppd,
                                   const QuadratureSpec& quad = {}, long exclude_index = -1) {
    const auto nbs = neighborhoods_of(x, config.K, ppd, config.delta, exclude_index);
    const double xbar1 = spread_terms(ppd).xbar1;
    return local_log_normalizer(nbs, xbar1, theta, config, quad);
}

// Theta-independent per-point terms of the log-pseudolikelihood: the
// conditional-energy features at the data point and the correction nodes of
// its local normalizer. Built once, evaluated many times while fitting.
struct PseudolikelihoodPlan {
    struct Local {
        double a = 0.0;                // (x1 - xbar1)^2
        double b = 0.0;                // x2^2
        std::vector<double> features;  // active cluster length per k at x
        std::vector<detail::CorrectionNode> nodes;
    };
    std::vector<Local> locals;
};

inline PseudolikelihoodPlan pseudolikelihood_plan(const ProjectedDiagram& ppd,
                                                  const ModelConfig& config,
                                                  const QuadratureSpec& quad = {}) {
    if (ppd.size() < 2) throw error("log_pseudolikelihood: need at least 2 points");
    const double xbar1 = spread_terms(ppd).xbar1;
    PseudolikelihoodPlan plan;
    plan.locals.reserve(ppd.size());
    for (std::size_t i = 0; i < ppd.size(); ++i) {
        const auto& x = ppd.points[i];
        const auto nbs = neighborhoods_of(x, config.K, ppd, config.delta, static_cast<long>(i));
        PseudolikelihoodPlan::Local loc;
        loc.a = (x.x1 - xbar1) * (x.x1 - xbar1);
        loc.b = x.x2 * x.x2;
        loc.features.assign(config.K, 0.0);
        for (int k = 1; k <= config.K; ++k) {
            const Neighborhood& nb = nbs[k - 1];
            if (nb.empty()) continue;
            double len = 0.0;
            for (const auto& y : nb.members) len += dist(x, y);
            loc.features[k - 1] = len;
        }
        loc.nodes = detail::correction_nodes(nbs, xbar1, config, quad);
        plan.locals.push_back(std::move(loc));
    }
    return plan;
}

inline double log_pseudolikelihood(const Theta& theta, const PseudolikelihoodPlan& plan) {
    if (theta.theta_H <= 0.0 || theta.theta_V <= 0.0)
        throw error("log_pseudolikelihood: theta_H and theta_V must be > 0");
    const int K = static_cast<int>(theta.theta_k.size());
    double lpl = 0.0;
    for (const auto& loc : plan.locals) {
        double e = theta.theta_H * loc.a + theta.theta_V * loc.b;
        for (int k = 0; k < K; ++k) e += theta.theta_k[k] * loc.features[k];
        lpl += -e - detail::log_normalizer_from_nodes(loc.nodes, theta);
    }
    return lpl;
}

inline double log_pseudolikelihood(const Theta& theta, const ProjectedDiagram& ppd,
                                   const ModelConfig& config, const QuadratureSpec& quad = {}) {
    return log_pseudolikelihood(theta, pseudolikelihood_plan(ppd, config, quad));
}

struct FitTrace {
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    double simplex_size = 0.0;
    int best_start = 0;
    bool theta_k_unidentified = false;  // cluster statistics identically zero
};

struct FittedModel {
    Theta theta_hat;
    ModelConfig config;
    double log_pl = 0.0;
    FitTrace trace;
    ProjectedDiagram ppd_snapshot;
};

// Closed-form maximizer of the theta_k = 0 submodel; used as the primary
// multistart point.
inline Theta moment_start(const ProjectedDiagram& ppd, int K) {
    const SpreadTerms s = spread_terms(ppd);
    const double n = static_cast<double>(ppd.size());
    Theta t;
    t.theta_H = s.sigma_H_sq > 0.0 ? n / (2.0 * s.sigma_H_sq) : 1.0;
    t.theta_V = s.sigma_V_sq > 0.0 ? n / (2.0 * s.sigma_V_sq) : 1.0;
    t.theta_k.assign(K, 0.0);
    return t;
}

namespace detail {

inline std::vector<double> pack(const Theta& t) {
    std::vector<double> p{std::log(t.theta_H), std::log(t.theta_V)};
    p.insert(p.end(), t.theta_k.begin(), t.theta_k.end());
    return p;
}

inline Theta unpack(const std::vector<double>& p) {
    Theta t;
    t.theta_H = std::exp(p[0]);
    t.theta_V = std::exp(p[1]);
    t.theta_k.assign(p.begin() + 2, p.end());
    return t;
}

}  // namespace detail

// Maximum-pseudolikelihood fit in the (log theta_H, log theta_V,
// theta_1..theta_K) parameterization. Multistart: the closed-form moment
// estimator plus fixed jitters of it; deterministic for fixed settings.
inline FittedModel fit(const ProjectedDiagram& ppd, const ModelConfig& config,
                       const QuadratureSpec& quad = {}, const OptimizerSettings& settings = {}) {
    if (ppd.size() < static_cast<std::size_t>(config.K + 2))
        throw error("fit: need at least K+2 points");
    const SpreadTerms sp = spread_terms(ppd);
    if (sp.sigma_V_sq == 0.0 || sp.sigma_H_sq == 0.0)
        throw error("fit: degenerate data (zero spread)");

    bool clusters_present = false;
    for (int k = 1; k <= config.K && !clusters_present; ++k)
        clusters_present = total_cluster_length(k, ppd, config.delta) > 0.0;

    const PseudolikelihoodPlan plan = pseudolikelihood_plan(ppd, config, quad);
    // With no clusters anywhere in the data the objective is exactly flat in
    // every theta_k direction; hold them at zero instead of letting the
    // optimizer wander along the flat subspace.
    const int free_k = clusters_present ? config.K : 0;
    const ObjectiveFn objective = [&](const std::vector<double>& p) {
        Theta t;
        t.theta_H = std::exp(p[0]);
        t.theta_V = std::exp(p[1]);
        t.theta_k.assign(config.K, 0.0);
        for (int k = 0; k < free_k; ++k) t.theta_k[k] = p[2 + k];
        if (!std::isfinite(t.theta_H) || !std::isfinite(t.theta_V) || t.theta_H <= 0.0 ||
            t.theta_V <= 0.0)
            return std::numeric_limits<double>::infinity();
        try {
            return -log_pseudolikelihood(t, plan);
        } catch (const error&) {  // e.g. integral driven non-positive
            return std::numeric_limits<double>::infinity();
        }
    };

    const auto base = detail::pack(moment_start(ppd, free_k));
    // Fixed jitter directions, scaled by settings.jitter.
    static const double dirs[4][2] = {{1, -1}, {-1, 1}, {1, 1}, {-1, -1}};
    std::vector<std::vector<double>> starts{base};
    for (int s = 1; s < settings.multi_starts; ++s) {
        auto p = base;
        const auto& d = dirs[(s - 1) % 4];
        p[0] += settings.jitter * d[0];
        p[1] += settings.jitter * d[1];
        for (std::size_t i = 2; i < p.size(); ++i)
            p[i] += settings.jitter * d[(s + i) % 2] * 0.5;
        starts.push_back(std::move(p));
    }

    OptimizerResult best;
    int best_start = -1;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        auto r = minimize(objective, starts[s], settings);
        if (best_start < 0 || r.f < best.f) {
            best = std::move(r);
            best_start = static_cast<int>(s);
        }
    }
    if (!best.converged)
        throw error("fit: optimizer failed to converge after " +
                    std::to_string(best.iterations) + " iterations");

    FittedModel fm;
    fm.theta_hat.theta_H = std::exp(best.x[0]);
    fm.theta_hat.theta_V = std::exp(best.x[1]);
    fm.theta_hat.theta_k.assign(config.K, 0.0);
    for (int k = 0; k < free_k; ++k) fm.theta_hat.theta_k[k] = best.x[2 + k];
    fm.config = config;
    fm.log_pl = -best.f;
    fm.trace.iterations = best.iterations;
    fm.trace.converged = best.converged;
    for (double g : best.gradient)
        fm.trace.gradient_norm = std::max(fm.trace.gradient_norm, std::fabs(g));
    fm.trace.simplex_size = best.simplex_size;
    fm.trace.best_start = best_start;
    fm.trace.theta_k_unidentified = !clusters_present && config.K > 0;
    fm.ppd_snapshot = ppd;
    return fm;
}

// ---------------------------------------------------------------------------
// JSON serialization

inline std::uint64_t fingerprint(const ProjectedDiagram& ppd) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (const auto& p : ppd.points) {
        mix(p.x1);
        mix(p.x2);
    }
    return h;
}

inline nlohmann::json to_json(const Theta& t) {
    return {{"theta_H", t.theta_H}, {"theta_V", t.theta_V}, {"theta_k", t.theta_k}};
}

inline Theta theta_from_json(const nlohmann::json& j) {
    Theta t;
    t.theta_H = j.at("theta_H").get<double>();
    t.theta_V = j.at("theta_V").get<double>();
    t.theta_k = j.at("theta_k").get<std::vector<double>>();
    return t;
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"K", c.K},
            {"delta_star", c.delta_star},
            {"data_dim", c.data_dim},
            {"degree", c.degree},
            {"delta", c.delta}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.K = j.at("K").get<int>();
    c.delta_star = j.at("delta_star").get<double>();
    c.data_dim = j.at("data_dim").get<int>();
    c.degree = j.at("degree").get<int>();
    c.delta = j.at("delta").get<double>();
    return c;
}

inline nlohmann::json to_json(const FittedModel& fm) {
    return {{"theta", to_json(fm.theta_hat)},
            {"config", to_json(fm.config)},
            {"log_pl", fm.log_pl},
            {"trace",
             {{"iterations", fm.trace.iterations},
              {"converged", fm.trace.converged},
              {"gradient_norm", fm.trace.gradient_norm},
              {"simplex_size", fm.trace.simplex_size},
              {"best_start", fm.trace.best_start},
              {"theta_k_unidentified", fm.trace.theta_k_unidentified}}},
            {"data_fingerprint", fingerprint(fm.ppd_snapshot)}};
}

inline FittedModel model_from_json(const nlohmann::json& j, const ProjectedDiagram& ppd = {}) {
    FittedModel fm;
    fm.theta_hat = theta_from_json(j.at("theta"));
    fm.config = config_from_json(j.at("config"));
    fm.log_pl = j.at("log_pl").get<double>();
    const auto& tr = j.at("trace");
    fm.trace.iterations = tr.at("iterations").get<int>();
    fm.trace.converged = tr.at("converged").get<bool>();
    fm.trace.gradient_norm = tr.at("gradient_norm").get<double>();
    fm.trace.simplex_size = tr.at("simplex_size").get<double>();
    fm.trace.best_start = tr.at("best_start").get<int>();
    fm.trace.theta_k_unidentified = tr.at("theta_k_unidentified").get<bool>();
    fm.ppd_snapshot = ppd;
    return fm;
}

}  // namespace rst
