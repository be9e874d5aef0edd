#pragma once

// Metropolis-Hastings single-point updates with a folded-Gaussian proposal,
// the (burn-in, n_b, n_r, n_R) schedule, and replicate ensemble production.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "rst/diagram.hpp"
#include "rst/estimation.hpp"
#include "rst/gibbs.hpp"
#include "rst/rng.hpp"

namespace rst {

struct ProposalMoments {
    double mean[2] = {0.0, 0.0};
    double cov[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
};

namespace detail {

// Running sums of first and second moments of a configuration; O(1) point
// replacement.
struct MomentAccumulator {
    double s1[2] = {0, 0};
    double s2[3] = {0, 0, 0};  // xx, xy, yy
    std::size_t n = 0;

    static MomentAccumulator of(const ProjectedDiagram& ppd) {
        MomentAccumulator a;
        a.n = ppd.size();
        for (const auto& p : ppd.points) {
            a.s1[0] += p.x1;
            a.s1[1] += p.x2;
            a.s2[0] += p.x1 * p.x1;
            a.s2[1] += p.x1 * p.x2;
            a.s2[2] += p.x2 * p.x2;
        }
        return a;
    }

    void replace(const PpdPoint& old_p, const PpdPoint& new_p) {
        s1[0] += new_p.x1 - old_p.x1;
        s1[1] += new_p.x2 - old_p.x2;
        s2[0] += new_p.x1 * new_p.x1 - old_p.x1 * old_p.x1;
        s2[1] += new_p.x1 * new_p.x2 - old_p.x1 * old_p.x2;
        s2[2] += new_p.x2 * new_p.x2 - old_p.x2 * old_p.x2;
    }

    ProposalMoments moments() const {
        const double inv = 1.0 / static_cast<double>(n);
        ProposalMoments m;
        m.mean[0] = s1[0] * inv;
        m.mean[1] = s1[1] * inv;
        m.cov[0][0] = s2[0] * inv - m.mean[0] * m.mean[0];
        m.cov[0][1] = m.cov[1][0] = s2[1] * inv - m.mean[0] * m.mean[1];
        m.cov[1][1] = s2[2] * inv - m.mean[1] * m.mean[1];
        const double tr = m.cov[0][0] + m.cov[1][1];
        const double det = m.cov[0][0] * m.cov[1][1] - m.cov[0][1] * m.cov[0][1];
        if (det <= 1e-18 * tr * tr || m.cov[0][0] <= 0.0 || m.cov[1][1] <= 0.0) {
            const double eps = 1e-9 * (tr > 0.0 ? tr : 1.0);
            m.cov[0][0] += eps;
            m.cov[1][1] += eps;
        }
        return m;
    }
};

}  // namespace detail

inline ProposalMoments proposal_moments(const ProjectedDiagram& ppd) {
    return detail::MomentAccumulator::of(ppd).moments();
}

// Sample from the folded Gaussian: draw bivariate Gaussian with the given
// moments, fold the second coordinate.
inline PpdPoint proposal_sample(const ProposalMoments& m, Rng& rng) {
    const double a = std::sqrt(m.cov[0][0]);
    const double b = m.cov[0][1] / a;
    const double c2 = m.cov[1][1] - b * b;
    const double c = std::sqrt(c2 > 0.0 ? c2 : 0.0);
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double z1 = m.mean[0] + a * g1;
    const double z2 = m.mean[1] + b * g1 + c * g2;
    return {z1, std::fabs(z2)};
}

inline double proposal_density(const PpdPoint& z, const ProposalMoments& m) {
    if (z.x2 < 0.0) return 0.0;
    const double det = m.cov[0][0] * m.cov[1][1] - m.cov[0][1] * m.cov[0][1];
    const double norm = 1.0 / (2.0 * M_PI * std::sqrt(det));
    auto phi = [&](double d1, double d2) {
        const double q = (m.cov[1][1] * d1 * d1 - 2.0 * m.cov[0][1] * d1 * d2 +
                          m.cov[0][0] * d2 * d2) /
                         det;
        return norm * std::exp(-0.5 * q);
    };
    return phi(z.x1 - m.mean[0], z.x2 - m.mean[1]) +
           phi(z.x1 - m.mean[0], -z.x2 - m.mean[1]);
}

// rho = min{1, exp(E(x) - E(x*)) q(x | moments_after) / q(x* | moments_now)}
// with both energies against the FIXED neighborhoods of the current x; the
// local normalizer cancels exactly.
inline double acceptance_ratio(const PpdPoint& x, const PpdPoint& x_star,
                               const std::vector<Neighborhood>& nbhd_sets, double xbar1,
                               const Theta& theta, const ModelConfig& config,
                               const ProposalMoments& moments_now,
                               const ProposalMoments& moments_after) {
    const double e_now = conditional_energy(x, nbhd_sets, xbar1, theta, config);
    const double e_star = conditional_energy(x_star, nbhd_sets, xbar1, theta, config);
    const double ratio = std::exp(e_now - e_star) * proposal_density(x, moments_after) /
                         proposal_density(x_star, moments_now);
    return std::min(1.0, ratio);
}

struct ReplicateOptions {
    bool live_xbar = true;      // recompute xbar1 from the moving configuration
    bool shuffle_order = false; // visit points in random order (sensitivity checks)
    int workers = 1;
};

// One full sweep over the configuration; returns the number of accepted
// moves. Proposal moments are refreshed after every accepted move.
inline int sweep(ProjectedDiagram& ppd, const Theta& theta, const ModelConfig& config,
                 Rng& rng, detail::MomentAccumulator& acc, double frozen_xbar,
                 const ReplicateOptions& opts) {
    const std::size_t n = ppd.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (opts.shuffle_order)
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.next_u64() % i]);

    int accepted = 0;
    for (std::size_t idx : order) {
        const ProposalMoments now = acc.moments();
        const PpdPoint x = ppd.points[idx];
        const PpdPoint x_star = proposal_sample(now, rng);

        auto after_acc = acc;
        after_acc.replace(x, x_star);
        const ProposalMoments after = after_acc.moments();

        const double xbar1 = opts.live_xbar ? acc.s1[0] / static_cast<double>(n) : frozen_xbar;
        const auto nbs =
            neighborhoods_of(x, config.K, ppd, config.delta, static_cast<long>(idx));
        const double rho =
            acceptance_ratio(x, x_star, nbs, xbar1, theta, config, now, after);
        if (rng.uniform() < rho) {
            ppd.points[idx] = x_star;
            acc = after_acc;
            ++accepted;
        }
    }
    return accepted;
}

inline int sweep(ProjectedDiagram& ppd, const Theta& theta, const ModelConfig& config,
                 Rng& rng, const ReplicateOptions& opts = {}) {
    auto acc = detail::MomentAccumulator::of(ppd);
    const double xbar = acc.s1[0] / static_cast<double>(ppd.size());
    return sweep(ppd, theta, config, rng, acc, xbar, opts);
}

struct Schedule {
    int burn_in = 1000;
    int n_b = 500;
    int n_r = 20;
    int n_R = 50;
    std::uint64_t seed = 0;

    int total() const { return n_r * n_R; }
};

struct ReplicateEnsemble {
    std::vector<PersistenceDiagram> replicates;  // chain-major order
    FittedModel fitted;
    Schedule schedule;
    double acceptance_rate = 0.0;
};

// Each of the n_R super-chains starts from the original PPD with its own
// burn-in and stream (seed + chain index); blocks of n_b sweeps emit one
// replicate each, n_r per chain.
inline ReplicateEnsemble replicate(const ProjectedDiagram& ppd, const FittedModel& fitted,
                                   const Schedule& schedule, const ReplicateOptions& opts = {}) {
    if (schedule.burn_in <= 0 || schedule.n_b <= 0 || schedule.n_r <= 0 || schedule.n_R <= 0)
        throw error("replicate: schedule fields must be positive");
    if (!fitted.trace.converged) throw error("replicate: fitted model did not converge");

    const double frozen_xbar = spread_terms(ppd).xbar1;
    ReplicateEnsemble ens;
    ens.fitted = fitted;
    ens.schedule = schedule;
    ens.replicates.resize(static_cast<std::size_t>(schedule.total()));
    std::vector<long long> accepts(schedule.n_R, 0);

    auto run_chain = [&](int chain) {
        Rng rng(schedule.seed + static_cast<std::uint64_t>(chain));
        ProjectedDiagram config = ppd;
        auto acc = detail::MomentAccumulator::of(config);
        long long accepted = 0;
        for (int s = 0; s < schedule.burn_in; ++s)
            accepted += sweep(config, fitted.theta_hat, fitted.config, rng, acc, frozen_xbar, opts);
        for (int r = 0; r < schedule.n_r; ++r) {
            for (int s = 0; s < schedule.n_b; ++s)
                accepted +=
                    sweep(config, fitted.theta_hat, fitted.config, rng, acc, frozen_xbar, opts);
            auto pd = unproject(config, fitted.config.degree,
                                "replicate chain " + std::to_string(chain) + " block " +
                                    std::to_string(r));
            ens.replicates[static_cast<std::size_t>(chain) * schedule.n_r + r] = std::move(pd);
        }
        accepts[chain] = accepted;
    };

    const int workers = std::max(1, opts.workers);
    if (workers == 1) {
        for (int c = 0; c < schedule.n_R; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int c = w; c < schedule.n_R; c += workers) run_chain(c);
            });
        for (auto& t : pool) t.join();
    }

    long long total_accepted = 0;
    for (long long a : accepts) total_accepted += a;
    const long long sweeps_per_chain = schedule.burn_in + schedule.n_b * schedule.n_r;
    const long long total_moves =
        sweeps_per_chain * static_cast<long long>(schedule.n_R) *
        static_cast<long long>(ppd.size());
    ens.acceptance_rate =
        total_moves > 0 ? static_cast<double>(total_accepted) / total_moves : 0.0;
    return ens;
}

// Directory layout: replicate_<chain>_<block>.csv plus ensemble.json.
inline void write_ensemble(const ReplicateEnsemble& ens, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (int c = 0; c < ens.schedule.n_R; ++c)
        for (int r = 0; r < ens.schedule.n_r; ++r)
            write_diagram(ens.replicates[static_cast<std::size_t>(c) * ens.schedule.n_r + r],
                          dir + "/replicate_" + std::to_string(c) + "_" + std::to_string(r) +
                              ".csv");
    nlohmann::json j{{"schedule",
                      {{"burn_in", ens.schedule.burn_in},
                       {"n_b", ens.schedule.n_b},
                       {"n_r", ens.schedule.n_r},
                       {"n_R", ens.schedule.n_R},
                       {"seed", ens.schedule.seed}}},
                     {"fitted", to_json(ens.fitted)},
                     {"acceptance_rate", ens.acceptance_rate}};
    std::ofstream os(dir + "/ensemble.json");
    if (!os) throw error("cannot write " + dir + "/ensemble.json");
    os << j.dump(2) << '\n';
}

inline ReplicateEnsemble read_ensemble(const std::string& dir) {
    std::ifstream is(dir + "/ensemble.json");
    if (!is) throw parse_error("cannot open " + dir + "/ensemble.json");
    nlohmann::json j;
    is >> j;
    ReplicateEnsemble ens;
    const auto& s = j.at("schedule");
    ens.schedule.burn_in = s.at("burn_in").get<int>();
    ens.schedule.n_b = s.at("n_b").get<int>();
    ens.schedule.n_r = s.at("n_r").get<int>();
    ens.schedule.n_R = s.at("n_R").get<int>();
    ens.schedule.seed = s.at("seed").get<std::uint64_t>();
    ens.fitted = model_from_json(j.at("fitted"));
    ens.acceptance_rate = j.at("acceptance_rate").get<double>();
    for (int c = 0; c < ens.schedule.n_R; ++c)
        for (int r = 0; r < ens.schedule.n_r; ++r)
            ens.replicates.push_back(read_diagram(dir + "/replicate_" + std::to_string(c) +
                                                  "_" + std::to_string(r) + ".csv"));
    return ens;
}

}  // namespace rst
