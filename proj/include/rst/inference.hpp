#pragma once

// Order-statistic significance tests against a replicate ensemble, and
// two-diagram per-parameter comparison with multiplicity correction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rst/diagram.hpp"
#include "rst/estimation.hpp"
#include "rst/replication.hpp"

namespace rst {

// T_j: j-th largest persistence |d - b| among finite points.
inline std::vector<double> order_statistics(const PersistenceDiagram& pd, int J) {
    std::vector<double> pers;
    for (const auto& p : pd.points())
        if (!p.essential) pers.push_back(persistence(p));
    if (J > static_cast<int>(pers.size()))
        throw error("order_statistics: J=" + std::to_string(J) + " exceeds point count " +
                    std::to_string(pers.size()));
    std::sort(pers.begin(), pers.end(), std::greater<>());
    pers.resize(J);
    return pers;
}

struct OrderStatRow {
    double observed = 0.0;
    double p_value = 0.0;          // add-one rule, always in (0, 1]
    double q50 = 0.0, q95 = 0.0, q99 = 0.0;  // replicate quantiles
};

struct OrderStatReport {
    std::vector<OrderStatRow> rows;  // rows[j-1] for T_j
    std::size_t n_used = 0;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - lo;
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

inline OrderStatReport order_stat_test(const PersistenceDiagram& pd,
                                       const ReplicateEnsemble& ensemble, int J) {
    const std::size_t n = ensemble.replicates.size();
    if (n == 0) throw error("order_stat_test: empty ensemble");
    const auto observed = order_statistics(pd, J);

    OrderStatReport report;
    report.n_used = n;
    report.rows.resize(J);
    std::vector<std::vector<double>> rep_stats(J);
    for (const auto& rep : ensemble.replicates) {
        const auto t = order_statistics(rep, J);
        for (int j = 0; j < J; ++j) rep_stats[j].push_back(t[j]);
    }
    for (int j = 0; j < J; ++j) {
        auto& col = rep_stats[j];
        std::size_t ge = 0;
        for (double v : col)
            if (v >= observed[j]) ++ge;
        std::sort(col.begin(), col.end());
        auto& row = report.rows[j];
        row.observed = observed[j];
        row.p_value = static_cast<double>(1 + ge) / static_cast<double>(n + 1);
        row.q50 = detail::quantile_sorted(col, 0.50);
        row.q95 = detail::quantile_sorted(col, 0.95);
        row.q99 = detail::quantile_sorted(col, 0.99);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Multiplicity corrections

// BH step-up: largest i with p_(i) <= i * alpha / m; reject that rank and
// all smaller. Returns original indices.
inline std::vector<std::size_t> bh_fdr(const std::vector<double>& pvals, double alpha) {
    const std::size_t m = pvals.size();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
    std::size_t cutoff = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (pvals[idx[i]] <= (i + 1) * alpha / m) cutoff = i + 1;
    std::vector<std::size_t> rejected(idx.begin(), idx.begin() + cutoff);
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

inline std::vector<std::size_t> bonferroni(const std::vector<double>& pvals, double alpha) {
    std::vector<std::size_t> rejected;
    const std::size_t m = pvals.size();
    for (std::size_t i = 0; i < m; ++i)
        if (pvals[i] <= alpha / m) rejected.push_back(i);
    return rejected;
}

// ---------------------------------------------------------------------------
// Two-diagram parameter comparison

struct ParameterRow {
    std::string name;
    double estimate_a = 0.0, estimate_b = 0.0;
    double se_a = 0.0, se_b = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct ComparisonReport {
    std::vector<ParameterRow> rows;
    std::vector<std::size_t> rejected_bh;
    std::vector<std::size_t> rejected_bonferroni;
    double alpha = 0.05;
    std::size_t refit_failures_a = 0, refit_failures_b = 0;
};

struct CompareOptions {
    double alpha = 0.05;
    QuadratureSpec quad;
    OptimizerSettings fit_settings;
    OptimizerSettings refit_settings;  // typically 1 start (warm from parent fit)
    ReplicateOptions replicate_opts;
    double max_refit_failure_rate = 0.05;

    CompareOptions() { refit_settings.multi_starts = 1; }
};

namespace detail {

inline std::vector<double> theta_vector(const Theta& t) {
    std::vector<double> v{t.theta_H, t.theta_V};
    v.insert(v.end(), t.theta_k.begin(), t.theta_k.end());
    return v;
}

struct SideFit {
    std::vector<double> estimate;
    std::vector<double> se;
    std::size_t failures = 0;
    std::size_t refits = 0;
};

// Fit the diagram, replicate, refit every replicate; SE per parameter is
// the replicate standard deviation of the refitted estimates. The caller
// supplies config with delta already resolved: both sides of a comparison
// (and all refits) must share one interaction radius, or their cluster
// coefficients are not commensurable.
inline SideFit fit_side(const PersistenceDiagram& pd, const ModelConfig& config,
                        const Schedule& schedule, const CompareOptions& opt) {
    auto ppd = project(pd);
    const auto fitted = fit(ppd, config, opt.quad, opt.fit_settings);
    const auto ens = replicate(ppd, fitted, schedule, opt.replicate_opts);

    SideFit side;
    side.estimate = theta_vector(fitted.theta_hat);
    side.refits = ens.replicates.size();
    std::vector<std::vector<double>> samples;
    for (const auto& rep : ens.replicates) {
        try {
            auto refit = fit(project(rep), config, opt.quad, opt.refit_settings);
            samples.push_back(theta_vector(refit.theta_hat));
        } catch (const error&) {
            ++side.failures;
        }
    }
    if (static_cast<double>(side.failures) >
        opt.max_refit_failure_rate * static_cast<double>(side.refits))
        throw error("parameter_compare: " + std::to_string(side.failures) + " of " +
                    std::to_string(side.refits) + " replicate refits failed");

    const std::size_t dim = side.estimate.size();
    side.se.assign(dim, 0.0);
    std::vector<double> mean(dim, 0.0);
    for (const auto& s : samples)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += s[i];
    for (auto& m : mean) m /= static_cast<double>(samples.size());
    for (const auto& s : samples)
        for (std::size_t i = 0; i < dim; ++i)
            side.se[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
    for (auto& v : side.se)
        v = std::sqrt(v / static_cast<double>(samples.size() - 1));
    return side;
}

}  // namespace detail

inline ComparisonReport parameter_compare(const PersistenceDiagram& pd_a,
                                          const PersistenceDiagram& pd_b,
                                          const ModelConfig& config, const Schedule& schedule,
                                          const CompareOptions& opt = {}) {
    // One interaction radius for both sides: resolve delta from the pooled
    // projected points so the cluster coefficients live in the same model.
    ModelConfig shared = config;
    auto pooled = project(pd_a);
    for (const auto& p : project(pd_b).points) pooled.points.push_back(p);
    shared.delta = resolve_delta(pooled, config.degree, config.data_dim, config.delta_star);
    const auto side_a = detail::fit_side(pd_a, shared, schedule, opt);
    Schedule sched_b = schedule;
    sched_b.seed = schedule.seed + 0x9e3779b97f4a7c15ull;  // independent stream for side B
    const auto side_b = detail::fit_side(pd_b, shared, sched_b, opt);

    ComparisonReport report;
    report.alpha = opt.alpha;
    report.refit_failures_a = side_a.failures;
    report.refit_failures_b = side_b.failures;

    std::vector<double> pvals;
    for (std::size_t i = 0; i < side_a.estimate.size(); ++i) {
        ParameterRow row;
        row.name = i == 0 ? "theta_H" : i == 1 ? "theta_V" : "theta_" + std::to_string(i - 1);
        row.estimate_a = side_a.estimate[i];
        row.estimate_b = side_b.estimate[i];
        row.se_a = side_a.se[i];
        row.se_b = side_b.se[i];
        const double pooled = std::sqrt(row.se_a * row.se_a + row.se_b * row.se_b);
        row.z = pooled > 0.0 ? (row.estimate_a - row.estimate_b) / pooled : 0.0;
        row.p_value = std::erfc(std::fabs(row.z) / std::sqrt(2.0));
        pvals.push_back(row.p_value);
        report.rows.push_back(std::move(row));
    }
    report.rejected_bh = bh_fdr(pvals, opt.alpha);
    report.rejected_bonferroni = bonferroni(pvals, opt.alpha);
    return report;
}

// ---------------------------------------------------------------------------
// JSON serialization

inline nlohmann::json to_json(const OrderStatReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < r.rows.size(); ++j)
        rows.push_back({{"j", j + 1},
                        {"observed", r.rows[j].observed},
                        {"p_value", r.rows[j].p_value},
                        {"q50", r.rows[j].q50},
                        {"q95", r.rows[j].q95},
                        {"q99", r.rows[j].q99}});
    return {{"n_used", r.n_used}, {"order_statistics", rows}};
}

inline nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"name", row.name},
                        {"estimate_a", row.estimate_a},
                        {"estimate_b", row.estimate_b},
                        {"se_a", row.se_a},
                        {"se_b", row.se_b},
                        {"z", row.z},
                        {"p_value", row.p_value}});
    return {{"alpha", r.alpha},
            {"parameters", rows},
            {"rejected_bh", r.rejected_bh},
            {"rejected_bonferroni", r.rejected_bonferroni},
            {"n_significant_bh", r.rejected_bh.size()},
            {"n_significant_bonferroni", r.rejected_bonferroni.size()},
            {"refit_failures_a", r.refit_failures_a},
            {"refit_failures_b", r.refit_failures_b}};
}

}  // namespace rst
