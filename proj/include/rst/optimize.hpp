#pragma once

// Derivative-free simplex descent (Nelder-Mead) with a central-difference
// gradient polish. Minimizes; callers negate for maximization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace rst {

using ObjectiveFn = std::function<double(const std::vector<double>&)>;

struct OptimizerSettings {
    int max_iterations = 10000;
    double f_tol = 1e-8;       // relative objective change
    double x_tol = 1e-6;       // parameter change across a polish step
    double initial_step = 0.25;
    double gradient_step = 1e-6;  // relative step for internal gradients
    int multi_starts = 5;
    double jitter = 0.5;       // spread of jittered start points
};

struct OptimizerResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> gradient;     // at the solution, central differences
    double simplex_size = 0.0;
};

inline std::vector<double> central_gradient(const ObjectiveFn& fn,
                                            const std::vector<double>& x,
                                            double rel_step) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::fabs(x[i]));
        xp[i] = x[i] + h;
        const double fp = fn(xp);
        xp[i] = x[i] - h;
        const double fm = fn(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline OptimizerResult nelder_mead(const ObjectiveFn& fn, std::vector<double> start,
                                   const OptimizerSettings& s) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> simplex(n + 1, start);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i)
        simplex[i + 1][i] += s.initial_step * std::max(1.0, std::fabs(start[i]));
    for (std::size_t i = 0; i <= n; ++i) fv[i] = fn(simplex[i]);

    OptimizerResult res;
    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> sx(n + 1);
        std::vector<double> sf(n + 1);
        for (std::size_t i = 0; i <= n; ++i) { sx[i] = simplex[idx[i]]; sf[i] = fv[idx[i]]; }
        simplex.swap(sx);
        fv.swap(sf);
    };

    int iter = 0;
    for (; iter < s.max_iterations; ++iter) {
        order();
        const double spread = std::fabs(fv[n] - fv[0]);
        if (spread <= s.f_tol * (std::fabs(fv[0]) + s.f_tol)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;

        auto along = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
            return p;
        };

        const auto refl = along(-1.0);
        const double fr = fn(refl);
        if (fr < fv[0]) {
            const auto exp_ = along(-2.0);
            const double fe = fn(exp_);
            if (fe < fr) { simplex[n] = exp_; fv[n] = fe; }
            else { simplex[n] = refl; fv[n] = fr; }
        } else if (fr < fv[n - 1]) {
            simplex[n] = refl; fv[n] = fr;
        } else {
            const auto contr = along(fr < fv[n] ? -0.5 : 0.5);
            const double fc = fn(contr);
            if (fc < std::min(fr, fv[n])) { simplex[n] = contr; fv[n] = fc; }
            else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = 0.5 * (simplex[i][j] + simplex[0][j]);
                    fv[i] = fn(simplex[i]);
                }
            }
        }
    }
    order();
    res.x = simplex[0];
    res.f = fv[0];
    res.iterations = iter;
    double sz = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        sz = std::max(sz, std::fabs(simplex[n][j] - simplex[0][j]));
    res.simplex_size = sz;
    res.converged = iter < s.max_iterations;
    return res;
}

// Simplex descent, then steepest-descent polish with backtracking line
// search on a central-difference gradient. A polish step converges once
// the relative objective change is negligible or the parameters stop
// moving; the backtracking step length is quantized by halving, so a
// stalled objective can coexist with a small but nonzero dx.
inline OptimizerResult minimize(const ObjectiveFn& fn, std::vector<double> start,
                                const OptimizerSettings& s) {
    OptimizerResult res = nelder_mead(fn, std::move(start), s);

    int iter = res.iterations;
    bool converged = false;
    for (int polish = 0; polish < 200 && iter < s.max_iterations; ++polish, ++iter) {
        const auto g = central_gradient(fn, res.x, s.gradient_step);
        double gnorm = 0.0;
        for (double gi : g) gnorm = std::max(gnorm, std::fabs(gi));
        if (gnorm == 0.0) { res.gradient = g; converged = true; break; }

        double step = 1.0 / gnorm;
        std::vector<double> trial(res.x.size());
        double f_trial = res.f;
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt, step *= 0.5) {
            for (std::size_t i = 0; i < res.x.size(); ++i)
                trial[i] = res.x[i] - step * g[i];
            f_trial = fn(trial);
            if (f_trial < res.f) { improved = true; break; }
        }
        double dx = 0.0;
        for (std::size_t i = 0; i < res.x.size(); ++i)
            dx = std::max(dx, std::fabs(trial[i] - res.x[i]));
        const double df = res.f - f_trial;
        if (improved) { res.x = trial; res.f = f_trial; }
        res.gradient = g;
        if (!improved || df <= s.f_tol * (std::fabs(res.f) + s.f_tol) || dx <= s.x_tol) {
            converged = true;
            break;
        }
    }
    res.iterations = iter;
    res.converged = converged && res.iterations < s.max_iterations;
    return res;
}

}  // namespace rst
