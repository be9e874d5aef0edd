// rst: fit a Gibbs model to a persistence diagram, generate MCMC
// replicates, and test diagram statistics against the replicate ensemble.
//
// Exit codes: 0 success, 2 usage, 3 input parse failure, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rst/diagram.hpp"
#include "rst/estimation.hpp"
#include "rst/field.hpp"
#include "rst/gibbs.hpp"
#include "rst/inference.hpp"
#include "rst/replication.hpp"
#include "rst/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::uint64_t seed = 0;
    int K = 2;
    double delta_star = 1.0;
    int dim = 2;
    int degree = 0;
    int burn_in = 1000;
    std::string schedule = "500,20,50";
    double alpha = 0.05;
    std::string corrections = "bh,bonferroni";
    double bandwidth = 0.11;
    int grid = 128;
    int workers = 0;
    std::string out = "rst_out";
};

rst::Schedule parse_schedule(const Options& opt) {
    rst::Schedule s;
    s.burn_in = opt.burn_in;
    s.seed = opt.seed;
    std::istringstream ss(opt.schedule);
    char c1, c2;
    if (!(ss >> s.n_b >> c1 >> s.n_r >> c2 >> s.n_R) || c1 != ',' || c2 != ',')
        throw CLI::ValidationError("--schedule", "expected nb,nr,nR");
    return s;
}

rst::ModelConfig make_config(const Options& opt) {
    rst::ModelConfig c;
    c.K = opt.K;
    c.delta_star = opt.delta_star;
    c.data_dim = opt.dim;
    c.degree = opt.degree;
    return c;
}

int effective_workers(const Options& opt) {
    if (opt.workers > 0) return opt.workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void write_manifest(const Options& opt, const std::string& command) {
    fs::create_directories(opt.out);
    json j{{"command", command},
           {"seed", opt.seed},
           {"K", opt.K},
           {"delta_star", opt.delta_star},
           {"dim", opt.dim},
           {"degree", opt.degree},
           {"burn_in", opt.burn_in},
           {"schedule", opt.schedule},
           {"alpha", opt.alpha},
           {"corrections", opt.corrections},
           {"bandwidth", opt.bandwidth},
           {"grid", opt.grid},
           {"out", opt.out}};
    std::ofstream os(opt.out + "/run.json");
    os << j.dump(2) << '\n';
}

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--seed", opt.seed, "RNG seed");
    cmd->add_option("--K", opt.K, "max cluster-term order");
    cmd->add_option("--delta-star", opt.delta_star, "delta* tuning parameter");
    cmd->add_option("--dim", opt.dim, "data dimension (-1 = unknown)");
    cmd->add_option("--degree", opt.degree, "homology degree");
    cmd->add_option("--burn-in", opt.burn_in, "burn-in sweeps");
    cmd->add_option("--schedule", opt.schedule, "nb,nr,nR");
    cmd->add_option("--alpha", opt.alpha, "significance level");
    cmd->add_option("--corrections", opt.corrections, "bh,bonferroni");
    cmd->add_option("--bandwidth", opt.bandwidth, "KDE bandwidth");
    cmd->add_option("--grid", opt.grid, "grid nodes per axis");
    cmd->add_option("--workers", opt.workers, "parallel workers (0 = auto)");
    cmd->add_option("--out", opt.out, "output directory");
}

rst::ModelConfig resolved_config(const Options& opt, const rst::ProjectedDiagram& ppd) {
    auto config = make_config(opt);
    config.delta = rst::resolve_delta(ppd, config.degree, config.data_dim, config.delta_star);
    return config;
}

void print_order_stat_report(const rst::OrderStatReport& rep, std::ostream& os) {
    os << "  j    observed       p-value        q50        q95        q99\n";
    char buf[160];
    for (std::size_t j = 0; j < rep.rows.size(); ++j) {
        const auto& r = rep.rows[j];
        std::snprintf(buf, sizeof buf, "%3zu %11.5g %13.6g %10.5g %10.5g %10.5g\n", j + 1,
                      r.observed, r.p_value, r.q50, r.q95, r.q99);
        os << buf;
    }
    os << "  (n = " << rep.n_used << " replicates)\n";
}

void print_comparison_report(const rst::ComparisonReport& rep, std::ostream& os) {
    os << "  parameter    estimate A    estimate B          z     p-value   BH  Bonf\n";
    char buf[200];
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        const bool bh = std::find(rep.rejected_bh.begin(), rep.rejected_bh.end(), i) !=
                        rep.rejected_bh.end();
        const bool bf = std::find(rep.rejected_bonferroni.begin(),
                                  rep.rejected_bonferroni.end(), i) !=
                        rep.rejected_bonferroni.end();
        std::snprintf(buf, sizeof buf, "  %-10s %12.5g %13.5g %10.3f %11.4g   %-3s  %-3s\n",
                      r.name.c_str(), r.estimate_a, r.estimate_b, r.z, r.p_value,
                      bh ? "*" : "-", bf ? "*" : "-");
        os << buf;
    }
    os << "  significant: BH " << rep.rejected_bh.size() << ", Bonferroni "
       << rep.rejected_bonferroni.size() << " (alpha = " << rep.alpha << ")\n";
}

int run_demo_two_circles(const Options& opt) {
    write_manifest(opt, "demo-two-circles");
    const auto cloud = rst::sample_two_circles(500, 300, 4.0, 2.0, opt.seed);
    rst::write_cloud_csv(cloud, opt.out + "/cloud.csv");

    rst::GridSpec gs;
    gs.width = gs.height = opt.grid;
    const auto grid = rst::kde_grid(cloud, opt.bandwidth, gs);
    const auto pd0 = rst::superlevel_h0(grid);
    const auto pd1 = rst::superlevel_h1(grid);
    rst::write_diagram(pd0, opt.out + "/pd_h0.csv");
    rst::write_diagram(pd1, opt.out + "/pd_h1.csv");
    rst::emit_svg(pd0, opt.out + "/pd_h0.svg");
    rst::emit_svg(pd1, opt.out + "/pd_h1.svg");

    // drop the essential class, project, fit
    rst::PersistenceDiagram finite0(0, pd0.source_meta());
    for (const auto& p : pd0.points())
        if (!p.essential) finite0.add(p);
    const auto ppd = rst::project(finite0);
    const auto config = resolved_config(opt, ppd);
    std::cerr << "fitting K=" << config.K << " model to " << ppd.size()
              << " H0 points (delta = " << config.delta << ")\n";
    const auto fitted = rst::fit(ppd, config);
    {
        std::ofstream os(opt.out + "/model.json");
        os << rst::to_json(fitted).dump(2) << '\n';
    }

    const auto schedule = parse_schedule(opt);
    rst::ReplicateOptions ropts;
    ropts.workers = effective_workers(opt);
    std::cerr << "replicating: burn-in " << schedule.burn_in << ", schedule (" << schedule.n_b
              << "," << schedule.n_r << "," << schedule.n_R << ")\n";
    const auto ensemble = rst::replicate(ppd, fitted, schedule, ropts);
    rst::write_ensemble(ensemble, opt.out + "/ensemble");

    const int J = 5;
    const auto report = rst::order_stat_test(finite0, ensemble, J);
    {
        std::ofstream os(opt.out + "/order_stat_report.json");
        os << rst::to_json(report).dump(2) << '\n';
    }
    rst::emit_svg(report, ensemble, opt.out + "/order_stats.svg");
    std::cout << "two-circles demo (seed " << opt.seed << ", acceptance rate "
              << ensemble.acceptance_rate << ")\n";
    print_order_stat_report(report, std::cout);
    return 0;
}

int run_pd(const Options& opt, const std::string& cloud_path) {
    write_manifest(opt, "pd");
    const auto cloud = rst::read_cloud_csv(cloud_path);
    rst::GridSpec gs;
    gs.width = gs.height = opt.grid;
    const auto grid = rst::kde_grid(cloud, opt.bandwidth, gs);
    const auto pd =
        opt.degree == 0 ? rst::superlevel_h0(grid) : rst::superlevel_h1(grid);
    rst::write_diagram(pd, opt.out + "/pd.csv");
    rst::emit_svg(pd, opt.out + "/pd.svg");
    std::cout << "wrote " << opt.out << "/pd.csv (" << pd.size() << " points, degree "
              << opt.degree << ")\n";
    return 0;
}

int run_fit(const Options& opt, const std::string& pd_path) {
    write_manifest(opt, "fit");
    auto pd = rst::read_diagram(pd_path);
    rst::PersistenceDiagram finite(pd.degree(), pd.source_meta());
    for (const auto& p : pd.points())
        if (!p.essential) finite.add(p);
    const auto ppd = rst::project(finite);
    const auto config = resolved_config(opt, ppd);
    const auto fitted = rst::fit(ppd, config);
    std::ofstream os(opt.out + "/model.json");
    os << rst::to_json(fitted).dump(2) << '\n';
    std::cout << "fit: log_pl = " << fitted.log_pl << ", theta_H = " << fitted.theta_hat.theta_H
              << ", theta_V = " << fitted.theta_hat.theta_V;
    for (int k = 0; k < fitted.theta_hat.K(); ++k)
        std::cout << ", theta_" << k + 1 << " = " << fitted.theta_hat.theta_k[k];
    std::cout << "\nwrote " << opt.out << "/model.json\n";
    return 0;
}

int run_replicate(const Options& opt, const std::string& pd_path,
                  const std::string& model_path) {
    write_manifest(opt, "replicate");
    auto pd = rst::read_diagram(pd_path);
    rst::PersistenceDiagram finite(pd.degree(), pd.source_meta());
    for (const auto& p : pd.points())
        if (!p.essential) finite.add(p);
    const auto ppd = rst::project(finite);

    std::ifstream ms(model_path);
    if (!ms) throw rst::parse_error("cannot open: " + model_path);
    json mj;
    ms >> mj;
    const auto fitted = rst::model_from_json(mj, ppd);

    const auto schedule = parse_schedule(opt);
    rst::ReplicateOptions ropts;
    ropts.workers = effective_workers(opt);
    const auto ensemble = rst::replicate(ppd, fitted, schedule, ropts);
    rst::write_ensemble(ensemble, opt.out + "/ensemble");
    std::cout << "wrote " << ensemble.replicates.size() << " replicates to " << opt.out
              << "/ensemble (acceptance rate " << ensemble.acceptance_rate << ")\n";
    return 0;
}

int run_test(const Options& opt, const std::string& pd_path, const std::string& ensemble_dir,
             int J) {
    write_manifest(opt, "test");
    auto pd = rst::read_diagram(pd_path);
    rst::PersistenceDiagram finite(pd.degree(), pd.source_meta());
    for (const auto& p : pd.points())
        if (!p.essential) finite.add(p);
    const auto ensemble = rst::read_ensemble(ensemble_dir);
    const auto report = rst::order_stat_test(finite, ensemble, J);
    {
        std::ofstream os(opt.out + "/order_stat_report.json");
        os << rst::to_json(report).dump(2) << '\n';
    }
    rst::emit_svg(report, ensemble, opt.out + "/order_stats.svg");
    print_order_stat_report(report, std::cout);
    return 0;
}

int run_compare(const Options& opt, const std::string& path_a, const std::string& path_b) {
    write_manifest(opt, "compare");
    const auto pd_a = rst::read_diagram(path_a);
    const auto pd_b = rst::read_diagram(path_b);
    const auto schedule = parse_schedule(opt);
    rst::CompareOptions copt;
    copt.alpha = opt.alpha;
    copt.replicate_opts.workers = effective_workers(opt);
    const auto report =
        rst::parameter_compare(pd_a, pd_b, make_config(opt), schedule, copt);
    std::ofstream os(opt.out + "/comparison_report.json");
    os << rst::to_json(report).dump(2) << '\n';
    print_comparison_report(report, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gibbs-model replication and significance testing for persistence diagrams"};
    app.require_subcommand(1);
    Options opt;

    auto* demo = app.add_subcommand("demo-two-circles",
                                    "sample two circles, build the H0 diagram, fit, replicate, "
                                    "and test order statistics");
    add_common(demo, opt);

    std::string cloud_path, pd_path, model_path, ensemble_dir, path_a, path_b;
    int J = 5;

    auto* pd_cmd = app.add_subcommand("pd", "point cloud -> KDE -> persistence diagram");
    pd_cmd->add_option("cloud", cloud_path, "point cloud CSV (x,y)")->required();
    add_common(pd_cmd, opt);

    auto* fit_cmd = app.add_subcommand("fit", "diagram -> fitted model JSON");
    fit_cmd->add_option("diagram", pd_path, "diagram CSV")->required();
    add_common(fit_cmd, opt);

    auto* rep_cmd = app.add_subcommand("replicate", "model + diagram -> replicate ensemble");
    rep_cmd->add_option("diagram", pd_path, "diagram CSV")->required();
    rep_cmd->add_option("model", model_path, "fitted model JSON")->required();
    add_common(rep_cmd, opt);

    auto* test_cmd = app.add_subcommand("test", "diagram + ensemble -> order-statistic report");
    test_cmd->add_option("diagram", pd_path, "diagram CSV")->required();
    test_cmd->add_option("ensemble", ensemble_dir, "ensemble directory")->required();
    test_cmd->add_option("--J", J, "number of order statistics");
    add_common(test_cmd, opt);

    auto* cmp_cmd = app.add_subcommand("compare", "two diagrams -> per-parameter comparison");
    cmp_cmd->add_option("diagram_a", path_a, "diagram CSV")->required();
    cmp_cmd->add_option("diagram_b", path_b, "diagram CSV")->required();
    add_common(cmp_cmd, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (demo->parsed()) return run_demo_two_circles(opt);
        if (pd_cmd->parsed()) return run_pd(opt, cloud_path);
        if (fit_cmd->parsed()) return run_fit(opt, pd_path);
        if (rep_cmd->parsed()) return run_replicate(opt, pd_path, model_path);
        if (test_cmd->parsed()) return run_test(opt, pd_path, ensemble_dir, J);
        if (cmp_cmd->parsed()) return run_compare(opt, path_a, path_b);
    } catch (const rst::parse_error& e) {
        std::cerr << "rst: parse error: " << e.what() << "\n";
        return 3;
    } catch (const rst::error& e) {
        std::cerr << "rst: error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "rst: error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
