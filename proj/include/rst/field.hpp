#pragma once

// Scalar fields at desk scale: circle samplers, gridded kernel density
// estimates, and H0/H1 superlevel-set persistence of a gridded field.
//
// Superlevel filtrations are canonicalized by negating field values when
// births/deaths are recorded, so emitted diagrams satisfy death >= birth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rst/diagram.hpp"
#include "rst/rng.hpp"

namespace rst {

struct ScalarGrid {
    int width = 0, height = 0;
    double origin_x = 0.0, origin_y = 0.0;
    double dx = 1.0, dy = 1.0;
    std::vector<double> values;  // row-major, index = row * width + col

    double at(int row, int col) const { return values[row * width + col]; }
    double& at(int row, int col) { return values[row * width + col]; }
};

struct PointCloud {
    std::vector<std::pair<double, double>> points;
};

inline PointCloud sample_two_circles(int n_large, int n_small, double diam_large,
                                     double diam_small, std::uint64_t seed,
                                     double jitter_sd = 0.0) {
    if (diam_large <= 0.0 || diam_small <= 0.0)
        throw error("sample_two_circles: diameters must be > 0");
    Rng rng(seed);
    PointCloud cloud;
    auto add_circle = [&](int n, double radius) {
        for (int i = 0; i < n; ++i) {
            const double angle = 2.0 * M_PI * rng.uniform();
            const double r = radius + (jitter_sd > 0.0 ? jitter_sd * rng.normal() : 0.0);
            cloud.points.emplace_back(r * std::cos(angle), r * std::sin(angle));
        }
    };
    add_circle(n_large, diam_large / 2.0);
    add_circle(n_small, diam_small / 2.0);
    return cloud;
}

struct GridSpec {
    int width = 128;
    int height = 128;
    double padding_bandwidths = 3.0;
};

// Gaussian KDE evaluated at every grid node; the grid covers the cloud's
// bounding box padded by padding_bandwidths * bandwidth.
inline ScalarGrid kde_grid(const PointCloud& cloud, double bandwidth,
                           const GridSpec& spec = {}) {
    if (cloud.points.empty()) throw error("kde_grid: empty point cloud");
    if (bandwidth <= 0.0) throw error("kde_grid: bandwidth must be > 0");

    double lox = cloud.points[0].first, hix = lox;
    double loy = cloud.points[0].second, hiy = loy;
    for (const auto& [x, y] : cloud.points) {
        lox = std::min(lox, x); hix = std::max(hix, x);
        loy = std::min(loy, y); hiy = std::max(hiy, y);
    }
    const double pad = spec.padding_bandwidths * bandwidth;
    ScalarGrid g;
    g.width = spec.width;
    g.height = spec.height;
    g.origin_x = lox - pad;
    g.origin_y = loy - pad;
    g.dx = (hix - lox + 2.0 * pad) / (spec.width - 1);
    g.dy = (hiy - loy + 2.0 * pad) / (spec.height - 1);
    g.values.assign(static_cast<std::size_t>(g.width) * g.height, 0.0);

    const double inv2d2 = 1.0 / (2.0 * bandwidth * bandwidth);
    const double scale = 1.0 / (cloud.points.size() * 2.0 * M_PI * bandwidth * bandwidth);
    for (int row = 0; row < g.height; ++row) {
        const double py = g.origin_y + row * g.dy;
        for (int col = 0; col < g.width; ++col) {
            const double px = g.origin_x + col * g.dx;
            double sum = 0.0;
            for (const auto& [x, y] : cloud.points) {
                const double d2 = (px - x) * (px - x) + (py - y) * (py - y);
                sum += std::exp(-d2 * inv2d2);
            }
            g.at(row, col) = scale * sum;
        }
    }
    return g;
}

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
};

// Cells ordered by value then row-major index; direction +1 ascending,
// -1 descending. Plateau ties break by index.
inline std::vector<int> cell_order(const ScalarGrid& g, int direction) {
    std::vector<int> order(g.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = g.values[a] * direction, vb = g.values[b] * direction;
        if (va != vb) return va < vb;
        return a < b;
    });
    return order;
}

}  // namespace detail

// Elder-rule union-find over cells in descending value order, 4-connectivity.
// A component is born at its maximum cell; at a merge the lower-birth
// component dies at the merge level. The global maximum's component is
// emitted as essential with death equal to the grid minimum.
inline PersistenceDiagram superlevel_h0(const ScalarGrid& grid) {
    const int w = grid.width, h = grid.height, n = w * h;
    for (double v : grid.values)
        if (!std::isfinite(v)) throw error("superlevel_h0: non-finite grid value");

    detail::UnionFind uf(n);
    // birth cell of each root; -1 = inactive
    std::vector<int> birth_cell(n, -1);
    PersistenceDiagram pd(0, "superlevel_h0");

    // elder: higher value, ties by smaller index
    auto elder_of = [&](int a, int b) {
        if (grid.values[a] != grid.values[b]) return grid.values[a] > grid.values[b] ? a : b;
        return a < b ? a : b;
    };

    const auto order = detail::cell_order(grid, -1);
    for (int cell : order) {
        birth_cell[cell] = cell;
        const int row = cell / w, col = cell % w;
        const int nbrs[4] = {row > 0 ? cell - w : -1, row < h - 1 ? cell + w : -1,
                             col > 0 ? cell - 1 : -1, col < w - 1 ? cell + 1 : -1};
        for (int nb : nbrs) {
            if (nb < 0 || birth_cell[uf.find(nb)] < 0) continue;
            int ra = uf.find(cell), rb = uf.find(nb);
            if (ra == rb) continue;
            const int ba = birth_cell[ra], bb = birth_cell[rb];
            const int elder = elder_of(ba, bb);
            const int young = elder == ba ? bb : ba;
            // younger component dies at the current level
            pd.add({-grid.values[young], -grid.values[cell], 0, false});
            uf.parent[ra] = rb;
            birth_cell[uf.find(rb)] = elder;
        }
    }

    const int root = uf.find(order.back());
    const double vmax = grid.values[birth_cell[root]];
    const double vmin = grid.values[order.back()];
    pd.add({-vmax, -vmin, 0, true});
    return pd;
}

// Planar duality: a 1-cycle of the superlevel set corresponds to a bounded
// sublevel component of the complement (8-connectivity, boundary cells
// pre-merged into one unbounded component). A dual component born at v and
// merging at w maps to an H1 class alive for levels in (v, w].
inline PersistenceDiagram superlevel_h1(const ScalarGrid& grid) {
    const int w = grid.width, h = grid.height, n = w * h;
    for (double v : grid.values)
        if (!std::isfinite(v)) throw error("superlevel_h1: non-finite grid value");

    // node n is the virtual unbounded component
    detail::UnionFind uf(n + 1);
    std::vector<int> birth_cell(n + 1, -1);
    birth_cell[n] = n;  // active from the start, birth = -infinity
    PersistenceDiagram pd(1, "superlevel_h1");

    auto birth_value = [&](int cell) {
        return cell == n ? -std::numeric_limits<double>::infinity() : grid.values[cell];
    };
    auto elder_of = [&](int a, int b) {
        if (birth_value(a) != birth_value(b)) return birth_value(a) < birth_value(b) ? a : b;
        return a < b ? a : b;
    };

    const auto order = detail::cell_order(grid, +1);
    for (int cell : order) {
        birth_cell[cell] = cell;
        const int row = cell / w, col = cell % w;
        if (row == 0 || row == h - 1 || col == 0 || col == w - 1) {
            // boundary cell joins the unbounded component
            int ra = uf.find(cell), rb = uf.find(n);
            if (ra != rb) {
                const int ba = birth_cell[ra], bb = birth_cell[rb];
                const int young = elder_of(ba, bb) == ba ? bb : ba;
                if (young != n)
                    pd.add({-grid.values[cell], -grid.values[young], 1, false});
                uf.parent[ra] = rb;
                birth_cell[uf.find(rb)] = elder_of(ba, bb);
            }
        }
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int r2 = row + dr, c2 = col + dc;
                if (r2 < 0 || r2 >= h || c2 < 0 || c2 >= w) continue;
                const int nb = r2 * w + c2;
                if (birth_cell[nb] < 0) continue;
                int ra = uf.find(cell), rb = uf.find(nb);
                if (ra == rb) continue;
                const int ba = birth_cell[ra], bb = birth_cell[rb];
                const int elder = elder_of(ba, bb);
                const int young = elder == ba ? bb : ba;
                // young dual component merges at the current cell's value w:
                // H1 class (birth, death) = (w, v) in level coordinates
                pd.add({-grid.values[cell], -grid.values[young], 1, false});
                uf.parent[ra] = rb;
                birth_cell[uf.find(rb)] = elder;
            }
        }
    }
    return pd;
}

// Betti number of the superlevel set A_u = {f >= u} from the diagram:
// finite classes alive iff birth_level >= u > death_level; essential
// classes alive iff birth_level >= u.
inline int betti_at_level(const ScalarGrid& grid, double u, int degree) {
    if (degree != 0 && degree != 1) throw error("betti_at_level: degree must be 0 or 1");
    const PersistenceDiagram pd = degree == 0 ? superlevel_h0(grid) : superlevel_h1(grid);
    int count = 0;
    for (const auto& p : pd.points()) {
        const double b_level = -p.birth, d_level = -p.death;
        if (b_level >= u && (p.essential || u > d_level)) ++count;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Grid and point cloud I/O

inline void write_grid_csv(const ScalarGrid& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path);
    os.precision(17);
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col)
            os << g.at(row, col) << (col + 1 < g.width ? "," : "");
        os << '\n';
    }
}

inline ScalarGrid read_grid_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw parse_error("cannot open " + path);
    ScalarGrid g;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                g.values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw parse_error(path + ":" + std::to_string(lineno) + ": malformed number");
            }
            ++cols;
        }
        if (g.width == 0) g.width = cols;
        else if (cols != g.width)
            throw parse_error(path + ":" + std::to_string(lineno) + ": ragged row");
        ++g.height;
    }
    if (g.width < 2 || g.height < 2) throw parse_error(path + ": grid must be at least 2x2");
    return g;
}

// Binary format: "RSTG", u32 width, u32 height, f64 origin_x, origin_y,
// dx, dy, then width*height little-endian f64 values.
inline void write_grid_binary(const ScalarGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path);
    os.write("RSTG", 4);
    const std::uint32_t wh[2] = {static_cast<std::uint32_t>(g.width),
                                 static_cast<std::uint32_t>(g.height)};
    os.write(reinterpret_cast<const char*>(wh), sizeof wh);
    const double geo[4] = {g.origin_x, g.origin_y, g.dx, g.dy};
    os.write(reinterpret_cast<const char*>(geo), sizeof geo);
    os.write(reinterpret_cast<const char*>(g.values.data()),
             static_cast<std::streamsize>(g.values.size() * sizeof(double)));
}

inline ScalarGrid read_grid_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw parse_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "RSTG") throw parse_error(path + ": bad magic, expected RSTG");
    std::uint32_t wh[2];
    is.read(reinterpret_cast<char*>(wh), sizeof wh);
    ScalarGrid g;
    g.width = static_cast<int>(wh[0]);
    g.height = static_cast<int>(wh[1]);
    double geo[4];
    is.read(reinterpret_cast<char*>(geo), sizeof geo);
    g.origin_x = geo[0];
    g.origin_y = geo[1];
    g.dx = geo[2];
    g.dy = geo[3];
    g.values.resize(static_cast<std::size_t>(g.width) * g.height);
    is.read(reinterpret_cast<char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
    if (!is) throw parse_error(path + ": truncated grid file");
    return g;
}

inline void write_cloud_csv(const PointCloud& cloud, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path);
    os << "x,y\n";
    os.precision(17);
    for (const auto& [x, y] : cloud.points) os << x << ',' << y << '\n';
}

inline PointCloud read_cloud_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw parse_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw parse_error(path + ": empty file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "x,y") throw parse_error(path + ":1: bad header, expected x,y");
    PointCloud cloud;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw parse_error(path + ":" + std::to_string(lineno) + ": expected x,y");
        try {
            cloud.points.emplace_back(std::stod(line.substr(0, comma)),
                                      std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return cloud;
}

}  // namespace rst
