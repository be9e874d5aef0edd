#pragma once

// Persistence diagram data model, the PD <-> PPD transform, the delta
// bandwidth rule, and diagram CSV I/O.
//
// All diagrams are stored in increasing-convention coordinates (death >=
// birth). Fields filtered by upper level sets are negated at ingestion so
// that this holds everywhere downstream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rst {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input that failed to open or parse; the CLI maps this to its own exit code.
struct parse_error : error {
    using error::error;
};

struct PersistencePoint {
    double birth = 0.0;
    double death = 0.0;
    int degree = 0;
    bool essential = false;
};

inline double persistence(const PersistencePoint& p) { return p.death - p.birth; }

class PersistenceDiagram {
  public:
    PersistenceDiagram() = default;
    explicit PersistenceDiagram(int degree, std::string source_meta = {})
        : degree_(degree), source_meta_(std::move(source_meta)) {}

    // Zero-persistence points are dropped; death < birth is rejected.
    void add(PersistencePoint p) {
        if (p.degree != degree_)
            throw error("diagram degree mismatch: point has degree " +
                        std::to_string(p.degree) + ", diagram has " +
                        std::to_string(degree_));
        if (!p.essential) {
            if (p.death < p.birth)
                throw error("death < birth in increasing coordinates");
            if (p.death == p.birth) return;
        }
        points_.push_back(p);
    }

    int degree() const { return degree_; }
    const std::string& source_meta() const { return source_meta_; }
    void set_source_meta(std::string m) { source_meta_ = std::move(m); }
    const std::vector<PersistencePoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

    std::size_t finite_count() const {
        std::size_t n = 0;
        for (const auto& p : points_)
            if (!p.essential) ++n;
        return n;
    }

  private:
    int degree_ = 0;
    std::string source_meta_;
    std::vector<PersistencePoint> points_;
};

// A PPD point (x1, x2) = (b, d - b); the modeling domain R x R+.
struct PpdPoint {
    double x1 = 0.0;
    double x2 = 0.0;
};

inline double dist(const PpdPoint& a, const PpdPoint& b) {
    return std::hypot(a.x1 - b.x1, a.x2 - b.x2);
}

struct ProjectedDiagram {
    std::vector<PpdPoint> points;
    std::size_t size() const { return points.size(); }
};

constexpr int kDimUnknown = -1;

struct ModelConfig {
    int K = 2;                 // max cluster-term order
    double delta_star = 1.0;   // tuning parameter delta*
    int data_dim = 2;          // d, or kDimUnknown
    int degree = 0;            // homology degree k of the modeled diagram
    double delta = 0.0;        // resolved interaction distance
};

inline ProjectedDiagram project(const PersistenceDiagram& pd) {
    ProjectedDiagram out;
    out.points.reserve(pd.size());
    for (std::size_t i = 0; i < pd.points().size(); ++i) {
        const auto& p = pd.points()[i];
        if (p.essential)
            throw error("project: essential point at index " + std::to_string(i));
        out.points.push_back({p.birth, p.death - p.birth});
    }
    return out;
}

inline PersistenceDiagram unproject(const ProjectedDiagram& ppd, int degree,
                                    std::string source_meta = {}) {
    PersistenceDiagram pd(degree, std::move(source_meta));
    for (const auto& q : ppd.points) {
        if (q.x2 < 0.0) throw error("unproject: negative x2");
        if (q.x2 == 0.0) continue;
        pd.add({q.x1, q.x1 + q.x2, degree, false});
    }
    return pd;
}

// delta = delta* / N^alpha * max(range(x1), range(x2)), with
// alpha = 1/d for degree 0, k/((k+1)d) for degree k >= 1, and 1/2 when
// the data dimension is unknown.
inline double resolve_delta(const ProjectedDiagram& ppd, int degree, int data_dim,
                            double delta_star) {
    const std::size_t n = ppd.size();
    if (n < 2) throw error("resolve_delta: need at least 2 points");
    if (delta_star <= 0.0) throw error("resolve_delta: delta_star must be > 0");

    double lo1 = ppd.points[0].x1, hi1 = lo1;
    double lo2 = ppd.points[0].x2, hi2 = lo2;
    for (const auto& p : ppd.points) {
        lo1 = std::min(lo1, p.x1); hi1 = std::max(hi1, p.x1);
        lo2 = std::min(lo2, p.x2); hi2 = std::max(hi2, p.x2);
    }
    const double spread = std::max(hi1 - lo1, hi2 - lo2);
    if (spread == 0.0) throw error("resolve_delta: zero spread in both coordinates");

    double alpha;
    if (data_dim == kDimUnknown) alpha = 0.5;
    else if (degree == 0) alpha = 1.0 / data_dim;
    else alpha = static_cast<double>(degree) / ((degree + 1.0) * data_dim);
    return delta_star * std::pow(static_cast<double>(n), -alpha) * spread;
}

// ---------------------------------------------------------------------------
// CSV schema: header "degree,birth,death,essential", one point per row.

inline void write_diagram(const PersistenceDiagram& pd, std::ostream& os) {
    os << "degree,birth,death,essential\n";
    os.precision(17);
    for (const auto& p : pd.points())
        os << p.degree << ',' << p.birth << ',' << p.death << ','
           << (p.essential ? "true" : "false") << '\n';
}

inline void write_diagram(const PersistenceDiagram& pd, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw error("cannot open for writing: " + path);
    write_diagram(pd, os);
}

inline PersistenceDiagram read_diagram(std::istream& is, const std::string& name = "<stream>") {
    std::string line;
    if (!std::getline(is, line)) throw parse_error(name + ": empty file, expected header");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "degree,birth,death,essential")
        throw parse_error(name + ":1: bad header '" + line + "'");

    std::vector<PersistencePoint> pts;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f[4];
        for (int i = 0; i < 4; ++i)
            if (!std::getline(ss, f[i], ','))
                throw parse_error(name + ":" + std::to_string(lineno) + ": expected 4 fields");
        PersistencePoint p;
        try {
            p.degree = std::stoi(f[0]);
            p.birth = std::stod(f[1]);
            p.death = std::stod(f[2]);
        } catch (const std::exception&) {
            throw parse_error(name + ":" + std::to_string(lineno) + ": malformed number");
        }
        if (f[3] == "true") p.essential = true;
        else if (f[3] == "false") p.essential = false;
        else throw parse_error(name + ":" + std::to_string(lineno) + ": essential must be true/false");
        if (!p.essential && p.death < p.birth)
            throw parse_error(name + ":" + std::to_string(lineno) + ": death < birth");
        pts.push_back(p);
    }

    const int degree = pts.empty() ? 0 : pts.front().degree;
    PersistenceDiagram pd(degree, name);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].degree != degree)
            throw parse_error(name + ": mixed degrees in one diagram");
        pd.add(pts[i]);
    }
    return pd;
}

inline PersistenceDiagram read_diagram(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw parse_error("cannot open: " + path);
    return read_diagram(is, path);
}

}  // namespace rst
