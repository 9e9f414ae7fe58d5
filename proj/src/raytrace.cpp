#include "thz/raytrace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "thz/error.hpp"
#include "thz/io.hpp"

namespace thz {

namespace {

constexpr double kEps = 1e-9;

}  // namespace

bool segment_crosses_interior(const Box& box, Vec3 a, Vec3 b) {
    const Vec3 d = b - a;
    double t0 = 0.0;
    double t1 = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double lo = box.min_corner[axis] + kEps;
        const double hi = box.max_corner[axis] - kEps;
        if (std::abs(d[axis]) < 1e-15) {
            if (a[axis] <= lo || a[axis] >= hi) return false;
            continue;
        }
        double ta = (lo - a[axis]) / d[axis];
        double tb = (hi - a[axis]) / d[axis];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return false;
    }
    return true;
}

namespace {

/// Point where segment p->q crosses the surface plane; false when it does not
/// cross strictly between the endpoints.
bool plane_crossing(const Surface& s, Vec3 p, Vec3 q, Vec3& out) {
    const double dp = q[s.axis] - p[s.axis];
    if (std::abs(dp) < 1e-15) return false;
    const double t = (s.coord - p[s.axis]) / dp;
    if (t <= kEps || t >= 1.0 - kEps) return false;
    out = p + t * (q - p);
    out[s.axis] = s.coord;
    return true;
}

Mpc make_mpc(const Scene& scene, const Node& tx, const Node& rx, const std::vector<Vec3>& pts,
             const std::vector<int>& surfs, double length, const TraceConfig& cfg) {
    const Vec3 first = pts.empty() ? rx.position : pts.front();
    const Vec3 last = pts.empty() ? tx.position : pts.back();
    const Vec3 dep = normalized(first - tx.position);
    const Vec3 arr = normalized(last - rx.position);
    double loss = 0.0;
    for (int s : surfs) {
        loss += scene.materials()[scene.surfaces()[static_cast<std::size_t>(s)].material].reflection_loss_db;
    }
    Mpc m;
    m.power_db = friis_gain_db(length, cfg.frequency_hz) + gain_toward(tx.pattern, tx.boresight, dep) +
                 gain_toward(rx.pattern, rx.boresight, arr) - loss;
    m.delay_ns = length / kSpeedOfLight * 1e9;
    const Direction a = direction_of(arr);
    const Direction d = direction_of(dep);
    m.az_deg = a.az_deg;
    m.el_deg = a.el_deg;
    m.aod_az_deg = d.az_deg;
    m.aod_el_deg = d.el_deg;
    m.bounce_order = static_cast<int>(surfs.size());
    return m;
}

}  // namespace

bool los_blocked(const Scene& scene, Vec3 a, Vec3 b) {
    return std::any_of(scene.obstacles().begin(), scene.obstacles().end(),
                       [&](const Box& box) { return segment_crosses_interior(box, a, b); });
}

std::vector<TracedPath> trace_paths(const Scene& scene, const Node& tx, const Node& rx,
                                    const TraceConfig& cfg) {
    if (cfg.max_order < 0 || cfg.max_order > 2) {
        throw ValidationError("trace: max_order must be 0, 1 or 2");
    }
    std::vector<TracedPath> out;
    const Vec3 t = tx.position;
    const Vec3 r = rx.position;
    auto emit = [&](std::vector<Vec3> pts, std::vector<int> surfs, double length) {
        TracedPath p;
        p.mpc = make_mpc(scene, tx, rx, pts, surfs, length, cfg);
        if (p.mpc.power_db < cfg.power_floor_db) return;
        p.length_m = length;
        p.bounce_points = std::move(pts);
        p.surfaces = std::move(surfs);
        out.push_back(std::move(p));
    };

    if (!los_blocked(scene, t, r)) emit({}, {}, distance(t, r));

    const auto& surfaces = scene.surfaces();
    const int n = static_cast<int>(surfaces.size());
    if (cfg.max_order >= 1) {
        for (int i = 0; i < n; ++i) {
            const Surface& s = surfaces[static_cast<std::size_t>(i)];
            if (s.side(t) <= kEps || s.side(r) <= kEps) continue;
            const Vec3 img = s.mirror(t);
            Vec3 p;
            if (!plane_crossing(s, img, r, p) || !s.face_contains(p)) continue;
            if (los_blocked(scene, t, p) || los_blocked(scene, p, r)) continue;
            emit({p}, {i}, distance(img, r));
        }
    }
    if (cfg.max_order >= 2) {
        for (int i = 0; i < n; ++i) {
            const Surface& s1 = surfaces[static_cast<std::size_t>(i)];
            if (s1.side(t) <= kEps) continue;
            const Vec3 img1 = s1.mirror(t);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const Surface& s2 = surfaces[static_cast<std::size_t>(j)];
                if (s2.side(r) <= kEps) continue;
                const Vec3 img2 = s2.mirror(img1);
                Vec3 p2;
                if (!plane_crossing(s2, img2, r, p2) || !s2.face_contains(p2)) continue;
                if (s1.side(p2) <= kEps) continue;
                Vec3 p1;
                if (!plane_crossing(s1, img1, p2, p1) || !s1.face_contains(p1)) continue;
                if (s2.side(p1) <= kEps) continue;
                if (los_blocked(scene, t, p1) || los_blocked(scene, p1, p2) || los_blocked(scene, p2, r)) {
                    continue;
                }
                emit({p1, p2}, {i, j}, distance(img2, r));
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const TracedPath& a, const TracedPath& b) {
        return std::tie(a.mpc.delay_ns, a.mpc.bounce_order, a.surfaces) <
               std::tie(b.mpc.delay_ns, b.mpc.bounce_order, b.surfaces);
    });
    return out;
}

std::vector<Mpc> trace(const Scene& scene, const Node& tx, const Node& rx, const TraceConfig& cfg) {
    std::vector<Mpc> out;
    for (auto& p : trace_paths(scene, tx, rx, cfg)) out.push_back(p.mpc);
    return out;
}

RtFeatures rt_features(const std::vector<Mpc>& paths, const Node& tx, const Node& rx) {
    RtFeatures f;
    f.d_m = distance(tx.position, rx.position);
    f.n_paths = static_cast<int>(paths.size());
    for (const Mpc& m : paths) {
        if (m.bounce_order == 0) {
            f.los_valid = true;
            f.p_los_db = m.power_db;
            f.tau_los_ns = m.delay_ns;
            f.az_los_deg = m.az_deg;
            f.el_los_deg = m.el_deg;
            break;
        }
    }
    return f;
}

Node with_isotropic_antenna(Node n) {
    n.pattern = AntennaPattern::make_isotropic();
    return n;
}

// ---------------------------------------------------------------------------

std::string paths_to_csv(const std::vector<LinkPaths>& links, bool with_flag) {
    std::string out = "tx,rx,bounce_order,power_db,delay_ns,az_deg,el_deg";
    out += with_flag ? ",calibrated\n" : "\n";
    for (const auto& l : links) {
        for (std::size_t i = 0; i < l.paths.size(); ++i) {
            const Mpc& m = l.paths[i];
            out += l.tx + "," + l.rx + "," + std::to_string(m.bounce_order) + "," + fmt_num(m.power_db) +
                   "," + fmt_num(m.delay_ns) + "," + fmt_num(m.az_deg) + "," + fmt_num(m.el_deg);
            if (with_flag) {
                const bool c = i < l.calibrated.size() && l.calibrated[i];
                out += c ? ",1" : ",0";
            }
            out += "\n";
        }
    }
    return out;
}

std::vector<LinkPaths> paths_from_csv(const std::string& text, const std::string& what) {
    const CsvTable t = parse_csv(text, what);
    const std::size_t ctx = t.column("tx"), crx = t.column("rx"), cord = t.column("bounce_order"),
                      cp = t.column("power_db"), cd = t.column("delay_ns"), caz = t.column("az_deg"),
                      cel = t.column("el_deg");
    std::size_t ccal = t.header.size();
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == "calibrated") ccal = i;
    }
    std::vector<LinkPaths> out;
    for (const auto& row : t.rows) {
        if (out.empty() || out.back().tx != row[ctx] || out.back().rx != row[crx]) {
            out.push_back({row[ctx], row[crx], {}, {}});
        }
        Mpc m;
        m.bounce_order = static_cast<int>(parse_int(row[cord], what));
        m.power_db = parse_double(row[cp], what);
        m.delay_ns = parse_double(row[cd], what);
        m.az_deg = parse_double(row[caz], what);
        m.el_deg = parse_double(row[cel], what);
        out.back().paths.push_back(m);
        if (ccal < t.header.size()) out.back().calibrated.push_back(row[ccal] == "1");
    }
    return out;
}

void save_paths_csv(const std::filesystem::path& path, const std::vector<LinkPaths>& links, bool flag) {
    write_text_atomic(path, paths_to_csv(links, flag));
}

std::vector<LinkPaths> load_paths_csv(const std::filesystem::path& path) {
    return paths_from_csv(read_text_file(path), path.string());
}

}  // namespace thz
