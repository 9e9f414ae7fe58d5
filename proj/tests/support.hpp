#pragma once

// Independent oracles and fixtures shared by the unit tests and the
// acceptance binary. Nothing here calls into the code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "thz/calib.hpp"
#include "thz/geometry.hpp"
#include "thz/scene.hpp"
#include "thz/sounder.hpp"

namespace thz::oracle {

inline constexpr double kC = 299792458.0;

inline double friis_db(double d_m, double f_hz) {
    const double lambda = kC / f_hz;
    return 20.0 * std::log10(lambda / (4.0 * 3.14159265358979323846 * d_m));
}

// --- assignment -------------------------------------------------------------

struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by measured index
    double cost = 0.0;
};

inline double pair_cost(const Mpc& m, const Mpc& r, const MatchWeights& w) {
    double daz = std::fmod(m.az_deg - r.az_deg, 360.0);
    if (daz > 180.0) daz -= 360.0;
    if (daz < -180.0) daz += 360.0;
    const double dt = m.delay_ns - r.delay_ns;
    const double de = m.el_deg - r.el_deg;
    return w.w_tau * dt * dt + w.w_theta * daz * daz + w.w_phi * de * de;
}

/// Exhaustive search: the maximum-cardinality gated assignment of least total cost.
inline Assignment brute_force_assignment(const std::vector<Mpc>& meas, const std::vector<Mpc>& rt,
                                         const MatchWeights& w) {
    Assignment best;
    std::size_t best_n = 0;
    best.cost = std::numeric_limits<double>::infinity();
    std::vector<int> used(rt.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> cur;
    auto rec = [&](auto&& self, std::size_t i, double cost) -> void {
        if (i == meas.size()) {
            if (cur.size() > best_n || (cur.size() == best_n && cost < best.cost)) {
                best_n = cur.size();
                best.pairs = cur;
                best.cost = cost;
            }
            return;
        }
        self(self, i + 1, cost);
        for (std::size_t k = 0; k < rt.size(); ++k) {
            if (used[k]) continue;
            const double c = pair_cost(meas[i], rt[k], w);
            if (c > w.gate) continue;
            used[k] = 1;
            cur.emplace_back(i, k);
            self(self, i + 1, cost + c);
            cur.pop_back();
            used[k] = 0;
        }
    };
    rec(rec, 0, 0.0);
    if (best_n == 0) best.cost = 0.0;
    return best;
}

// --- link budget --------------------------------------------------------------

struct LinearBudget {
    double pt_dbm, g0_dbi, gi_dbi, gr_dbi, n0_dbm_hz, b_hz, nf_db;
};

/// SINR computed in milliwatts and converted to dB once at the end.
inline double linear_sinr_db(const LinearBudget& b, double k_serving_db, const std::vector<double>& k_interf_db) {
    auto mw = [](double dbm) { return std::pow(10.0, dbm / 10.0); };
    const double s = mw(b.pt_dbm) * mw(b.g0_dbi) * mw(b.gr_dbi) * mw(k_serving_db);
    double i = 0.0;
    for (double k : k_interf_db) i += mw(b.pt_dbm) * mw(b.gi_dbi) * mw(b.gr_dbi) * mw(k);
    const double n = mw(b.n0_dbm_hz) * b.b_hz * mw(b.nf_db);
    return 10.0 * std::log10(s / (i + n));
}

// --- image method -------------------------------------------------------------

/// Strict-interior crossing of the open segment a-b with an axis-aligned box
/// (slab clipping on a box shrunk by tol).
inline bool crosses_box(const Box& box, Vec3 a, Vec3 b, double tol = 1e-9) {
    double t0 = 0.0, t1 = 1.0;
    for (int ax = 0; ax < 3; ++ax) {
        const double lo = box.min_corner[ax] + tol, hi = box.max_corner[ax] - tol;
        const double d = b[ax] - a[ax];
        if (std::abs(d) < 1e-15) {
            if (a[ax] <= lo || a[ax] >= hi) return false;
            continue;
        }
        double ta = (lo - a[ax]) / d, tb = (hi - a[ax]) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return false;
    }
    return t1 - t0 > 1e-12;
}

inline bool blocked(const Scene& s, Vec3 a, Vec3 b) {
    return std::any_of(s.obstacles().begin(), s.obstacles().end(), [&](const Box& r) { return crosses_box(r, a, b); });
}

struct ImagePath {
    int order = 0;
    double length_m = 0.0;
    int surface = -1;
};

/// Order 0 and first-order specular paths by direct enumeration over every
/// surface of the scene.
inline std::vector<ImagePath> image_paths_order1(const Scene& s, Vec3 tx, Vec3 rx) {
    std::vector<ImagePath> out;
    if (!blocked(s, tx, rx)) out.push_back({0, distance(tx, rx), -1});
    for (std::size_t i = 0; i < s.surfaces().size(); ++i) {
        const Surface& f = s.surfaces()[i];
        const double st = f.normal_sign * (tx[f.axis] - f.coord);
        const double sr = f.normal_sign * (rx[f.axis] - f.coord);
        if (st <= 0.0 || sr <= 0.0) continue;
        Vec3 img = tx;
        img[f.axis] = 2.0 * f.coord - tx[f.axis];
        const double t = (f.coord - img[f.axis]) / (rx[f.axis] - img[f.axis]);
        const Vec3 p = img + t * (rx - img);
        const int a1 = (f.axis + 1) % 3, a2 = (f.axis + 2) % 3;
        if (p[a1] < f.lo[0] - 1e-9 || p[a1] > f.hi[0] + 1e-9 || p[a2] < f.lo[1] - 1e-9 || p[a2] > f.hi[1] + 1e-9) {
            continue;
        }
        if (blocked(s, tx, p) || blocked(s, p, rx)) continue;
        out.push_back({1, distance(img, rx), static_cast<int>(i)});
    }
    return out;
}

// --- planted channels ---------------------------------------------------------

struct PlantedScene {
    std::vector<Mpc> paths;
    double noise_db = 0.0;
};

/// 1-5 on-grid paths with pairwise delay separation >= 2 native bins and
/// angular separation >= 2 scan steps; per-sample SNR of the weakest path
/// at boresight >= min_snr_db.
inline PlantedScene plant_paths(std::uint64_t seed, const ScanGrid& g, const FreqGrid& f, double rx_gain_dbi,
                                double min_snr_db = 25.0, double power_span_db = 10.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double bin_ns = 1.0 / ((f.stop_hz - f.start_hz) * 1e-9);
    const double max_delay = 0.9 / (f.step_hz() * 1e-9);
    const int n = 1 + static_cast<int>(rng() % 5);
    const std::size_t naz = g.n_az(), nel = g.n_el();
    PlantedScene sc;
    int guard = 0;
    while (static_cast<int>(sc.paths.size()) < n && guard++ < 10000) {
        Mpc m;
        const std::size_t ai = rng() % naz, ei = rng() % nel;
        m.az_deg = wrap360(g.az(ai));
        m.el_deg = g.el(ei);
        m.delay_ns = 3.0 + u(rng) * (max_delay - 3.0);
        m.power_db = -70.0 + u(rng) * power_span_db;
        bool ok = true;
        for (const Mpc& o : sc.paths) {
            double daz = std::abs(wrap180(m.az_deg - o.az_deg)) / g.az_step;
            double del = std::abs(m.el_deg - o.el_deg) / g.el_step;
            const bool ang = std::max(daz, del) >= 2.0 - 1e-9;
            const bool dly = std::abs(m.delay_ns - o.delay_ns) >= 2.0 * bin_ns;
            if (!(ang && dly)) ok = false;
        }
        if (ok) sc.paths.push_back(m);
    }
    double pmin = 0.0;
    for (const Mpc& m : sc.paths) pmin = std::min(pmin, m.power_db);
    sc.noise_db = pmin + rx_gain_dbi - min_snr_db;
    return sc;
}

}  // namespace thz::oracle
