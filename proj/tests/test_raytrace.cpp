#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"
#include "thz/raytrace.hpp"

using namespace thz;
using test::iso_node;

namespace {

Scene room_with_racks(std::mt19937_64& rng, int n_racks) {
    SceneSpec s = test::empty_room_spec(10.0, 8.0, 3.0);
    s.room_faces = {"metal", "glass", "metal", "concrete", "concrete", "concrete"};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n_racks; ++i) {
        const double x = 1.0 + 7.0 * u(rng), y = 1.0 + 5.0 * u(rng);
        s.racks.push_back({"r" + std::to_string(i), {x, y, 0.0}, {x + 0.6 + u(rng), y + 0.6 + u(rng), 1.0 + 1.5 * u(rng)},
                           i % 2 ? "metal" : "glass"});
    }
    return Scene(s);
}

Vec3 free_point(const Scene& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const Vec3 p{0.2 + 9.6 * u(rng), 0.2 + 7.6 * u(rng), 0.2 + 2.6 * u(rng)};
        bool inside = false;
        for (const Box& b : s.obstacles()) {
            Box grown = b;
            grown.min_corner = b.min_corner - Vec3{0.05, 0.05, 0.05};
            grown.max_corner = b.max_corner + Vec3{0.05, 0.05, 0.05};
            inside = inside || grown.contains(p);
        }
        if (!inside) return p;
    }
}

}  // namespace

TEST_SUITE("raytrace") {
    TEST_CASE("free-space line of sight") {
        const Scene s(test::empty_room_spec(20.0, 20.0, 4.0));
        TraceConfig tc;
        tc.max_order = 0;
        const auto one = trace(s, iso_node("t", NodeRole::Tx, {5, 5, 2}), iso_node("r", NodeRole::Rx, {6, 5, 2}), tc);
        REQUIRE(one.size() == 1);
        CHECK(one[0].bounce_order == 0);
        CHECK(one[0].power_db == doctest::Approx(oracle::friis_db(1.0, 300e9)).epsilon(1e-12));
        CHECK(std::abs(one[0].power_db + 81.98) < 0.02);
        CHECK(one[0].delay_ns == doctest::Approx(1.0 / oracle::kC * 1e9).epsilon(1e-12));
        CHECK(one[0].az_deg == doctest::Approx(180.0));  // arrival from -x

        const auto ten = trace(s, iso_node("t", NodeRole::Tx, {5, 5, 2}), iso_node("r", NodeRole::Rx, {15, 5, 2}), tc);
        REQUIRE(ten.size() == 1);
        CHECK(ten[0].delay_ns == doctest::Approx(33.356).epsilon(1e-4));
    }

    TEST_CASE("single reflection off a metal wall") {
        SceneSpec spec = test::empty_room_spec(20.0, 20.0, 20.0);
        spec.room_faces = {"metal", "concrete", "concrete", "concrete", "concrete", "concrete"};
        const Scene s(spec);
        TraceConfig tc;
        tc.max_order = 1;
        const auto paths =
            trace(s, iso_node("t", NodeRole::Tx, {1, 9, 10}), iso_node("r", NodeRole::Rx, {1, 11, 10}), tc);
        int metal = 0;
        for (const Mpc& p : paths) {
            if (p.bounce_order != 1 || std::abs(p.delay_ns - 9.4335) > 0.01) continue;
            ++metal;
            const double len = std::sqrt(8.0);
            CHECK(p.delay_ns == doctest::Approx(len / oracle::kC * 1e9).epsilon(1e-12));
            CHECK(p.power_db == doctest::Approx(oracle::friis_db(len, 300e9) - 2.0).epsilon(1e-12));
        }
        CHECK(metal == 1);
        CHECK(std::is_sorted(paths.begin(), paths.end(),
                             [](const Mpc& a, const Mpc& b) { return a.delay_ns < b.delay_ns; }));
    }

    TEST_CASE("blockage") {
        const Scene empty(test::empty_room_spec(10.0, 8.0, 3.0));
        CHECK_FALSE(los_blocked(empty, {1, 1, 1}, {9, 7, 2}));
        SceneSpec spec = test::empty_room_spec(10.0, 8.0, 3.0);
        spec.racks.push_back({"r", {4, 3, 0}, {6, 5, 2}, "metal"});
        const Scene s(spec);
        CHECK(los_blocked(s, {1, 4, 1}, {9, 4, 1}));
        CHECK_FALSE(los_blocked(s, {1, 5, 1}, {9, 5, 1}));  // along a face
        CHECK_FALSE(los_blocked(s, {1, 4, 2}, {9, 4, 2}));  // along the top
        CHECK_FALSE(los_blocked(s, {1, 4, 2.5}, {9, 4, 2.5}));
        CHECK(los_blocked(s, {5, 4, 2.9}, {5, 4, 0.5}) == true);
    }

    TEST_CASE("rt_features") {
        const Node tx = iso_node("t", NodeRole::Tx, {1, 1, 1}), rx = iso_node("r", NodeRole::Rx, {4, 5, 1});
        const RtFeatures none = rt_features({}, tx, rx);
        CHECK(none.n_paths == 0);
        CHECK_FALSE(none.los_valid);
        CHECK(none.d_m == doctest::Approx(5.0));

        SceneSpec spec = test::empty_room_spec(10.0, 8.0, 3.0);
        const Scene s(spec);
        TraceConfig tc;
        tc.max_order = 1;
        const auto paths = trace(s, tx, rx, tc);
        const RtFeatures f = rt_features(paths, tx, rx);
        CHECK(f.n_paths == static_cast<int>(paths.size()));
        CHECK(f.los_valid);
        const auto los = std::find_if(paths.begin(), paths.end(), [](const Mpc& m) { return m.bounce_order == 0; });
        REQUIRE(los != paths.end());
        CHECK(f.p_los_db == los->power_db);
        CHECK(f.tau_los_ns == los->delay_ns);
        CHECK(f.az_los_deg == los->az_deg);
        CHECK(f.el_los_deg == los->el_deg);
        const RtFeatures only = rt_features({*los}, tx, rx);
        CHECK(only.n_paths == 1);
        CHECK(only.p_los_db == los->power_db);
    }

    TEST_CASE("brute-force image enumeration agrees with the tracer up to first order") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 60; ++trial) {
            const Scene s = room_with_racks(rng, trial % 3);
            const Vec3 a = free_point(s, rng), b = free_point(s, rng);
            TraceConfig tc;
            tc.max_order = trial % 2;
            tc.power_floor_db = -1000.0;
            auto got = trace_paths(s, iso_node("t", NodeRole::Tx, a), iso_node("r", NodeRole::Rx, b), tc);
            auto want = oracle::image_paths_order1(s, a, b);
            if (tc.max_order == 0) {
                want.erase(std::remove_if(want.begin(), want.end(), [](const auto& p) { return p.order > 0; }),
                           want.end());
            }
            REQUIRE(got.size() == want.size());
            std::vector<std::pair<double, int>> g, w;
            for (const auto& p : got) g.emplace_back(p.length_m, p.mpc.bounce_order);
            for (const auto& p : want) w.emplace_back(p.length_m, p.order);
            std::sort(g.begin(), g.end());
            std::sort(w.begin(), w.end());
            for (std::size_t i = 0; i < g.size(); ++i) {
                CHECK(g[i].first == doctest::Approx(w[i].first).epsilon(1e-12));
                CHECK(g[i].second == w[i].second);
            }
        }
    }

    TEST_CASE("reflection points reproduce the unfolded length and obey specular geometry") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 30; ++trial) {
            const Scene s = room_with_racks(rng, 2);
            const Vec3 a = free_point(s, rng), b = free_point(s, rng);
            for (const TracedPath& p : trace_paths(s, iso_node("t", NodeRole::Tx, a), iso_node("r", NodeRole::Rx, b))) {
                REQUIRE(p.bounce_points.size() == static_cast<std::size_t>(p.mpc.bounce_order));
                double len = 0.0;
                Vec3 prev = a;
                for (std::size_t k = 0; k < p.bounce_points.size(); ++k) {
                    const Vec3 q = p.bounce_points[k];
                    const Surface& f = s.surfaces()[static_cast<std::size_t>(p.surfaces[k])];
                    CHECK(std::abs(q[f.axis] - f.coord) < 1e-9);
                    const Vec3 next = k + 1 < p.bounce_points.size() ? p.bounce_points[k + 1] : b;
                    // Angle of incidence equals angle of reflection.
                    const Vec3 in = normalized(q - prev), out = normalized(next - q);
                    CHECK(std::abs(std::abs(in[f.axis]) - std::abs(out[f.axis])) < 1e-9);
                    len += distance(prev, q);
                    prev = q;
                }
                len += distance(prev, b);
                CHECK(std::abs(len - p.length_m) < 1e-9);
                CHECK(p.mpc.delay_ns >= distance(a, b) / oracle::kC * 1e9 - 1e-12);
                CHECK(p.mpc.az_deg >= 0.0);
                CHECK(p.mpc.az_deg < 360.0);
            }
        }
    }

    TEST_CASE("reciprocity") {
        const Scene s = canonical_scene();
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 20; ++trial) {
            const Vec3 a = free_point(s, rng), b = free_point(s, rng);
            const auto fwd = trace(s, iso_node("t", NodeRole::Tx, a), iso_node("r", NodeRole::Rx, b));
            const auto rev = trace(s, iso_node("t", NodeRole::Tx, b), iso_node("r", NodeRole::Rx, a));
            REQUIRE(fwd.size() == rev.size());
            auto key = [](const Mpc& m) { return std::make_tuple(m.bounce_order, m.delay_ns, m.power_db); };
            auto f = fwd, r = rev;
            std::sort(f.begin(), f.end(), [&](const Mpc& x, const Mpc& y) { return key(x) < key(y); });
            std::sort(r.begin(), r.end(), [&](const Mpc& x, const Mpc& y) { return key(x) < key(y); });
            for (std::size_t i = 0; i < f.size(); ++i) {
                CHECK(f[i].bounce_order == r[i].bounce_order);
                CHECK(f[i].delay_ns == doctest::Approx(r[i].delay_ns).epsilon(1e-12));
                CHECK(f[i].power_db == doctest::Approx(r[i].power_db).epsilon(1e-12));
                CHECK(std::abs(wrap180(f[i].az_deg - r[i].aod_az_deg)) < 1e-6);
                CHECK(std::abs(f[i].el_deg - r[i].aod_el_deg) < 1e-6);
            }
        }
    }

    TEST_CASE("line-of-sight power falls with distance") {
        const Scene s(test::empty_room_spec(30.0, 4.0, 4.0));
        TraceConfig tc;
        tc.max_order = 0;
        double prev = 0.0;
        for (double d = 0.5; d < 28.0; d += 0.5) {
            const auto p = trace(s, iso_node("t", NodeRole::Tx, {1, 2, 2}), iso_node("r", NodeRole::Rx, {1 + d, 2, 2}), tc);
            REQUIRE(p.size() == 1);
            CHECK(p[0].power_db < prev);
            prev = p[0].power_db;
        }
    }

    TEST_CASE("antenna gains enter the path power") {
        const Scene s(test::empty_room_spec(20.0, 20.0, 4.0));
        TraceConfig tc;
        tc.max_order = 0;
        Node tx = iso_node("t", NodeRole::Tx, {5, 5, 2});
        tx.pattern = AntennaPattern::measurement_horn();
        const auto aimed = trace(s, tx, iso_node("r", NodeRole::Rx, {8, 5, 2}), tc);
        REQUIRE(aimed.size() == 1);
        CHECK(aimed[0].power_db == doctest::Approx(oracle::friis_db(3.0, 300e9) + 26.0).epsilon(1e-12));
    }

    TEST_CASE("CSV round trip") {
        const Scene s = canonical_scene();
        const auto paths = trace(s, s.node("tx1"), s.node("rx01"));
        const std::vector<LinkPaths> links{{"tx1", "rx01", paths, {}}};
        const auto back = paths_from_csv(paths_to_csv(links));
        REQUIRE(back.size() == 1);
        REQUIRE(back[0].paths.size() == paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) {
            CHECK(back[0].paths[i].delay_ns == doctest::Approx(paths[i].delay_ns).epsilon(1e-8));
            CHECK(back[0].paths[i].bounce_order == paths[i].bounce_order);
        }
    }
}
