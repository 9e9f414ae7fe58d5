#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"
#include "thz/campaign.hpp"
#include "thz/error.hpp"
#include "thz/inf.hpp"

using namespace thz;

namespace {

Box unit_room() { return {"room", {0, 0, 0}, {10, 8, 3}, "concrete"}; }

InfArch small_arch() {
    InfArch a;
    a.octaves = 2;
    a.hidden = {16, 16};
    return a;
}

Sample sample(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Sample s;
    s.x = {10 * u(rng), 8 * u(rng), 3 * u(rng)};
    s.rt = {1 + 9 * u(rng), -70 - 30 * u(rng), 5 + 30 * u(rng), 360 * u(rng), -30 + 60 * u(rng),
            static_cast<int>(rng() % 12), u(rng) < 0.7};
    s.target_p_db = -70 - 30 * u(rng);
    s.target_tau_ns = 5 + 30 * u(rng);
    s.target_az_deg = 360 * u(rng);
    s.target_el_deg = -30 + 60 * u(rng);
    return s;
}

std::vector<Sample> samples(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::vector<Sample> v;
    for (int i = 0; i < n; ++i) v.push_back(sample(rng));
    return v;
}

// Canonical-scene model shared by the prediction tests.
struct Trained {
    Scene scene = canonical_scene();
    CampaignResult campaign;
    std::vector<Sample> data;
    InfModel model;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained x;
        x.campaign = run_campaign(x.scene, CampaignConfig{});
        x.data = build_dataset(x.scene, x.campaign.offsets, *x.campaign.abg.nlos, DatasetConfig{});
        TrainConfig tc;
        tc.epochs = 800;
        x.model = train(x.data, x.scene.room(), tc).model;
        x.model.nlos_fallback = *x.campaign.abg.nlos;
        x.model.calibration = x.campaign.offsets;
        return x;
    }();
    return t;
}

}  // namespace

TEST_SUITE("inf") {
    TEST_CASE("normalization") {
        std::vector<Sample> two(2);
        two[0].target_p_db = 0.0;
        two[1].target_p_db = 2.0;
        two[0].target_tau_ns = 1.0;
        two[1].target_tau_ns = 3.0;
        two[0].target_az_deg = 180.0;
        NormStats st;
        const auto n = normalize(two, st);
        CHECK(n[0].p == doctest::Approx(-1.0));
        CHECK(n[1].p == doctest::Approx(1.0));
        CHECK(n[0].az == 0.5);

        const auto many = samples(1, 50);
        const auto nm = normalize(many, st);
        double mp = 0, mt = 0, vp = 0, vt = 0;
        for (const auto& t : nm) {
            mp += t.p;
            mt += t.tau;
        }
        for (const auto& t : nm) {
            vp += (t.p - mp / 50) * (t.p - mp / 50);
            vt += (t.tau - mt / 50) * (t.tau - mt / 50);
        }
        CHECK(std::abs(mp / 50) < 1e-9);
        CHECK(std::abs(mt / 50) < 1e-9);
        CHECK(std::sqrt(vp / 50) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::sqrt(vt / 50) == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t i = 0; i < many.size(); ++i) {
            const NormTargets back = denormalize(nm[i], st);
            CHECK(std::abs(back.p - many[i].target_p_db) < 1e-12 * std::abs(many[i].target_p_db));
            CHECK(std::abs(back.tau - many[i].target_tau_ns) < 1e-12 * many[i].target_tau_ns);
            CHECK(std::abs(back.az - many[i].target_az_deg) < 1e-12 * (many[i].target_az_deg + 1.0));
            CHECK(std::abs(back.el - many[i].target_el_deg) < 1e-12 * (std::abs(many[i].target_el_deg) + 1.0));
        }
        std::vector<Sample> flat(3);
        CHECK_THROWS_AS(compute_norm_stats(flat), ValidationError);
        CHECK_THROWS_AS(compute_norm_stats({many[0]}), ValidationError);
    }

    TEST_CASE("encoded input layout") {
        CHECK(input_dim(InfArch{}) == 46);
        const InfModel m(InfArch{}, unit_room(), NormStats{}, 1);
        CHECK(encode_input(m, {5, 4, 1.5}, RtFeatures{}).size() == 46u);
        const auto e = encode_input(m, {10, 8, 3}, RtFeatures{});
        CHECK(e[0] == doctest::Approx(1.0));
        CHECK(e[13] == doctest::Approx(1.0));
        CHECK(e[26] == doctest::Approx(1.0));
        InfModel ablated = m;
        ablated.ablate_rt = true;
        const auto z = encode_input(ablated, {5, 4, 1.5}, RtFeatures{5, -80, 10, 90, 0, 3, true});
        for (int i = 39; i < 46; ++i) CHECK(z[static_cast<std::size_t>(i)] == 0.0);
    }

    TEST_CASE("zero head outputs the normalization means") {
        const NormStats st{-80.0, 10.0, 20.0, 5.0};
        const InfModel m(InfArch{}, unit_room(), st, 3);
        const auto o = forward(m, {2, 3, 1}, RtFeatures{4, -85, 13, 120, -10, 5, true});
        CHECK(o.p == -80.0);
        CHECK(o.tau == 20.0);
        CHECK(o.az == 0.0);
        CHECK(o.el == 0.0);
    }

    TEST_CASE("seeded model output is frozen") {
        const InfModel m(small_arch(), unit_room(), NormStats{-80.0, 10.0, 20.0, 5.0}, 42, true);
        const RtFeatures rt{4.0, -85.0, 13.3, 120.0, -10.0, 5, true};
        const auto o = forward(m, {3.0, 4.0, 1.5}, rt);
        CHECK(o.p == doctest::Approx(-81.452366458458812).epsilon(1e-12));
        CHECK(o.tau == doctest::Approx(20.402418704171946).epsilon(1e-12));
        CHECK(o.az == doctest::Approx(322.71722666214413).epsilon(1e-12));
        CHECK(o.el == doctest::Approx(25.731363270934573).epsilon(1e-12));
        const auto again = forward(m, {3.0, 4.0, 1.5}, rt);
        CHECK(again.p == o.p);
        CHECK(again.el == o.el);
    }

    TEST_CASE("fallback features") {
        const Node tx = test::iso_node("t", NodeRole::Tx, {0, 0, 2});
        AbgModel abg{30.0, 70.0, "nlos", 5};
        const RtFeatures f = fallback_features({10, 0, 2}, tx, abg);
        CHECK(f.p_los_db == doctest::Approx(-100.0));
        CHECK_FALSE(f.los_valid);
        CHECK(f.n_paths == 0);
        CHECK(f.az_los_deg == doctest::Approx(180.0));
        CHECK(fallback_features({1, 0, 2}, tx, abg).p_los_db == doctest::Approx(-70.0));
        CHECK(fallback_features({3, 0, 2}, tx, abg).tau_los_ns == doctest::Approx(10.007).epsilon(1e-4));

        RtFeatures traced{10, 0, 0, 0, 0, 4, false};
        const RtFeatures c = condition_features(traced, {10, 0, 2}, tx, abg);
        CHECK(c.p_los_db == doctest::Approx(-100.0));
        CHECK(c.n_paths == 4);
        RtFeatures los{10, -90, 33, 180, 0, 4, true};
        CHECK(condition_features(los, {10, 0, 2}, tx, abg) == los);
    }

    TEST_CASE("gradient check across seeds") {
        const auto data = samples(2, 20);
        const NormStats st = compute_norm_stats(data);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const InfModel m(small_arch(), unit_room(), st, seed, true);
            CHECK(grad_check(m, data[seed]) < 1e-4);
        }
    }

    TEST_CASE("gradient vanishes at a perfect fit") {
        const auto data = samples(3, 10);
        const NormStats st = compute_norm_stats(data);
        const InfModel m(small_arch(), unit_room(), st, 5);
        Sample s = data[0];
        s.target_p_db = st.p_mean;
        s.target_tau_ns = st.tau_mean;
        s.target_az_deg = 0.0;
        s.target_el_deg = 0.0;
        std::vector<double> g(m.params().size(), 0.0);
        CHECK(accumulate_gradient(m, s, g) == 0.0);
        double norm2 = 0.0;
        for (double v : g) norm2 += v * v;
        CHECK(std::sqrt(norm2) < 1e-10);
    }

    TEST_CASE("a corrupted backward pass is caught") {
        const auto data = samples(4, 10);
        const InfModel m(small_arch(), unit_room(), compute_norm_stats(data), 9, true);
        CHECK(grad_check(m, data[1], 1e-5, BackwardFault::DropSiluCurvature) > 1e-2);
    }

    TEST_CASE("training already at the optimum stays there") {
        auto data = samples(5, 30);
        const NormStats st = compute_norm_stats(data);
        for (auto& s : data) {
            s.target_p_db = st.p_mean;
            s.target_tau_ns = st.tau_mean;
            s.target_az_deg = 0.0;
            s.target_el_deg = 0.0;
        }
        TrainConfig tc;
        tc.epochs = 3;
        tc.arch = small_arch();
        const InfModel init(tc.arch, unit_room(), st, 1);
        const auto r = train(init, data, tc);
        CHECK(r.loss_history.front() < 1e-20);
    }

    TEST_CASE("training is deterministic and reduces the loss") {
        const auto data = samples(6, 60);
        TrainConfig tc;
        tc.epochs = 150;
        tc.arch = small_arch();
        const auto a = train(data, unit_room(), tc);
        const auto b = train(data, unit_room(), tc);
        CHECK(a.loss_history == b.loss_history);
        CHECK(a.model.params() == b.model.params());
        CHECK(a.loss_history.back() < a.loss_history.front());
    }

    TEST_CASE("last-layer-only gradient descent never increases the loss") {
        const auto data = samples(7, 40);
        TrainConfig tc;
        tc.arch = small_arch();
        tc.optimizer = Optimizer::Sgd;
        tc.head_only = true;
        tc.batch_size = 0;
        tc.learning_rate = 1e-3;
        tc.epochs = 200;
        const InfModel init(tc.arch, unit_room(), compute_norm_stats(data), 2, true);
        const auto r = train(init, data, tc);
        for (std::size_t i = 1; i < r.loss_history.size(); ++i) {
            CHECK(r.loss_history[i] <= r.loss_history[i - 1]);
        }
        CHECK(r.loss_history.back() < r.loss_history.front());
        // Hidden layers stay frozen.
        for (std::size_t i = 0; i < init.head_offset(); ++i) REQUIRE(r.model.params()[i] == init.params()[i]);
    }

    TEST_CASE("configuration errors") {
        TrainConfig tc;
        tc.learning_rate = -1.0;
        CHECK_THROWS_AS(tc.validate(), ValidationError);
        tc = {};
        tc.epochs = 1;
        tc.learning_rate = 1e12;
        tc.arch = small_arch();
        tc.optimizer = Optimizer::Sgd;
        tc.batch_size = 0;
        const auto data = samples(8, 20);
        const InfModel init(tc.arch, unit_room(), compute_norm_stats(data), 1, true);
        tc.epochs = 50;
        CHECK_THROWS_AS(train(init, data, tc), NumericalError);
        CHECK_THROWS_AS(split_dataset(data, 1.0, 1), ValidationError);
    }

    TEST_CASE("dataset split and serialization") {
        const auto data = samples(9, 50);
        const auto [tr, ho] = split_dataset(data, 0.2, 7);
        CHECK(tr.size() == 40);
        CHECK(ho.size() == 10);
        const auto [tr2, ho2] = split_dataset(data, 0.2, 7);
        CHECK(ho2.size() == ho.size());
        for (std::size_t i = 0; i < ho.size(); ++i) CHECK(ho[i].x == ho2[i].x);

        const auto back = samples_from_csv(samples_to_csv(data), "t");
        REQUIRE(back.size() == data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(back[i].target_p_db == doctest::Approx(data[i].target_p_db).epsilon(1e-8));
            CHECK(back[i].rt.n_paths == data[i].rt.n_paths);
            CHECK(back[i].rt.los_valid == data[i].rt.los_valid);
        }
    }

    TEST_CASE("model files reproduce predictions exactly") {
        const auto data = samples(10, 30);
        TrainConfig tc;
        tc.epochs = 20;
        tc.arch = small_arch();
        InfModel m = train(data, unit_room(), tc).model;
        m.nlos_fallback = {21.0, 100.0, "nlos", 4};
        m.calibration.add(0, -0.5);
        const auto dir = test::temp_dir("model");
        save_model(m, dir / "model.json");
        const InfModel back = load_model(dir / "model.json");
        CHECK(back.params() == m.params());
        CHECK(back.arch() == m.arch());
        CHECK(back.nlos_fallback.alpha == 21.0);
        CHECK(*back.calibration.order_mean(0) == -0.5);
        for (const auto& s : data) {
            const auto a = forward(m, s.x, s.rt), b = forward(back, s.x, s.rt);
            CHECK(a.p == b.p);
            CHECK(a.az == b.az);
        }
        CHECK_THROWS_AS(load_model(dir / "missing.json"), IoError);
    }

    TEST_CASE("canonical dataset composition") {
        const Trained& t = trained();
        CHECK(t.data.size() == 200);
        int blocked = 0;
        for (const auto& s : t.data) blocked += s.rt.n_paths == 0;
        CHECK(blocked >= 60);
    }

    TEST_CASE("predictions at measured anchors") {
        const Trained& t = trained();
        for (const Link& l : t.scene.links()) {
            const Node& rx = t.scene.node(l.rx);
            const ChannelAttr a = predict(t.model, t.scene, t.scene.node(l.tx), rx.position);
            Node iso = with_isotropic_antenna(rx);
            const auto target = channel_targets(
                ground_truth_paths(t.scene, with_isotropic_antenna(t.scene.node(l.tx)), iso));
            REQUIRE(target.has_value());
            CHECK(std::abs(a.p_db - target->p) <= 3.0);
            CHECK(predict(t.model, t.scene, t.scene.node(l.tx), rx.position) == a);
        }
    }

    TEST_CASE("fully blocked positions go through the fallback") {
        const Trained& t = trained();
        const Node& tx = t.scene.node("tx1");
        int found = 0;
        for (double x = 0.25; x < 10.0 && found < 5; x += 0.5) {
            for (double y = 0.25; y < 8.0 && found < 5; y += 0.5) {
                const Vec3 p{x, y, 0.3};
                if (t.scene.inside_obstacle(p)) continue;
                if (!trace(t.scene, with_isotropic_antenna(tx), test::iso_node("p", NodeRole::Rx, p)).empty()) continue;
                const ChannelAttr a = predict(t.model, t.scene, tx, p);
                CHECK(a.used_fallback);
                CHECK_FALSE(a.los);
                CHECK(std::isfinite(a.p_db));
                CHECK(std::isfinite(a.tau_ns));
                ++found;
            }
        }
        CHECK(found > 0);
    }
}
