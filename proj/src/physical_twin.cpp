#include "thz/physical_twin.hpp"

#include <algorithm>

namespace thz {

int obstacles_crossed(const Scene& scene, Vec3 a, Vec3 b) {
    return static_cast<int>(std::count_if(scene.obstacles().begin(), scene.obstacles().end(),
                                          [&](const Box& box) { return segment_crosses_interior(box, a, b); }));
}

std::vector<Mpc> ground_truth_paths(const Scene& scene, const Node& tx, const Node& rx,
                                    const PhysicalTwinConfig& cfg) {
    const Scene truth = scene.with_material_losses(cfg.true_loss_db);
    std::vector<Mpc> paths = trace(truth, tx, rx, cfg.trace);
    const int crossed = obstacles_crossed(scene, tx.position, rx.position);
    if (crossed > 0) {
        const double d = distance(tx.position, rx.position);
        const Vec3 dep = normalized(rx.position - tx.position);
        const Vec3 arr = -1.0 * dep;
        Mpc m;
        m.power_db = friis_gain_db(d, cfg.trace.frequency_hz) + gain_toward(tx.pattern, tx.boresight, dep) +
                     gain_toward(rx.pattern, rx.boresight, arr) - cfg.scatter_excess_db -
                     cfg.scatter_per_obstacle_db * crossed;
        m.delay_ns = cfg.scatter_delay_factor * d / kSpeedOfLight * 1e9;
        const Direction a = direction_of(arr);
        const Direction dd = direction_of(dep);
        m.az_deg = a.az_deg;
        m.el_deg = a.el_deg;
        m.aod_az_deg = dd.az_deg;
        m.aod_el_deg = dd.el_deg;
        m.bounce_order = kScatterOrder;
        if (m.power_db >= cfg.trace.power_floor_db) paths.push_back(m);
    }
    std::stable_sort(paths.begin(), paths.end(), [](const Mpc& a, const Mpc& b) { return a.delay_ns < b.delay_ns; });
    return paths;
}

}  // namespace thz
