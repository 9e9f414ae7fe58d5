#pragma once

// Ground truth for the synthetic measurement campaign. The "true" hall
// differs from the nominal ray-tracing model in two ways that calibration and
// the neural field have to absorb: material losses are higher than the
// nominal table, and LoS-blocked links receive a non-specular residual
// (diffraction over rack tops, diffuse scattering) that the tracer does not
// model.

#include <map>
#include <string>
#include <vector>

#include "thz/raytrace.hpp"
#include "thz/scene.hpp"

namespace thz {

/// bounce_order used for the non-specular residual component.
inline constexpr int kScatterOrder = 3;

struct PhysicalTwinConfig {
    std::map<std::string, double> true_loss_db{{"metal", 3.5}, {"glass", 8.0}, {"concrete", 13.0}};
    double scatter_excess_db = 20.0;        // below free space at the direct distance
    double scatter_per_obstacle_db = 4.0;   // per rack crossed by the direct segment
    double scatter_delay_factor = 1.02;     // excess path length of the residual
    TraceConfig trace{2, 300e9, -150.0};
};

/// Number of racks whose interior the segment a-b crosses.
int obstacles_crossed(const Scene& scene, Vec3 a, Vec3 b);

/// True multipath for one link (antenna patterns of the given nodes applied).
std::vector<Mpc> ground_truth_paths(const Scene& scene, const Node& tx, const Node& rx,
                                    const PhysicalTwinConfig& cfg = {});

}  // namespace thz
