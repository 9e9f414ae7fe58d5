#pragma once

// Image-method ray tracer (specular reflections up to second order) and the
// compact RT feature vector that conditions the neural field.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "thz/geometry.hpp"
#include "thz/scene.hpp"

namespace thz {

/// One multipath component as seen at the receiver.
struct Mpc {
    double power_db = 0.0;  // relative to transmit power, antenna gains included
    double delay_ns = 0.0;
    double az_deg = 0.0;    // arrival azimuth, [0, 360)
    double el_deg = 0.0;    // arrival elevation, [-90, 90]
    int bounce_order = 0;   // 0 = line of sight, -1 = measured (order unknown)
    // Departure direction at the transmitter. Not persisted in CSV.
    double aod_az_deg = 0.0;
    double aod_el_deg = 0.0;

    friend bool operator==(const Mpc&, const Mpc&) = default;
};

/// A traced specular path: the component plus its interaction geometry.
struct TracedPath {
    Mpc mpc;
    double length_m = 0.0;
    std::vector<Vec3> bounce_points;
    std::vector<int> surfaces;  // indices into Scene::surfaces()
};

struct TraceConfig {
    int max_order = 2;
    double frequency_hz = 300e9;
    double power_floor_db = -130.0;
};

/// True iff the open segment a-b passes through the interior of a rack.
/// Touching or grazing a rack face is not blockage; room faces never block.
bool los_blocked(const Scene& scene, Vec3 a, Vec3 b);

/// Open-interior segment test against one box (faces shrunk by 1e-9 m).
bool segment_crosses_interior(const Box& box, Vec3 a, Vec3 b);

std::vector<TracedPath> trace_paths(const Scene& scene, const Node& tx, const Node& rx,
                                    const TraceConfig& cfg = {});

/// Components only, sorted by ascending delay.
std::vector<Mpc> trace(const Scene& scene, const Node& tx, const Node& rx,
                       const TraceConfig& cfg = {});

/// [d, P_LoS, theta_LoS, tau_LoS, phi_LoS, N_paths] plus validity flag.
struct RtFeatures {
    double d_m = 0.0;
    double p_los_db = 0.0;
    double tau_los_ns = 0.0;
    double az_los_deg = 0.0;
    double el_los_deg = 0.0;
    int n_paths = 0;
    bool los_valid = false;

    friend bool operator==(const RtFeatures&, const RtFeatures&) = default;
};

/// LoS fields stay zero when no order-0 path exists; the neural-field module
/// substitutes its fallback before use.
RtFeatures rt_features(const std::vector<Mpc>& paths, const Node& tx, const Node& rx);

/// Copy of a node with an isotropic 0 dBi antenna.
Node with_isotropic_antenna(Node n);

// CSV: tx,rx,bounce_order,power_db,delay_ns,az_deg,el_deg[,calibrated]

struct LinkPaths {
    std::string tx;
    std::string rx;
    std::vector<Mpc> paths;
    std::vector<bool> calibrated;  // empty when the flag column is absent
};

std::string paths_to_csv(const std::vector<LinkPaths>& links, bool with_calibrated_flag = false);
std::vector<LinkPaths> paths_from_csv(const std::string& text, const std::string& what = "paths");
void save_paths_csv(const std::filesystem::path& path, const std::vector<LinkPaths>& links,
                    bool with_calibrated_flag = false);
std::vector<LinkPaths> load_paths_csv(const std::filesystem::path& path);

}  // namespace thz
