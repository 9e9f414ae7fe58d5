#pragma once

// Data-center geometry: room, rack boxes, materials, antennas and nodes.
// A Scene is validated on construction and immutable afterwards.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thz/geometry.hpp"

namespace thz {

struct Material {
    std::string name;
    double reflection_loss_db = 0.0;  // per specular bounce

    friend bool operator==(const Material&, const Material&) = default;
};

struct Box {
    std::string name;
    Vec3 min_corner;
    Vec3 max_corner;
    std::string material;

    bool contains(Vec3 p) const {
        return p.x >= min_corner.x && p.x <= max_corner.x && p.y >= min_corner.y &&
               p.y <= max_corner.y && p.z >= min_corner.z && p.z <= max_corner.z;
    }
    /// Strict interior (boundary excluded).
    bool interior_contains(Vec3 p) const {
        return p.x > min_corner.x && p.x < max_corner.x && p.y > min_corner.y &&
               p.y < max_corner.y && p.z > min_corner.z && p.z < max_corner.z;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Parametric horn: Gaussian main lobe in dB, clamped at a sidelobe floor.
struct AntennaPattern {
    double boresight_gain_dbi = 0.0;
    double hpbw_az_deg = 360.0;
    double hpbw_el_deg = 180.0;
    double sidelobe_floor_db = 0.0;
    bool isotropic = true;

    static AntennaPattern make_isotropic() { return {}; }
    static AntennaPattern horn(double gain_dbi, double hpbw_az, double hpbw_el,
                               double floor_db = -40.0) {
        return {gain_dbi, hpbw_az, hpbw_el, floor_db, false};
    }
    /// 26 dBi, 8 deg x 6 deg horn used by the sounder.
    static AntennaPattern measurement_horn() { return horn(26.0, 8.0, 6.0, -40.0); }

    friend bool operator==(const AntennaPattern&, const AntennaPattern&) = default;
};

/// Gain in dBi at an angular offset (degrees) from boresight.
double antenna_gain(const AntennaPattern& pattern, double d_az_deg, double d_el_deg);

/// Angular offset of `dir` from `boresight` in the antenna's local frame:
/// azimuth in the plane spanned by boresight and the horizontal "right"
/// vector, elevation out of it. Both vectors must be unit length.
Direction local_offset(Vec3 boresight, Vec3 dir);

/// Gain toward a global-frame unit direction.
double gain_toward(const AntennaPattern& pattern, Vec3 boresight, Vec3 dir);

enum class NodeRole { Tx, Rx };

struct Node {
    std::string name;
    NodeRole role = NodeRole::Rx;
    Vec3 position;
    Vec3 boresight{1.0, 0.0, 0.0};
    AntennaPattern pattern;
    std::optional<double> tx_power_dbm;  // transmitters only

    friend bool operator==(const Node&, const Node&) = default;
};

/// A measured Tx-Rx pair of the campaign.
struct Link {
    std::string tx;
    std::string rx;

    friend bool operator==(const Link&, const Link&) = default;
};

/// Planar reflecting face, axis-aligned. Air lies on the `normal_sign` side.
struct Surface {
    int axis = 0;
    double coord = 0.0;
    int normal_sign = 1;
    std::array<double, 2> lo{};  // extents along (axis+1)%3 and (axis+2)%3
    std::array<double, 2> hi{};
    std::size_t material = 0;    // index into Scene::materials()
    int obstacle = -1;           // -1 for room faces
    std::string label;

    Vec3 normal() const {
        Vec3 n;
        n[axis] = static_cast<double>(normal_sign);
        return n;
    }
    /// Signed distance of p from the plane, positive on the air side.
    double side(Vec3 p) const { return normal_sign * (p[axis] - coord); }
    bool face_contains(Vec3 p, double tol = 1e-9) const;
    Vec3 mirror(Vec3 p) const {
        p[axis] = 2.0 * coord - p[axis];
        return p;
    }
};

inline constexpr std::array<const char*, 6> kRoomFaceNames{"x_min", "x_max", "y_min",
                                                           "y_max", "z_min", "z_max"};

struct SceneSpec {
    std::string name;
    std::vector<Material> materials;
    Box room;
    /// Optional per-face material override, indexed like kRoomFaceNames.
    std::array<std::string, 6> room_faces;
    std::vector<Box> racks;
    std::map<std::string, Node> nodes;
    std::vector<Link> links;
    std::string notes;

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

class Scene {
  public:
    /// Validates every invariant; throws ValidationError naming the entity.
    explicit Scene(SceneSpec spec);

    const SceneSpec& spec() const { return spec_; }
    const std::string& name() const { return spec_.name; }
    const Box& room() const { return spec_.room; }
    const std::vector<Material>& materials() const { return spec_.materials; }
    const std::vector<Box>& obstacles() const { return spec_.racks; }
    const std::vector<Surface>& surfaces() const { return surfaces_; }
    const std::map<std::string, Node>& nodes() const { return spec_.nodes; }
    const std::vector<Link>& links() const { return spec_.links; }

    /// Throws ValidationError when the node does not exist.
    const Node& node(const std::string& name) const;
    std::size_t material_index(const std::string& name) const;
    bool inside_obstacle(Vec3 p) const;

    /// Copy with different material losses (used by the physical twin).
    Scene with_material_losses(const std::map<std::string, double>& losses_db) const;

  private:
    SceneSpec spec_;
    std::vector<Surface> surfaces_;
};

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const Scene& scene);

/// Canonical two-row data hall with three transmitters and 29 receivers.
Scene canonical_scene();

}  // namespace thz
