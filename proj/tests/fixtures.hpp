#pragma once

#include <filesystem>
#include <string>

#include "thz/scene.hpp"

namespace thz::test {

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("thz_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Room with the default material table and no racks or nodes.
inline SceneSpec empty_room_spec(double x, double y, double z, const std::string& walls = "concrete") {
    SceneSpec s;
    s.name = "empty";
    s.materials = {{"metal", 2.0}, {"glass", 6.0}, {"concrete", 10.0}};
    s.room = {"room", {0.0, 0.0, 0.0}, {x, y, z}, walls};
    return s;
}

inline Node iso_node(const std::string& name, NodeRole role, Vec3 p) {
    Node n;
    n.name = name;
    n.role = role;
    n.position = p;
    n.pattern = AntennaPattern::make_isotropic();
    return n;
}

}  // namespace thz::test
