#include "thz/scene.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"

namespace thz {

using nlohmann::json;

double antenna_gain(const AntennaPattern& p, double d_az_deg, double d_el_deg) {
    if (p.isotropic) return p.boresight_gain_dbi;
    const double a = d_az_deg / p.hpbw_az_deg;
    const double e = d_el_deg / p.hpbw_el_deg;
    const double g = p.boresight_gain_dbi - 12.0 * (a * a + e * e);
    return std::max(g, p.boresight_gain_dbi + p.sidelobe_floor_db);
}

Direction local_offset(Vec3 boresight, Vec3 dir) {
    const Vec3 up{0.0, 0.0, 1.0};
    Vec3 left = cross(up, boresight);
    if (norm(left) < 1e-12) left = cross(boresight, Vec3{1.0, 0.0, 0.0});
    left = normalized(left);
    const Vec3 local_up = cross(boresight, left);
    const double f = dot(dir, boresight);
    const double l = dot(dir, left);
    const double u = std::clamp(dot(dir, local_up), -1.0, 1.0);
    return {rad2deg(std::atan2(l, f)), rad2deg(std::asin(u))};
}

double gain_toward(const AntennaPattern& pattern, Vec3 boresight, Vec3 dir) {
    if (pattern.isotropic) return pattern.boresight_gain_dbi;
    const Direction off = local_offset(boresight, dir);
    return antenna_gain(pattern, off.az_deg, off.el_deg);
}

bool Surface::face_contains(Vec3 p, double tol) const {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    return p[u] >= lo[0] - tol && p[u] <= hi[0] + tol && p[v] >= lo[1] - tol &&
           p[v] <= hi[1] + tol;
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

std::string vec_str(Vec3 v) {
    std::ostringstream os;
    os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
    return os.str();
}

void add_box_faces(const Box& box, std::size_t material, int obstacle, bool inward,
                   const std::array<std::size_t, 6>& face_materials,
                   std::vector<Surface>& out) {
    for (int axis = 0; axis < 3; ++axis) {
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            Surface s;
            s.axis = axis;
            s.coord = side == 0 ? box.min_corner[axis] : box.max_corner[axis];
            // Room faces look into the box, obstacle faces look out of it.
            const int outward = side == 0 ? -1 : 1;
            s.normal_sign = inward ? -outward : outward;
            s.lo = {box.min_corner[u], box.min_corner[v]};
            s.hi = {box.max_corner[u], box.max_corner[v]};
            const int face = axis * 2 + side;
            s.material = inward ? face_materials[face] : material;
            s.obstacle = obstacle;
            s.label = box.name + "." + kRoomFaceNames[face];
            out.push_back(std::move(s));
        }
    }
}

}  // namespace

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {
    std::set<std::string> names;
    for (const auto& m : spec_.materials) {
        require(!m.name.empty(), "material with empty name");
        require(names.insert(m.name).second, "material '" + m.name + "': duplicate name");
        require(m.reflection_loss_db >= 0.0 && std::isfinite(m.reflection_loss_db),
                "material '" + m.name + "': reflection_loss_db must be >= 0");
    }

    auto check_box = [&](const Box& b) {
        for (int a = 0; a < 3; ++a) {
            require(b.min_corner[a] < b.max_corner[a],
                    "box '" + b.name + "': min_corner " + vec_str(b.min_corner) +
                        " not below max_corner " + vec_str(b.max_corner));
        }
        material_index(b.material);
    };

    if (spec_.room.name.empty()) spec_.room.name = "room";
    check_box(spec_.room);
    std::array<std::size_t, 6> face_materials{};
    for (std::size_t f = 0; f < 6; ++f) {
        const std::string& m = spec_.room_faces[f].empty() ? spec_.room.material : spec_.room_faces[f];
        face_materials[f] = material_index(m);
    }

    std::set<std::string> rack_names;
    for (std::size_t i = 0; i < spec_.racks.size(); ++i) {
        Box& r = spec_.racks[i];
        if (r.name.empty()) r.name = "rack" + std::to_string(i);
        require(rack_names.insert(r.name).second, "rack '" + r.name + "': duplicate name");
        check_box(r);
        require(spec_.room.contains(r.min_corner) && spec_.room.contains(r.max_corner),
                "rack '" + r.name + "': not contained in room");
    }

    for (auto& [key, n] : spec_.nodes) {
        if (n.name.empty()) n.name = key;
        require(n.name == key, "node '" + key + "': name field does not match key");
        require(spec_.room.contains(n.position),
                "node '" + key + "': position " + vec_str(n.position) + " outside room");
        require(std::abs(norm(n.boresight) - 1.0) <= 1e-9,
                "node '" + key + "': boresight is not unit length");
        const AntennaPattern& p = n.pattern;
        if (!p.isotropic) {
            require(p.hpbw_az_deg > 0.0 && p.hpbw_az_deg < 180.0 && p.hpbw_el_deg > 0.0 &&
                        p.hpbw_el_deg < 180.0,
                    "node '" + key + "': half-power beamwidths must lie in (0, 180) deg");
            require(p.sidelobe_floor_db < 0.0, "node '" + key + "': sidelobe_floor_db must be < 0");
        }
        require(std::isfinite(p.boresight_gain_dbi), "node '" + key + "': non-finite gain");
        if (n.role == NodeRole::Rx) {
            require(!n.tx_power_dbm.has_value(), "node '" + key + "': receivers carry no tx_power_dbm");
        }
    }
    for (const auto& l : spec_.links) {
        auto tx = spec_.nodes.find(l.tx);
        auto rx = spec_.nodes.find(l.rx);
        require(tx != spec_.nodes.end() && tx->second.role == NodeRole::Tx,
                "link " + l.tx + "->" + l.rx + ": unknown transmitter");
        require(rx != spec_.nodes.end(), "link " + l.tx + "->" + l.rx + ": unknown receiver");
    }

    add_box_faces(spec_.room, 0, -1, true, face_materials, surfaces_);
    for (std::size_t i = 0; i < spec_.racks.size(); ++i) {
        add_box_faces(spec_.racks[i], material_index(spec_.racks[i].material), static_cast<int>(i),
                      false, face_materials, surfaces_);
    }
}

const Node& Scene::node(const std::string& name) const {
    auto it = spec_.nodes.find(name);
    if (it == spec_.nodes.end()) throw ValidationError("unknown node '" + name + "'");
    return it->second;
}

std::size_t Scene::material_index(const std::string& name) const {
    for (std::size_t i = 0; i < spec_.materials.size(); ++i) {
        if (spec_.materials[i].name == name) return i;
    }
    throw ValidationError("unknown material '" + name + "'");
}

bool Scene::inside_obstacle(Vec3 p) const {
    return std::any_of(spec_.racks.begin(), spec_.racks.end(),
                       [&](const Box& b) { return b.interior_contains(p); });
}

Scene Scene::with_material_losses(const std::map<std::string, double>& losses_db) const {
    SceneSpec s = spec_;
    for (auto& m : s.materials) {
        if (auto it = losses_db.find(m.name); it != losses_db.end()) m.reflection_loss_db = it->second;
    }
    return Scene(std::move(s));
}

// ---------------------------------------------------------------------------
// JSON schema

namespace {

Vec3 read_vec3(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json write_vec3(Vec3 v) { return json::array({v.x, v.y, v.z}); }

AntennaPattern read_pattern(const json& j, const std::string& what) {
    if (j.is_string()) {
        if (j.get<std::string>() == "isotropic") return AntennaPattern::make_isotropic();
        throw ParseError(what + ": unknown pattern '" + j.get<std::string>() + "'");
    }
    return AntennaPattern::horn(j.at("boresight_gain_dbi").get<double>(),
                                j.at("hpbw_az_deg").get<double>(), j.at("hpbw_el_deg").get<double>(),
                                j.value("sidelobe_floor_db", -40.0));
}

json write_pattern(const AntennaPattern& p) {
    if (p.isotropic && p.boresight_gain_dbi == 0.0) return "isotropic";
    return {{"boresight_gain_dbi", p.boresight_gain_dbi},
            {"hpbw_az_deg", p.hpbw_az_deg},
            {"hpbw_el_deg", p.hpbw_el_deg},
            {"sidelobe_floor_db", p.sidelobe_floor_db}};
}

Box read_box(const json& j, const std::string& fallback_name) {
    Box b;
    b.name = j.value("name", fallback_name);
    b.min_corner = read_vec3(j.at("min"), b.name + ".min");
    b.max_corner = read_vec3(j.at("max"), b.name + ".max");
    b.material = j.at("material").get<std::string>();
    return b;
}

json write_box(const Box& b) {
    return {{"name", b.name}, {"min", write_vec3(b.min_corner)}, {"max", write_vec3(b.max_corner)},
            {"material", b.material}};
}

}  // namespace

Scene scene_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene: ") + e.what());
    }
    SceneSpec s;
    try {
        s.name = j.value("name", "scene");
        s.notes = j.value("notes", "");
        for (const auto& m : j.at("materials")) {
            s.materials.push_back({m.at("name").get<std::string>(), m.at("reflection_loss_db").get<double>()});
        }
        const json& room = j.at("room");
        s.room = read_box(room, "room");
        if (room.contains("faces")) {
            for (std::size_t f = 0; f < 6; ++f) {
                s.room_faces[f] = room["faces"].value(kRoomFaceNames[f], std::string{});
            }
        }
        std::size_t i = 0;
        for (const auto& r : j.value("racks", json::array())) {
            s.racks.push_back(read_box(r, "rack" + std::to_string(i++)));
        }
        for (const auto& [key, nj] : j.at("nodes").items()) {
            Node n;
            n.name = key;
            const std::string role = nj.value("role", "rx");
            if (role == "tx") {
                n.role = NodeRole::Tx;
            } else if (role == "rx") {
                n.role = NodeRole::Rx;
            } else {
                throw ParseError("node '" + key + "': role must be 'tx' or 'rx'");
            }
            n.position = read_vec3(nj.at("position"), key + ".position");
            n.boresight = read_vec3(nj.value("boresight", json::array({1.0, 0.0, 0.0})), key + ".boresight");
            n.pattern = read_pattern(nj.value("pattern", json("isotropic")), key + ".pattern");
            if (nj.contains("tx_power_dbm")) n.tx_power_dbm = nj["tx_power_dbm"].get<double>();
            s.nodes.emplace(key, std::move(n));
        }
        for (const auto& l : j.value("links", json::array())) {
            s.links.push_back({l.at("tx").get<std::string>(), l.at("rx").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene: ") + e.what());
    }
    return Scene(std::move(s));
}

std::string scene_to_json_text(const Scene& scene) {
    const SceneSpec& s = scene.spec();
    json j;
    j["name"] = s.name;
    if (!s.notes.empty()) j["notes"] = s.notes;
    j["materials"] = json::array();
    for (const auto& m : s.materials) {
        j["materials"].push_back({{"name", m.name}, {"reflection_loss_db", m.reflection_loss_db}});
    }
    json room = write_box(s.room);
    json faces = json::object();
    for (std::size_t f = 0; f < 6; ++f) {
        if (!s.room_faces[f].empty()) faces[kRoomFaceNames[f]] = s.room_faces[f];
    }
    if (!faces.empty()) room["faces"] = faces;
    j["room"] = room;
    j["racks"] = json::array();
    for (const auto& r : s.racks) j["racks"].push_back(write_box(r));
    j["nodes"] = json::object();
    for (const auto& [key, n] : s.nodes) {
        json nj{{"role", n.role == NodeRole::Tx ? "tx" : "rx"},
                {"position", write_vec3(n.position)},
                {"boresight", write_vec3(n.boresight)},
                {"pattern", write_pattern(n.pattern)}};
        if (n.tx_power_dbm) nj["tx_power_dbm"] = *n.tx_power_dbm;
        j["nodes"][key] = nj;
    }
    j["links"] = json::array();
    for (const auto& l : s.links) j["links"].push_back({{"tx", l.tx}, {"rx", l.rx}});
    return j.dump(2) + "\n";
}

Scene load_scene(const std::filesystem::path& path) {
    return scene_from_json_text(read_text_file(path));
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    write_text_atomic(path, scene_to_json_text(scene));
}

// ---------------------------------------------------------------------------
// Canonical scene

namespace {

Node make_tx(const std::string& name, Vec3 pos, Vec3 boresight) {
    Node n;
    n.name = name;
    n.role = NodeRole::Tx;
    n.position = pos;
    n.boresight = normalized(boresight);
    n.pattern = AntennaPattern::measurement_horn();
    n.tx_power_dbm = 10.0;
    return n;
}

Node make_rx(const std::string& name, Vec3 pos) {
    Node n;
    n.name = name;
    n.role = NodeRole::Rx;
    n.position = pos;
    n.boresight = {1.0, 0.0, 0.0};
    n.pattern = AntennaPattern::measurement_horn();
    return n;
}

}  // namespace

Scene canonical_scene() {
    constexpr double kRackTop = 2.2;
    constexpr double kRackHeight = 2.4;    // rack-to-rack Tx/Rx
    constexpr double kApHeight = 2.7;      // ceiling access point
    constexpr double kNlosRxHeight = 1.7;

    SceneSpec s;
    s.name = "canonical-data-hall";
    s.notes =
        "Hall 10 m x 8 m x 3 m with two rack rows (2.2 m tall) split by a 1 m cross aisle. "
        "Dimensions and rack pitch are representative values, not a survey of a measured site.";
    s.materials = {{"metal", 2.0}, {"glass", 6.0}, {"concrete", 10.0}};
    s.room = {"room", {0.0, 0.0, 0.0}, {10.0, 8.0, 3.0}, "concrete"};
    s.room_faces = {"metal", "glass", "metal", "concrete", "concrete", "concrete"};
    s.racks = {
        {"rowA_west", {2.0, 2.0, 0.0}, {4.5, 3.0, kRackTop}, "metal"},
        {"rowA_east", {5.5, 2.0, 0.0}, {8.0, 3.0, kRackTop}, "metal"},
        {"rowB_west", {2.0, 5.0, 0.0}, {4.5, 6.0, kRackTop}, "metal"},
        {"rowB_east", {5.5, 5.0, 0.0}, {8.0, 6.0, kRackTop}, "metal"},
    };

    auto add = [&](Node n) { s.nodes.emplace(n.name, std::move(n)); };
    add(make_tx("tx1", {1.5, 2.5, kRackHeight}, {1.0, 0.0, 0.0}));    // alongside row A
    add(make_tx("tx2", {8.7, 4.0, kRackHeight}, {-1.0, 0.0, 0.0}));   // in front of the rows
    add(make_tx("tx3", {5.0, 4.0, kApHeight}, {0.0, 0.0, -1.0}));     // ceiling AP

    int idx = 1;
    auto rx = [&](const std::string& tx, Vec3 p) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "rx%02d", idx++);
        add(make_rx(buf, p));
        s.links.push_back({tx, buf});
    };
    // tx1: 9 LoS receivers at rack height, 3 NLoS receivers behind row A.
    for (double x : {3.0, 4.0, 5.0, 6.0, 7.0}) rx("tx1", {x, 1.5, kRackHeight});
    for (double x : {3.0, 4.0, 5.0, 6.0}) rx("tx1", {x, 3.5, kRackHeight});
    for (double x : {4.0, 6.0, 7.0}) rx("tx1", {x, 1.5, kNlosRxHeight});
    // tx2: 5 receivers along the main aisle.
    for (double x : {2.5, 3.5, 4.5, 5.5, 6.5}) rx("tx2", {x, 4.5, kRackHeight});
    // tx3: 9 LoS receivers in the aisles, 3 NLoS receivers tucked behind racks.
    for (double x : {2.5, 4.0, 6.0, 7.5}) rx("tx3", {x, 4.0, kNlosRxHeight});
    for (double x : {3.0, 5.0, 7.0}) rx("tx3", {x, 3.5, kNlosRxHeight});
    for (double x : {3.0, 7.0}) rx("tx3", {x, 4.5, kNlosRxHeight});
    for (double x : {3.0, 7.0}) rx("tx3", {x, 1.6, kNlosRxHeight});
    rx("tx3", {3.0, 6.4, kNlosRxHeight});
    return Scene(std::move(s));
}

}  // namespace thz
