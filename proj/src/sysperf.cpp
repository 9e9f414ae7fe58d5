#include "thz/sysperf.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"
#include "thz/rng.hpp"

namespace thz {

void GridSpec::validate() const {
    if (nx < 1 || ny < 1) throw ValidationError("grid: nx and ny must be >= 1");
    if (!(cell > 0.0)) throw ValidationError("grid: cell size must be > 0");
}

GridSpec GridSpec::covering(const Box& room, double cell, double z) {
    if (!(cell > 0.0)) throw ValidationError("grid: cell size must be > 0");
    GridSpec g;
    g.x0 = room.min_corner.x;
    g.y0 = room.min_corner.y;
    g.cell = cell;
    // Small tolerance so 10 m / 0.1 m gives 100 cells, not 101.
    g.nx = std::max(1, static_cast<int>(std::ceil((room.max_corner.x - room.min_corner.x) / cell - 1e-9)));
    g.ny = std::max(1, static_cast<int>(std::ceil((room.max_corner.y - room.min_corner.y) / cell - 1e-9)));
    g.z = z;
    return g;
}

std::vector<bool> open_cells(const Scene& scene, const GridSpec& grid) {
    grid.validate();
    std::vector<bool> open;
    open.reserve(static_cast<std::size_t>(grid.nx * grid.ny));
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) open.push_back(!scene.inside_obstacle(grid.center(ix, iy)));
    }
    return open;
}

RadioMap build_radio_map(const std::string& source, const Scene& scene, const Node& tx, const GridSpec& grid,
                         const MapOptions& opt, const InfModel* model) {
    grid.validate();
    if (source != "rt" && source != "inf") throw ValidationError("radio map: source must be 'rt' or 'inf'");
    if (source == "inf" && model == nullptr) throw ValidationError("radio map: 'inf' source needs a trained model");
    if (opt.max_order < 0) throw ValidationError("radio map: max_order must be >= 0");

    RadioMap m;
    m.grid = grid;
    m.source = source;
    m.tx = tx.name;
    m.cells.reserve(static_cast<std::size_t>(grid.nx * grid.ny));
    const Node iso_tx = with_isotropic_antenna(tx);
    TraceConfig tc;
    tc.max_order = opt.max_order;
    tc.frequency_hz = opt.frequency_hz;
    tc.power_floor_db = opt.floor_db;

    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const Vec3 p = grid.center(ix, iy);
            MapCell c;
            const Direction geo = direction_of(tx.position - p);
            auto set_floor = [&] {
                c.p_db = opt.floor_db;
                c.tau_ns = distance(tx.position, p) / kSpeedOfLight * 1e9;
                c.az_deg = geo.az_deg;
                c.el_deg = geo.el_deg;
            };
            if (scene.inside_obstacle(p) || distance(p, tx.position) < 1e-6) {
                set_floor();
                c.los = false;
                m.cells.push_back(c);
                continue;
            }
            c.los = !los_blocked(scene, tx.position, p);
            if (source == "rt") {
                Node rx;
                rx.name = "cell";
                rx.position = p;
                rx.pattern = AntennaPattern::make_isotropic();
                const auto paths = apply_offsets(trace(scene, iso_tx, rx, tc), opt.calibration, opt.policy);
                if (const auto t = channel_targets(paths)) {
                    c.p_db = std::max(t->p, opt.floor_db);
                    c.tau_ns = t->tau;
                    c.az_deg = t->az;
                    c.el_deg = t->el;
                } else {
                    set_floor();
                    c.los = false;
                }
            } else {
                const ChannelAttr a = predict(*model, scene, tx, p);
                c.p_db = a.p_db;
                c.tau_ns = a.tau_ns;
                c.az_deg = a.az_deg;
                c.el_deg = a.el_deg;
            }
            m.cells.push_back(c);
        }
    }
    return m;
}

void LinkBudget::validate() const {
    if (!(bandwidth_hz > 0.0)) throw ValidationError("link budget: bandwidth must be > 0");
    for (double v : {tx_power_dbm, tx_gain_dbi, interferer_gain_dbi, rx_gain_dbi, noise_density_dbm_hz,
                     noise_figure_db}) {
        if (!std::isfinite(v)) throw ValidationError("link budget: values must be finite");
    }
}

double LinkBudget::noise_dbm() const {
    return noise_density_dbm_hz + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

void Deployment::validate() const {
    if (std::find(interferers.begin(), interferers.end(), serving) != interferers.end()) {
        throw ValidationError("deployment: serving transmitter '" + serving + "' is also listed as an interferer");
    }
    const RadioMap& s = map(serving);
    for (const auto& i : interferers) {
        const RadioMap& m = map(i);
        if (!(m.grid == s.grid) || m.cells.size() != s.cells.size()) {
            throw ValidationError("deployment: map of '" + i + "' is not on the serving grid");
        }
    }
}

const RadioMap& Deployment::map(const std::string& id) const {
    auto it = maps.find(id);
    if (it == maps.end() || it->second == nullptr) throw ValidationError("deployment: no radio map for '" + id + "'");
    return *it->second;
}

double Fading::gain_db(const std::string& tx, std::size_t cell) const {
    if (sigma_db == 0.0) return 0.0;
    Rng rng(seed, fnv1a(tx), cell);
    return sigma_db * rng.normal();
}

double sinr_from_levels(double signal_dbm, const std::vector<double>& interferers_dbm, double noise_dbm) {
    double den = db_to_linear(noise_dbm);
    for (double i : interferers_dbm) den += db_to_linear(i);
    return signal_dbm - linear_to_db(den);
}

double sinr_db(const Deployment& d, const LinkBudget& lb, std::size_t cell, const Fading& fading) {
    const RadioMap& s = d.map(d.serving);
    if (cell >= s.cells.size()) throw ValidationError("sinr: cell index out of range");
    const double signal = lb.tx_power_dbm + lb.tx_gain_dbi + lb.rx_gain_dbi + s.cells[cell].p_db +
                          fading.gain_db(d.serving, cell);
    std::vector<double> interf;
    interf.reserve(d.interferers.size());
    for (const auto& id : d.interferers) {
        interf.push_back(lb.tx_power_dbm + lb.interferer_gain_dbi + lb.rx_gain_dbi + d.map(id).cells[cell].p_db +
                         fading.gain_db(id, cell));
    }
    return sinr_from_levels(signal, interf, lb.noise_dbm());
}

namespace {

std::vector<double> all_sinr(const Deployment& d, const LinkBudget& lb, const std::vector<bool>* mask,
                             const Fading& fading) {
    d.validate();
    lb.validate();
    const std::size_t n = d.map(d.serving).cells.size();
    if (mask && mask->size() != n) throw ValidationError("coverage: mask size does not match the grid");
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
        if (mask && !(*mask)[c]) continue;
        out.push_back(sinr_db(d, lb, c, fading));
    }
    return out;
}

double fraction_at_least(const std::vector<double>& sinr, double t) {
    if (sinr.empty()) return 0.0;
    const auto n = std::count_if(sinr.begin(), sinr.end(), [&](double v) { return v >= t; });
    return static_cast<double>(n) / static_cast<double>(sinr.size());
}

}  // namespace

double coverage_probability(const Deployment& d, const LinkBudget& lb, double threshold_db,
                            const std::vector<bool>* mask, const Fading& fading) {
    return fraction_at_least(all_sinr(d, lb, mask, fading), threshold_db);
}

std::vector<std::pair<double, double>> coverage_curve(const Deployment& d, const LinkBudget& lb,
                                                      const std::vector<double>& thresholds,
                                                      const std::vector<bool>* mask, const Fading& fading) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw ValidationError("coverage curve: thresholds must be ascending");
    }
    const auto sinr = all_sinr(d, lb, mask, fading);
    std::vector<std::pair<double, double>> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) out.emplace_back(t, fraction_at_least(sinr, t));
    return out;
}

std::vector<double> threshold_range(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw ValidationError("threshold range: need step > 0 and hi >= lo");
    std::vector<double> out;
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

std::string coverage_curve_to_csv(const std::vector<std::pair<double, double>>& curve) {
    std::string out = "threshold_db,coverage\n";
    for (const auto& [t, p] : curve) out += fmt_num(t) + "," + fmt_num(p) + "\n";
    return out;
}

void save_radio_map(const RadioMap& m, const std::filesystem::path& header_path) {
    const std::filesystem::path data = header_path.parent_path() / (header_path.stem().string() + ".csv");
    nlohmann::ordered_json h;
    h["format"] = "thz-radiomap-v1";
    h["source"] = m.source;
    h["tx"] = m.tx;
    h["x0"] = m.grid.x0;
    h["y0"] = m.grid.y0;
    h["cell"] = m.grid.cell;
    h["nx"] = m.grid.nx;
    h["ny"] = m.grid.ny;
    h["z"] = m.grid.z;
    h["data"] = data.filename().string();
    std::string csv = "x,y,p_db,tau_ns,az_deg,el_deg,los\n";
    for (int iy = 0; iy < m.grid.ny; ++iy) {
        for (int ix = 0; ix < m.grid.nx; ++ix) {
            const Vec3 p = m.grid.center(ix, iy);
            const MapCell& c = m.at(ix, iy);
            csv += fmt_num(p.x) + "," + fmt_num(p.y) + "," + fmt_num(c.p_db) + "," + fmt_num(c.tau_ns) + "," +
                   fmt_num(c.az_deg) + "," + fmt_num(c.el_deg) + "," + (c.los ? "1" : "0") + "\n";
        }
    }
    write_text_atomic(data, csv);
    write_text_atomic(header_path, h.dump(2) + "\n");
}

RadioMap load_radio_map(const std::filesystem::path& header_path) {
    const std::string what = header_path.string();
    RadioMap m;
    std::filesystem::path data;
    try {
        const auto h = nlohmann::json::parse(read_text_file(header_path));
        if (h.at("format").get<std::string>() != "thz-radiomap-v1") throw ParseError(what + ": unknown format");
        m.source = h.at("source").get<std::string>();
        m.tx = h.at("tx").get<std::string>();
        m.grid.x0 = h.at("x0").get<double>();
        m.grid.y0 = h.at("y0").get<double>();
        m.grid.cell = h.at("cell").get<double>();
        m.grid.nx = h.at("nx").get<int>();
        m.grid.ny = h.at("ny").get<int>();
        m.grid.z = h.at("z").get<double>();
        data = header_path.parent_path() / h.at("data").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
    m.grid.validate();
    const CsvTable t = read_csv(data);
    const std::string dw = data.string();
    const std::size_t cp = t.column("p_db"), ct = t.column("tau_ns"), ca = t.column("az_deg"),
                      ce = t.column("el_deg"), cl = t.column("los");
    if (t.rows.size() != static_cast<std::size_t>(m.grid.nx * m.grid.ny)) {
        throw ValidationError(dw + ": expected " + std::to_string(m.grid.nx * m.grid.ny) + " cells, found " +
                              std::to_string(t.rows.size()));
    }
    for (const auto& r : t.rows) {
        m.cells.push_back({parse_double(r[cp], dw), parse_double(r[ct], dw), parse_double(r[ca], dw),
                           parse_double(r[ce], dw), r[cl] == "1"});
    }
    return m;
}

LinkBudget link_budget_from_json(const std::string& text, const std::string& what, LinkBudget lb) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw ValidationError(what + ": link budget must be a JSON object");
        static const char* const kKeys[] = {"tx_power_dbm",         "tx_gain_dbi",  "interferer_gain_dbi",
                                            "rx_gain_dbi",          "bandwidth_hz", "noise_density_dbm_hz",
                                            "noise_figure_db"};
        for (const auto& [key, v] : j.items()) {
            if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
                throw ValidationError(what + ": unknown link-budget key '" + key + "'");
            }
        }
        lb.tx_power_dbm = j.value("tx_power_dbm", lb.tx_power_dbm);
        lb.tx_gain_dbi = j.value("tx_gain_dbi", lb.tx_gain_dbi);
        lb.interferer_gain_dbi = j.value("interferer_gain_dbi", lb.interferer_gain_dbi);
        lb.rx_gain_dbi = j.value("rx_gain_dbi", lb.rx_gain_dbi);
        lb.noise_density_dbm_hz = j.value("noise_density_dbm_hz", lb.noise_density_dbm_hz);
        lb.bandwidth_hz = j.value("bandwidth_hz", lb.bandwidth_hz);
        lb.noise_figure_db = j.value("noise_figure_db", lb.noise_figure_db);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
    lb.validate();
    return lb;
}

std::string link_budget_to_json(const LinkBudget& lb) {
    nlohmann::ordered_json j{{"tx_power_dbm", lb.tx_power_dbm},
                             {"tx_gain_dbi", lb.tx_gain_dbi},
                             {"interferer_gain_dbi", lb.interferer_gain_dbi},
                             {"rx_gain_dbi", lb.rx_gain_dbi},
                             {"noise_density_dbm_hz", lb.noise_density_dbm_hz},
                             {"bandwidth_hz", lb.bandwidth_hz},
                             {"noise_figure_db", lb.noise_figure_db}};
    return j.dump(2) + "\n";
}

}  // namespace thz
