#pragma once

// System-level analysis on the twin: radio maps over a receiver plane, SINR
// with interference, and coverage probability.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "thz/calib.hpp"
#include "thz/inf.hpp"
#include "thz/scene.hpp"

namespace thz {

struct GridSpec {
    double x0 = 0.0;  // lower-left corner of the first cell
    double y0 = 0.0;
    double cell = 0.25;
    int nx = 40;
    int ny = 32;
    double z = 1.7;

    void validate() const;
    Vec3 center(int ix, int iy) const {
        return {x0 + (ix + 0.5) * cell, y0 + (iy + 0.5) * cell, z};
    }
    /// Grid covering the room footprint with the given cell size.
    static GridSpec covering(const Box& room, double cell, double z);

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct MapCell {
    double p_db = 0.0;  // isotropic path gain K_u
    double tau_ns = 0.0;
    double az_deg = 0.0;
    double el_deg = 0.0;
    bool los = false;

    friend bool operator==(const MapCell&, const MapCell&) = default;
};

struct RadioMap {
    GridSpec grid;
    std::string source = "rt";  // "rt" or "inf"
    std::string tx;
    std::vector<MapCell> cells;  // row-major, iy outer

    const MapCell& at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy * grid.nx + ix)]; }
    std::size_t size() const { return cells.size(); }
};

struct MapOptions {
    int max_order = 2;
    double frequency_hz = 300e9;
    double floor_db = -130.0;
    OffsetTable calibration;
    CalibrationPolicy policy = CalibrationPolicy::PerOrderMean;
};

/// "rt": calibrated isotropic trace, power sum of all paths, strongest-path
/// delay and angles; cells without paths (and cells inside racks) get the
/// floor power. "inf": predict() per cell, racks excepted. The los flag is
/// the geometric visibility of the transmitter.
RadioMap build_radio_map(const std::string& source, const Scene& scene, const Node& tx, const GridSpec& grid,
                         const MapOptions& opt, const InfModel* model = nullptr);

/// True for cells whose center lies outside every rack.
std::vector<bool> open_cells(const Scene& scene, const GridSpec& grid);

struct LinkBudget {
    double tx_power_dbm = 10.0;
    double tx_gain_dbi = 26.0;          // G_0
    double interferer_gain_dbi = 26.0;  // G_i
    double rx_gain_dbi = 8.0;           // user terminal
    double noise_density_dbm_hz = -174.0;
    double bandwidth_hz = 20e9;
    double noise_figure_db = 10.0;

    void validate() const;
    double noise_dbm() const;
};

struct Deployment {
    std::string serving;
    std::vector<std::string> interferers;
    std::map<std::string, const RadioMap*> maps;

    /// serving not among interferers, every id mapped, all maps on one grid.
    void validate() const;
    const RadioMap& map(const std::string& id) const;
};

/// Optional lognormal small-scale term; sigma 0 disables it.
struct Fading {
    double sigma_db = 0.0;
    std::uint64_t seed = 0;

    /// Deterministic per (transmitter, cell).
    double gain_db(const std::string& tx, std::size_t cell) const;
};

/// 10 log10(S / (sum I + N)) with levels in dBm.
double sinr_from_levels(double signal_dbm, const std::vector<double>& interferers_dbm, double noise_dbm);

double sinr_db(const Deployment& d, const LinkBudget& lb, std::size_t cell, const Fading& fading = {});

/// Fraction of cells (restricted to `mask` when given) with SINR >= T.
double coverage_probability(const Deployment& d, const LinkBudget& lb, double threshold_db,
                            const std::vector<bool>* mask = nullptr, const Fading& fading = {});

/// Thresholds must be ascending; returns (T, P_c) pairs.
std::vector<std::pair<double, double>> coverage_curve(const Deployment& d, const LinkBudget& lb,
                                                      const std::vector<double>& thresholds,
                                                      const std::vector<bool>* mask = nullptr,
                                                      const Fading& fading = {});

/// Evenly spaced thresholds lo..hi inclusive.
std::vector<double> threshold_range(double lo, double hi, double step);

std::string coverage_curve_to_csv(const std::vector<std::pair<double, double>>& curve);

void save_radio_map(const RadioMap& m, const std::filesystem::path& header_path);
RadioMap load_radio_map(const std::filesystem::path& header_path);

LinkBudget link_budget_from_json(const std::string& text, const std::string& what, LinkBudget base = {});
std::string link_budget_to_json(const LinkBudget& lb);

}  // namespace thz
