#pragma once

// Synthetic directional channel sounder. Emulates a VNA sweep with a fixed
// Tx and a mechanically scanned Rx horn: for every scan direction the
// channel frequency response is the superposition of the incoming paths
// weighted by the Rx pattern, plus seeded complex Gaussian noise.
// Back-to-back calibration is the identity here.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "thz/raytrace.hpp"
#include "thz/scene.hpp"

namespace thz {

struct ScanGrid {
    double az_start = 0.0;
    double az_stop = 355.0;
    double az_step = 5.0;
    double el_start = -20.0;
    double el_stop = 20.0;
    double el_step = 10.0;

    /// Throws ValidationError when a step does not divide its range.
    std::size_t n_az() const;
    std::size_t n_el() const;
    std::size_t size() const { return n_az() * n_el(); }
    double az(std::size_t i) const { return az_start + az_step * static_cast<double>(i); }
    double el(std::size_t i) const { return el_start + el_step * static_cast<double>(i); }
    /// True when the azimuth axis closes the full circle (last step wraps to first).
    bool az_wraps() const;

    friend bool operator==(const ScanGrid&, const ScanGrid&) = default;
};

struct FreqGrid {
    double start_hz = 290e9;
    double stop_hz = 310e9;
    std::size_t points = 2001;

    double step_hz() const { return (stop_hz - start_hz) / static_cast<double>(points - 1); }
    double at(std::size_t k) const { return start_hz + step_hz() * static_cast<double>(k); }
    std::vector<double> values() const;

    friend bool operator==(const FreqGrid&, const FreqGrid&) = default;
};

/// 1 / (f_last - f_first) in ns. Throws ValidationError for fewer than two
/// points or a non-uniform grid.
double delay_resolution_ns(std::span<const double> freqs_hz);
double delay_resolution_ns(const FreqGrid& freqs);

/// Range resolution c * delay_resolution, in meters.
double distance_resolution_m(const FreqGrid& freqs);

class Sounding {
  public:
    Sounding(FreqGrid freqs, ScanGrid grid);

    const FreqGrid& freqs() const { return freqs_; }
    const ScanGrid& grid() const { return grid_; }
    std::size_t n_freq() const { return freqs_.points; }
    std::size_t n_dir() const { return grid_.size(); }
    std::size_t dir_index(std::size_t az_i, std::size_t el_i) const { return az_i * grid_.n_el() + el_i; }

    /// CFR sample at (frequency, azimuth index, elevation index).
    std::complex<double> cfr(std::size_t f, std::size_t az_i, std::size_t el_i) const {
        return data_[dir_index(az_i, el_i) * freqs_.points + f];
    }
    std::complex<double>& cfr(std::size_t f, std::size_t az_i, std::size_t el_i) {
        return data_[dir_index(az_i, el_i) * freqs_.points + f];
    }
    /// Frequency response of one scan direction (contiguous).
    std::span<const std::complex<double>> direction(std::size_t dir) const {
        return {data_.data() + dir * freqs_.points, freqs_.points};
    }
    std::span<std::complex<double>> direction(std::size_t dir) {
        return {data_.data() + dir * freqs_.points, freqs_.points};
    }
    const std::vector<std::complex<double>>& raw() const { return data_; }

    std::string tx_id;
    std::string rx_id;
    double noise_db = -120.0;  // per-sample complex noise power; -inf = noiseless
    std::uint64_t seed = 0;
    AntennaPattern rx_pattern = AntennaPattern::measurement_horn();

  private:
    FreqGrid freqs_;
    ScanGrid grid_;
    std::vector<std::complex<double>> data_;  // [direction][frequency]
};

struct SynthesisConfig {
    FreqGrid freqs;
    ScanGrid grid;
    double noise_db = -120.0;
    std::uint64_t seed = 0;
    std::string tx_id = "tx";
    std::string rx_id = "rx";
};

/// Paths must exclude the Rx antenna gain; the pattern is applied per scan
/// direction. Deterministic for a given (seed, tx_id, rx_id).
Sounding synthesize_cfr(const std::vector<Mpc>& paths, const AntennaPattern& rx_pattern,
                        const SynthesisConfig& cfg);

enum class Window { None, Hann };

struct PdpOptions {
    Window window = Window::Hann;
    std::size_t fft_size = 0;  // 0 = number of frequency points (no padding)
};

/// Power-delay profile |IDFT(w * H)|^2 / (sum w)^2 of one scan direction.
/// Bin n corresponds to delay n / (fft_size * step_hz).
std::vector<double> power_delay_profile(const Sounding& s, std::size_t dir, const PdpOptions& opt = {});

/// Reusable transform for many directions of one sounding.
class PdpEngine {
  public:
    PdpEngine(const Sounding& s, const PdpOptions& opt);
    ~PdpEngine();
    PdpEngine(const PdpEngine&) = delete;
    PdpEngine& operator=(const PdpEngine&) = delete;

    std::size_t size() const;
    double bin_delay_ns() const;
    void compute(std::size_t dir, std::span<double> out);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Header JSON next to a CSV of re,im rows in (f, az, el) row-major order.
void save_sounding(const Sounding& s, const std::filesystem::path& header_path);
Sounding load_sounding(const std::filesystem::path& header_path);

}  // namespace thz
