#pragma once

// Channel parameter estimation: local-maximum MPC extraction from a
// directional sounding, power-sum path loss and the alpha-beta (log-distance)
// large-scale fit.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thz/raytrace.hpp"
#include "thz/sounder.hpp"

namespace thz {

struct ExtractConfig {
    double rel_threshold_db = 25.0;   // dynamic range below the strongest cell
    int min_separation_bins = 2;      // in native delay-resolution bins
    std::size_t oversample = 4;       // zero-padding factor of the delay transform
    double noise_margin_db = 6.0;     // noise floor = median PDP power + margin
};

/// Components sorted by descending power; Rx boresight gain is removed from
/// the reported power. An all-zero sounding yields an empty list.
std::vector<Mpc> extract_mpcs(const Sounding& s, const ExtractConfig& cfg = {});

/// -10 log10(sum 10^(P/10)); nullopt when the list is empty (no detection).
std::optional<double> total_path_loss(const std::vector<Mpc>& mpcs);

struct PathLossSample {
    double d_m = 0.0;
    double pl_db = 0.0;
    bool los = false;
    std::string tx;
    std::string rx;
};

struct AbgModel {
    double alpha = 0.0;  // dB per decade
    double beta = 0.0;   // dB at 1 m
    std::string condition = "nlos";
    int n_samples = 0;

    double path_loss_db(double d_m) const;
};

/// Least-squares fit of pl_db against log10(d_m). Throws ValidationError
/// with fewer than two distinct distances or a non-positive distance.
AbgModel fit_abg(const std::vector<PathLossSample>& samples, const std::string& condition = "all");

struct AbgPair {
    std::optional<AbgModel> los;
    std::optional<AbgModel> nlos;
};

/// Fits LoS and NLoS subsets independently; a subset that cannot be fitted
/// is left empty.
AbgPair fit_abg_by_condition(const std::vector<PathLossSample>& samples);

std::string path_loss_samples_to_csv(const std::vector<PathLossSample>& samples);
std::vector<PathLossSample> path_loss_samples_from_csv(const std::string& text, const std::string& what);

std::string abg_to_json(const AbgModel& m);
AbgModel abg_from_json(const std::string& text, const std::string& what);

}  // namespace thz
