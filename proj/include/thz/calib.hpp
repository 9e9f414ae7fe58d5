#pragma once

// Measurement-to-RT calibration. Measured components are paired with traced
// ones by a weighted delay/angle distance, and the per-pair power offsets are
// pushed back onto the traced paths. Geometry is never modified.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thz/raytrace.hpp"

namespace thz {

struct MatchWeights {
    double w_tau = 1.0 / (0.05 * 0.05);   // per ns^2
    double w_theta = 1.0 / (5.0 * 5.0);   // azimuth, per deg^2
    double w_phi = 1.0 / (10.0 * 10.0);   // elevation, per deg^2
    double gate = 12.0;

    /// Throws ValidationError unless all weights and the gate are > 0.
    void validate() const;
};

/// w_tau |dtau|^2 + w_theta |daz|^2 + w_phi |del|^2 with azimuth wrapped.
double match_cost(const Mpc& measured, const Mpc& rt, const MatchWeights& w);

struct MatchPair {
    std::size_t measured = 0;
    std::size_t rt = 0;
    double cost = 0.0;
    double offset_db = 0.0;  // P_measured - P_rt
};

struct Matching {
    std::vector<MatchPair> pairs;  // in selection order
    std::vector<std::size_t> unmatched_measured;
    std::vector<std::size_t> unmatched_rt;
    MatchWeights weights;
    std::size_t n_measured = 0;
    std::size_t n_rt = 0;
};

/// Greedy best-first assignment: repeatedly takes the cheapest remaining
/// (measured, rt) pair within the gate; ties go to the lower measured index,
/// then the lower rt index.
Matching match_paths(const std::vector<Mpc>& measured, const std::vector<Mpc>& rt, const MatchWeights& w = {});

enum class CalibrationPolicy {
    PerOrderMean,  // unmatched: mean offset of matched pairs of the same order, else global mean
    GlobalMean,    // unmatched: global mean offset
    MatchedOnly,   // unmatched paths untouched
};

std::string policy_name(CalibrationPolicy p);
CalibrationPolicy policy_from_name(const std::string& s);

/// Mean offsets by bounce order, accumulated over any number of links.
class OffsetTable {
  public:
    void add(int bounce_order, double offset_db);
    void add(const std::vector<Mpc>& rt, const Matching& m);
    std::optional<double> order_mean(int bounce_order) const;
    std::optional<double> global_mean() const;
    /// Offset applied to an unmatched path under `policy`.
    double offset_for(int bounce_order, CalibrationPolicy policy) const;
    bool empty() const { return count_ == 0; }

    std::string to_json() const;
    static OffsetTable from_json(const std::string& text, const std::string& what);

  private:
    std::map<int, std::pair<double, int>> by_order_;
    double sum_ = 0.0;
    int count_ = 0;
};

/// Matched paths get their own offset; the rest follow `policy` using the
/// offsets of this matching. Throws ValidationError for a stale matching.
std::vector<Mpc> apply_calibration(const std::vector<Mpc>& rt, const Matching& m,
                                   CalibrationPolicy policy = CalibrationPolicy::PerOrderMean);

/// Applies a multi-link offset table to paths that have no matching of
/// their own (radio-map cells, unmeasured links).
std::vector<Mpc> apply_offsets(const std::vector<Mpc>& rt, const OffsetTable& table,
                               CalibrationPolicy policy = CalibrationPolicy::PerOrderMean);

std::string matching_to_json(const Matching& m, CalibrationPolicy policy, const std::string& tx = "",
                             const std::string& rx = "");

}  // namespace thz
