#pragma once

// The emulated measurement campaign: for every link of the scene the Tx horn
// is aimed at the Rx, the Rx scan is centered on the direct direction, the
// physical twin is sounded and MPCs are extracted. Measured path loss and the
// calibration offsets follow from there.

#include <string>
#include <vector>

#include "thz/calib.hpp"
#include "thz/chanest.hpp"
#include "thz/physical_twin.hpp"
#include "thz/sounder.hpp"

namespace thz {

struct CampaignConfig {
    FreqGrid freqs;
    ScanGrid scan;               // azimuth/elevation offsets relative to the direct direction
    double noise_db = -120.0;
    std::uint64_t seed = 7;
    PhysicalTwinConfig truth;
    ExtractConfig extract;
    int rt_max_order = 2;
    MatchWeights weights;
};

/// Tx node with its boresight pointed at the Rx.
Node aimed_tx(const Node& tx, const Node& rx);

/// Scan grid offset so that its (0, 0) cell looks at the transmitter.
ScanGrid aimed_scan(const ScanGrid& relative, const Node& tx, const Node& rx);

/// Synthetic sounding of one link.
Sounding sound_link(const Scene& scene, const Link& link, const CampaignConfig& cfg);

/// Nominal-material trace for the same antenna setup as sound_link (aimed Tx
/// horn, Rx gain removed).
std::vector<Mpc> rt_link(const Scene& scene, const Link& link, const CampaignConfig& cfg);

/// Path-loss sample of a link from its extracted components: antenna gains
/// at boresight are removed on both sides. nullopt when nothing was detected.
std::optional<PathLossSample> measured_path_loss(const Scene& scene, const Link& link,
                                                 const std::vector<Mpc>& measured);

struct LinkResult {
    Link link;
    std::vector<Mpc> measured;
    std::vector<Mpc> rt;
    Matching matching;
    std::optional<PathLossSample> pl;
};

struct CampaignResult {
    std::vector<LinkResult> links;
    OffsetTable offsets;
    AbgPair abg;
    std::vector<PathLossSample> samples;
};

/// Sounds, extracts, matches and fits every link of the scene.
CampaignResult run_campaign(const Scene& scene, const CampaignConfig& cfg);

}  // namespace thz
