#include "thz/campaign.hpp"

#include "thz/error.hpp"

namespace thz {

Node aimed_tx(const Node& tx, const Node& rx) {
    Node n = tx;
    const Vec3 d = rx.position - tx.position;
    if (norm(d) > 0.0) n.boresight = normalized(d);
    return n;
}

ScanGrid aimed_scan(const ScanGrid& rel, const Node& tx, const Node& rx) {
    const Direction dir = direction_of(tx.position - rx.position);
    ScanGrid g = rel;
    g.az_start = rel.az_start + dir.az_deg;
    g.az_stop = rel.az_stop + dir.az_deg;
    g.el_start = rel.el_start + dir.el_deg;
    g.el_stop = rel.el_stop + dir.el_deg;
    return g;
}

Sounding sound_link(const Scene& scene, const Link& link, const CampaignConfig& cfg) {
    const Node& tx0 = scene.node(link.tx);
    const Node& rx0 = scene.node(link.rx);
    const Node tx = aimed_tx(tx0, rx0);
    const Node rx_iso = with_isotropic_antenna(rx0);
    const auto truth = ground_truth_paths(scene, tx, rx_iso, cfg.truth);
    SynthesisConfig sc;
    sc.freqs = cfg.freqs;
    sc.grid = aimed_scan(cfg.scan, tx0, rx0);
    sc.noise_db = cfg.noise_db;
    sc.seed = cfg.seed;
    sc.tx_id = link.tx;
    sc.rx_id = link.rx;
    return synthesize_cfr(truth, rx0.pattern, sc);
}

std::vector<Mpc> rt_link(const Scene& scene, const Link& link, const CampaignConfig& cfg) {
    const Node& tx0 = scene.node(link.tx);
    const Node& rx0 = scene.node(link.rx);
    TraceConfig tc;
    tc.max_order = cfg.rt_max_order;
    tc.frequency_hz = cfg.truth.trace.frequency_hz;
    return trace(scene, aimed_tx(tx0, rx0), with_isotropic_antenna(rx0), tc);
}

std::optional<PathLossSample> measured_path_loss(const Scene& scene, const Link& link,
                                                 const std::vector<Mpc>& measured) {
    const auto pl = total_path_loss(measured);
    if (!pl) return std::nullopt;
    const Node& tx = scene.node(link.tx);
    const Node& rx = scene.node(link.rx);
    PathLossSample s;
    s.tx = link.tx;
    s.rx = link.rx;
    s.d_m = distance(tx.position, rx.position);
    s.pl_db = *pl + tx.pattern.boresight_gain_dbi;
    s.los = !los_blocked(scene, tx.position, rx.position);
    return s;
}

CampaignResult run_campaign(const Scene& scene, const CampaignConfig& cfg) {
    CampaignResult res;
    for (const Link& link : scene.links()) {
        LinkResult lr;
        lr.link = link;
        lr.measured = extract_mpcs(sound_link(scene, link, cfg), cfg.extract);
        lr.rt = rt_link(scene, link, cfg);
        lr.matching = match_paths(lr.measured, lr.rt, cfg.weights);
        res.offsets.add(lr.rt, lr.matching);
        lr.pl = measured_path_loss(scene, link, lr.measured);
        if (lr.pl) res.samples.push_back(*lr.pl);
        res.links.push_back(std::move(lr));
    }
    res.abg = fit_abg_by_condition(res.samples);
    return res;
}

}  // namespace thz
