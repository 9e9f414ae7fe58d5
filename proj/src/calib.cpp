#include "thz/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"

namespace thz {

void MatchWeights::validate() const {
    if (!(w_tau > 0.0) || !(w_theta > 0.0) || !(w_phi > 0.0)) {
        throw ValidationError("match weights must be > 0");
    }
    if (!(gate > 0.0)) throw ValidationError("match gate must be > 0");
}

double match_cost(const Mpc& a, const Mpc& b, const MatchWeights& w) {
    const double dt = a.delay_ns - b.delay_ns;
    const double daz = wrap180(a.az_deg - b.az_deg);
    const double del = a.el_deg - b.el_deg;
    return w.w_tau * dt * dt + w.w_theta * daz * daz + w.w_phi * del * del;
}

Matching match_paths(const std::vector<Mpc>& measured, const std::vector<Mpc>& rt, const MatchWeights& w) {
    w.validate();
    struct Cand {
        double cost;
        std::size_t l;
        std::size_t k;
    };
    std::vector<Cand> cands;
    cands.reserve(measured.size() * rt.size());
    for (std::size_t l = 0; l < measured.size(); ++l) {
        for (std::size_t k = 0; k < rt.size(); ++k) {
            const double c = match_cost(measured[l], rt[k], w);
            if (c <= w.gate) cands.push_back({c, l, k});
        }
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return std::tie(a.cost, a.l, a.k) < std::tie(b.cost, b.l, b.k); });

    Matching m;
    m.weights = w;
    m.n_measured = measured.size();
    m.n_rt = rt.size();
    std::vector<bool> used_l(measured.size(), false), used_k(rt.size(), false);
    for (const Cand& c : cands) {
        if (used_l[c.l] || used_k[c.k]) continue;
        used_l[c.l] = used_k[c.k] = true;
        m.pairs.push_back({c.l, c.k, c.cost, measured[c.l].power_db - rt[c.k].power_db});
    }
    for (std::size_t l = 0; l < measured.size(); ++l) {
        if (!used_l[l]) m.unmatched_measured.push_back(l);
    }
    for (std::size_t k = 0; k < rt.size(); ++k) {
        if (!used_k[k]) m.unmatched_rt.push_back(k);
    }
    return m;
}

std::string policy_name(CalibrationPolicy p) {
    switch (p) {
        case CalibrationPolicy::PerOrderMean: return "per-order-mean";
        case CalibrationPolicy::GlobalMean: return "global-mean";
        case CalibrationPolicy::MatchedOnly: return "matched-only";
    }
    return "per-order-mean";
}

CalibrationPolicy policy_from_name(const std::string& s) {
    if (s == "per-order-mean") return CalibrationPolicy::PerOrderMean;
    if (s == "global-mean") return CalibrationPolicy::GlobalMean;
    if (s == "matched-only") return CalibrationPolicy::MatchedOnly;
    throw ValidationError("unknown calibration policy '" + s + "'");
}

void OffsetTable::add(int order, double offset_db) {
    auto& [sum, n] = by_order_[order];
    sum += offset_db;
    ++n;
    sum_ += offset_db;
    ++count_;
}

void OffsetTable::add(const std::vector<Mpc>& rt, const Matching& m) {
    for (const MatchPair& p : m.pairs) {
        if (p.rt >= rt.size()) throw ValidationError("offset table: matching does not belong to this path list");
        add(rt[p.rt].bounce_order, p.offset_db);
    }
}

std::optional<double> OffsetTable::order_mean(int order) const {
    auto it = by_order_.find(order);
    if (it == by_order_.end() || it->second.second == 0) return std::nullopt;
    return it->second.first / it->second.second;
}

std::optional<double> OffsetTable::global_mean() const {
    if (count_ == 0) return std::nullopt;
    return sum_ / count_;
}

double OffsetTable::offset_for(int order, CalibrationPolicy policy) const {
    switch (policy) {
        case CalibrationPolicy::MatchedOnly: return 0.0;
        case CalibrationPolicy::GlobalMean: return global_mean().value_or(0.0);
        case CalibrationPolicy::PerOrderMean:
            if (auto o = order_mean(order)) return *o;
            return global_mean().value_or(0.0);
    }
    return 0.0;
}

std::string OffsetTable::to_json() const {
    nlohmann::ordered_json j;
    j["global_mean_db"] = global_mean() ? nlohmann::ordered_json(sig9(*global_mean())) : nlohmann::ordered_json(nullptr);
    j["n_pairs"] = count_;
    j["by_order"] = nlohmann::ordered_json::array();
    for (const auto& [order, sn] : by_order_) {
        j["by_order"].push_back({{"bounce_order", order}, {"sum_db", sig9(sn.first)}, {"count", sn.second}});
    }
    return j.dump(2) + "\n";
}

OffsetTable OffsetTable::from_json(const std::string& text, const std::string& what) {
    OffsetTable t;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& e : j.at("by_order")) {
            const int order = e.at("bounce_order").get<int>();
            const double sum = e.at("sum_db").get<double>();
            const int count = e.at("count").get<int>();
            t.by_order_[order] = {sum, count};
            t.sum_ += sum;
            t.count_ += count;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
    return t;
}

std::vector<Mpc> apply_calibration(const std::vector<Mpc>& rt, const Matching& m, CalibrationPolicy policy) {
    if (m.n_rt != rt.size()) throw ValidationError("apply_calibration: matching was built for a different path list");
    std::vector<bool> matched(rt.size(), false);
    for (const MatchPair& p : m.pairs) {
        if (p.rt >= rt.size()) throw ValidationError("apply_calibration: rt index out of range");
        matched[p.rt] = true;
    }
    OffsetTable table;
    table.add(rt, m);
    std::vector<Mpc> out = rt;
    for (const MatchPair& p : m.pairs) out[p.rt].power_db += p.offset_db;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!matched[k]) out[k].power_db += table.offset_for(out[k].bounce_order, policy);
    }
    return out;
}

std::vector<Mpc> apply_offsets(const std::vector<Mpc>& rt, const OffsetTable& table, CalibrationPolicy policy) {
    std::vector<Mpc> out = rt;
    for (Mpc& p : out) p.power_db += table.offset_for(p.bounce_order, policy);
    return out;
}

std::string matching_to_json(const Matching& m, CalibrationPolicy policy, const std::string& tx,
                             const std::string& rx) {
    nlohmann::ordered_json j;
    if (!tx.empty()) j["tx"] = tx;
    if (!rx.empty()) j["rx"] = rx;
    j["policy"] = policy_name(policy);
    j["weights"] = {{"w_tau", sig9(m.weights.w_tau)},
                    {"w_theta", sig9(m.weights.w_theta)},
                    {"w_phi", sig9(m.weights.w_phi)},
                    {"gate", sig9(m.weights.gate)}};
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : m.pairs) {
        j["pairs"].push_back({{"measured", p.measured}, {"rt", p.rt}, {"cost", sig9(p.cost)}, {"offset_db", sig9(p.offset_db)}});
    }
    j["unmatched_measured"] = m.unmatched_measured;
    j["unmatched_rt"] = m.unmatched_rt;
    return j.dump(2) + "\n";
}

}  // namespace thz
