#include "thz/chanest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"

namespace thz {

namespace {

struct Candidate {
    double power = 0.0;  // linear, peak-interpolated
    double delay_ns = 0.0;
    std::size_t az_i = 0;
    std::size_t el_i = 0;
};

}  // namespace

std::vector<Mpc> extract_mpcs(const Sounding& s, const ExtractConfig& cfg) {
    if (!(cfg.rel_threshold_db > 0.0)) throw ValidationError("extract_mpcs: rel_threshold_db must be > 0");
    const ScanGrid& g = s.grid();
    const std::size_t n_az = g.n_az();
    const std::size_t n_el = g.n_el();
    const std::size_t fft = std::bit_ceil(s.n_freq() * std::max<std::size_t>(cfg.oversample, 1));
    PdpEngine engine(s, {Window::Hann, fft});
    const std::size_t m = engine.size();
    const double bin_ns = engine.bin_delay_ns();

    std::vector<double> cube(s.n_dir() * m);
    for (std::size_t d = 0; d < s.n_dir(); ++d) {
        engine.compute(d, std::span<double>(cube.data() + d * m, m));
    }
    const double peak = *std::max_element(cube.begin(), cube.end());
    if (!(peak > 0.0)) return {};

    std::vector<double> sorted = cube;
    auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double floor = *mid * db_to_linear(cfg.noise_margin_db);
    const double threshold = std::max(peak * db_to_linear(-cfg.rel_threshold_db), floor);

    auto at = [&](std::size_t a, std::size_t e, std::size_t n) { return cube[(a * n_el + e) * m + n]; };
    const bool wrap = g.az_wraps();

    std::vector<Candidate> cands;
    for (std::size_t a = 0; a < n_az; ++a) {
        for (std::size_t e = 0; e < n_el; ++e) {
            for (std::size_t n = 0; n < m; ++n) {
                const double v = at(a, e, n);
                if (v < threshold || v <= floor) continue;
                bool is_max = true;
                for (int da = -1; da <= 1 && is_max; ++da) {
                    long aa = static_cast<long>(a) + da;
                    if (aa < 0 || aa >= static_cast<long>(n_az)) {
                        if (!wrap) continue;
                        aa = (aa + static_cast<long>(n_az)) % static_cast<long>(n_az);
                    }
                    for (int de = -1; de <= 1 && is_max; ++de) {
                        const long ee = static_cast<long>(e) + de;
                        if (ee < 0 || ee >= static_cast<long>(n_el)) continue;
                        for (int dn = -1; dn <= 1; ++dn) {
                            if (da == 0 && de == 0 && dn == 0) continue;
                            const std::size_t nn = (n + m + static_cast<std::size_t>(dn + 1) - 1) % m;  // circular n + dn
                            if (at(static_cast<std::size_t>(aa), static_cast<std::size_t>(ee), nn) > v) {
                                is_max = false;
                                break;
                            }
                        }
                    }
                }
                if (!is_max) continue;
                // Log-parabolic refinement along delay.
                const double tiny = peak * 1e-30;
                const double ym = std::log(std::max(at(a, e, (n + m - 1) % m), tiny));
                const double y0 = std::log(v);
                const double yp = std::log(std::max(at(a, e, (n + 1) % m), tiny));
                const double den = ym - 2.0 * y0 + yp;
                double delta = 0.0;
                double ypk = y0;
                if (den < 0.0) {
                    delta = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
                    ypk = y0 - 0.25 * (ym - yp) * delta;
                }
                cands.push_back({std::exp(ypk), (static_cast<double>(n) + delta) * bin_ns, a, e});
            }
        }
    }

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& x, const Candidate& y) { return x.power > y.power; });
    const double sep_ns = cfg.min_separation_bins * delay_resolution_ns(s.freqs());
    std::vector<Candidate> kept;
    for (const Candidate& c : cands) {
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
            std::size_t daz = c.az_i > k.az_i ? c.az_i - k.az_i : k.az_i - c.az_i;
            if (wrap) daz = std::min(daz, n_az - daz);
            const std::size_t del = c.el_i > k.el_i ? c.el_i - k.el_i : k.el_i - c.el_i;
            return std::abs(c.delay_ns - k.delay_ns) <= sep_ns && daz <= 1 && del <= 1;
        });
        if (!dup) kept.push_back(c);
    }

    const double boresight_db = s.rx_pattern.boresight_gain_dbi;
    std::vector<Mpc> out;
    out.reserve(kept.size());
    for (const Candidate& c : kept) {
        Mpc mpc;
        mpc.power_db = linear_to_db(c.power) - boresight_db;
        mpc.delay_ns = c.delay_ns;
        mpc.az_deg = wrap360(g.az(c.az_i));
        mpc.el_deg = g.el(c.el_i);
        mpc.bounce_order = -1;  // unknown for measured components
        out.push_back(mpc);
    }
    return out;
}

std::optional<double> total_path_loss(const std::vector<Mpc>& mpcs) {
    if (mpcs.empty()) return std::nullopt;
    double sum = 0.0;
    for (const Mpc& m : mpcs) sum += db_to_linear(m.power_db);
    return -linear_to_db(sum);
}

double AbgModel::path_loss_db(double d_m) const { return alpha * std::log10(d_m) + beta; }

AbgModel fit_abg(const std::vector<PathLossSample>& samples, const std::string& condition) {
    std::set<double> distinct;
    for (const auto& s : samples) {
        if (!(s.d_m > 0.0)) throw ValidationError("fit_abg: distance must be > 0");
        distinct.insert(s.d_m);
    }
    if (distinct.size() < 2) throw ValidationError("fit_abg: need at least two distinct distances");
    const double n = static_cast<double>(samples.size());
    double mx = 0.0, my = 0.0;
    for (const auto& s : samples) {
        mx += std::log10(s.d_m);
        my += s.pl_db;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& s : samples) {
        const double dx = std::log10(s.d_m) - mx;
        sxx += dx * dx;
        sxy += dx * (s.pl_db - my);
    }
    AbgModel m;
    m.alpha = sxy / sxx;
    m.beta = my - m.alpha * mx;
    m.condition = condition;
    m.n_samples = static_cast<int>(samples.size());
    if (!std::isfinite(m.alpha) || !std::isfinite(m.beta)) throw NumericalError("fit_abg: non-finite fit");
    return m;
}

AbgPair fit_abg_by_condition(const std::vector<PathLossSample>& samples) {
    std::vector<PathLossSample> los, nlos;
    for (const auto& s : samples) (s.los ? los : nlos).push_back(s);
    AbgPair p;
    try {
        p.los = fit_abg(los, "los");
    } catch (const ValidationError&) {
    }
    try {
        p.nlos = fit_abg(nlos, "nlos");
    } catch (const ValidationError&) {
    }
    return p;
}

std::string path_loss_samples_to_csv(const std::vector<PathLossSample>& samples) {
    std::string out = "tx,rx,d_m,pl_db,los\n";
    for (const auto& s : samples) {
        out += s.tx + "," + s.rx + "," + fmt_num(s.d_m) + "," + fmt_num(s.pl_db) + "," + (s.los ? "1" : "0") + "\n";
    }
    return out;
}

std::vector<PathLossSample> path_loss_samples_from_csv(const std::string& text, const std::string& what) {
    const CsvTable t = parse_csv(text, what);
    const std::size_t ctx = t.column("tx"), crx = t.column("rx"), cd = t.column("d_m"), cp = t.column("pl_db"),
                      cl = t.column("los");
    std::vector<PathLossSample> out;
    for (const auto& r : t.rows) {
        out.push_back({parse_double(r[cd], what), parse_double(r[cp], what), r[cl] == "1", r[ctx], r[crx]});
    }
    return out;
}

std::string abg_to_json(const AbgModel& m) {
    nlohmann::ordered_json j{{"alpha", sig9(m.alpha)}, {"beta", sig9(m.beta)}, {"condition", m.condition},
                             {"n_samples", m.n_samples}};
    return j.dump(2) + "\n";
}

AbgModel abg_from_json(const std::string& text, const std::string& what) {
    try {
        const auto j = nlohmann::json::parse(text);
        AbgModel m;
        m.alpha = j.at("alpha").get<double>();
        m.beta = j.at("beta").get<double>();
        m.condition = j.value("condition", "nlos");
        m.n_samples = j.value("n_samples", 0);
        if (!std::isfinite(m.alpha) || !std::isfinite(m.beta)) throw ValidationError(what + ": non-finite ABG model");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

}  // namespace thz
