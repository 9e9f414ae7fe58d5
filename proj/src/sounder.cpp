#include "thz/sounder.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"
#include "thz/rng.hpp"
#include "thz/simd/kernels.hpp"

namespace thz {

namespace {

std::size_t axis_count(double start, double stop, double step, const char* what) {
    if (!(step > 0.0) || stop < start) {
        throw ValidationError(std::string("scan grid: invalid ") + what + " range");
    }
    const double n = (stop - start) / step;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9) {
        throw ValidationError(std::string("scan grid: ") + what + " step does not divide the range");
    }
    return static_cast<std::size_t>(r) + 1;
}

}  // namespace

std::size_t ScanGrid::n_az() const { return axis_count(az_start, az_stop, az_step, "azimuth"); }
std::size_t ScanGrid::n_el() const { return axis_count(el_start, el_stop, el_step, "elevation"); }

bool ScanGrid::az_wraps() const {
    return std::abs(az_stop + az_step - az_start - 360.0) < 1e-9;
}

std::vector<double> FreqGrid::values() const {
    std::vector<double> f(points);
    for (std::size_t k = 0; k < points; ++k) f[k] = at(k);
    return f;
}

double delay_resolution_ns(std::span<const double> f) {
    if (f.size() < 2) throw ValidationError("delay resolution: need at least two frequencies");
    const double step = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
    if (!(step > 0.0)) throw ValidationError("delay resolution: frequencies must increase");
    for (std::size_t k = 1; k < f.size(); ++k) {
        if (std::abs((f[k] - f[k - 1]) - step) > 1e-6 * step) {
            throw ValidationError("delay resolution: frequency grid is not uniform");
        }
    }
    return 1e9 / (f.back() - f.front());
}

double delay_resolution_ns(const FreqGrid& freqs) {
    if (freqs.points < 2 || !(freqs.stop_hz > freqs.start_hz)) {
        throw ValidationError("delay resolution: need at least two increasing frequencies");
    }
    return 1e9 / (freqs.stop_hz - freqs.start_hz);
}

double distance_resolution_m(const FreqGrid& freqs) {
    return delay_resolution_ns(freqs) * 1e-9 * kSpeedOfLight;
}

Sounding::Sounding(FreqGrid freqs, ScanGrid grid) : freqs_(freqs), grid_(grid) {
    if (freqs_.points < 2 || !(freqs_.stop_hz > freqs_.start_hz)) {
        throw ValidationError("sounding: frequency grid needs >= 2 increasing points");
    }
    data_.assign(grid_.size() * freqs_.points, {0.0, 0.0});
}

Sounding synthesize_cfr(const std::vector<Mpc>& paths, const AntennaPattern& rx_pattern,
                        const SynthesisConfig& cfg) {
    Sounding s(cfg.freqs, cfg.grid);
    s.tx_id = cfg.tx_id;
    s.rx_id = cfg.rx_id;
    s.noise_db = cfg.noise_db;
    s.seed = cfg.seed;
    s.rx_pattern = rx_pattern;

    const std::size_t nf = cfg.freqs.points;
    const std::size_t n_az = cfg.grid.n_az();
    const std::size_t n_el = cfg.grid.n_el();
    std::vector<std::complex<double>> phasor(nf);

    for (const Mpc& m : paths) {
        const double tau = m.delay_ns * 1e-9;
        for (std::size_t k = 0; k < nf; ++k) {
            // Reduce f*tau to a fraction of a cycle before scaling by 2 pi.
            double cycles = cfg.freqs.at(k) * tau;
            cycles -= std::floor(cycles);
            const double ph = -2.0 * kPi * cycles;
            phasor[k] = {std::cos(ph), std::sin(ph)};
        }
        const double amp = std::pow(10.0, m.power_db / 20.0);
        const Vec3 arrival = unit_vector({m.az_deg, m.el_deg});
        for (std::size_t a = 0; a < n_az; ++a) {
            for (std::size_t e = 0; e < n_el; ++e) {
                const Vec3 boresight = unit_vector({cfg.grid.az(a), cfg.grid.el(e)});
                const double g_db = gain_toward(rx_pattern, boresight, arrival);
                const double g = std::pow(10.0, g_db / 20.0);
                simd::caxpy({amp * g, 0.0}, phasor, s.direction(s.dir_index(a, e)));
            }
        }
    }

    if (std::isfinite(cfg.noise_db)) {
        Rng rng(cfg.seed, fnv1a(cfg.tx_id), fnv1a(cfg.rx_id));
        const double sigma = std::sqrt(db_to_linear(cfg.noise_db) / 2.0);
        for (std::size_t d = 0; d < s.n_dir(); ++d) {
            for (auto& v : s.direction(d)) {
                const double re = rng.normal();
                const double im = rng.normal();
                v += std::complex<double>(sigma * re, sigma * im);
            }
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

struct PdpEngine::Impl {
    const Sounding& s;
    std::size_t n;
    std::size_t m;
    std::vector<double> window;
    double norm = 1.0;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;
    std::vector<std::complex<double>> spectrum;

    Impl(const Sounding& snd, const PdpOptions& opt) : s(snd), n(snd.n_freq()) {
        m = opt.fft_size == 0 ? n : opt.fft_size;
        if (m < n) throw ValidationError("pdp: fft_size smaller than the number of frequencies");
        window.assign(n, 1.0);
        if (opt.window == Window::Hann) {
            for (std::size_t k = 0; k < n; ++k) {
                window[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n - 1));
            }
        }
        double sum = 0.0;
        for (double w : window) sum += w;
        norm = 1.0 / sum;
        in = fftw_alloc_complex(m);
        out = fftw_alloc_complex(m);
        plan = fftw_plan_dft_1d(static_cast<int>(m), in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
        spectrum.resize(m);
    }
    ~Impl() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
};

PdpEngine::PdpEngine(const Sounding& s, const PdpOptions& opt) : impl_(std::make_unique<Impl>(s, opt)) {}
PdpEngine::~PdpEngine() = default;

std::size_t PdpEngine::size() const { return impl_->m; }

double PdpEngine::bin_delay_ns() const {
    return 1e9 / (static_cast<double>(impl_->m) * impl_->s.freqs().step_hz());
}

void PdpEngine::compute(std::size_t dir, std::span<double> out) {
    Impl& p = *impl_;
    if (out.size() != p.m) throw ValidationError("pdp: output size mismatch");
    const auto h = p.s.direction(dir);
    for (std::size_t k = 0; k < p.n; ++k) {
        const std::complex<double> v = h[k] * (p.window[k] * p.norm);
        p.in[k][0] = v.real();
        p.in[k][1] = v.imag();
    }
    for (std::size_t k = p.n; k < p.m; ++k) p.in[k][0] = p.in[k][1] = 0.0;
    fftw_execute(p.plan);
    for (std::size_t k = 0; k < p.m; ++k) p.spectrum[k] = {p.out[k][0], p.out[k][1]};
    simd::abs2(p.spectrum, out);
}

std::vector<double> power_delay_profile(const Sounding& s, std::size_t dir, const PdpOptions& opt) {
    PdpEngine engine(s, opt);
    std::vector<double> out(engine.size());
    engine.compute(dir, out);
    return out;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

void save_sounding(const Sounding& s, const std::filesystem::path& header_path) {
    std::filesystem::path data_path = header_path;
    data_path.replace_extension(".csv");
    const ScanGrid& g = s.grid();
    json h;
    h["format"] = "thz-sounding-v1";
    h["tx_id"] = s.tx_id;
    h["rx_id"] = s.rx_id;
    h["seed"] = s.seed;
    h["noise_db"] = std::isfinite(s.noise_db) ? json(s.noise_db) : json("-inf");
    h["freqs"] = {{"start_hz", s.freqs().start_hz}, {"stop_hz", s.freqs().stop_hz}, {"points", s.freqs().points}};
    h["grid"] = {{"az_start", g.az_start}, {"az_stop", g.az_stop}, {"az_step", g.az_step},
                 {"el_start", g.el_start}, {"el_stop", g.el_stop}, {"el_step", g.el_step}};
    const AntennaPattern& p = s.rx_pattern;
    h["rx_pattern"] = {{"boresight_gain_dbi", p.boresight_gain_dbi}, {"hpbw_az_deg", p.hpbw_az_deg},
                       {"hpbw_el_deg", p.hpbw_el_deg}, {"sidelobe_floor_db", p.sidelobe_floor_db},
                       {"isotropic", p.isotropic}};
    h["order"] = "f,az,el";
    h["data"] = data_path.filename().string();

    std::string csv = "re,im\n";
    csv.reserve(s.raw().size() * 34);
    for (std::size_t f = 0; f < s.n_freq(); ++f) {
        for (std::size_t a = 0; a < g.n_az(); ++a) {
            for (std::size_t e = 0; e < g.n_el(); ++e) {
                const auto v = s.cfr(f, a, e);
                csv += fmt_num(v.real());
                csv += ',';
                csv += fmt_num(v.imag());
                csv += '\n';
            }
        }
    }
    write_text_atomic(data_path, csv);
    write_text_atomic(header_path, h.dump(2) + "\n");
}

Sounding load_sounding(const std::filesystem::path& header_path) {
    json h;
    try {
        h = json::parse(read_text_file(header_path));
    } catch (const json::exception& e) {
        throw ParseError(header_path.string() + ": " + e.what());
    }
    try {
        FreqGrid fg{h.at("freqs").at("start_hz").get<double>(), h.at("freqs").at("stop_hz").get<double>(),
                    h.at("freqs").at("points").get<std::size_t>()};
        const json& gj = h.at("grid");
        ScanGrid g{gj.at("az_start").get<double>(), gj.at("az_stop").get<double>(), gj.at("az_step").get<double>(),
                   gj.at("el_start").get<double>(), gj.at("el_stop").get<double>(), gj.at("el_step").get<double>()};
        Sounding s(fg, g);
        s.tx_id = h.value("tx_id", "tx");
        s.rx_id = h.value("rx_id", "rx");
        s.seed = h.value("seed", std::uint64_t{0});
        s.noise_db = h.at("noise_db").is_string() ? -std::numeric_limits<double>::infinity()
                                                  : h.at("noise_db").get<double>();
        const json& pj = h.at("rx_pattern");
        s.rx_pattern = {pj.at("boresight_gain_dbi").get<double>(), pj.at("hpbw_az_deg").get<double>(),
                        pj.at("hpbw_el_deg").get<double>(), pj.at("sidelobe_floor_db").get<double>(),
                        pj.value("isotropic", false)};
        std::filesystem::path data_path = header_path.parent_path() / h.at("data").get<std::string>();
        const CsvTable t = read_csv(data_path);
        const std::size_t expected = fg.points * g.size();
        if (t.rows.size() != expected) {
            throw ValidationError(data_path.string() + ": expected " + std::to_string(expected) +
                                  " samples, found " + std::to_string(t.rows.size()));
        }
        const std::size_t cre = t.column("re"), cim = t.column("im");
        std::size_t row = 0;
        for (std::size_t f = 0; f < fg.points; ++f) {
            for (std::size_t a = 0; a < g.n_az(); ++a) {
                for (std::size_t e = 0; e < g.n_el(); ++e) {
                    const auto& r = t.rows[row++];
                    s.cfr(f, a, e) = {parse_double(r[cre], "re"), parse_double(r[cim], "im")};
                }
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(header_path.string() + ": " + e.what());
    }
}

}  // namespace thz
