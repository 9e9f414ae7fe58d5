#include "thz/inf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "thz/error.hpp"
#include "thz/io.hpp"
#include "thz/physical_twin.hpp"
#include "thz/rng.hpp"
#include "thz/simd/kernels.hpp"

namespace thz {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Normalization

void NormStats::validate() const {
    if (!(p_std > 0.0) || !(tau_std > 0.0) || !std::isfinite(p_mean) || !std::isfinite(tau_mean)) {
        throw ValidationError("norm stats: standard deviations must be > 0 and means finite");
    }
}

NormStats compute_norm_stats(const std::vector<Sample>& samples) {
    if (samples.size() < 2) throw ValidationError("normalize: need at least two samples");
    const double n = static_cast<double>(samples.size());
    NormStats s;
    s.p_mean = 0.0;
    s.tau_mean = 0.0;
    for (const auto& x : samples) {
        s.p_mean += x.target_p_db;
        s.tau_mean += x.target_tau_ns;
    }
    s.p_mean /= n;
    s.tau_mean /= n;
    double vp = 0.0, vt = 0.0;
    for (const auto& x : samples) {
        vp += (x.target_p_db - s.p_mean) * (x.target_p_db - s.p_mean);
        vt += (x.target_tau_ns - s.tau_mean) * (x.target_tau_ns - s.tau_mean);
    }
    s.p_std = std::sqrt(vp / n);
    s.tau_std = std::sqrt(vt / n);
    if (!(s.p_std > 0.0)) throw ValidationError("normalize: power has zero variance");
    if (!(s.tau_std > 0.0)) throw ValidationError("normalize: delay has zero variance");
    return s;
}

NormTargets normalize(const Sample& s, const NormStats& n) {
    return {(s.target_p_db - n.p_mean) / n.p_std, (s.target_tau_ns - n.tau_mean) / n.tau_std,
            s.target_az_deg / 360.0, s.target_el_deg / 360.0};
}

NormTargets denormalize(const NormTargets& t, const NormStats& n) {
    return {t.p * n.p_std + n.p_mean, t.tau * n.tau_std + n.tau_mean, t.az * 360.0, t.el * 360.0};
}

std::vector<NormTargets> normalize(const std::vector<Sample>& samples, NormStats& stats_out) {
    stats_out = compute_norm_stats(samples);
    std::vector<NormTargets> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(normalize(s, stats_out));
    return out;
}

// ---------------------------------------------------------------------------
// Model

int input_dim(const InfArch& arch) { return 3 * (1 + 2 * arch.octaves) + kRtInputs; }

InfModel::InfModel(InfArch arch, Box bounds, NormStats norm, std::uint64_t seed, bool random_head)
    : arch_(std::move(arch)), bounds_(std::move(bounds)), norm_(norm), seed_(seed) {
    if (arch_.octaves < 0) throw ValidationError("inf: octaves must be >= 0");
    norm_.validate();
    std::vector<int> widths{input_dim(arch_)};
    for (int h : arch_.hidden) {
        if (h < 1) throw ValidationError("inf: hidden widths must be >= 1");
        widths.push_back(h);
    }
    widths.push_back(kOutputs);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        LayerShape s{widths[l], widths[l + 1], off, 0};
        off += static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
        s.b_offset = off;
        off += static_cast<std::size_t>(s.out);
        layers_.push_back(s);
    }
    params_.assign(off, 0.0);
    Rng rng(seed, fnv1a("inf-init"));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerShape& s = layers_[l];
        if (l + 1 == layers_.size() && !random_head) break;
        const double a = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        for (int i = 0; i < s.in * s.out; ++i) params_[s.w_offset + static_cast<std::size_t>(i)] = rng.uniform(-a, a);
    }
    validate();
}

double InfModel::d_scale() const { return std::max(distance(bounds_.min_corner, bounds_.max_corner), 1e-9); }

void InfModel::validate() const {
    if (layers_.empty()) throw ValidationError("inf: model has no layers");
    if (layers_.front().in != input_dim(arch_)) throw ValidationError("inf: first layer does not match the encoding");
    if (layers_.back().out != kOutputs) throw ValidationError("inf: head must have 4 outputs");
    if (layers_.size() != arch_.hidden.size() + 1) throw ValidationError("inf: layer count does not match architecture");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (l + 1 < layers_.size() && layers_[l].out != layers_[l + 1].in) {
            throw ValidationError("inf: layer " + std::to_string(l) + " output does not chain into the next layer");
        }
        if (l < arch_.hidden.size() && layers_[l].out != arch_.hidden[l]) {
            throw ValidationError("inf: layer " + std::to_string(l) + " width does not match architecture");
        }
    }
    const LayerShape& last = layers_.back();
    if (params_.size() != last.b_offset + static_cast<std::size_t>(last.out)) {
        throw ValidationError("inf: parameter count does not match layer shapes");
    }
    norm_.validate();
}

std::vector<double> encode_input(const InfModel& m, Vec3 x, const RtFeatures& rt) {
    std::vector<double> in;
    in.reserve(static_cast<std::size_t>(input_dim(m.arch())));
    const Box& b = m.bounds();
    for (int k = 0; k < 3; ++k) {
        const double span = b.max_corner[k] - b.min_corner[k];
        const double u = span > 0.0 ? 2.0 * (x[k] - b.min_corner[k]) / span - 1.0 : 0.0;
        in.push_back(u);
        double w = kPi;
        for (int o = 0; o < m.arch().octaves; ++o) {
            in.push_back(std::sin(w * u));
            in.push_back(std::cos(w * u));
            w *= 2.0;
        }
    }
    const NormStats& n = m.norm();
    if (m.ablate_rt) {
        in.insert(in.end(), kRtInputs, 0.0);
    } else {
        in.push_back(rt.d_m / m.d_scale());
        in.push_back((rt.p_los_db - n.p_mean) / n.p_std);
        in.push_back((rt.tau_los_ns - n.tau_mean) / n.tau_std);
        in.push_back(rt.az_los_deg / 360.0);
        in.push_back(rt.el_los_deg / 360.0);
        in.push_back(rt.n_paths / 10.0);
        in.push_back(rt.los_valid ? 1.0 : 0.0);
    }
    return in;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Activations of every layer; acts[0] is the input, zs[l] the pre-activation of hidden layer l.
struct Tape {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> zs;
    std::array<double, kOutputs> out{};
};

void run_forward(const InfModel& m, std::vector<double> input, Tape& t) {
    const auto& k = simd::active();
    const auto& P = m.params();
    const auto& layers = m.layers();
    t.acts.clear();
    t.zs.clear();
    t.acts.push_back(std::move(input));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerShape& s = layers[l];
        const std::vector<double>& h = t.acts.back();
        std::vector<double> z(static_cast<std::size_t>(s.out));
        for (int j = 0; j < s.out; ++j) {
            z[static_cast<std::size_t>(j)] =
                k.dot(P.data() + s.w_offset + static_cast<std::size_t>(j) * static_cast<std::size_t>(s.in), h.data(),
                      static_cast<std::size_t>(s.in)) +
                P[s.b_offset + static_cast<std::size_t>(j)];
        }
        if (l + 1 == layers.size()) {
            std::copy(z.begin(), z.end(), t.out.begin());
        } else {
            std::vector<double> a(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = z[j] * sigmoid(z[j]);
            t.zs.push_back(std::move(z));
            t.acts.push_back(std::move(a));
        }
    }
}

std::array<double, kOutputs> target_vector(const InfModel& m, const Sample& s) {
    const NormTargets t = normalize(s, m.norm());
    return {t.p, t.tau, t.az, t.el};
}

}  // namespace

NormTargets forward_normalized(const InfModel& m, Vec3 x, const RtFeatures& rt) {
    Tape t;
    run_forward(m, encode_input(m, x, rt), t);
    return {t.out[0], t.out[1], t.out[2], t.out[3]};
}

NormTargets forward(const InfModel& m, Vec3 x, const RtFeatures& rt) {
    NormTargets o = denormalize(forward_normalized(m, x, rt), m.norm());
    o.az = wrap360(o.az);
    return o;
}

// ---------------------------------------------------------------------------
// Fallback

RtFeatures fallback_features(Vec3 x, const Node& tx, const AbgModel& abg) {
    RtFeatures f;
    f.d_m = distance(tx.position, x);
    const double d = std::max(f.d_m, 1e-3);
    f.p_los_db = -abg.path_loss_db(d);
    f.tau_los_ns = f.d_m / kSpeedOfLight * 1e9;
    const Direction dir = direction_of(tx.position - x);
    f.az_los_deg = dir.az_deg;
    f.el_los_deg = dir.el_deg;
    f.n_paths = 0;
    f.los_valid = false;
    return f;
}

RtFeatures condition_features(const RtFeatures& rt, Vec3 x, const Node& tx, const AbgModel& abg) {
    if (rt.los_valid) return rt;
    RtFeatures f = fallback_features(x, tx, abg);
    f.n_paths = rt.n_paths;
    return f;
}

// ---------------------------------------------------------------------------
// Loss and gradient

double accumulate_gradient(const InfModel& m, const Sample& s, std::vector<double>& grad, double weight,
                           BackwardFault fault) {
    const auto& k = simd::active();
    const auto& P = m.params();
    const auto& layers = m.layers();
    if (grad.size() != P.size()) grad.assign(P.size(), 0.0);

    Tape t;
    run_forward(m, encode_input(m, s.x, s.rt), t);
    const auto target = target_vector(m, s);
    double loss = 0.0;
    std::vector<double> delta(kOutputs);
    for (int j = 0; j < kOutputs; ++j) {
        const double r = t.out[static_cast<std::size_t>(j)] - target[static_cast<std::size_t>(j)];
        loss += r * r;
        delta[static_cast<std::size_t>(j)] = 2.0 * r * weight;
    }

    for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerShape& sh = layers[l];
        const std::vector<double>& h = t.acts[l];
        const std::size_t in = static_cast<std::size_t>(sh.in);
        std::vector<double> dh(in, 0.0);
        for (int j = 0; j < sh.out; ++j) {
            const double dj = delta[static_cast<std::size_t>(j)];
            if (dj == 0.0) continue;
            const std::size_t row = sh.w_offset + static_cast<std::size_t>(j) * in;
            k.axpy(dj, h.data(), grad.data() + row, in);
            grad[sh.b_offset + static_cast<std::size_t>(j)] += dj;
            if (l > 0) k.axpy(dj, P.data() + row, dh.data(), in);
        }
        if (l == 0) break;
        const std::vector<double>& z = t.zs[l - 1];
        delta.assign(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
            const double sg = sigmoid(z[i]);
            const double dsilu = fault == BackwardFault::DropSiluCurvature ? sg : sg * (1.0 + z[i] * (1.0 - sg));
            delta[i] = dh[i] * dsilu;
        }
    }
    return loss;
}

double dataset_loss(const InfModel& m, const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        const NormTargets y = forward_normalized(m, s.x, s.rt);
        const auto t = target_vector(m, s);
        sum += (y.p - t[0]) * (y.p - t[0]) + (y.tau - t[1]) * (y.tau - t[1]) + (y.az - t[2]) * (y.az - t[2]) +
               (y.el - t[3]) * (y.el - t[3]);
    }
    return sum / static_cast<double>(samples.size());
}

double grad_check(const InfModel& m, const Sample& s, double epsilon, BackwardFault fault) {
    if (!(epsilon > 0.0) || epsilon > 1e-3) throw ValidationError("grad_check: epsilon must be in (0, 1e-3]");
    std::vector<double> grad(m.params().size(), 0.0);
    accumulate_gradient(m, s, grad, 1.0, fault);
    InfModel probe = m;
    auto& p = probe.params();
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + epsilon;
        const double lp = dataset_loss(probe, {s});
        p[i] = orig - epsilon;
        const double lm = dataset_loss(probe, {s});
        p[i] = orig;
        const double num = (lp - lm) / (2.0 * epsilon);
        const double rel = std::abs(grad[i] - num) / std::max(std::abs(grad[i]) + std::abs(num), 1e-6);
        worst = std::max(worst, rel);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("train: decay rates must be in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ValidationError("train: epsilon must be > 0");
    if (!(weight_decay >= 0.0)) throw ValidationError("train: weight decay must be >= 0");
}

TrainResult train(InfModel model, const std::vector<Sample>& samples, const TrainConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw ValidationError("train: no samples");
    model.validate();
    const auto& k = simd::active();
    const std::size_t n = samples.size();
    const std::size_t batch = cfg.batch_size <= 0 ? n : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    const std::size_t np = model.params().size();
    const std::size_t first = cfg.head_only ? model.head_offset() : 0;
    const std::size_t len = np - first;

    std::vector<double> grad(np), m1(np, 0.0), m2(np, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, fnv1a("inf-shuffle"));
    TrainResult res;
    res.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) {
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(start + batch, n);
            const double w = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                epoch_loss += accumulate_gradient(model, samples[order[i]], grad, w);
            }
            ++step;
            double* p = model.params().data() + first;
            const double* g = grad.data() + first;
            if (cfg.weight_decay > 0.0) k.axpy(-cfg.learning_rate * cfg.weight_decay, p, p, len);
            if (cfg.optimizer == Optimizer::Adam) {
                const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
                const double lr_t = cfg.learning_rate * std::sqrt(bc2) / bc1;
                k.adam_step(p, g, m1.data() + first, m2.data() + first, len, lr_t, cfg.beta1, cfg.beta2, cfg.epsilon);
            } else {
                k.axpy(-cfg.learning_rate, g, p, len);
            }
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw NumericalError("train: loss became non-finite at epoch " + std::to_string(epoch) +
                                 "; lower the learning rate");
        }
        res.loss_history.push_back(epoch_loss);
    }
    res.model = std::move(model);
    return res;
}

TrainResult train(const std::vector<Sample>& samples, const Box& bounds, const TrainConfig& cfg) {
    const NormStats stats = compute_norm_stats(samples);
    return train(InfModel(cfg.arch, bounds, stats, cfg.seed), samples, cfg);
}

// ---------------------------------------------------------------------------
// Inference

RtFeatures rt_features_at(const Scene& scene, const Node& tx, Vec3 x, int max_order, double frequency_hz,
                          const OffsetTable& calibration, CalibrationPolicy policy) {
    Node rx;
    rx.name = "probe";
    rx.role = NodeRole::Rx;
    rx.position = x;
    rx.pattern = AntennaPattern::make_isotropic();
    const Node iso_tx = with_isotropic_antenna(tx);
    TraceConfig tc;
    tc.max_order = max_order;
    tc.frequency_hz = frequency_hz;
    const auto paths = apply_offsets(trace(scene, iso_tx, rx, tc), calibration, policy);
    return rt_features(paths, iso_tx, rx);
}

ChannelAttr predict(const InfModel& m, const Scene& scene, const Node& tx, Vec3 x) {
    const RtFeatures raw =
        rt_features_at(scene, tx, x, m.trace_max_order, m.frequency_hz, m.calibration, m.calibration_policy);
    const RtFeatures rt = condition_features(raw, x, tx, m.nlos_fallback);
    const NormTargets o = forward(m, x, rt);
    ChannelAttr a;
    a.p_db = o.p;
    a.tau_ns = o.tau;
    a.az_deg = o.az;
    a.el_deg = o.el;
    a.los = raw.los_valid;
    a.used_fallback = !raw.los_valid;
    if (!std::isfinite(a.p_db) || !std::isfinite(a.tau_ns) || !std::isfinite(a.az_deg) || !std::isfinite(a.el_deg)) {
        throw NumericalError("predict: non-finite output");
    }
    return a;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void save_model(const InfModel& m, const std::filesystem::path& header_path) {
    m.validate();
    const std::filesystem::path weights = header_path.parent_path() / (header_path.stem().string() + ".weights.csv");
    json h;
    h["format"] = "thz-inf-v1";
    h["octaves"] = m.arch().octaves;
    h["hidden"] = m.arch().hidden;
    h["input_dim"] = input_dim(m.arch());
    h["outputs"] = kOutputs;
    h["activation"] = "silu";
    h["bounds"] = {{"min", vec_json(m.bounds().min_corner)}, {"max", vec_json(m.bounds().max_corner)}};
    h["norm"] = {{"p_mean", m.norm().p_mean},
                 {"p_std", m.norm().p_std},
                 {"tau_mean", m.norm().tau_mean},
                 {"tau_std", m.norm().tau_std}};
    h["seed"] = m.seed();
    h["ablate_rt"] = m.ablate_rt;
    h["fallback_id"] = m.fallback_id;
    h["fallback"] = json::parse(abg_to_json(m.nlos_fallback));
    h["calibration_policy"] = policy_name(m.calibration_policy);
    h["calibration"] = json::parse(m.calibration.to_json());
    h["trace_max_order"] = m.trace_max_order;
    h["frequency_hz"] = m.frequency_hz;
    h["weights"] = weights.filename().string();

    std::string w;
    w.reserve(m.params().size() * 24);
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
        const LayerShape& s = m.layers()[l];
        w += "# layer " + std::to_string(l) + " W " + std::to_string(s.out) + " " + std::to_string(s.in) + "\n";
        for (int r = 0; r < s.out; ++r) {
            for (int c = 0; c < s.in; ++c) {
                if (c) w += ',';
                w += fmt_exact(m.params()[s.w_offset + static_cast<std::size_t>(r * s.in + c)]);
            }
            w += '\n';
        }
        w += "# layer " + std::to_string(l) + " b " + std::to_string(s.out) + "\n";
        for (int r = 0; r < s.out; ++r) {
            if (r) w += ',';
            w += fmt_exact(m.params()[s.b_offset + static_cast<std::size_t>(r)]);
        }
        w += '\n';
    }
    write_text_atomic(weights, w);
    write_text_atomic(header_path, h.dump(2) + "\n");
}

InfModel load_model(const std::filesystem::path& header_path) {
    const std::string what = header_path.string();
    const std::string text = read_text_file(header_path);
    InfModel m;
    std::filesystem::path weights;
    try {
        const auto h = nlohmann::json::parse(text);
        if (h.at("format").get<std::string>() != "thz-inf-v1") throw ParseError(what + ": unknown model format");
        InfArch arch;
        arch.octaves = h.at("octaves").get<int>();
        arch.hidden = h.at("hidden").get<std::vector<int>>();
        if (h.at("input_dim").get<int>() != input_dim(arch)) {
            throw ValidationError(what + ": input_dim does not match the encoding");
        }
        Box bounds{"bounds", vec_from(h.at("bounds").at("min")), vec_from(h.at("bounds").at("max")), ""};
        const auto& n = h.at("norm");
        NormStats ns{n.at("p_mean").get<double>(), n.at("p_std").get<double>(), n.at("tau_mean").get<double>(),
                     n.at("tau_std").get<double>()};
        m = InfModel(arch, bounds, ns, h.at("seed").get<std::uint64_t>());
        m.ablate_rt = h.value("ablate_rt", false);
        m.fallback_id = h.value("fallback_id", "abg-nlos");
        m.nlos_fallback = abg_from_json(h.at("fallback").dump(), what + ".fallback");
        m.calibration_policy = policy_from_name(h.value("calibration_policy", "per-order-mean"));
        m.calibration = OffsetTable::from_json(h.at("calibration").dump(), what + ".calibration");
        m.trace_max_order = h.value("trace_max_order", 2);
        m.frequency_hz = h.value("frequency_hz", 300e9);
        weights = header_path.parent_path() / h.at("weights").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }

    const std::string wtext = read_text_file(weights);
    std::istringstream in(wtext);
    std::string line;
    auto next_data_line = [&](const std::string& expect) {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                if (line.find(expect) == std::string::npos) throw ValidationError(weights.string() + ": expected " + expect);
                continue;
            }
            return;
        }
        throw ValidationError(weights.string() + ": truncated weight file, expected " + expect);
    };
    auto read_row = [&](std::size_t offset, int count) {
        std::size_t pos = 0;
        int c = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::size_t stop = comma == std::string::npos ? line.size() : comma;
            if (c >= count) throw ValidationError(weights.string() + ": row longer than declared width");
            m.params()[offset + static_cast<std::size_t>(c)] =
                parse_double(std::string_view(line).substr(pos, stop - pos), weights.string());
            ++c;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (c != count) throw ValidationError(weights.string() + ": row shorter than declared width");
    };
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
        const LayerShape& s = m.layers()[l];
        for (int r = 0; r < s.out; ++r) {
            next_data_line(r == 0 ? "layer " + std::to_string(l) + " W " + std::to_string(s.out) + " " +
                                        std::to_string(s.in)
                                  : std::string("W"));
            read_row(s.w_offset + static_cast<std::size_t>(r * s.in), s.in);
        }
        next_data_line("layer " + std::to_string(l) + " b " + std::to_string(s.out));
        read_row(s.b_offset, s.out);
    }
    while (std::getline(in, line)) {
        if (!line.empty()) throw ValidationError(weights.string() + ": extra data after the last layer");
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Dataset

std::string samples_to_csv(const std::vector<Sample>& samples) {
    std::string out =
        "x,y,z,d,p_los,tau_los,az_los,el_los,n_paths,los_valid,target_p,target_tau,target_az,target_el\n";
    for (const auto& s : samples) {
        const RtFeatures& f = s.rt;
        out += fmt_num(s.x.x) + "," + fmt_num(s.x.y) + "," + fmt_num(s.x.z) + "," + fmt_num(f.d_m) + "," +
               fmt_num(f.p_los_db) + "," + fmt_num(f.tau_los_ns) + "," + fmt_num(f.az_los_deg) + "," +
               fmt_num(f.el_los_deg) + "," + std::to_string(f.n_paths) + "," + (f.los_valid ? "1" : "0") + "," +
               fmt_num(s.target_p_db) + "," + fmt_num(s.target_tau_ns) + "," + fmt_num(s.target_az_deg) + "," +
               fmt_num(s.target_el_deg) + "\n";
    }
    return out;
}

std::vector<Sample> samples_from_csv(const std::string& text, const std::string& what) {
    const CsvTable t = parse_csv(text, what);
    const char* names[] = {"x",       "y",       "z",       "d",         "p_los",    "tau_los",    "az_los",
                           "el_los",  "n_paths", "los_valid", "target_p", "target_tau", "target_az", "target_el"};
    std::size_t c[14];
    for (int i = 0; i < 14; ++i) c[i] = t.column(names[i]);
    std::vector<Sample> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        Sample s;
        auto d = [&](int i) { return parse_double(r[c[i]], what); };
        s.x = {d(0), d(1), d(2)};
        s.rt.d_m = d(3);
        s.rt.p_los_db = d(4);
        s.rt.tau_los_ns = d(5);
        s.rt.az_los_deg = d(6);
        s.rt.el_los_deg = d(7);
        s.rt.n_paths = static_cast<int>(parse_int(r[c[8]], what));
        s.rt.los_valid = parse_int(r[c[9]], what) != 0;
        s.target_p_db = d(10);
        s.target_tau_ns = d(11);
        s.target_az_deg = d(12);
        s.target_el_deg = d(13);
        for (double v : {s.target_p_db, s.target_tau_ns, s.target_az_deg, s.target_el_deg}) {
            if (!std::isfinite(v)) throw ValidationError(what + ": non-finite target");
        }
        out.push_back(s);
    }
    return out;
}

std::optional<NormTargets> channel_targets(const std::vector<Mpc>& paths) {
    if (paths.empty()) return std::nullopt;
    double sum = 0.0;
    const Mpc* best = &paths.front();
    for (const Mpc& p : paths) {
        sum += db_to_linear(p.power_db);
        if (p.power_db > best->power_db) best = &p;
    }
    return NormTargets{linear_to_db(sum), best->delay_ns, wrap360(best->az_deg), best->el_deg};
}

std::vector<Sample> build_dataset(const Scene& scene, const OffsetTable& calibration, const AbgModel& abg_nlos,
                                  const DatasetConfig& cfg) {
    if (cfg.transmitters.empty()) throw ValidationError("dataset: no transmitters");
    for (const auto& t : cfg.transmitters) scene.node(t);
    const PhysicalTwinConfig truth;

    std::vector<std::pair<std::string, Vec3>> points;
    for (const Link& l : cfg.anchors ? scene.links() : std::vector<Link>{}) {
        if (std::find(cfg.transmitters.begin(), cfg.transmitters.end(), l.tx) == cfg.transmitters.end()) continue;
        points.emplace_back(l.tx, scene.node(l.rx).position);
    }
    Rng rng(cfg.seed, fnv1a("dataset"));
    const Box& room = scene.room();
    auto near_rack = [&](Vec3 p) {
        return std::any_of(scene.obstacles().begin(), scene.obstacles().end(), [&](const Box& b) {
            return p.x > b.min_corner.x - cfg.rack_margin_m && p.x < b.max_corner.x + cfg.rack_margin_m &&
                   p.y > b.min_corner.y - cfg.rack_margin_m && p.y < b.max_corner.y + cfg.rack_margin_m &&
                   p.z < b.max_corner.z + cfg.rack_margin_m;
        });
    };
    auto draw = [&](double z_lo, double z_hi) {
        const std::string& tx = cfg.transmitters[rng.below(cfg.transmitters.size())];
        const Vec3 p{rng.uniform(room.min_corner.x + cfg.wall_margin_m, room.max_corner.x - cfg.wall_margin_m),
                     rng.uniform(room.min_corner.y + cfg.wall_margin_m, room.max_corner.y - cfg.wall_margin_m),
                     z_lo == z_hi ? z_lo : rng.uniform(z_lo, z_hi)};
        return std::make_pair(tx, p);
    };
    for (int placed = 0; placed < cfg.n_plane;) {
        auto [tx, p] = draw(cfg.z, cfg.z);
        if (near_rack(p) || distance(p, scene.node(tx).position) < 0.3) continue;
        points.emplace_back(tx, p);
        ++placed;
    }
    TraceConfig probe_cfg;
    probe_cfg.max_order = cfg.max_order;
    long attempts = 0;
    for (int placed = 0; placed < cfg.n_blocked;) {
        if (++attempts > 1000000) throw ValidationError("dataset: could not find enough positions without traced paths");
        auto [tx, p] = draw(cfg.blocked_z_lo, cfg.blocked_z_hi);
        if (near_rack(p)) continue;
        Node rx;
        rx.name = "probe";
        rx.position = p;
        rx.pattern = AntennaPattern::make_isotropic();
        if (!trace(scene, with_isotropic_antenna(scene.node(tx)), rx, probe_cfg).empty()) continue;
        points.emplace_back(tx, p);
        ++placed;
    }

    std::vector<Sample> out;
    out.reserve(points.size());
    for (const auto& [tx_name, p] : points) {
        const Node tx = with_isotropic_antenna(scene.node(tx_name));
        Node rx;
        rx.name = "probe";
        rx.position = p;
        rx.pattern = AntennaPattern::make_isotropic();
        const auto target = channel_targets(ground_truth_paths(scene, tx, rx, truth));
        if (!target) continue;
        Sample s;
        s.x = p;
        const RtFeatures raw = rt_features_at(scene, tx, p, cfg.max_order, truth.trace.frequency_hz, calibration,
                                              CalibrationPolicy::PerOrderMean);
        s.rt = condition_features(raw, p, tx, abg_nlos);
        s.target_p_db = target->p;
        s.target_tau_ns = target->tau;
        s.target_az_deg = target->az;
        s.target_el_deg = target->el;
        out.push_back(s);
    }
    return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double held_out_fraction, std::uint64_t seed) {
    if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) {
        throw ValidationError("split: held-out fraction must be in [0, 1)");
    }
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed, fnv1a("split"));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n_hold = static_cast<std::size_t>(std::llround(held_out_fraction * static_cast<double>(samples.size())));
    std::vector<bool> hold(samples.size(), false);
    for (std::size_t i = 0; i < n_hold; ++i) hold[idx[i]] = true;
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (std::size_t i = 0; i < samples.size(); ++i) (hold[i] ? out.second : out.first).push_back(samples[i]);
    return out;
}

double power_rmse(const InfModel& m, const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) {
        const double e = forward(m, s.x, s.rt).p - s.target_p_db;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(samples.size()));
}

}  // namespace thz
