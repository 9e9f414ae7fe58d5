#include "thz/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thz/campaign.hpp"
#include "thz/error.hpp"
#include "thz/inf.hpp"
#include "thz/io.hpp"
#include "thz/sysperf.hpp"

namespace thz {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Options {
    std::string scene;
    std::string out;
    std::string config;
    std::uint64_t seed = 7;
    int max_order = 2;
    std::optional<double> threshold;
    double grid_step = 0.25;
    double z = 1.7;

    // stage specific
    std::vector<std::string> inputs;
    std::vector<std::string> links;
    bool all_links = false;
    std::string measured;
    std::string rt;
    std::string policy = "per-order-mean";
    std::string dataset;
    std::string model;
    std::string calibration;
    std::string abg;
    int epochs = 2000;
    double held_out = 0.2;
    std::string source = "inf";
    std::vector<std::string> transmitters;
    std::string serving = "tx3";
    std::vector<std::string> interferers;
    std::string link_budget;
    LinkBudget budget;
    double fading_sigma = 0.0;
};

fs::path out_dir(const Options& o) {
    fs::path dir = o.out;
    if (dir.empty()) {
        const char* env = std::getenv("THZ_OUT");
        dir = env && *env ? env : "thz_out";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

fs::path input_or(const std::string& given, const fs::path& fallback) {
    return given.empty() ? fallback : fs::path(given);
}

void require_file(const fs::path& p, const std::string& role) {
    if (!fs::exists(p)) throw IoError(role + " '" + p.string() + "' does not exist; run the producing stage first");
}

Scene load_scene_or_default(const Options& o) {
    if (!o.scene.empty()) return load_scene(o.scene);
    const fs::path p = out_dir(o) / "scene.json";
    if (fs::exists(p)) return load_scene(p);
    return canonical_scene();
}

// The JSON config overrides command-line values key by key.
void apply_config(Options& o) {
    if (o.config.empty()) return;
    const std::string text = read_text_file(o.config);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(o.config + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError(o.config + ": config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "scene") o.scene = v.get<std::string>();
            else if (key == "out") o.out = v.get<std::string>();
            else if (key == "seed") o.seed = v.get<std::uint64_t>();
            else if (key == "max-order") o.max_order = v.get<int>();
            else if (key == "threshold") o.threshold = v.get<double>();
            else if (key == "grid-step") o.grid_step = v.get<double>();
            else if (key == "z") o.z = v.get<double>();
            else if (key == "policy") o.policy = v.get<std::string>();
            else if (key == "epochs") o.epochs = v.get<int>();
            else if (key == "held-out") o.held_out = v.get<double>();
            else if (key == "source") o.source = v.get<std::string>();
            else if (key == "tx") o.transmitters = v.get<std::vector<std::string>>();
            else if (key == "serving") o.serving = v.get<std::string>();
            else if (key == "interferer") o.interferers = v.get<std::vector<std::string>>();
            else if (key == "fading-sigma") o.fading_sigma = v.get<double>();
            else if (key == "link-budget") o.budget = link_budget_from_json(v.dump(), o.config + ".link-budget", o.budget);
            else throw ValidationError(o.config + ": unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(o.config + ": " + e.what());
    }
}

void finalize(Options& o) {
    apply_config(o);
    if (!o.link_budget.empty()) o.budget = link_budget_from_json(read_text_file(o.link_budget), o.link_budget, o.budget);
    if (o.max_order < 0 || o.max_order > 2) throw ValidationError("--max-order must be 0, 1 or 2");
    if (!(o.grid_step > 0.0)) throw ValidationError("--grid-step must be > 0");
    if (o.epochs < 1) throw ValidationError("--epochs must be >= 1");
}

Link parse_link(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
        throw ValidationError("link '" + s + "' must be written TX:RX");
    }
    return {s.substr(0, colon), s.substr(colon + 1)};
}

CampaignConfig campaign_config(const Options& o) {
    CampaignConfig c;
    c.seed = o.seed;
    c.rt_max_order = o.max_order;
    if (o.threshold) c.extract.rel_threshold_db = *o.threshold;
    return c;
}

std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Stages

int stage_scene_init(const Options& o, std::ostream& out) {
    const fs::path p = o.scene.empty() ? out_dir(o) / "scene.json" : fs::path(o.scene);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    save_scene(canonical_scene(), p);
    out << "wrote " << p.string() << "\n";
    return 0;
}

int stage_scene_validate(const Options& o, std::ostream& out) {
    const fs::path p = o.scene.empty() ? out_dir(o) / "scene.json" : fs::path(o.scene);
    const Scene s = load_scene(p);
    out << "ok: " << p.string() << " (" << s.nodes().size() << " nodes, " << s.obstacles().size() << " racks, "
        << s.links().size() << " links)\n";
    return 0;
}

int stage_trace(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    const CampaignConfig cfg = campaign_config(o);
    std::vector<LinkPaths> links;
    for (const Link& l : scene.links()) links.push_back({l.tx, l.rx, rt_link(scene, l, cfg), {}});
    const fs::path p = out_dir(o) / "rt_paths.csv";
    save_paths_csv(p, links);
    std::size_t n = 0;
    for (const auto& l : links) n += l.paths.size();
    out << "traced " << links.size() << " links, " << n << " paths -> " << p.string() << "\n";
    return 0;
}

std::vector<fs::path> write_soundings(const Scene& scene, const std::vector<Link>& links, const Options& o) {
    const CampaignConfig cfg = campaign_config(o);
    const fs::path dir = out_dir(o) / "soundings";
    fs::create_directories(dir);
    std::vector<fs::path> written;
    for (const Link& l : links) {
        const fs::path p = dir / (l.tx + "_" + l.rx + ".json");
        save_sounding(sound_link(scene, l, cfg), p);
        written.push_back(p);
    }
    return written;
}

int stage_sound(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    std::vector<Link> links;
    if (o.all_links) {
        links = scene.links();
    } else if (!o.links.empty()) {
        for (const auto& s : o.links) {
            Link l = parse_link(s);
            scene.node(l.tx);
            scene.node(l.rx);
            links.push_back(l);
        }
    } else {
        if (scene.links().empty()) throw ValidationError("scene has no links; pass --link TX:RX");
        links.push_back(scene.links().front());
    }
    for (const auto& p : write_soundings(scene, links, o)) out << "wrote " << p.string() << "\n";
    return 0;
}

void write_measurements(const fs::path& dir, const std::vector<LinkPaths>& measured,
                        const std::vector<PathLossSample>& samples, const std::string& stem) {
    save_paths_csv(dir / (stem + "_mpcs.csv"), measured);
    write_text_atomic(dir / (stem + "_pathloss.csv"), path_loss_samples_to_csv(samples));
}

int stage_extract(const Options& o, std::ostream& out, const std::string& stem = "measured") {
    const Scene scene = load_scene_or_default(o);
    const fs::path dir = out_dir(o);
    const CampaignConfig cfg = campaign_config(o);
    std::vector<LinkPaths> measured;
    std::vector<PathLossSample> samples;
    auto add = [&](const Link& l, std::vector<Mpc> mpcs) {
        if (auto pl = measured_path_loss(scene, l, mpcs)) samples.push_back(*pl);
        measured.push_back({l.tx, l.rx, std::move(mpcs), {}});
    };
    if (o.all_links) {
        for (const Link& l : scene.links()) add(l, extract_mpcs(sound_link(scene, l, cfg), cfg.extract));
    } else {
        std::vector<fs::path> headers(o.inputs.begin(), o.inputs.end());
        if (headers.empty()) {
            const fs::path sdir = dir / "soundings";
            if (fs::is_directory(sdir)) {
                for (const auto& e : fs::directory_iterator(sdir)) {
                    if (e.path().extension() == ".json") headers.push_back(e.path());
                }
            }
            std::sort(headers.begin(), headers.end());
        }
        if (headers.empty()) throw IoError("no soundings found; run 'sound' first, pass --in, or use --all-links");
        for (const auto& h : headers) {
            const Sounding s = load_sounding(h);
            add({s.tx_id, s.rx_id}, extract_mpcs(s, cfg.extract));
        }
    }
    write_measurements(dir, measured, samples, stem);
    std::size_t n = 0;
    for (const auto& l : measured) n += l.paths.size();
    out << "extracted " << n << " components from " << measured.size() << " links -> "
        << (dir / (stem + "_mpcs.csv")).string() << "\n";
    return 0;
}

int stage_fit_abg(const Options& o, std::ostream& out) {
    const fs::path dir = out_dir(o);
    const fs::path in = o.inputs.empty() ? dir / "measured_pathloss.csv" : fs::path(o.inputs.front());
    require_file(in, "path-loss samples");
    const auto samples = path_loss_samples_from_csv(read_text_file(in), in.string());
    const AbgPair fit = fit_abg_by_condition(samples);
    if (!fit.los && !fit.nlos) throw ValidationError("fit-abg: neither the LoS nor the NLoS subset can be fitted");
    for (const auto* m : {&fit.los, &fit.nlos}) {
        if (!*m) continue;
        const fs::path p = dir / ("abg_" + (*m)->condition + ".json");
        write_text_atomic(p, abg_to_json(**m));
        out << (*m)->condition << ": alpha " << fmt_num((*m)->alpha) << " beta " << fmt_num((*m)->beta) << " (n "
            << (*m)->n_samples << ") -> " << p.string() << "\n";
    }
    return 0;
}

std::map<std::pair<std::string, std::string>, std::vector<Mpc>> by_link(const std::vector<LinkPaths>& links) {
    std::map<std::pair<std::string, std::string>, std::vector<Mpc>> m;
    for (const auto& l : links) {
        auto& v = m[{l.tx, l.rx}];
        v.insert(v.end(), l.paths.begin(), l.paths.end());
    }
    return m;
}

int stage_calibrate(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    const fs::path dir = out_dir(o);
    const fs::path mp = input_or(o.measured, dir / "measured_mpcs.csv");
    const fs::path rp = input_or(o.rt, dir / "rt_paths.csv");
    require_file(mp, "measured components");
    require_file(rp, "traced paths");
    const CalibrationPolicy policy = policy_from_name(o.policy);
    const auto measured = by_link(load_paths_csv(mp));
    const auto rt = by_link(load_paths_csv(rp));

    OffsetTable table;
    ojson matchings = ojson::array();
    std::vector<LinkPaths> calibrated;
    for (const Link& l : scene.links()) {
        auto r = rt.find({l.tx, l.rx});
        if (r == rt.end()) continue;
        auto mit = measured.find({l.tx, l.rx});
        const std::vector<Mpc> meas = mit == measured.end() ? std::vector<Mpc>{} : mit->second;
        const Matching m = match_paths(meas, r->second);
        table.add(r->second, m);
        matchings.push_back(ojson::parse(matching_to_json(m, policy, l.tx, l.rx)));
        LinkPaths lp{l.tx, l.rx, apply_calibration(r->second, m, policy), std::vector<bool>(r->second.size(), false)};
        for (const auto& p : m.pairs) lp.calibrated[p.rt] = true;
        calibrated.push_back(std::move(lp));
    }
    ojson cal = ojson::parse(table.to_json());
    cal["policy"] = policy_name(policy);
    write_text_atomic(dir / "calibration.json", json_text(cal));
    write_text_atomic(dir / "matching.json", json_text(matchings));
    save_paths_csv(dir / "rt_calibrated.csv", calibrated, true);
    out << "calibrated " << calibrated.size() << " links; mean offset "
        << (table.global_mean() ? fmt_num(*table.global_mean()) + " dB" : std::string("n/a (no matches)")) << "\n";
    return 0;
}

std::pair<OffsetTable, CalibrationPolicy> load_calibration(const fs::path& p) {
    require_file(p, "calibration");
    const std::string text = read_text_file(p);
    OffsetTable t = OffsetTable::from_json(text, p.string());
    CalibrationPolicy policy = CalibrationPolicy::PerOrderMean;
    try {
        policy = policy_from_name(nlohmann::json::parse(text).value("policy", "per-order-mean"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
    return {t, policy};
}

int stage_train(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    const fs::path dir = out_dir(o);
    const auto [table, policy] = load_calibration(input_or(o.calibration, dir / "calibration.json"));
    const fs::path abg_path = input_or(o.abg, dir / "abg_nlos.json");
    require_file(abg_path, "NLoS path-loss model");
    const AbgModel abg = abg_from_json(read_text_file(abg_path), abg_path.string());

    std::vector<Sample> data;
    if (!o.dataset.empty()) {
        require_file(o.dataset, "dataset");
        data = samples_from_csv(read_text_file(o.dataset), o.dataset);
    } else {
        DatasetConfig dc;
        dc.seed = o.seed;
        dc.max_order = o.max_order;
        data = build_dataset(scene, table, abg, dc);
        write_text_atomic(dir / "dataset.csv", samples_to_csv(data));
    }
    auto [train_set, held_out] = split_dataset(data, o.held_out, o.seed);
    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.seed = o.seed;
    TrainResult res = train(train_set, scene.room(), tc);
    InfModel& m = res.model;
    m.nlos_fallback = abg;
    m.fallback_id = abg_path.filename().string();
    m.calibration = table;
    m.calibration_policy = policy;
    m.trace_max_order = o.max_order;
    save_model(m, dir / "model.json");

    std::string loss = "epoch,loss\n";
    for (std::size_t i = 0; i < res.loss_history.size(); ++i) {
        loss += std::to_string(i) + "," + fmt_num(res.loss_history[i]) + "\n";
    }
    write_text_atomic(dir / "loss.csv", loss);
    ojson report{{"n_train", train_set.size()},
                 {"n_held_out", held_out.size()},
                 {"epochs", o.epochs},
                 {"initial_loss", sig9(res.loss_history.front())},
                 {"final_loss", sig9(res.loss_history.back())},
                 {"train_power_rmse_db", sig9(power_rmse(m, train_set))},
                 {"held_out_power_rmse_db", sig9(power_rmse(m, held_out))}};
    write_text_atomic(dir / "train_report.json", json_text(report));
    out << "trained on " << train_set.size() << " samples; loss " << fmt_num(res.loss_history.front()) << " -> "
        << fmt_num(res.loss_history.back()) << "; held-out power RMSE " << fmt_num(power_rmse(m, held_out))
        << " dB\n";
    return 0;
}

std::vector<std::string> map_transmitters(const Options& o, const Scene& scene) {
    if (!o.transmitters.empty()) return o.transmitters;
    std::vector<std::string> txs;
    for (const auto& [name, n] : scene.nodes()) {
        if (n.role == NodeRole::Tx) txs.push_back(name);
    }
    return txs;
}

fs::path map_path(const fs::path& dir, const std::string& source, const std::string& tx) {
    return dir / "maps" / (source + "_" + tx + ".json");
}

int stage_map(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    const fs::path dir = out_dir(o);
    MapOptions mo;
    mo.max_order = o.max_order;
    std::optional<InfModel> model;
    if (o.source == "inf") {
        const fs::path mp = input_or(o.model, dir / "model.json");
        require_file(mp, "model");
        model = load_model(mp);
    } else if (o.source == "rt") {
        const fs::path cp = input_or(o.calibration, dir / "calibration.json");
        if (fs::exists(cp)) std::tie(mo.calibration, mo.policy) = load_calibration(cp);
    } else {
        throw ValidationError("--source must be 'rt' or 'inf'");
    }
    const GridSpec grid = GridSpec::covering(scene.room(), o.grid_step, o.z);
    fs::create_directories(dir / "maps");
    for (const auto& tx : map_transmitters(o, scene)) {
        const RadioMap m = build_radio_map(o.source, scene, scene.node(tx), grid, mo, model ? &*model : nullptr);
        const fs::path p = map_path(dir, o.source, tx);
        save_radio_map(m, p);
        out << "wrote " << p.string() << " (" << grid.nx << " x " << grid.ny << ")\n";
    }
    return 0;
}

struct CoverageResult {
    double probability = 0.0;
    fs::path curve;
};

CoverageResult run_coverage(const Options& o, const Scene& scene, const fs::path& dir) {
    std::map<std::string, RadioMap> maps;
    std::vector<std::string> ids{o.serving};
    ids.insert(ids.end(), o.interferers.begin(), o.interferers.end());
    for (const auto& id : ids) {
        const fs::path p = map_path(dir, o.source, id);
        require_file(p, "radio map");
        maps.emplace(id, load_radio_map(p));
    }
    Deployment d;
    d.serving = o.serving;
    d.interferers = o.interferers;
    for (const auto& [id, m] : maps) d.maps[id] = &m;
    const std::vector<bool> mask = open_cells(scene, maps.at(o.serving).grid);
    Fading fading{o.fading_sigma, o.seed};
    const double t = o.threshold.value_or(0.0);
    CoverageResult r;
    r.probability = coverage_probability(d, o.budget, t, &mask, fading);
    const auto curve = coverage_curve(d, o.budget, threshold_range(-20.0, 40.0, 1.0), &mask, fading);
    r.curve = dir / ("coverage_" + o.source + "_" + o.serving + ".csv");
    write_text_atomic(r.curve, coverage_curve_to_csv(curve));
    return r;
}

int stage_coverage(const Options& o, std::ostream& out) {
    const Scene scene = load_scene_or_default(o);
    const CoverageResult r = run_coverage(o, scene, out_dir(o));
    out << fmt_num(r.probability) << "\n";
    return 0;
}

int stage_run_all(Options o, std::ostream& out) {
    const fs::path dir = out_dir(o);
    o.scene = (dir / "scene.json").string();
    stage_scene_init(o, out);
    stage_trace(o, out);

    // Demo fixture: one stored sounding and its extraction.
    const Link first = load_scene(o.scene).links().front();
    Options demo = o;
    demo.links = {first.tx + ":" + first.rx};
    stage_sound(demo, out);
    demo.inputs = {(dir / "soundings" / (first.tx + "_" + first.rx + ".json")).string()};
    stage_extract(demo, out, "demo");

    // Full campaign, sounded and extracted in memory.
    Options campaign = o;
    campaign.all_links = true;
    stage_extract(campaign, out);
    stage_fit_abg(o, out);
    stage_calibrate(o, out);
    stage_train(o, out);

    Options maps = o;
    for (const char* src : {"rt", "inf"}) {
        maps.source = src;
        stage_map(maps, out);
    }

    const Scene scene = load_scene(o.scene);
    ojson summary;
    summary["seed"] = o.seed;
    summary["threshold_db"] = o.threshold.value_or(0.0);
    summary["link_budget"] = ojson::parse(link_budget_to_json(o.budget));
    for (const char* src : {"rt", "inf"}) {
        for (const char* serving : {"tx3", "tx1"}) {
            Options c = o;
            c.source = src;
            c.serving = serving;
            c.interferers.clear();
            const CoverageResult r = run_coverage(c, scene, dir);
            summary["coverage"][src][serving] = sig9(r.probability);
            out << "coverage " << src << " " << serving << ": " << fmt_num(r.probability) << "\n";
        }
    }
    write_text_atomic(dir / "summary.json", json_text(summary));
    out << "run-all complete -> " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Argument parsing

void add_common(CLI::App* app, Options& o) {
    app->add_option("--scene", o.scene, "Scene JSON file (default: <out>/scene.json, else the canonical scene)");
    app->add_option("--seed", o.seed, "Seed for every random stream")->capture_default_str();
    app->add_option("--out", o.out, "Output directory (default: $THZ_OUT, else ./thz_out)");
    app->add_option("--max-order", o.max_order, "Maximum reflection order of the tracer (0-2)")->capture_default_str();
    app->add_option("--threshold", o.threshold,
                    "extract: dynamic range below the strongest cell in dB (default 25); "
                    "coverage: SINR threshold in dB (default 0)");
    app->add_option("--grid-step", o.grid_step, "Radio-map cell size in meters")->capture_default_str();
    app->add_option("--config", o.config, "JSON file whose keys (flag names without dashes) override flags");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"THz data-center digital twin: measurement emulation, RT calibration, neural field, coverage"};
    app.name("thztwin");
    app.require_subcommand(1);
    std::function<int()> action;
    auto on = [&](CLI::App* sub, auto fn) {
        sub->callback([&, fn] { action = [&, fn] { return fn(o, out); }; });
    };

    CLI::App* scene = app.add_subcommand("scene", "Create or check a scene file");
    scene->require_subcommand(1);
    CLI::App* init = scene->add_subcommand("init", "Write the canonical scene");
    add_common(init, o);
    on(init, stage_scene_init);
    CLI::App* validate = scene->add_subcommand("validate", "Check every scene invariant");
    add_common(validate, o);
    on(validate, stage_scene_validate);

    CLI::App* trace_cmd = app.add_subcommand("trace", "Trace every campaign link (nominal materials) -> rt_paths.csv");
    add_common(trace_cmd, o);
    on(trace_cmd, stage_trace);

    CLI::App* sound = app.add_subcommand("sound", "Synthesize directional soundings -> soundings/TX_RX.json");
    add_common(sound, o);
    sound->add_option("--link", o.links, "Link to sound, TX:RX (repeatable; default: the first scene link)");
    sound->add_flag("--all-links", o.all_links, "Sound every link of the scene");
    on(sound, stage_sound);

    CLI::App* extract = app.add_subcommand("extract", "Extract components -> measured_mpcs.csv, measured_pathloss.csv");
    add_common(extract, o);
    extract->add_option("--in", o.inputs, "Sounding header(s) (default: <out>/soundings/*.json)");
    extract->add_flag("--all-links", o.all_links, "Sound and extract every scene link in memory");
    on(extract, [](const Options& op, std::ostream& os) { return stage_extract(op, os); });

    CLI::App* fit = app.add_subcommand("fit-abg", "Fit LoS/NLoS path-loss models -> abg_los.json, abg_nlos.json");
    add_common(fit, o);
    fit->add_option("--in", o.inputs, "Path-loss CSV (default: <out>/measured_pathloss.csv)");
    on(fit, stage_fit_abg);

    CLI::App* cal = app.add_subcommand("calibrate", "Match measured to traced paths -> calibration.json");
    add_common(cal, o);
    cal->add_option("--measured", o.measured, "Measured components CSV (default: <out>/measured_mpcs.csv)");
    cal->add_option("--rt", o.rt, "Traced paths CSV (default: <out>/rt_paths.csv)");
    cal->add_option("--policy", o.policy, "Unmatched-path policy: per-order-mean | global-mean | matched-only")
        ->capture_default_str();
    on(cal, stage_calibrate);

    CLI::App* tr = app.add_subcommand("train", "Build the dataset and train the neural field -> model.json");
    add_common(tr, o);
    tr->add_option("--dataset", o.dataset, "Existing dataset CSV (default: build from the physical twin)");
    tr->add_option("--calibration", o.calibration, "Calibration JSON (default: <out>/calibration.json)");
    tr->add_option("--abg", o.abg, "NLoS path-loss model (default: <out>/abg_nlos.json)");
    tr->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
    tr->add_option("--held-out", o.held_out, "Held-out fraction")->capture_default_str();
    on(tr, stage_train);

    CLI::App* map = app.add_subcommand("map", "Radio maps on the receiver plane -> maps/SOURCE_TX.json");
    add_common(map, o);
    map->add_option("--source", o.source, "rt | inf")->capture_default_str();
    map->add_option("--tx", o.transmitters, "Transmitter (repeatable; default: all)");
    map->add_option("--z", o.z, "Receiver plane height in meters")->capture_default_str();
    map->add_option("--model", o.model, "Model header (default: <out>/model.json)");
    map->add_option("--calibration", o.calibration, "Calibration JSON for rt maps (default: <out>/calibration.json)");
    on(map, stage_map);

    CLI::App* cov = app.add_subcommand("coverage", "Coverage probability at --threshold; writes the curve CSV");
    add_common(cov, o);
    cov->add_option("--source", o.source, "Map source: rt | inf")->capture_default_str();
    cov->add_option("--serving", o.serving, "Serving transmitter")->capture_default_str();
    cov->add_option("--interferer", o.interferers, "Interfering transmitter (repeatable)");
    cov->add_option("--link-budget", o.link_budget, "Link budget JSON");
    cov->add_option("--fading-sigma", o.fading_sigma, "Lognormal fading sigma in dB (0 = off)")
        ->capture_default_str();
    on(cov, stage_coverage);

    CLI::App* all = app.add_subcommand("run-all", "Run the whole chain on the canonical scene");
    add_common(all, o);
    all->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
    on(all, stage_run_all);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        // Subcommand --help surfaces as CallForHelp from the sub-app.
        if (e.get_exit_code() == 0) return 0;
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        finalize(o);
        return action ? action() : 2;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace thz
