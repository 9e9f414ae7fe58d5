#pragma once

// RT-conditioned implicit neural field. A coordinate MLP maps a receiver
// position (sinusoidally encoded) plus the RT feature vector of that position
// to total received power and the delay/azimuth/elevation of the strongest
// path. Backpropagation is written out by hand.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thz/calib.hpp"
#include "thz/chanest.hpp"
#include "thz/raytrace.hpp"
#include "thz/scene.hpp"

namespace thz {

struct NormStats {
    double p_mean = 0.0;
    double p_std = 1.0;
    double tau_mean = 0.0;
    double tau_std = 1.0;

    void validate() const;
};

struct Sample {
    Vec3 x;
    RtFeatures rt;
    double target_p_db = 0.0;
    double target_tau_ns = 0.0;
    double target_az_deg = 0.0;
    double target_el_deg = 0.0;
};

/// Normalized targets: P' = (P - mean)/std, tau' likewise, angles / 360.
struct NormTargets {
    double p = 0.0;
    double tau = 0.0;
    double az = 0.0;
    double el = 0.0;
};

/// Population mean/std of power and delay. Throws ValidationError for fewer
/// than two samples or zero variance.
NormStats compute_norm_stats(const std::vector<Sample>& samples);
NormTargets normalize(const Sample& s, const NormStats& n);
/// Inverse of normalize for one output vector; azimuth is not wrapped.
NormTargets denormalize(const NormTargets& t, const NormStats& n);
std::vector<NormTargets> normalize(const std::vector<Sample>& samples, NormStats& stats_out);

struct InfArch {
    int octaves = 6;
    std::vector<int> hidden{128, 128, 128, 128};

    friend bool operator==(const InfArch&, const InfArch&) = default;
};

/// Number of encoded inputs: 3 * (1 + 2 * octaves) position terms plus
/// 7 RT terms.
int input_dim(const InfArch& arch);
inline constexpr int kRtInputs = 7;
inline constexpr int kOutputs = 4;

struct LayerShape {
    int in = 0;
    int out = 0;
    std::size_t w_offset = 0;  // out x in, row-major
    std::size_t b_offset = 0;
};

struct ChannelAttr {
    double p_db = 0.0;
    double tau_ns = 0.0;
    double az_deg = 0.0;
    double el_deg = 0.0;
    bool los = false;
    bool used_fallback = false;

    friend bool operator==(const ChannelAttr&, const ChannelAttr&) = default;
};

class InfModel {
  public:
    InfModel() = default;
    /// Hidden layers Xavier-uniform from `seed`; the head starts at zero
    /// unless `random_head` is set.
    InfModel(InfArch arch, Box bounds, NormStats norm, std::uint64_t seed, bool random_head = false);

    const InfArch& arch() const { return arch_; }
    const Box& bounds() const { return bounds_; }
    const NormStats& norm() const { return norm_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<LayerShape>& layers() const { return layers_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t head_offset() const { return layers_.back().w_offset; }

    /// Scale used to normalize the distance feature.
    double d_scale() const;

    // Context needed by predict(); persisted with the weights.
    AbgModel nlos_fallback;
    std::string fallback_id = "abg-nlos";
    OffsetTable calibration;
    CalibrationPolicy calibration_policy = CalibrationPolicy::PerOrderMean;
    int trace_max_order = 2;
    double frequency_hz = 300e9;
    bool ablate_rt = false;  // zero the RT inputs

    /// Throws ValidationError when layer sizes do not chain from the encoded
    /// input to four outputs.
    void validate() const;

  private:
    InfArch arch_;
    Box bounds_;
    NormStats norm_;
    std::uint64_t seed_ = 0;
    std::vector<LayerShape> layers_;
    std::vector<double> params_;
};

/// Encoded network input.
std::vector<double> encode_input(const InfModel& m, Vec3 x, const RtFeatures& rt);

/// Raw network output in normalized units.
NormTargets forward_normalized(const InfModel& m, Vec3 x, const RtFeatures& rt);

/// Physical-unit (p_db, tau_ns, az_deg in [0, 360), el_deg).
NormTargets forward(const InfModel& m, Vec3 x, const RtFeatures& rt);

/// RT features that stand in for a missing LoS path: the ABG NLoS power at
/// the direct distance, the direct delay and the geometric direction of the
/// transmitter as seen from x.
RtFeatures fallback_features(Vec3 x, const Node& tx, const AbgModel& abg_nlos);

/// Substitutes the LoS fields of `rt` with the fallback when no LoS path
/// exists; the path count is kept.
RtFeatures condition_features(const RtFeatures& rt, Vec3 x, const Node& tx, const AbgModel& abg_nlos);

/// Test hook: perturbs the backward pass so gradient checks must fail.
enum class BackwardFault { None, DropSiluCurvature };

/// Sum-of-squares loss of one sample in normalized units and its gradient,
/// accumulated into `grad` (scaled by `weight`). Returns the loss.
double accumulate_gradient(const InfModel& m, const Sample& s, std::vector<double>& grad, double weight = 1.0,
                           BackwardFault fault = BackwardFault::None);

/// Mean per-sample loss.
double dataset_loss(const InfModel& m, const std::vector<Sample>& samples);

/// Largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-6) over all
/// parameters, with central differences of step epsilon.
double grad_check(const InfModel& m, const Sample& s, double epsilon = 1e-5,
                  BackwardFault fault = BackwardFault::None);

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    int epochs = 2000;
    int batch_size = 32;  // <= 0 means full batch
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled, per step: p -= lr * wd * p
    Optimizer optimizer = Optimizer::Adam;
    bool head_only = false;
    InfArch arch;

    void validate() const;
};

struct TrainResult {
    InfModel model;
    std::vector<double> loss_history;  // mean per-sample loss of each epoch
};

/// Starts from `init` (its normalization must already be set). Throws
/// NumericalError when the loss becomes non-finite.
TrainResult train(InfModel init, const std::vector<Sample>& samples, const TrainConfig& cfg);

/// Builds a fresh model (norm stats and room bounds from the data) and trains it.
TrainResult train(const std::vector<Sample>& samples, const Box& bounds, const TrainConfig& cfg);

/// Runs the calibrated tracer at x, substitutes the fallback when the LoS is
/// missing and evaluates the network.
ChannelAttr predict(const InfModel& m, const Scene& scene, const Node& tx, Vec3 x);

/// Calibrated isotropic RT features of position x for transmitter tx.
RtFeatures rt_features_at(const Scene& scene, const Node& tx, Vec3 x, int max_order, double frequency_hz,
                          const OffsetTable& calibration, CalibrationPolicy policy);

void save_model(const InfModel& m, const std::filesystem::path& header_path);
InfModel load_model(const std::filesystem::path& header_path);

// Dataset CSV: x,y,z,d,p_los,tau_los,az_los,el_los,n_paths,los_valid,
//              target_p,target_tau,target_az,target_el
std::string samples_to_csv(const std::vector<Sample>& samples);
std::vector<Sample> samples_from_csv(const std::string& text, const std::string& what);

struct DatasetConfig {
    bool anchors = true;                  // include the campaign receivers
    int n_plane = 111;                    // random positions on the receiver plane
    double z = 1.7;                       // height of that plane
    int n_blocked = 60;                   // random positions without any traced path
    double blocked_z_lo = 0.3;
    double blocked_z_hi = 2.4;
    double wall_margin_m = 0.2;
    double rack_margin_m = 0.05;
    std::vector<std::string> transmitters{"tx1", "tx2", "tx3"};
    std::uint64_t seed = 7;
    int max_order = 2;
};

/// Ground-truth targets (total power, strongest path) from the physical twin
/// with isotropic antennas; features from the calibrated nominal tracer with
/// the NLoS fallback applied. Anchors are the campaign receivers.
std::vector<Sample> build_dataset(const Scene& scene, const OffsetTable& calibration, const AbgModel& abg_nlos,
                                  const DatasetConfig& cfg);

/// Total power and strongest-path attributes of a path list; nullopt when empty.
std::optional<NormTargets> channel_targets(const std::vector<Mpc>& paths);

/// Deterministic split: returns (train, held_out).
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double held_out_fraction, std::uint64_t seed);

/// Root-mean-square power error of the model on samples.
double power_rmse(const InfModel& m, const std::vector<Sample>& samples);

}  // namespace thz
