#pragma once

#include "photodp/clipping.hpp"
#include "photodp/data.hpp"
#include "photodp/linalg.hpp"
#include "photodp/network.hpp"
#include "photodp/opu.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace photodp {

/// Update rules. DFA/TDFA/PDFA run the clip-scale-noise mechanism when
/// TrainConfig::private_mechanism is set; BP never does, NoisyBP always
/// does (noise enters once, at the top of the network).
enum class Algorithm { BP, NoisyBP, DFA, TDFA, PDFA };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct Batch {
    Matrix x;                // m x n_0
    std::vector<int> labels; // m class indices
};

struct TrainConfig {
    Algorithm algorithm = Algorithm::DFA;
    bool private_mechanism = false;
    std::size_t epochs = 15;
    std::size_t batch_size = 256;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double sigma = 0.0;            // read-out noise std
    double ternary_threshold = 0.15;
    ClipConfig clip;
    bool per_pass_noise = false;   // PDFA: noise on each optical pass
    std::uint64_t seed_init = 1;
    std::uint64_t seed_shuffle = 2;
    std::uint64_t seed_noise = 3;
    std::uint64_t seed_feedback = 4;
    bool align_probe = false;      // record BP-vs-update cosine per step
    std::size_t align_every = 1;

    void validate() const;
};

struct NetworkSpec {
    std::vector<std::size_t> widths; // n_0 .. n_L
    ActivationKind hidden = ActivationKind::Tanh;
};

struct RunMetrics {
    std::vector<double> train_loss;    // per epoch
    std::vector<double> val_acc;       // per epoch
    std::vector<double> test_acc;      // per epoch
    std::vector<double> align_l2_mean; // per epoch, NaN when not probed
    // Probed alignment series: align_steps[l][k] is the cosine between the
    // realized update and the BP gradient of layer l at probe k.
    std::vector<std::vector<double>> align_steps;
    std::vector<std::size_t> align_step_index;
    std::vector<double> max_abs_z;     // per layer, observed over training
    std::size_t steps_per_epoch = 0;
    std::size_t total_steps = 0;
    double final_val_acc = 0.0;
    double final_test_acc = 0.0;
};

struct StepInfo {
    std::size_t epoch = 0;
    std::size_t step_in_epoch = 0;
    std::size_t global_step = 0;
    double batch_loss = 0.0;
    const std::vector<Matrix>* deltas = nullptr;    // averaged, pre-momentum
    const std::vector<double>* alignment = nullptr; // per layer, may be null
};

using StepObserver = std::function<void(const StepInfo&)>;

struct TrainResult {
    RunMetrics metrics;
    Network net;
};

// --- single-batch update rules -------------------------------------------
// Every rule returns the batch-averaged gradient-direction deltas; the
// optimizer applies momentum and the learning rate on top.

/// Exact backpropagation.
std::vector<Matrix> bp_update(const Network& net, const Batch& batch,
                              double* batch_loss = nullptr);

/// Vanilla DFA: hidden layers receive B^{l+1} e, the last layer uses the
/// true error (projecting it would be dimensionally pointless). Passing a
/// ternary threshold quantizes the projected error first.
std::vector<Matrix> dfa_update(const Network& net, const std::vector<Matrix>& feedback,
                               const Batch& batch,
                               std::optional<double> ternary_threshold = std::nullopt,
                               double* batch_loss = nullptr);

/// The private mechanism on the raw error: per-sample scaled projections
/// plus fresh Gaussian noise, clipped activations in the outer product.
/// Noise standard normals are drawn from each layer's OpuSim stream and the
/// top layer from `top_noise`, scaled by sigma.
std::vector<Matrix> pdfa_update(const Network& net, std::vector<OpuSim>& opus,
                                const ClipConfig& clip, double sigma, const Batch& batch,
                                Rng& top_noise, double* batch_loss = nullptr);

/// Same mechanism on a ternarized error. two_pass projects the positive and
/// negative parts separately the way the hardware does.
std::vector<Matrix> tdfa_update(const Network& net, std::vector<OpuSim>& opus,
                                const ClipConfig& clip, double sigma, double threshold,
                                const Batch& batch, Rng& top_noise, bool two_pass = false,
                                double* batch_loss = nullptr);

/// BP baseline with the noise applied once at the top of the network and
/// clipped activations in the outer products.
std::vector<Matrix> noisy_bp_update(const Network& net, const ClipConfig& clip,
                                    double sigma, const Batch& batch, Rng& top_noise,
                                    double* batch_loss = nullptr);

/// Cosine similarity of two flattened layer deltas; errors on a zero delta.
double alignment(const std::vector<Matrix>& delta_a, const std::vector<Matrix>& delta_b,
                 std::size_t layer);

/// Fixed feedback matrices for plain DFA: one per hidden layer, entries
/// N(0, 1/n_{l+1}), drawn once from the seed.
std::vector<Matrix> make_feedback(const std::vector<std::size_t>& widths,
                                  std::uint64_t seed);

/// Per-layer OPU simulators holding the feedback matrices and the read-out
/// noise streams. pdfa_streams switches the noise-seed derivation so that a
/// simulated-OPU run draws different noise than a same-seed GPU run.
std::vector<OpuSim> make_opus(const std::vector<std::size_t>& widths, double sigma,
                              std::uint64_t feedback_seed, std::uint64_t noise_seed,
                              bool pdfa_streams, bool per_pass_noise);

/// Algorithm 1: momentum SGD over without-replacement minibatches, one
/// update rule per TrainConfig::algorithm, metrics recorded per epoch.
TrainResult train(const TrainConfig& cfg, const NetworkSpec& spec,
                  const LabeledDataset& train_set, const LabeledDataset* val_set,
                  const LabeledDataset* test_set, const StepObserver& observer = {});

} // namespace photodp
