#include "photodp/training.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace photodp {

namespace {

Matrix augment_ones(const Matrix& m) {
    Matrix out(m.rows(), m.cols() + 1);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::memcpy(out.data() + i * out.cols(), m.data() + i * m.cols(),
                    m.cols() * sizeof(double));
        out(i, m.cols()) = 1.0;
    }
    return out;
}

// phi'(z), elementwise over the batch.
Matrix derivative_matrix(ActivationKind kind, const Matrix& z) {
    Matrix d(z.rows(), z.cols());
    const double* zp = z.data();
    double* dp = d.data();
    const auto n = static_cast<std::ptrdiff_t>(z.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) dp[i] = activation_derivative_value(kind, zp[i]);
    return d;
}

void hadamard_inplace(Matrix& a, const Matrix& b) {
    double* ap = a.data();
    const double* bp = b.data();
    const auto n = static_cast<std::ptrdiff_t>(a.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) ap[i] *= bp[i];
}

void scale_rows_to_cap(Matrix& m, double cap) {
    const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        scale_inplace(m.row(static_cast<std::size_t>(i)), cap);
    }
}

void clip_rows(Matrix& m, const LayerClipParams& p, bool magnitude_floor) {
    const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        clip_activations_inplace(m.row(static_cast<std::size_t>(i)), p, magnitude_floor);
    }
}

// Sequential draw (noise streams are single-owner), added in place.
void add_noise(Matrix& m, Rng& rng, double sigma) {
    if (sigma == 0.0) return;
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) p[i] += sigma * rng.normal();
}

void scale_matrix(Matrix& m, double factor) {
    double* p = m.data();
    const auto n = static_cast<std::ptrdiff_t>(m.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) p[i] *= factor;
}

void track_max_abs(const Matrix& m, double& running_max) {
    double local = running_max;
    const double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) local = std::max(local, std::fabs(p[i]));
    running_max = local;
}

struct MechanismSpec {
    const ClipConfig* clip = nullptr; // nullptr: vanilla update, no clipping
    double sigma = 0.0;
    std::optional<double> ternary_threshold;
    bool two_pass = false;
};

// Shared engine behind dfa_update / pdfa_update / tdfa_update. `feedback`
// holds one projection matrix per hidden layer; noise standard normals are
// taken from `noise_streams` (one per layer, last entry feeds the output
// layer).
std::vector<Matrix> dfa_engine(const Network& net, const std::vector<const Matrix*>& feedback,
                               const Batch& batch, const MechanismSpec& mech,
                               const std::vector<Rng*>& noise_streams, double* batch_loss,
                               std::vector<double>* max_abs_z) {
    if (batch.x.rows() == 0) throw std::invalid_argument("update: empty batch");
    const std::size_t depth = net.depth();
    if (feedback.size() + 1 != depth) {
        throw std::invalid_argument("update: feedback matrix count does not match network");
    }
    const std::size_t m = batch.x.rows();
    const BatchTrace trace = net.forward_batch(batch.x);
    auto [loss, errors] = loss_and_error_batch(trace.z.back(), batch.labels);
    if (batch_loss) *batch_loss = loss;

    // Ternarized error, split into its binary parts for the two-pass mode.
    Matrix tern, tern_pos, tern_neg;
    if (mech.ternary_threshold) {
        const double t = *mech.ternary_threshold;
        if (t < 0.0) throw std::invalid_argument("update: negative ternary threshold");
        tern = Matrix(m, errors.cols());
        if (mech.two_pass) {
            tern_pos = Matrix(m, errors.cols());
            tern_neg = Matrix(m, errors.cols());
        }
        for (std::size_t i = 0; i < errors.size(); ++i) {
            const double v = errors.data()[i];
            double q = 0.0;
            if (v > t) q = 1.0;
            else if (v < -t) q = -1.0;
            tern.data()[i] = q;
            if (mech.two_pass) {
                tern_pos.data()[i] = q > 0.0 ? 1.0 : 0.0;
                tern_neg.data()[i] = q < 0.0 ? 1.0 : 0.0;
            }
        }
    }
    const Matrix& projected_input = mech.ternary_threshold ? tern : errors;

    std::vector<Matrix> deltas(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const Layer& layer = net.layers()[l];
        Matrix signal;
        if (l + 1 == depth) {
            signal = errors; // true error at the top; no projection
        } else {
            const Matrix& b = *feedback[l];
            if (b.cols() != projected_input.cols() || b.rows() != layer.w.rows()) {
                throw std::invalid_argument("update: feedback matrix shape mismatch");
            }
            if (mech.two_pass && mech.ternary_threshold) {
                signal = gemm_nt(tern_pos, b);
                const Matrix neg = gemm_nt(tern_neg, b);
                for (std::size_t i = 0; i < signal.size(); ++i) {
                    signal.data()[i] -= neg.data()[i];
                }
            } else {
                signal = gemm_nt(projected_input, b);
            }
        }
        if (mech.clip) {
            scale_rows_to_cap(signal, mech.clip->tau_b);
            add_noise(signal, *noise_streams[l], mech.sigma);
        }
        if (layer.act != ActivationKind::Identity) {
            const Matrix d = derivative_matrix(layer.act, trace.z[l]);
            hadamard_inplace(signal, d);
        }

        Matrix right = augment_ones(l == 0 ? batch.x : trace.h[l - 1]);
        if (mech.clip) {
            const LayerClipParams p = layer_params(*mech.clip, right.cols());
            clip_rows(right, p, mech.clip->magnitude_floor);
        }
        deltas[l] = gemm_tn(signal, right);
        scale_matrix(deltas[l], 1.0 / static_cast<double>(m));
        if (max_abs_z) track_max_abs(trace.z[l], (*max_abs_z)[l]);
    }
    return deltas;
}

// Backpropagation engine; when mech.clip is set the top error is scaled and
// noised before the recursion and the outer-product activations are clipped.
std::vector<Matrix> bp_engine(const Network& net, const Batch& batch,
                              const MechanismSpec& mech, Rng* top_noise, double* batch_loss,
                              std::vector<double>* max_abs_z) {
    if (batch.x.rows() == 0) throw std::invalid_argument("update: empty batch");
    const std::size_t depth = net.depth();
    const std::size_t m = batch.x.rows();
    const BatchTrace trace = net.forward_batch(batch.x);
    auto [loss, errors] = loss_and_error_batch(trace.z.back(), batch.labels);
    if (batch_loss) *batch_loss = loss;

    if (mech.clip) {
        scale_rows_to_cap(errors, mech.clip->tau_b);
        add_noise(errors, *top_noise, mech.sigma);
    }

    std::vector<Matrix> deltas(depth);
    Matrix dz = std::move(errors); // phi' of the identity output layer is 1
    for (std::size_t l = depth; l-- > 0;) {
        if (l + 1 < depth) {
            const Layer& next = net.layers()[l + 1];
            Matrix back = gemm_leftcols(dz, next.w, next.w.cols() - 1);
            const Matrix d = derivative_matrix(net.layers()[l].act, trace.z[l]);
            hadamard_inplace(back, d);
            dz = std::move(back);
        }
        Matrix right = augment_ones(l == 0 ? batch.x : trace.h[l - 1]);
        if (mech.clip) {
            const LayerClipParams p = layer_params(*mech.clip, right.cols());
            clip_rows(right, p, mech.clip->magnitude_floor);
        }
        deltas[l] = gemm_tn(dz, right);
        scale_matrix(deltas[l], 1.0 / static_cast<double>(m));
        if (max_abs_z) track_max_abs(trace.z[l], (*max_abs_z)[l]);
    }
    return deltas;
}

std::vector<const Matrix*> matrix_pointers(const std::vector<Matrix>& ms) {
    std::vector<const Matrix*> out;
    out.reserve(ms.size());
    for (const Matrix& m : ms) out.push_back(&m);
    return out;
}

std::vector<const Matrix*> opu_matrices(const std::vector<OpuSim>& opus) {
    std::vector<const Matrix*> out;
    out.reserve(opus.size());
    for (const OpuSim& o : opus) out.push_back(&o.matrix());
    return out;
}

} // namespace

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::BP: return "bp";
        case Algorithm::NoisyBP: return "noisy-bp";
        case Algorithm::DFA: return "dfa";
        case Algorithm::TDFA: return "tdfa";
        case Algorithm::PDFA: return "pdfa-sim";
    }
    return "?";
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "bp") return Algorithm::BP;
    if (name == "noisy-bp" || name == "noisy_bp") return Algorithm::NoisyBP;
    if (name == "dfa") return Algorithm::DFA;
    if (name == "tdfa") return Algorithm::TDFA;
    if (name == "pdfa" || name == "pdfa-sim") return Algorithm::PDFA;
    throw std::invalid_argument("unknown algorithm: " + name);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning rate must be positive");
    }
    if (sigma < 0.0) throw std::invalid_argument("TrainConfig: sigma must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("TrainConfig: momentum must lie in [0,1)");
    }
    if (ternary_threshold < 0.0) {
        throw std::invalid_argument("TrainConfig: ternary threshold must be non-negative");
    }
    if (algorithm == Algorithm::BP && private_mechanism) {
        throw std::invalid_argument("TrainConfig: plain BP does not take the mechanism; "
                                    "use noisy-bp");
    }
    if (algorithm == Algorithm::NoisyBP && !private_mechanism) {
        throw std::invalid_argument("TrainConfig: noisy-bp requires the mechanism");
    }
    if (private_mechanism) clip.validate();
}

std::vector<Matrix> bp_update(const Network& net, const Batch& batch, double* batch_loss) {
    return bp_engine(net, batch, MechanismSpec{}, nullptr, batch_loss, nullptr);
}

std::vector<Matrix> noisy_bp_update(const Network& net, const ClipConfig& clip, double sigma,
                                    const Batch& batch, Rng& top_noise, double* batch_loss) {
    MechanismSpec mech;
    mech.clip = &clip;
    mech.sigma = sigma;
    return bp_engine(net, batch, mech, &top_noise, batch_loss, nullptr);
}

std::vector<Matrix> dfa_update(const Network& net, const std::vector<Matrix>& feedback,
                               const Batch& batch, std::optional<double> ternary_threshold,
                               double* batch_loss) {
    MechanismSpec mech;
    mech.ternary_threshold = ternary_threshold;
    std::vector<Rng*> none(net.depth(), nullptr);
    return dfa_engine(net, matrix_pointers(feedback), batch, mech, none, batch_loss,
                      nullptr);
}

std::vector<Matrix> pdfa_update(const Network& net, std::vector<OpuSim>& opus,
                                const ClipConfig& clip, double sigma, const Batch& batch,
                                Rng& top_noise, double* batch_loss) {
    MechanismSpec mech;
    mech.clip = &clip;
    mech.sigma = sigma;
    std::vector<Rng*> streams;
    streams.reserve(opus.size() + 1);
    for (OpuSim& o : opus) streams.push_back(&o.noise_stream());
    streams.push_back(&top_noise);
    return dfa_engine(net, opu_matrices(opus), batch, mech, streams, batch_loss, nullptr);
}

std::vector<Matrix> tdfa_update(const Network& net, std::vector<OpuSim>& opus,
                                const ClipConfig& clip, double sigma, double threshold,
                                const Batch& batch, Rng& top_noise, bool two_pass,
                                double* batch_loss) {
    MechanismSpec mech;
    mech.clip = &clip;
    mech.sigma = sigma;
    mech.ternary_threshold = threshold;
    mech.two_pass = two_pass;
    std::vector<Rng*> streams;
    streams.reserve(opus.size() + 1);
    for (OpuSim& o : opus) streams.push_back(&o.noise_stream());
    streams.push_back(&top_noise);
    return dfa_engine(net, opu_matrices(opus), batch, mech, streams, batch_loss, nullptr);
}

double alignment(const std::vector<Matrix>& delta_a, const std::vector<Matrix>& delta_b,
                 std::size_t layer) {
    if (layer >= delta_a.size() || layer >= delta_b.size()) {
        throw std::invalid_argument("alignment: layer index out of range");
    }
    const Matrix& a = delta_a[layer];
    const Matrix& b = delta_b[layer];
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("alignment: shape mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("alignment: zero-norm delta");
    }
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

std::vector<Matrix> make_feedback(const std::vector<std::size_t>& widths,
                                  std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("make_feedback: bad widths");
    std::vector<Matrix> feedback;
    const std::size_t n_out = widths.back();
    for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
        Rng rng(mix64(seed ^ mix64(l)));
        const std::size_t n_l = widths[l + 1];
        Matrix b(n_l, n_out);
        // standard-normal entries: |Be| ~ sqrt(n_l) |e|, so the scaled
        // projection saturates its tau_b cap and the feedback signal keeps
        // a useful magnitude for the hidden layers
        for (double& v : std::span(b.data(), b.size())) v = rng.normal();
        feedback.push_back(std::move(b));
    }
    return feedback;
}

std::vector<OpuSim> make_opus(const std::vector<std::size_t>& widths, double sigma,
                              std::uint64_t feedback_seed, std::uint64_t noise_seed,
                              bool pdfa_streams, bool per_pass_noise) {
    if (widths.size() < 2) throw std::invalid_argument("make_opus: bad widths");
    std::vector<OpuSim> opus;
    const std::size_t n_out = widths.back();
    // The simulated-OPU noise streams are derived with a distinct tag so a
    // pdfa-sim run is an honest re-randomization of a same-seed GPU run.
    const std::uint64_t stream_tag = pdfa_streams ? 0x0b5e55edULL : 0ULL;
    for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
        opus.emplace_back(n_out, widths[l + 1], 1.0, mix64(feedback_seed ^ mix64(l)),
                          mix64(noise_seed ^ mix64(l ^ stream_tag)), sigma, per_pass_noise);
    }
    return opus;
}

TrainResult train(const TrainConfig& cfg, const NetworkSpec& spec,
                  const LabeledDataset& train_set, const LabeledDataset* val_set,
                  const LabeledDataset* test_set, const StepObserver& observer) {
    cfg.validate();
    if (spec.widths.size() < 2) throw std::invalid_argument("train: need at least 2 widths");
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    if (train_set.images.cols() != spec.widths.front()) {
        throw std::invalid_argument("train: input width does not match the dataset");
    }
    if (cfg.batch_size > train_set.size()) {
        throw std::invalid_argument("train: batch size exceeds training set");
    }

    Rng init_rng(cfg.seed_init);
    Network net = Network::init(spec.widths, spec.hidden, init_rng);
    const std::size_t depth = net.depth();

    const bool dfa_family = cfg.algorithm == Algorithm::DFA ||
                            cfg.algorithm == Algorithm::TDFA ||
                            cfg.algorithm == Algorithm::PDFA;
    std::vector<OpuSim> opus;
    std::vector<Matrix> feedback;
    if (dfa_family) {
        opus = make_opus(spec.widths, cfg.sigma, cfg.seed_feedback, cfg.seed_noise,
                         cfg.algorithm == Algorithm::PDFA, cfg.per_pass_noise);
        if (!cfg.private_mechanism) {
            for (const OpuSim& o : opus) feedback.push_back(o.matrix());
        }
    }
    Rng top_noise(mix64(cfg.seed_noise ^ mix64(0xf1a1ULL)));

    std::vector<Matrix> velocity;
    velocity.reserve(depth);
    for (const Layer& layer : net.layers()) {
        velocity.emplace_back(layer.w.rows(), layer.w.cols());
    }

    RunMetrics metrics;
    metrics.max_abs_z.assign(depth, 0.0);
    metrics.align_steps.assign(depth, {});
    const std::size_t steps_per_epoch = train_set.size() / cfg.batch_size;
    metrics.steps_per_epoch = steps_per_epoch;
    const std::size_t align_layer = depth > 1 ? 1 : 0;

    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(mix64(cfg.seed_shuffle ^ mix64(epoch)));
        const auto batches = minibatches(train_set.size(), cfg.batch_size, epoch_rng);
        double loss_sum = 0.0;
        double align_sum = 0.0;
        std::size_t align_count = 0;

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            Batch batch;
            batch.x = Matrix(idx.size(), train_set.images.cols());
            batch.labels.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                std::memcpy(batch.x.data() + i * batch.x.cols(),
                            train_set.images.data() + idx[i] * train_set.images.cols(),
                            batch.x.cols() * sizeof(double));
                batch.labels[i] = train_set.labels[idx[i]];
            }

            double batch_loss = 0.0;
            std::vector<Matrix> deltas;
            MechanismSpec mech;
            if (cfg.private_mechanism) {
                mech.clip = &cfg.clip;
                mech.sigma = cfg.sigma;
            }
            switch (cfg.algorithm) {
                case Algorithm::BP:
                    deltas = bp_engine(net, batch, MechanismSpec{}, nullptr, &batch_loss,
                                       &metrics.max_abs_z);
                    break;
                case Algorithm::NoisyBP:
                    deltas = bp_engine(net, batch, mech, &top_noise, &batch_loss,
                                       &metrics.max_abs_z);
                    break;
                case Algorithm::TDFA:
                case Algorithm::PDFA:
                    mech.ternary_threshold = cfg.ternary_threshold;
                    mech.two_pass = cfg.algorithm == Algorithm::PDFA;
                    [[fallthrough]];
                case Algorithm::DFA: {
                    std::vector<Rng*> streams;
                    for (OpuSim& o : opus) streams.push_back(&o.noise_stream());
                    streams.push_back(&top_noise);
                    deltas = dfa_engine(net,
                                        cfg.private_mechanism ? opu_matrices(opus)
                                                              : matrix_pointers(feedback),
                                        batch, mech, streams, &batch_loss,
                                        &metrics.max_abs_z);
                    break;
                }
            }
            loss_sum += batch_loss;

            std::vector<double> align_values;
            const bool probe = cfg.align_probe && (global_step % cfg.align_every == 0);
            if (probe) {
                const std::vector<Matrix> bp_ref = bp_update(net, batch);
                align_values.reserve(depth);
                for (std::size_t l = 0; l < depth; ++l) {
                    align_values.push_back(alignment(deltas, bp_ref, l));
                }
                for (std::size_t l = 0; l < depth; ++l) {
                    metrics.align_steps[l].push_back(align_values[l]);
                }
                metrics.align_step_index.push_back(global_step);
                align_sum += align_values[align_layer];
                ++align_count;
            }

            for (std::size_t l = 0; l < depth; ++l) {
                double* v = velocity[l].data();
                double* w = net.layers()[l].w.data();
                const double* d = deltas[l].data();
                const auto n = static_cast<std::ptrdiff_t>(velocity[l].size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    v[i] = cfg.momentum * v[i] + d[i];
                    w[i] -= cfg.learning_rate * v[i];
                }
            }

            if (observer) {
                StepInfo info;
                info.epoch = epoch;
                info.step_in_epoch = bi;
                info.global_step = global_step;
                info.batch_loss = batch_loss;
                info.deltas = &deltas;
                info.alignment = probe ? &align_values : nullptr;
                observer(info);
            }
            ++global_step;
        }

        metrics.train_loss.push_back(batches.empty() ? 0.0
                                                     : loss_sum / static_cast<double>(
                                                                      batches.size()));
        metrics.align_l2_mean.push_back(
            align_count ? align_sum / static_cast<double>(align_count)
                        : std::numeric_limits<double>::quiet_NaN());
        metrics.val_acc.push_back(
            val_set && val_set->size() ? accuracy(net, val_set->images, val_set->labels)
                                       : std::numeric_limits<double>::quiet_NaN());
        metrics.test_acc.push_back(
            test_set && test_set->size() ? accuracy(net, test_set->images, test_set->labels)
                                         : std::numeric_limits<double>::quiet_NaN());
    }

    metrics.total_steps = global_step;
    metrics.final_val_acc = metrics.val_acc.empty() ? 0.0 : metrics.val_acc.back();
    metrics.final_test_acc = metrics.test_acc.empty() ? 0.0 : metrics.test_acc.back();
    return {std::move(metrics), std::move(net)};
}

} // namespace photodp
