#include <doctest.h>

#include <stdexcept>

#include "photodp/training.hpp"

#include <cmath>

using namespace photodp;

namespace {

Batch random_batch(Rng& rng, std::size_t m, std::size_t dim, std::size_t classes) {
    Batch batch;
    batch.x = Matrix(m, dim);
    batch.labels.resize(m);
    for (std::size_t i = 0; i < batch.x.size(); ++i) batch.x.data()[i] = rng.normal();
    for (std::size_t i = 0; i < m; ++i) {
        batch.labels[i] = static_cast<int>(rng.next_u64() % classes);
    }
    return batch;
}

double batch_loss_of(const Network& net, const Batch& batch) {
    const BatchTrace trace = net.forward_batch(batch.x);
    return loss_and_error_batch(trace.z.back(), batch.labels).first;
}

double max_rel_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t i = 0; i < a[l].size(); ++i) {
            const double x = a[l].data()[i], y = b[l].data()[i];
            const double scale = std::max({std::fabs(x), std::fabs(y), 1e-12});
            worst = std::max(worst, std::fabs(x - y) / scale);
        }
    }
    return worst;
}

double frobenius(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

// no-op clipping for mechanism-limit checks
ClipConfig huge_clip() {
    ClipConfig clip;
    clip.tau_h_min = 0.0;
    clip.tau_h_max = 1e9;
    clip.tau_b = 1e9;
    return clip;
}

LabeledDataset synthetic_dataset(Rng& rng, std::size_t n, std::size_t dim,
                                 std::size_t classes) {
    LabeledDataset ds;
    ds.image_rows = 1;
    ds.image_cols = dim;
    ds.images = Matrix(n, dim);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = static_cast<int>(i % classes);
        for (std::size_t j = 0; j < dim; ++j) {
            // class-dependent means so the task is learnable
            ds.images(i, j) = 0.2 * rng.normal() +
                              0.5 * std::sin(static_cast<double>(ds.labels[i] + 1) *
                                             static_cast<double>(j + 1));
        }
    }
    return ds;
}

} // namespace

TEST_CASE("bp_update matches central finite differences") {
    Rng rng(1);
    Network net = Network::init({4, 3, 2}, ActivationKind::Tanh, rng); // 23 parameters
    Rng br(2);
    const Batch batch = random_batch(br, 6, 4, 2);
    const std::vector<Matrix> grads = bp_update(net, batch);

    const double step = 1e-6;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        for (std::size_t i = 0; i < net.layers()[l].w.size(); ++i) {
            double& w = net.layers()[l].w.data()[i];
            const double original = w;
            w = original + step;
            const double plus = batch_loss_of(net, batch);
            w = original - step;
            const double minus = batch_loss_of(net, batch);
            w = original;
            const double fd = (plus - minus) / (2 * step);
            CHECK(grads[l].data()[i] ==
                  doctest::Approx(fd).epsilon(1e-5).scale(std::max(1.0, std::fabs(fd))));
        }
    }
}

TEST_CASE("single-layer bp_update equals the analytic softmax gradient") {
    Rng rng(3);
    Network net = Network::init({3, 2}, ActivationKind::Tanh, rng); // output layer only
    Rng br(4);
    const Batch batch = random_batch(br, 5, 3, 2);
    const std::vector<Matrix> grads = bp_update(net, batch);

    const BatchTrace trace = net.forward_batch(batch.x);
    const auto [loss, errors] = loss_and_error_batch(trace.z.back(), batch.labels);
    Matrix expected(2, 4);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                expected(r, c) += errors(i, r) * batch.x(i, c) / 5.0;
            }
            expected(r, 3) += errors(i, r) / 5.0;
        }
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(grads[0].data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("duplicating every sample leaves the bp update unchanged") {
    Rng rng(5);
    const Network net = Network::init({4, 4, 3}, ActivationKind::Sigmoid, rng);
    Rng br(6);
    const Batch batch = random_batch(br, 7, 4, 3);
    Batch doubled;
    doubled.x = Matrix(14, 4);
    doubled.labels.resize(14);
    for (std::size_t i = 0; i < 14; ++i) {
        const std::size_t src = i % 7;
        for (std::size_t j = 0; j < 4; ++j) doubled.x(i, j) = batch.x(src, j);
        doubled.labels[i] = batch.labels[src];
    }
    CHECK(max_rel_diff(bp_update(net, batch), bp_update(net, doubled)) < 1e-12);
    CHECK_THROWS_AS(bp_update(net, Batch{Matrix(0, 4), {}}), std::invalid_argument);
}

TEST_CASE("dfa_update is zero when the error vanishes") {
    // saturated logits make softmax(z) exactly one-hot, so e = 0
    Layer layer;
    layer.w = Matrix(3, 3);
    layer.w(0, 0) = 2000.0;
    layer.act = ActivationKind::Identity;
    Network net({layer});
    Batch batch;
    batch.x = Matrix(2, 2);
    batch.x(0, 0) = 1.0;
    batch.x(1, 0) = 1.0;
    batch.labels = {0, 0};
    const auto deltas = dfa_update(net, {}, batch);
    for (const Matrix& d : deltas) {
        for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.data()[i] == 0.0);
    }
}

TEST_CASE("dfa with transposed forward weights reproduces backprop") {
    Rng rng(7);
    const Network net = Network::init({4, 3, 2}, ActivationKind::Tanh, rng);
    // B = W2 without its bias column, transposed
    const Matrix& w2 = net.layers()[1].w;
    Matrix b(3, 2);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 3; ++j) b(j, i) = w2(i, j);
    }
    Rng br(8);
    const Batch batch = random_batch(br, 9, 4, 2);
    const auto dfa = dfa_update(net, {b}, batch);
    const auto bp = bp_update(net, batch);
    CHECK(max_rel_diff(dfa, bp) < 1e-10);

    // and the realized update aligns perfectly with the gradient
    for (std::size_t l = 0; l < net.depth(); ++l) {
        CHECK(alignment(dfa, bp, l) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("the dfa update depends on B only through its action on the errors") {
    Rng rng(9);
    const Network net = Network::init({4, 5, 3}, ActivationKind::Tanh, rng);
    Rng br(10);
    const Batch batch = random_batch(br, 2, 4, 3); // 2 error vectors in R^3
    const BatchTrace trace = net.forward_batch(batch.x);
    const auto [loss, errors] = loss_and_error_batch(trace.z.back(), batch.labels);

    // w orthogonal to both errors: orthonormalize the error span first
    std::vector<Vector> basis;
    for (std::size_t i = 0; i < 2; ++i) {
        Vector e = errors.row_vector(i);
        for (const Vector& b : basis) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 3; ++j) dot += e[j] * b[j];
            for (std::size_t j = 0; j < 3; ++j) e[j] -= dot * b[j];
        }
        const double norm = l2_norm(e);
        if (norm > 1e-12) {
            for (double& x : e) x /= norm;
            basis.push_back(e);
        }
    }
    Vector w{1.0, 0.0, 0.0};
    for (const Vector& b : basis) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 3; ++j) dot += w[j] * b[j];
        for (std::size_t j = 0; j < 3; ++j) w[j] -= dot * b[j];
    }
    REQUIRE(l2_norm(w) > 1e-9); // softmax errors live in the sum-zero plane
    Rng fr(11);
    const std::vector<Matrix> base = make_feedback({4, 5, 3}, 99);
    Matrix perturbed = base[0];
    const Vector u = gaussian(fr, 5, 0.0, 1.0);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) perturbed(i, j) += u[i] * w[j];
    }
    const auto d1 = dfa_update(net, {base[0]}, batch);
    const auto d2 = dfa_update(net, {perturbed}, batch);
    CHECK(max_rel_diff(d1, d2) < 1e-9);
}

TEST_CASE("pdfa_update with the mechanism disabled equals dfa_update") {
    Rng rng(12);
    const Network net = Network::init({5, 4, 3}, ActivationKind::Tanh, rng);
    auto opus = make_opus({5, 4, 3}, 0.0, 31, 32, false, false);
    std::vector<Matrix> feedback;
    for (const auto& o : opus) feedback.push_back(o.matrix());
    Rng br(13);
    const Batch batch = random_batch(br, 6, 5, 3);
    Rng top(14);
    const auto mech = pdfa_update(net, opus, huge_clip(), 0.0, batch, top);
    const auto plain = dfa_update(net, feedback, batch);
    CHECK(max_rel_diff(mech, plain) == 0.0); // the limits disable every stage bit-exactly
}

TEST_CASE("scaled projections respect the norm cap sample by sample") {
    Rng rng(15);
    const std::vector<Matrix> feedback = make_feedback({4, 6, 3}, 55);
    Rng er(16);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector e = gaussian(er, 3, 0.0, 2.0);
        const Vector projected = matmul(feedback[0], e);
        const Vector capped = scale(projected, 1.0);
        CHECK(l2_norm(capped) <= 1.0 + 1e-12);
    }
}

TEST_CASE("pdfa noise is zero-mean: the expected update is the sigma=0 update") {
    Rng rng(17);
    const Network net = Network::init({4, 3, 2}, ActivationKind::Tanh, rng);
    ClipConfig clip;
    clip.tau_h_min = 0.05;
    clip.tau_h_max = 1.0;
    clip.tau_b = 1.0;
    Rng br(18);
    const Batch batch = random_batch(br, 4, 4, 2);

    auto opus_ref = make_opus({4, 3, 2}, 0.0, 41, 42, false, false);
    Rng top_ref(43);
    const auto reference = pdfa_update(net, opus_ref, clip, 0.0, batch, top_ref);

    const double sigma = 0.3;
    const std::size_t draws = 4000;
    std::vector<Matrix> sum, sum_sq;
    for (const Matrix& r : reference) {
        sum.emplace_back(r.rows(), r.cols());
        sum_sq.emplace_back(r.rows(), r.cols());
    }
    auto opus = make_opus({4, 3, 2}, sigma, 41, 42, false, false);
    Rng top(43);
    for (std::size_t d = 0; d < draws; ++d) {
        const auto u = pdfa_update(net, opus, clip, sigma, batch, top);
        for (std::size_t l = 0; l < u.size(); ++l) {
            for (std::size_t i = 0; i < u[l].size(); ++i) {
                sum[l].data()[i] += u[l].data()[i];
                sum_sq[l].data()[i] += u[l].data()[i] * u[l].data()[i];
            }
        }
    }
    for (std::size_t l = 0; l < reference.size(); ++l) {
        for (std::size_t i = 0; i < reference[l].size(); ++i) {
            const double mean = sum[l].data()[i] / static_cast<double>(draws);
            const double var = sum_sq[l].data()[i] / static_cast<double>(draws) -
                               mean * mean;
            const double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(draws));
            CHECK(std::fabs(mean - reference[l].data()[i]) <= 6.0 * se + 1e-9);
        }
    }
}

TEST_CASE("tdfa reductions") {
    Rng rng(19);
    const Network net = Network::init({5, 4, 3}, ActivationKind::Tanh, rng);
    auto opus = make_opus({5, 4, 3}, 0.0, 51, 52, false, false);
    std::vector<Matrix> feedback;
    for (const auto& o : opus) feedback.push_back(o.matrix());
    Rng br(20);
    const Batch batch = random_batch(br, 6, 5, 3);
    Rng top(21);

    // threshold above every |e|: the projected ternary error is zero, and
    // with sigma = 0 the hidden updates are exactly zero while the top layer
    // still sees the raw error
    const auto zeroed = tdfa_update(net, opus, huge_clip(), 0.0, 1.5, batch, top);
    CHECK(frobenius(zeroed[0]) == 0.0);
    CHECK(frobenius(zeroed.back()) > 0.0);

    // sigma=0, no clipping: tdfa equals dfa on the ternarized error
    const auto t = tdfa_update(net, opus, huge_clip(), 0.0, 0.15, batch, top);
    const auto ref = dfa_update(net, feedback, batch, 0.15);
    CHECK(max_rel_diff(t, ref) == 0.0);

    // t = 0 projects sign(e)
    const auto t0 = tdfa_update(net, opus, huge_clip(), 0.0, 0.0, batch, top);
    const auto ref0 = dfa_update(net, feedback, batch, 0.0);
    CHECK(max_rel_diff(t0, ref0) == 0.0);
}

TEST_CASE("two-pass ternary projection matches the single-pass one") {
    Rng rng(22);
    const Network net = Network::init({5, 4, 3}, ActivationKind::Tanh, rng);
    auto opus = make_opus({5, 4, 3}, 0.0, 61, 62, false, false);
    Rng br(23);
    const Batch batch = random_batch(br, 6, 5, 3);
    Rng top1(24), top2(24);
    const auto one_pass =
        tdfa_update(net, opus, huge_clip(), 0.0, 0.15, batch, top1, false);
    const auto two_pass =
        tdfa_update(net, opus, huge_clip(), 0.0, 0.15, batch, top2, true);
    CHECK(max_rel_diff(one_pass, two_pass) < 1e-12);
}

TEST_CASE("noisy_bp_update limits and noise placement") {
    Rng rng(25);
    const Network net = Network::init({4, 4, 4, 2}, ActivationKind::Tanh, rng);
    Rng br(26);
    const Batch batch = random_batch(br, 5, 4, 2);
    Rng top(27);
    const auto plain = noisy_bp_update(net, huge_clip(), 0.0, batch, top);
    const auto bp = bp_update(net, batch);
    CHECK(max_rel_diff(plain, bp) == 0.0);

    // the single top-layer draw makes layer deviations correlate
    ClipConfig clip;
    clip.tau_h_min = 0.05;
    clip.tau_h_max = 1.0;
    clip.tau_b = 1.0;
    Rng top_ref(28);
    const auto reference = noisy_bp_update(net, clip, 0.0, batch, top_ref);
    const std::size_t draws = 600;
    std::vector<double> s1(draws), s2(draws);
    Rng top_noise(29);
    std::vector<Matrix> mean_sum;
    for (std::size_t d = 0; d < draws; ++d) {
        const auto u = noisy_bp_update(net, clip, 0.4, batch, top_noise);
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < u[0].size(); ++i) {
            a += u[0].data()[i] - reference[0].data()[i];
        }
        for (std::size_t i = 0; i < u[1].size(); ++i) {
            b += u[1].data()[i] - reference[1].data()[i];
        }
        s1[d] = a;
        s2[d] = b;
        if (d == 0) {
            for (const auto& m : u) mean_sum.emplace_back(m.rows(), m.cols());
        }
        for (std::size_t l = 0; l < u.size(); ++l) {
            for (std::size_t i = 0; i < u[l].size(); ++i) {
                mean_sum[l].data()[i] += u[l].data()[i];
            }
        }
    }
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        m1 += s1[d];
        m2 += s2[d];
    }
    m1 /= static_cast<double>(draws);
    m2 /= static_cast<double>(draws);
    double cov = 0.0, v1 = 0.0, v2 = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        cov += (s1[d] - m1) * (s2[d] - m2);
        v1 += (s1[d] - m1) * (s1[d] - m1);
        v2 += (s2[d] - m2) * (s2[d] - m2);
    }
    const double corr = cov / std::sqrt(v1 * v2);
    CHECK(std::fabs(corr) > 0.1); // shared top noise couples the layers

    // zero-mean noise: the average update converges on the sigma=0 one
    for (std::size_t l = 0; l < reference.size(); ++l) {
        double worst = 0.0;
        for (std::size_t i = 0; i < reference[l].size(); ++i) {
            const double mean = mean_sum[l].data()[i] / static_cast<double>(draws);
            worst = std::max(worst, std::fabs(mean - reference[l].data()[i]));
        }
        CHECK(worst < 0.05); // loose Monte Carlo bound at 600 draws
    }
}

TEST_CASE("alignment diagnostics") {
    Rng rng(30);
    std::vector<Matrix> d1{Matrix(2, 2), Matrix(3, 2)};
    for (auto& m : d1) {
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    }
    std::vector<Matrix> d2 = d1;
    CHECK(alignment(d1, d2, 0) == doctest::Approx(1.0));
    CHECK(alignment(d1, d2, 1) == doctest::Approx(1.0));
    for (auto& m : d2) {
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = -m.data()[i];
    }
    CHECK(alignment(d1, d2, 0) == doctest::Approx(-1.0));
    std::vector<Matrix> zero{Matrix(2, 2), Matrix(3, 2)};
    CHECK_THROWS_AS(alignment(d1, zero, 0), std::invalid_argument);
    CHECK_THROWS_AS(alignment(d1, d2, 5), std::invalid_argument);
}

TEST_CASE("train: zero epochs leaves the network at chance level") {
    Rng dr(31);
    const LabeledDataset ds = synthetic_dataset(dr, 2000, 6, 4);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::DFA;
    cfg.epochs = 0;
    cfg.batch_size = 50;
    const NetworkSpec spec{{6, 16, 4}, ActivationKind::Tanh};
    const TrainResult result = train(cfg, spec, ds, nullptr, &ds);
    CHECK(result.metrics.total_steps == 0);
    const double acc = accuracy(result.net, ds.images, ds.labels);
    CHECK(acc > 0.05);
    CHECK(acc < 0.55); // untrained: nowhere near the trained regime
}

TEST_CASE("train is reproducible bit for bit from its seeds") {
    Rng dr(32);
    const LabeledDataset ds = synthetic_dataset(dr, 600, 6, 3);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::PDFA;
    cfg.private_mechanism = true;
    cfg.sigma = 0.1;
    cfg.clip.tau_h_min = 0.1;
    cfg.clip.tau_h_max = 1.0;
    cfg.clip.tau_b = 1.0;
    cfg.epochs = 3;
    cfg.batch_size = 60;
    const NetworkSpec spec{{6, 12, 3}, ActivationKind::Tanh};
    const TrainResult a = train(cfg, spec, ds, &ds, &ds);
    const TrainResult b = train(cfg, spec, ds, &ds, &ds);
    CHECK(a.metrics.train_loss == b.metrics.train_loss);
    CHECK(a.metrics.val_acc == b.metrics.val_acc);
    CHECK(a.metrics.test_acc == b.metrics.test_acc);
    for (std::size_t l = 0; l < a.net.depth(); ++l) {
        CHECK(a.net.layers()[l].w == b.net.layers()[l].w);
    }

    TrainConfig other = cfg;
    other.seed_noise += 1;
    const TrainResult c = train(other, spec, ds, &ds, &ds);
    CHECK_FALSE(a.metrics.train_loss == c.metrics.train_loss);
}

TEST_CASE("pdfa update norms obey the closed-form bound at sigma = 0") {
    Rng dr(33);
    const LabeledDataset ds = synthetic_dataset(dr, 400, 5, 3);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::PDFA;
    cfg.private_mechanism = true;
    cfg.sigma = 0.0;
    cfg.clip.tau_h_min = 0.1;
    cfg.clip.tau_h_max = 1.0;
    cfg.clip.tau_b = 1.0;
    cfg.epochs = 2;
    cfg.batch_size = 40;
    const NetworkSpec spec{{5, 8, 3}, ActivationKind::Tanh};
    // ||delta||_F <= gamma_max * tau_b * tau_h_max for every layer and step
    const double bound = 1.0 * cfg.clip.tau_b * cfg.clip.tau_h_max;
    std::size_t steps_seen = 0;
    const TrainResult result =
        train(cfg, spec, ds, nullptr, nullptr, [&](const StepInfo& info) {
            ++steps_seen;
            for (const Matrix& d : *info.deltas) {
                CHECK(frobenius(d) <= bound + 1e-9);
            }
        });
    CHECK(steps_seen == result.metrics.total_steps);
    CHECK(steps_seen == 20);
}

TEST_CASE("config validation rejects inconsistent setups") {
    TrainConfig cfg;
    cfg.algorithm = Algorithm::BP;
    cfg.private_mechanism = true;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.algorithm = Algorithm::NoisyBP;
    cfg.private_mechanism = false;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.private_mechanism = true;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
