#pragma once

#include "photodp/linalg.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace photodp {

/// Activation kinds with analytically known derivative bounds. The output
/// layer is Identity and pairs with the softmax cross-entropy loss.
enum class ActivationKind { Tanh, Relu, Sigmoid, Identity };

const char* to_string(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);

/// Analytic sup of |phi'| over the reals: tanh 1, sigmoid 0.25, relu 1,
/// identity 1.
double gamma_max(ActivationKind kind);

double activation_value(ActivationKind kind, double z);
/// Derivative convention: relu'(0) = 0.
double activation_derivative_value(ActivationKind kind, double z);
Vector activation_derivative(ActivationKind kind, const Vector& z);

struct Layer {
    Matrix w; // n_l x (n_{l-1} + 1); last column is the bias
    ActivationKind act = ActivationKind::Tanh;
};

/// Per-sample forward trace: pre-activations and activations of every
/// layer, kept around because both the BP and the DFA update need them.
struct ForwardTrace {
    Vector input;
    std::vector<Vector> z; // z[l], l = 0..L-1
    std::vector<Vector> h; // h[l] = phi(z[l]); h.back() is the prediction
};

/// Minibatch forward trace; row i belongs to sample i.
struct BatchTrace {
    Matrix input; // m x n_0
    std::vector<Matrix> z;
    std::vector<Matrix> h;
};

/// Fully-connected network. Bias terms live in the last weight column; the
/// forward pass appends a constant 1 to each layer input.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    /// Gaussian init, std 1/sqrt(fan-in), bias column zero. Hidden layers
    /// use `hidden`, the output layer is Identity.
    static Network init(const std::vector<std::size_t>& widths, ActivationKind hidden,
                        Rng& rng);

    std::size_t depth() const { return layers_.size(); }
    std::vector<std::size_t> widths() const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    ForwardTrace forward(const Vector& x) const;
    BatchTrace forward_batch(const Matrix& x) const;

private:
    std::vector<Layer> layers_;
};

/// Softmax cross-entropy on the output logits. Returns the loss and the
/// error e = softmax(yhat) - y; y must be exactly one-hot.
std::pair<double, Vector> loss_and_error(const Vector& yhat, const Vector& y);

/// Batched variant keyed by class index; returns the mean loss and the
/// m x k error matrix.
std::pair<double, Matrix> loss_and_error_batch(const Matrix& logits,
                                               const std::vector<int>& labels);

/// Fraction of argmax-correct predictions; errors on an empty dataset.
double accuracy(const Network& net, const Matrix& images, const std::vector<int>& labels);

// Versioned binary weight container (magic, layer count, dims, little-endian
// 64-bit floats). Metadata travels in a JSON sidecar written by the runner.
void save_weights(const Network& net, const std::filesystem::path& path);
Network load_weights(const std::filesystem::path& path);

} // namespace photodp
