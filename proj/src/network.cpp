#include "photodp/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace photodp {

namespace {

constexpr char kWeightMagic[8] = {'P', 'H', 'D', 'P', 'N', 'E', 'T', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double d) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

double read_f64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

const char* to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::Relu: return "relu";
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::Identity: return "identity";
    }
    return "?";
}

ActivationKind parse_activation(const std::string& name) {
    if (name == "tanh") return ActivationKind::Tanh;
    if (name == "relu") return ActivationKind::Relu;
    if (name == "sigmoid") return ActivationKind::Sigmoid;
    if (name == "identity") return ActivationKind::Identity;
    throw std::invalid_argument("unknown activation kind: " + name);
}

double gamma_max(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Sigmoid: return 0.25;
        case ActivationKind::Tanh:
        case ActivationKind::Relu:
        case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
}

double activation_value(ActivationKind kind, double z) {
    switch (kind) {
        case ActivationKind::Tanh: return std::tanh(z);
        case ActivationKind::Relu: return z > 0.0 ? z : 0.0;
        case ActivationKind::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case ActivationKind::Identity: return z;
    }
    return z;
}

double activation_derivative_value(ActivationKind kind, double z) {
    switch (kind) {
        case ActivationKind::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case ActivationKind::Relu: return z > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
}

Vector activation_derivative(ActivationKind kind, const Vector& z) {
    Vector d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = activation_derivative_value(kind, z[i]);
    return d;
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        if (layers_[l].w.cols() != layers_[l - 1].w.rows() + 1) {
            throw std::invalid_argument("Network: layer shapes do not chain");
        }
    }
}

Network Network::init(const std::vector<std::size_t>& widths, ActivationKind hidden,
                      Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Network::init: need at least 2 widths");
    std::vector<Layer> layers;
    layers.reserve(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t n_out = widths[l + 1];
        if (fan_in == 0 || n_out == 0) {
            throw std::invalid_argument("Network::init: zero layer width");
        }
        Layer layer;
        layer.w = Matrix(n_out, fan_in + 1);
        layer.act = (l + 2 < widths.size()) ? hidden : ActivationKind::Identity;
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n_out; ++i) {
            for (std::size_t j = 0; j < fan_in; ++j) {
                layer.w(i, j) = std_dev * rng.normal();
            }
            layer.w(i, fan_in) = 0.0; // bias
        }
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

std::vector<std::size_t> Network::widths() const {
    std::vector<std::size_t> w;
    if (layers_.empty()) return w;
    w.push_back(layers_.front().w.cols() - 1);
    for (const Layer& l : layers_) w.push_back(l.w.rows());
    return w;
}

ForwardTrace Network::forward(const Vector& x) const {
    if (layers_.empty()) throw std::logic_error("forward: empty network");
    if (x.size() + 1 != layers_.front().w.cols()) {
        throw std::invalid_argument("forward: input dimension mismatch");
    }
    ForwardTrace trace;
    trace.input = x;
    trace.z.reserve(layers_.size());
    trace.h.reserve(layers_.size());
    Vector cur = x;
    for (const Layer& layer : layers_) {
        Vector aug = cur;
        aug.push_back(1.0);
        Vector z = matmul(layer.w, aug);
        Vector h(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) h[i] = activation_value(layer.act, z[i]);
        check_finite(h, "forward");
        trace.z.push_back(std::move(z));
        cur = h;
        trace.h.push_back(std::move(h));
    }
    return trace;
}

BatchTrace Network::forward_batch(const Matrix& x) const {
    if (layers_.empty()) throw std::logic_error("forward_batch: empty network");
    if (x.cols() + 1 != layers_.front().w.cols()) {
        throw std::invalid_argument("forward_batch: input dimension mismatch");
    }
    BatchTrace trace;
    trace.input = x;
    const std::size_t m = x.rows();
    const Matrix* cur = &trace.input;
    for (const Layer& layer : layers_) {
        Matrix aug(m, cur->cols() + 1);
        for (std::size_t i = 0; i < m; ++i) {
            std::memcpy(aug.data() + i * aug.cols(), cur->data() + i * cur->cols(),
                        cur->cols() * sizeof(double));
            aug(i, cur->cols()) = 1.0;
        }
        Matrix z = gemm_nt(aug, layer.w);
        Matrix h(z.rows(), z.cols());
        const double* zp = z.data();
        double* hp = h.data();
        const auto n = static_cast<std::ptrdiff_t>(z.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) hp[i] = activation_value(layer.act, zp[i]);
        trace.z.push_back(std::move(z));
        trace.h.push_back(std::move(h));
        cur = &trace.h.back();
    }
    return trace;
}

std::pair<double, Vector> loss_and_error(const Vector& yhat, const Vector& y) {
    if (yhat.size() != y.size()) throw std::invalid_argument("loss_and_error: length mismatch");
    std::size_t ones = 0, hot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1.0) {
            ++ones;
            hot = i;
        } else if (y[i] != 0.0) {
            throw std::invalid_argument("loss_and_error: target is not one-hot");
        }
    }
    if (ones != 1) throw std::invalid_argument("loss_and_error: target is not one-hot");

    double zmax = yhat[0];
    for (double v : yhat) zmax = std::max(zmax, v);
    double denom = 0.0;
    for (double v : yhat) denom += std::exp(v - zmax);
    Vector e(yhat.size());
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        e[i] = std::exp(yhat[i] - zmax) / denom - y[i];
    }
    const double loss = -(yhat[hot] - zmax - std::log(denom));
    return {loss, std::move(e)};
}

std::pair<double, Matrix> loss_and_error_batch(const Matrix& logits,
                                               const std::vector<int>& labels) {
    if (logits.rows() != labels.size()) {
        throw std::invalid_argument("loss_and_error_batch: size mismatch");
    }
    const std::size_t m = logits.rows(), k = logits.cols();
    Matrix e(m, k);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* z = logits.data() + i * k;
        double* ei = e.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw std::invalid_argument("loss_and_error_batch: label out of range");
        }
        for (std::size_t j = 0; j < k; ++j) ei[j] = std::exp(z[j] - zmax) / denom;
        ei[label] -= 1.0;
        loss -= z[label] - zmax - std::log(denom);
    }
    return {loss / static_cast<double>(m), std::move(e)};
}

double accuracy(const Network& net, const Matrix& images, const std::vector<int>& labels) {
    if (images.rows() == 0) throw std::invalid_argument("accuracy: empty dataset");
    if (images.rows() != labels.size()) throw std::invalid_argument("accuracy: size mismatch");
    const std::size_t chunk = 512;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < images.rows(); begin += chunk) {
        const std::size_t end = std::min(images.rows(), begin + chunk);
        Matrix block(end - begin, images.cols());
        std::memcpy(block.data(), images.data() + begin * images.cols(),
                    block.size() * sizeof(double));
        const BatchTrace trace = net.forward_batch(block);
        const Matrix& out = trace.h.back();
        for (std::size_t i = 0; i < out.rows(); ++i) {
            const double* row = out.data() + i * out.cols();
            std::size_t arg = 0;
            for (std::size_t j = 1; j < out.cols(); ++j) {
                if (row[j] > row[arg]) arg = j;
            }
            if (static_cast<int>(arg) == labels[begin + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(images.rows());
}

void save_weights(const Network& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_weights: cannot open " + path.string());
    os.write(kWeightMagic, sizeof(kWeightMagic));
    write_u32(os, static_cast<std::uint32_t>(net.depth()));
    for (const Layer& layer : net.layers()) {
        write_u32(os, static_cast<std::uint32_t>(layer.w.rows()));
        write_u32(os, static_cast<std::uint32_t>(layer.w.cols()));
        write_u32(os, static_cast<std::uint32_t>(layer.act));
        for (double v : std::span(layer.w.data(), layer.w.size())) write_f64(os, v);
    }
    if (!os) throw std::runtime_error("save_weights: write failed for " + path.string());
}

Network load_weights(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_weights: cannot open " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_weights: bad magic in " + path.string());
    }
    const std::uint32_t depth = read_u32(is);
    std::vector<Layer> layers;
    layers.reserve(depth);
    for (std::uint32_t l = 0; l < depth; ++l) {
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        const std::uint32_t act = read_u32(is);
        if (!is || act > static_cast<std::uint32_t>(ActivationKind::Identity)) {
            throw std::runtime_error("load_weights: corrupt header in " + path.string());
        }
        Layer layer;
        layer.w = Matrix(rows, cols);
        layer.act = static_cast<ActivationKind>(act);
        for (double& v : std::span(layer.w.data(), layer.w.size())) v = read_f64(is);
        layers.push_back(std::move(layer));
    }
    if (!is) throw std::runtime_error("load_weights: truncated file " + path.string());
    return Network(std::move(layers));
}

} // namespace photodp
